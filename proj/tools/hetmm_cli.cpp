// Command-line driver: build, compress, score, evaluate and update template banks.

#include "hetmm/parallel.hpp"
#include "hetmm/pipeline.hpp"
#include "hetmm/tensor_store.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

}  // namespace

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  CLI::App app{"Template-matching anomaly detection engine"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

  std::string manifest, out, bank, config, queries, scores, truth, add, curves;
  hetmm::PtsConfig pts;
  int steps = hetmm::kDefaultThresholdSteps;

  auto* build = app.add_subcommand("build", "Stack nominal feature tensors into a template bank");
  build->add_option("--manifest", manifest, "Feature manifest (JSON)")->required();
  build->add_option("--out", out, "Output bank directory")->required();

  auto* compress = app.add_subcommand("compress", "Select K prototypes per pixel");
  compress->alias("pts");
  compress->add_option("--bank", bank, "Input bank directory")->required();
  compress->add_option("--k", pts.k, "Sheets to keep")->required();
  compress->add_option("--min-samples", pts.min_samples, "Density parameter")->capture_default_str();
  compress->add_option("--xi", pts.xi, "Steepness threshold")->capture_default_str();
  compress->add_option("--out", out, "Output bank directory")->required();

  auto* score = app.add_subcommand("score", "Score query feature tensors against a bank");
  score->add_option("--bank", bank, "Bank directory")->required();
  score->add_option("--config", config, "Run config (JSON)")->required();
  score->add_option("--queries", queries, "Query manifest (JSON)")->required();
  score->add_option("--out", out, "Output directory")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compute AUROC / PRO metrics");
  evaluate->add_option("--scores", scores, "Directory written by score")->required();
  evaluate->add_option("--truth", truth, "Directory of <id>.ftn ground-truth masks")->required();
  evaluate->add_option("--out", out, "Metrics JSON output")->required();
  evaluate->add_option("--curves", curves, "Directory for CSV curve dumps");
  evaluate->add_option("--steps", steps, "Threshold quantiles")->capture_default_str();

  auto* update = app.add_subcommand("update", "Append nominal sheets to a bank in place");
  update->add_option("--bank", bank, "Bank directory")->required();
  update->add_option("--add", add, "Feature manifest of sheets to insert")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    hetmm::set_thread_count(threads);
    if (*build) {
      const auto b = hetmm::run_build(manifest, out);
      std::cout << "built bank " << out << ": " << b.sheet_count() << " sheets, "
                << b.layers().size() << " layers\n";
    } else if (*compress) {
      const auto b = hetmm::run_compress(bank, pts, out);
      std::cout << "compressed bank " << out << ": " << b.sheet_count() << " sheets\n";
    } else if (*score) {
      hetmm::RunConfig cfg = hetmm::load_run_config(config);
      if (threads == 0 && cfg.threads > 0) hetmm::set_thread_count(cfg.threads);
      std::cerr << "resolved config: " << hetmm::to_json(cfg).dump() << '\n';
      const auto scored = hetmm::run_score(bank, cfg, queries, out);
      std::cout << "scored " << scored.size() << " queries into " << out << '\n';
    } else if (*evaluate) {
      std::optional<fs::path> curve_dir;
      if (!curves.empty()) curve_dir = curves;
      const auto metrics = hetmm::run_evaluate(scores, truth, curve_dir, steps);
      std::ofstream f(out, std::ios::trunc);
      if (!f) throw hetmm::DataError("cannot write " + out);
      f << metrics.dump(2) << '\n';
      std::cout << "auroc_image=" << metrics["auroc_image"] << " auroc_pixel="
                << metrics["auroc_pixel"] << " pro=" << metrics["pro"] << '\n';
    } else if (*update) {
      const auto b = hetmm::run_update(bank, add);
      std::cout << "bank " << bank << " now has " << b.sheet_count() << " sheets (" << b.state()
                << ")\n";
    }
  } catch (const hetmm::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const hetmm::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
