#pragma once

#include "hetmm/evaluation.hpp"
#include "hetmm/matching.hpp"
#include "hetmm/postprocess.hpp"
#include "hetmm/template_bank.hpp"
#include "hetmm/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hetmm {

/// Layer selection, per-layer patch sizes, direction mix and output size.
struct MatchConfig {
  std::vector<int> layer_ids;
  std::vector<PatchSpec> patches;  // parallel to layer_ids
  double alpha = 0.8;
  /// Target (height, width) for aggregation; unset means the query image size.
  std::optional<std::pair<Index, Index>> output_resolution;

  void validate() const;
  void validate_against(const TemplateBank& bank) const;
};

/// Named hyper-parameter presets: mvtec_ad, mtd, mstc, mvtec_loco.
MatchConfig preset_match_config(const std::string& preset);
const std::vector<std::string>& preset_names();

struct RunConfig {
  std::string preset = "mvtec_ad";
  MatchConfig match;
  PostConfig post;
  std::optional<PtsConfig> pts;
  int threads = 0;
};

/// Expands the preset, then applies explicit fields. Unknown presets and
/// malformed fields are ConfigErrors.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// One image in a feature manifest. Paths are resolved against the
/// manifest's directory.
struct ManifestEntry {
  std::string id;
  Index height = 0;  // source image resolution
  Index width = 0;
  std::map<int, std::filesystem::path> layers;
  std::optional<std::filesystem::path> mask;
};

std::vector<ManifestEntry> load_feature_manifest(const std::filesystem::path& path);
ImageLayers load_image_layers(const ManifestEntry& entry);

/// Append-only JSON-lines diagnostics log.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path);
  void write(nlohmann::json event);

 private:
  std::ofstream out_;
};

struct LayerDiagnostics {
  int layer_id = 0;
  Index zero_query_vectors = 0;
  Index zero_template_vectors = 0;
  double seconds = 0.0;
};

struct ScoreResult {
  AnomalyMap raw;           // sum of rescaled layer maps
  AnomalyMap localization;  // raw normalised to [0, 1]
  double image_score = 0.0;
  std::vector<LayerDiagnostics> layers;
};

/// A bank prepared for repeated scoring under one configuration.
class Scorer {
 public:
  Scorer(const TemplateBank& bank, MatchConfig match, PostConfig post);

  ScoreResult score(const ImageLayers& query, Index image_height, Index image_width) const;
  const MatchConfig& match() const { return match_; }

 private:
  MatchConfig match_;
  PostConfig post_;
  std::map<int, PreparedLayer<float>> prepared_;
};

TemplateBank run_build(const std::filesystem::path& manifest, const std::filesystem::path& out);

TemplateBank run_compress(const std::filesystem::path& bank_dir, const PtsConfig& cfg,
                          const std::filesystem::path& out);

struct ScoredImage {
  std::string id;
  double score = 0.0;
};

/// Scores every query, writing <id>.ftn (normalised map), <id>.raw.ftn,
/// scores.csv, config.resolved.json and run_log.jsonl into `out`.
std::vector<ScoredImage> run_score(const std::filesystem::path& bank_dir, const RunConfig& cfg,
                                   const std::filesystem::path& queries,
                                   const std::filesystem::path& out);

TemplateBank run_update(const std::filesystem::path& bank_dir,
                        const std::filesystem::path& manifest);

/// Reads a score directory and a truth directory of <id>.ftn masks and
/// returns {auroc_image, auroc_pixel, pro, curves}. Writes <kind>.csv curve
/// dumps into `curves_dir` when given.
nlohmann::json run_evaluate(const std::filesystem::path& scores_dir,
                            const std::filesystem::path& truth_dir,
                            const std::optional<std::filesystem::path>& curves_dir = std::nullopt,
                            int steps = kDefaultThresholdSteps);

}  // namespace hetmm
