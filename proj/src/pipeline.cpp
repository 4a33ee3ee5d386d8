#include "hetmm/pipeline.hpp"

#include "hetmm/selection.hpp"
#include "hetmm/tensor_store.hpp"

#include <chrono>
#include <iomanip>
#include <set>
#include <sstream>

namespace hetmm {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration

void MatchConfig::validate() const {
  if (layer_ids.empty()) throw ConfigError("match config selects no layers");
  if (patches.size() != layer_ids.size())
    throw ConfigError("match config needs one patch size per layer (" +
                      std::to_string(layer_ids.size()) + " layers, " +
                      std::to_string(patches.size()) + " patches)");
  if (std::set<int>(layer_ids.begin(), layer_ids.end()).size() != layer_ids.size())
    throw ConfigError("match config lists a layer twice");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  if (output_resolution && (output_resolution->first < 1 || output_resolution->second < 1))
    throw ConfigError("output resolution must be positive");
}

void MatchConfig::validate_against(const TemplateBank& bank) const {
  validate();
  for (int id : layer_ids) {
    if (!bank.has_layer(id))
      throw ConfigError("layer " + std::to_string(id) + " is not present in the bank");
  }
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"mvtec_ad", "mtd", "mstc", "mvtec_loco",
                                                 "custom"};
  return names;
}

MatchConfig preset_match_config(const std::string& preset) {
  auto make = [](std::vector<int> layers, std::vector<int> sizes, double alpha) {
    MatchConfig m;
    m.layer_ids = std::move(layers);
    for (int s : sizes) m.patches.push_back(PatchSpec::square(s));
    m.alpha = alpha;
    return m;
  };
  if (preset == "mvtec_ad") return make({1, 2, 3}, {9, 7, 5}, 0.8);
  if (preset == "mtd") return make({1, 2}, {3, 3}, 0.8);
  if (preset == "mstc") return make({2, 3}, {9, 5}, 0.8);
  if (preset == "mvtec_loco") return make({2, 3, 4}, {11, 9, 7}, 0.6);
  if (preset == "custom") return MatchConfig{};
  throw ConfigError("unknown preset '" + preset + "'");
}

namespace {

PatchSpec parse_patch(const json& j) {
  if (j.is_number_integer()) return PatchSpec::square(j.get<int>());
  if (j.is_array() && j.size() == 2) return PatchSpec(j[0].get<int>(), j[1].get<int>());
  throw ConfigError("patch size must be an integer or an [m, n] pair");
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  try {
    RunConfig cfg;
    cfg.preset = j.value("preset", std::string("mvtec_ad"));
    cfg.match = preset_match_config(cfg.preset);
    if (j.contains("layers")) cfg.match.layer_ids = j.at("layers").get<std::vector<int>>();
    if (j.contains("patches")) {
      cfg.match.patches.clear();
      for (const auto& p : j.at("patches")) cfg.match.patches.push_back(parse_patch(p));
    }
    if (j.contains("alpha")) cfg.match.alpha = j.at("alpha").get<double>();
    if (j.contains("output_resolution") && !j.at("output_resolution").is_null()) {
      const auto r = j.at("output_resolution").get<std::vector<Index>>();
      if (r.size() != 2) throw ConfigError("output_resolution must be [height, width]");
      cfg.match.output_resolution = std::make_pair(r[0], r[1]);
    }
    if (j.contains("post")) {
      const auto& p = j.at("post");
      cfg.post.sigma = p.value("sigma", cfg.post.sigma);
      cfg.post.truncation = p.value("truncation", cfg.post.truncation);
    }
    if (j.contains("pts") && !j.at("pts").is_null()) {
      const auto& p = j.at("pts");
      PtsConfig pts;
      pts.k = p.value("K", pts.k);
      pts.min_samples = p.value("min_samples", pts.min_samples);
      pts.xi = p.value("xi", pts.xi);
      cfg.pts = pts;
    }
    cfg.threads = j.value("threads", 0);
    cfg.match.validate();
    cfg.post.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& cfg) {
  json patches = json::array();
  for (const auto& p : cfg.match.patches) patches.push_back({p.m, p.n});
  json out = {{"preset", cfg.preset},
              {"layers", cfg.match.layer_ids},
              {"patches", patches},
              {"alpha", cfg.match.alpha},
              {"output_resolution", nullptr},
              {"post", {{"sigma", cfg.post.sigma}, {"truncation", cfg.post.truncation}}},
              {"pts", nullptr},
              {"threads", cfg.threads}};
  if (cfg.match.output_resolution)
    out["output_resolution"] = {cfg.match.output_resolution->first,
                                cfg.match.output_resolution->second};
  if (cfg.pts)
    out["pts"] = {{"K", cfg.pts->k}, {"min_samples", cfg.pts->min_samples}, {"xi", cfg.pts->xi}};
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

std::vector<ManifestEntry> load_feature_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  const fs::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  try {
    for (const auto& img : j.at("images")) {
      ManifestEntry e;
      e.id = img.at("id").get<std::string>();
      e.height = img.value("height", Index{0});
      e.width = img.value("width", Index{0});
      for (const auto& l : img.at("layers")) {
        const fs::path p = base / l.at("path").get<std::string>();
        if (!fs::exists(p))
          throw DataError("manifest " + path.string() + " references missing file " + p.string());
        e.layers[l.at("layer_id").get<int>()] = p;
      }
      if (img.contains("mask") && !img.at("mask").is_null()) {
        const fs::path p = base / img.at("mask").get<std::string>();
        if (!fs::exists(p))
          throw DataError("manifest " + path.string() + " references missing file " + p.string());
        e.mask = p;
      }
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + path.string() + ": " + e.what());
  }
  std::set<std::string> ids;
  for (const auto& e : entries)
    if (!ids.insert(e.id).second) throw DataError("manifest lists image '" + e.id + "' twice");
  return entries;
}

ImageLayers load_image_layers(const ManifestEntry& entry) {
  ImageLayers layers;
  for (const auto& [id, p] : entry.layers) layers.emplace(id, read_tensor(p, id));
  return layers;
}

namespace {

std::vector<std::string> ids_of(const std::vector<ManifestEntry>& entries) {
  std::vector<std::string> ids;
  for (const auto& e : entries) ids.push_back(e.id);
  return ids;
}

std::vector<ImageLayers> load_all(const std::vector<ManifestEntry>& entries) {
  std::vector<ImageLayers> images;
  images.reserve(entries.size());
  for (const auto& e : entries) images.push_back(load_image_layers(e));
  return images;
}

}  // namespace

// ---------------------------------------------------------------------------
// Run log

RunLog::RunLog(const fs::path& path) : out_(path, std::ios::app) {
  if (!out_) throw DataError("cannot open run log " + path.string());
}

void RunLog::write(json event) {
  if (!out_.is_open()) return;
  out_ << event.dump() << '\n';
  out_.flush();
}

// ---------------------------------------------------------------------------
// Scoring

Scorer::Scorer(const TemplateBank& bank, MatchConfig match, PostConfig post)
    : match_(std::move(match)), post_(post) {
  match_.validate_against(bank);
  post_.validate();
  for (int id : match_.layer_ids) {
    const auto& sheets = bank.layer(id).sheets;
    prepared_.emplace(id, PreparedLayer<float>(std::span<const FeatureMap>(sheets)));
  }
}

ScoreResult Scorer::score(const ImageLayers& query, Index image_height, Index image_width) const {
  Index out_h = image_height, out_w = image_width;
  if (match_.output_resolution) std::tie(out_h, out_w) = *match_.output_resolution;
  if (out_h < 1 || out_w < 1) throw DataError("query has no output resolution");

  ScoreResult result;
  std::vector<AnomalyMap> layer_maps;
  for (std::size_t i = 0; i < match_.layer_ids.size(); ++i) {
    const int id = match_.layer_ids[i];
    auto it = query.find(id);
    if (it == query.end())
      throw ShapeMismatchError("query is missing layer " + std::to_string(id));
    const PreparedLayer<float>& bank_layer = prepared_.at(id);
    if (it->second.shape() != bank_layer.shape())
      throw ShapeMismatchError("query layer " + std::to_string(id) + " has shape " +
                               to_string(it->second.shape()) + ", bank has " +
                               to_string(bank_layer.shape()));

    const auto start = std::chrono::steady_clock::now();
    const NormalizedField<float> q = normalize_field(it->second);
    layer_maps.push_back(hetmm_score(q, bank_layer, match_.patches[i], match_.alpha));
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    result.layers.push_back({id, q.zero_count, bank_layer.zero_count(), took.count()});
  }
  result.raw = aggregate_layers<float>(layer_maps, out_h, out_w);
  result.image_score = image_score(result.raw, post_);
  result.localization = normalize01(result.raw);
  return result;
}

// ---------------------------------------------------------------------------
// Subcommands

TemplateBank run_build(const fs::path& manifest, const fs::path& out) {
  const auto entries = load_feature_manifest(manifest);
  if (entries.empty()) throw DataError("manifest " + manifest.string() + " lists no images");
  TemplateBank bank = build_bank(load_all(entries), ids_of(entries));
  save_bank(bank, out);
  return bank;
}

TemplateBank run_compress(const fs::path& bank_dir, const PtsConfig& cfg, const fs::path& out) {
  const TemplateBank bank = load_bank(bank_dir);
  TemplateBank compressed = pts_compress(bank, cfg);
  save_bank(compressed, out);
  return compressed;
}

std::vector<ScoredImage> run_score(const fs::path& bank_dir, const RunConfig& cfg,
                                   const fs::path& queries, const fs::path& out) {
  const auto entries = load_feature_manifest(queries);
  if (entries.empty()) throw DataError("query manifest " + queries.string() + " lists no images");
  const TemplateBank bank = load_bank(bank_dir);
  const Scorer scorer(bank, cfg.match, cfg.post);

  fs::create_directories(out);
  {
    std::ofstream resolved(out / "config.resolved.json", std::ios::trunc);
    resolved << to_json(cfg).dump(2) << '\n';
  }
  RunLog log(out / "run_log.jsonl");
  log.write({{"event", "config"}, {"config", to_json(cfg)}, {"bank", bank_dir.string()},
             {"bank_state", bank.state()}, {"sheets", bank.sheet_count()}});

  std::vector<ScoredImage> scored;
  for (const auto& entry : entries) {
    if (entry.height < 1 || entry.width < 1)
      throw DataError("query '" + entry.id + "' lacks its source image height/width");
    const ScoreResult r = scorer.score(load_image_layers(entry), entry.height, entry.width);
    write_map(out / (entry.id + ".ftn"), r.localization);
    write_map(out / (entry.id + ".raw.ftn"), r.raw);
    for (const auto& d : r.layers) {
      log.write({{"event", "layer"}, {"image", entry.id}, {"layer_id", d.layer_id},
                 {"zero_query_vectors", d.zero_query_vectors},
                 {"zero_template_vectors", d.zero_template_vectors}, {"seconds", d.seconds}});
    }
    scored.push_back({entry.id, r.image_score});
  }

  std::ofstream csv(out / "scores.csv", std::ios::trunc);
  csv << "image_id,score\n" << std::setprecision(9);
  for (const auto& s : scored) csv << s.id << ',' << s.score << '\n';
  if (!csv) throw DataError("cannot write " + (out / "scores.csv").string());
  return scored;
}

TemplateBank run_update(const fs::path& bank_dir, const fs::path& manifest) {
  const auto entries = load_feature_manifest(manifest);
  if (entries.empty()) throw DataError("manifest " + manifest.string() + " lists no images");
  return append_to_bank(bank_dir, load_all(entries), ids_of(entries));
}

namespace {

std::vector<ScoredImage> read_scores_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ScoredImage> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw DataError("malformed line in " + path.string());
    try {
      rows.push_back({line.substr(0, comma), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw DataError("malformed score in " + path.string() + ": " + line);
    }
  }
  return rows;
}

json curve_json(const std::vector<CurvePoint>& pts) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace

json run_evaluate(const fs::path& scores_dir, const fs::path& truth_dir,
                  const std::optional<fs::path>& curves_dir, int steps) {
  const auto rows = read_scores_csv(scores_dir / "scores.csv");
  if (rows.empty()) throw DataError("no scored images in " + scores_dir.string());

  EvalRecord rec;
  for (const auto& row : rows) {
    const fs::path raw = scores_dir / (row.id + ".raw.ftn");
    const fs::path map = fs::exists(raw) ? raw : scores_dir / (row.id + ".ftn");
    const fs::path truth = truth_dir / (row.id + ".ftn");
    if (!fs::exists(truth)) throw DataError("missing ground-truth mask " + truth.string());
    PixelRecord pr{read_map(map), to_mask(read_map(truth))};
    if (pr.scores.rows() != pr.truth.rows() || pr.scores.cols() != pr.truth.cols())
      throw ShapeMismatchError("map " + map.string() + " and mask " + truth.string() +
                               " differ in shape");
    rec.image_scores.push_back(row.score);
    rec.image_labels.push_back((pr.truth.array() != 0).any() ? 1 : 0);
    rec.pixels.push_back(std::move(pr));
  }

  json out;
  out["images"] = rec.image_scores.size();
  try {
    out["auroc_image"] = auroc(rec.image_scores, rec.image_labels);
  } catch (const DataError&) {
    out["auroc_image"] = nullptr;  // single-class split
  }
  try {
    out["auroc_pixel"] = pixel_auroc(rec.pixels);
    const ProCurve curve = pro(rec.pixels, kDefaultFprCap, steps);
    out["pro"] = curve.integral;
    out["pro_degenerate"] = curve.degenerate;
    out["pro_fpr_cap"] = curve.cap;
    json curves;
    for (CurveKind kind : {CurveKind::kRoc, CurveKind::kPro, CurveKind::kIou, CurveKind::kPr}) {
      const auto pts = curve_points(rec.pixels, kind, steps);
      curves[to_string(kind)] = curve_json(pts);
      if (curves_dir) {
        fs::create_directories(*curves_dir);
        std::ofstream csv(*curves_dir / (std::string(to_string(kind)) + ".csv"), std::ios::trunc);
        csv << "x,y,threshold\n" << std::setprecision(12);
        for (const auto& p : pts) csv << p.x << ',' << p.y << ',' << p.threshold << '\n';
      }
    }
    out["curves"] = curves;
  } catch (const DataError&) {
    // no anomalous pixels anywhere: pixel metrics undefined
    out["auroc_pixel"] = nullptr;
    out["pro"] = nullptr;
    out["curves"] = json::object();
  }
  return out;
}

}  // namespace hetmm
