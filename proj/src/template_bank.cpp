#include "hetmm/template_bank.hpp"

#include "hetmm/tensor_store.hpp"

#include <nlohmann/json.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hetmm {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> TemplateBank::layer_ids() const {
  std::vector<int> ids;
  for (const auto& [id, _] : layers_) ids.push_back(id);
  return ids;
}

const BankLayer& TemplateBank::layer(int layer_id) const {
  auto it = layers_.find(layer_id);
  if (it == layers_.end())
    throw ShapeMismatchError("bank has no layer " + std::to_string(layer_id));
  return it->second;
}

std::string TemplateBank::state() const {
  std::string s = compressed() ? "compressed" : "original";
  if (appended_ > 0) s += "+appended";
  return s;
}

TemplateBank TemplateBank::assemble(std::map<int, BankLayer> layers,
                                    std::vector<std::string> sheet_ids,
                                    std::vector<std::string> sources,
                                    std::optional<PtsConfig> pts, Index appended) {
  if (layers.empty()) throw DataError("template bank needs at least one layer");
  for (const auto& [id, layer] : layers) {
    if (layer.sheets.empty())
      throw DataError("template bank layer " + std::to_string(id) + " has no sheets");
    if (static_cast<Index>(layer.sheets.size()) != static_cast<Index>(sheet_ids.size()))
      throw ShapeMismatchError("layer " + std::to_string(id) + " has " +
                               std::to_string(layer.sheets.size()) + " sheets, expected " +
                               std::to_string(sheet_ids.size()));
    for (const auto& sheet : layer.sheets) {
      if (sheet.shape() != layer.shape)
        throw ShapeMismatchError("layer " + std::to_string(id) + ": sheet shape " +
                                 to_string(sheet.shape()) + " differs from " +
                                 to_string(layer.shape));
    }
  }
  TemplateBank bank;
  bank.layers_ = std::move(layers);
  bank.sheet_ids_ = std::move(sheet_ids);
  bank.sources_ = std::move(sources);
  bank.pts_ = std::move(pts);
  bank.appended_ = appended;
  return bank;
}

namespace {

void check_image_layers(const ImageLayers& image, const std::map<int, Shape>& expected,
                        const std::string& id) {
  for (const auto& [layer_id, shape] : expected) {
    auto it = image.find(layer_id);
    if (it == image.end())
      throw ShapeMismatchError("image '" + id + "' is missing layer " + std::to_string(layer_id));
    if (it->second.shape() != shape)
      throw ShapeMismatchError("image '" + id + "' layer " + std::to_string(layer_id) +
                               " has shape " + to_string(it->second.shape()) + ", expected " +
                               to_string(shape));
  }
}

}  // namespace

TemplateBank build_bank(const std::vector<ImageLayers>& images,
                        const std::vector<std::string>& ids) {
  if (images.empty()) throw DataError("build_bank: no images");
  if (ids.size() != images.size()) throw DataError("build_bank: one id per image required");

  std::map<int, Shape> shapes;
  for (const auto& [layer_id, fm] : images.front()) shapes[layer_id] = fm.shape();
  if (shapes.empty()) throw DataError("build_bank: first image has no layers");

  std::map<int, BankLayer> layers;
  for (const auto& [layer_id, shape] : shapes) layers[layer_id] = BankLayer{layer_id, shape, {}};

  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != shapes.size())
      throw ShapeMismatchError("image '" + ids[i] + "' has a different layer set");
    check_image_layers(images[i], shapes, ids[i]);
    for (const auto& [layer_id, fm] : images[i])
      layers[layer_id].sheets.push_back(FeatureMap(layer_id, fm.height(), fm.width(), fm.data()));
  }
  return TemplateBank::assemble(std::move(layers), ids, ids, std::nullopt, 0);
}

TemplateBank TemplateBank::appended_with(const std::vector<ImageLayers>& images,
                                         const std::vector<std::string>& ids) const {
  if (ids.size() != images.size()) throw DataError("append: one id per image required");
  std::map<int, Shape> shapes;
  for (const auto& [layer_id, layer] : layers_) shapes[layer_id] = layer.shape;

  auto layers = layers_;
  auto sheet_ids = sheet_ids_;
  auto sources = sources_;
  for (std::size_t i = 0; i < images.size(); ++i) {
    check_image_layers(images[i], shapes, ids[i]);
    for (auto& [layer_id, layer] : layers) {
      const FeatureMap& fm = images[i].at(layer_id);
      layer.sheets.push_back(FeatureMap(layer_id, fm.height(), fm.width(), fm.data()));
    }
    sheet_ids.push_back(ids[i]);
    sources.push_back(ids[i]);
  }
  return assemble(std::move(layers), std::move(sheet_ids), std::move(sources), pts_,
                  appended_ + static_cast<Index>(images.size()));
}

// ---------------------------------------------------------------------------
// Disk format

fs::path sheet_path(const fs::path& dir, int layer_id, Index sheet) {
  std::ostringstream name;
  name << "sheet_" << std::setw(6) << std::setfill('0') << sheet << ".ftn";
  return dir / ("layer_" + std::to_string(layer_id)) / name.str();
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json manifest_json(const TemplateBank& bank) {
  json layers = json::array();
  for (const auto& [id, layer] : bank.layers()) {
    layers.push_back({{"layer_id", id},
                      {"H", layer.shape.height},
                      {"W", layer.shape.width},
                      {"C", layer.shape.channels}});
  }
  json pts = nullptr;
  if (bank.pts())
    pts = {{"K", bank.pts()->k}, {"min_samples", bank.pts()->min_samples}, {"xi", bank.pts()->xi}};
  return {{"version", kBankFormatVersion},
          {"layers", layers},
          {"sheets", bank.sheet_count()},
          {"compressed", bank.compressed()},
          {"pts", pts},
          {"sources", bank.sources()},
          {"sheet_ids", bank.sheet_ids()},
          {"state", bank.state()},
          {"appended", bank.appended()},
          {"created", utc_timestamp()}};
}

void write_manifest(const TemplateBank& bank, const fs::path& dir) {
  const fs::path tmp = dir / (std::string(kBankManifestName) + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << manifest_json(bank).dump(2) << '\n';
    if (!out) throw DataError("cannot write " + tmp.string());
  }
  fs::rename(tmp, dir / kBankManifestName);
}

void write_sheets(const TemplateBank& bank, const fs::path& dir, Index first_sheet) {
  for (const auto& [id, layer] : bank.layers()) {
    fs::create_directories(dir / ("layer_" + std::to_string(id)));
    for (Index k = first_sheet; k < static_cast<Index>(layer.sheets.size()); ++k)
      write_tensor(sheet_path(dir, id, k), layer.sheets[static_cast<std::size_t>(k)]);
  }
}

}  // namespace

void save_bank(const TemplateBank& bank, const fs::path& dir) {
  fs::create_directories(dir);
  write_sheets(bank, dir, 0);
  write_manifest(bank, dir);
}

TemplateBank load_bank(const fs::path& dir) {
  const fs::path manifest_path = dir / kBankManifestName;
  std::ifstream in(manifest_path);
  if (!in) throw DataError("missing bank manifest " + manifest_path.string());
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw DataError("malformed bank manifest " + manifest_path.string() + ": " + e.what());
  }

  try {
    if (m.at("version").get<int>() != kBankFormatVersion)
      throw DataError("unsupported bank manifest version in " + manifest_path.string());
    const Index sheets = m.at("sheets").get<Index>();
    if (sheets < 1) throw DataError("bank manifest declares no sheets");

    std::map<int, BankLayer> layers;
    for (const auto& entry : m.at("layers")) {
      BankLayer layer;
      layer.layer_id = entry.at("layer_id").get<int>();
      layer.shape = {entry.at("H").get<Index>(), entry.at("W").get<Index>(),
                     entry.at("C").get<Index>()};
      for (Index k = 0; k < sheets; ++k) {
        const fs::path p = sheet_path(dir, layer.layer_id, k);
        FeatureMap fm = read_tensor(p, layer.layer_id);
        if (fm.shape() != layer.shape)
          throw ShapeMismatchError("manifest shape " + to_string(layer.shape) +
                                   " does not match " + p.string() + " (" +
                                   to_string(fm.shape()) + ")");
        layer.sheets.push_back(std::move(fm));
      }
      layers[layer.layer_id] = std::move(layer);
    }

    std::optional<PtsConfig> pts;
    if (m.at("compressed").get<bool>()) {
      const auto& p = m.at("pts");
      pts = PtsConfig{p.at("K").get<int>(), p.at("min_samples").get<int>(),
                      p.at("xi").get<double>()};
    }
    auto sources = m.at("sources").get<std::vector<std::string>>();
    auto sheet_ids = m.contains("sheet_ids") ? m.at("sheet_ids").get<std::vector<std::string>>()
                                             : sources;
    const Index appended = m.value("appended", Index{0});
    return TemplateBank::assemble(std::move(layers), std::move(sheet_ids), std::move(sources),
                                  pts, appended);
  } catch (const json::exception& e) {
    throw DataError("malformed bank manifest " + manifest_path.string() + ": " + e.what());
  }
}

BankLock::BankLock(const fs::path& dir) : path_(dir / kBankLockName) {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw LockConflictError("bank is locked by another writer: " + path_.string());
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

BankLock::~BankLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

TemplateBank append_to_bank(const fs::path& dir, const std::vector<ImageLayers>& images,
                            const std::vector<std::string>& ids) {
  BankLock lock(dir);
  const TemplateBank current = load_bank(dir);
  TemplateBank updated = current.appended_with(images, ids);
  write_sheets(updated, dir, current.sheet_count());
  write_manifest(updated, dir);
  return updated;
}

}  // namespace hetmm
