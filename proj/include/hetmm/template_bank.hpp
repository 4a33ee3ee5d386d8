#pragma once

#include "hetmm/types.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hetmm {

/// The layers of one nominal image, keyed by layer id.
using ImageLayers = std::map<int, FeatureMap>;

/// N sheets of one backbone layer. The per-pixel prototype set at (x, y) is
/// the N rows at that pixel across sheets.
struct BankLayer {
  int layer_id = 0;
  Shape shape;
  std::vector<FeatureMap> sheets;
};

/// Per-layer sheet stacks plus provenance. Immutable once handed to the
/// matcher; build_bank, pts_compress and append produce new values.
class TemplateBank {
 public:
  TemplateBank() = default;

  Index sheet_count() const { return static_cast<Index>(sheet_ids_.size()); }
  std::vector<int> layer_ids() const;
  bool has_layer(int layer_id) const { return layers_.count(layer_id) != 0; }
  const BankLayer& layer(int layer_id) const;
  const std::map<int, BankLayer>& layers() const { return layers_; }

  /// One id per sheet, in sheet order.
  const std::vector<std::string>& sheet_ids() const { return sheet_ids_; }
  /// Identifiers of every source image ever inserted, in insertion order.
  const std::vector<std::string>& sources() const { return sources_; }

  bool compressed() const { return pts_.has_value(); }
  const std::optional<PtsConfig>& pts() const { return pts_; }
  Index appended() const { return appended_; }
  /// "original", "compressed", "original+appended" or "compressed+appended".
  std::string state() const;

  /// Returns a copy with the given images appended as new sheets.
  TemplateBank appended_with(const std::vector<ImageLayers>& images,
                             const std::vector<std::string>& ids) const;

  // Assembly hooks for build_bank / pts_compress / load_bank.
  static TemplateBank assemble(std::map<int, BankLayer> layers, std::vector<std::string> sheet_ids,
                               std::vector<std::string> sources, std::optional<PtsConfig> pts,
                               Index appended);

 private:
  std::map<int, BankLayer> layers_;
  std::vector<std::string> sheet_ids_;
  std::vector<std::string> sources_;
  std::optional<PtsConfig> pts_;
  Index appended_ = 0;
};

/// Stacks images into a bank, one sheet per image, preserving input order.
TemplateBank build_bank(const std::vector<ImageLayers>& images,
                        const std::vector<std::string>& ids);

// On-disk layout: <dir>/bank.json plus <dir>/layer_<L>/sheet_<k>.ftn.

inline constexpr int kBankFormatVersion = 1;
inline constexpr const char* kBankManifestName = "bank.json";
inline constexpr const char* kBankLockName = "bank.lock";

std::filesystem::path sheet_path(const std::filesystem::path& dir, int layer_id, Index sheet);

void save_bank(const TemplateBank& bank, const std::filesystem::path& dir);
/// Loads and validates the manifest against every tensor file.
TemplateBank load_bank(const std::filesystem::path& dir);

/// Appends sheets to a bank directory in place, writing only the new sheet
/// files and the manifest. Holds an exclusive lock file for the duration;
/// throws LockConflictError if another writer holds it.
TemplateBank append_to_bank(const std::filesystem::path& dir,
                            const std::vector<ImageLayers>& images,
                            const std::vector<std::string>& ids);

/// RAII exclusive lock on a bank directory.
class BankLock {
 public:
  explicit BankLock(const std::filesystem::path& dir);
  ~BankLock();
  BankLock(const BankLock&) = delete;
  BankLock& operator=(const BankLock&) = delete;

 private:
  std::filesystem::path path_;
};

}  // namespace hetmm
