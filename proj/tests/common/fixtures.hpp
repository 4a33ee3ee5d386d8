#pragma once

// Seeded synthetic data shared by unit and acceptance tests.

#include "hetmm/template_bank.hpp"
#include "hetmm/tensor_store.hpp"

#include <nlohmann/json.hpp>
#include "hetmm/types.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace hetmm::testing {

inline FeatureMap random_map(std::mt19937_64& rng, Index h, Index w, Index c, int layer_id = 1) {
  std::normal_distribution<float> dist(0.0f, 1.0f);
  FeatureMap fm(layer_id, h, w, c);
  for (Index i = 0; i < fm.data().size(); ++i) fm.data().data()[i] = dist(rng);
  return fm;
}

inline std::vector<FeatureMap> random_sheets(std::mt19937_64& rng, int n, Index h, Index w,
                                             Index c, int layer_id = 1) {
  std::vector<FeatureMap> out;
  for (int i = 0; i < n; ++i) out.push_back(random_map(rng, h, w, c, layer_id));
  return out;
}

/// Zeroes a random subset of pixel vectors.
inline void sprinkle_zeros(std::mt19937_64& rng, FeatureMap& fm, double fraction) {
  std::bernoulli_distribution coin(fraction);
  for (Index r = 0; r < fm.pixels(); ++r)
    if (coin(rng)) fm.data().row(r).setZero();
}

inline std::vector<std::vector<double>> to_rows(const Eigen::MatrixXd& m) {
  std::vector<std::vector<double>> rows;
  for (Index i = 0; i < m.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(m.cols()));
    for (Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Nominal distribution plus hard examples: three tight clusters of 30
/// points spread around a shared direction, and 5 scattered points in random
/// directions, far from all of them.
inline Eigen::MatrixXd blob_fixture(std::mt19937_64& rng, Index dim = 16) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::VectorXd shared(dim);
  for (Index j = 0; j < dim; ++j) shared(j) = n01(rng);
  Eigen::MatrixXd pts(95, dim);
  for (int c = 0; c < 3; ++c) {
    Eigen::VectorXd centre(dim);
    for (Index j = 0; j < dim; ++j) centre(j) = shared(j) + 0.6 * n01(rng);
    for (int i = 0; i < 30; ++i)
      for (Index j = 0; j < dim; ++j) pts(c * 30 + i, j) = centre(j) + 0.1 * n01(rng);
  }
  for (int i = 90; i < 95; ++i)
    for (Index j = 0; j < dim; ++j) pts(i, j) = n01(rng);
  return pts;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("hetmm_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Writes each image's layers as <dir>/<id>_l<L>.ftn and a feature manifest
/// at <dir>/<name>. Image size defaults to the first layer's grid size.
inline std::filesystem::path write_manifest(const std::filesystem::path& dir,
                                            const std::string& name,
                                            const std::vector<ImageLayers>& images,
                                            const std::vector<std::string>& ids,
                                            Index image_h = 0, Index image_w = 0) {
  std::filesystem::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t i = 0; i < images.size(); ++i) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& [id, fm] : images[i]) {
      const std::string file = ids[i] + "_l" + std::to_string(id) + ".ftn";
      write_tensor(dir / file, fm);
      layers.push_back({{"layer_id", id}, {"path", file}});
    }
    const auto& first = images[i].begin()->second;
    list.push_back({{"id", ids[i]},
                    {"height", image_h ? image_h : first.height()},
                    {"width", image_w ? image_w : first.width()},
                    {"layers", layers}});
  }
  std::ofstream(dir / name) << nlohmann::json{{"images", list}}.dump(2);
  return dir / name;
}

}  // namespace hetmm::testing
