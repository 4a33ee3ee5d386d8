#include "hetmm/selection.hpp"

#include "hetmm/optics.hpp"

#include <algorithm>
#include <numeric>

namespace hetmm {

void PtsConfig::validate(Index sheet_count) const {
  if (k < 1) throw ConfigError("PTS: K must be at least 1");
  if (k > sheet_count)
    throw ConfigError("PTS: K=" + std::to_string(k) + " exceeds the bank's " +
                      std::to_string(sheet_count) + " sheets");
  if (min_samples < 2) throw ConfigError("PTS: min_samples must be at least 2");
  if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("PTS: xi must lie in (0, 1)");
}

const char* to_string(PrototypeKind kind) {
  switch (kind) {
    case PrototypeKind::kEasy: return "easy";
    case PrototypeKind::kGlobal: return "global";
    case PrototypeKind::kHard: return "hard";
  }
  return "unknown";
}

std::vector<Index> PixelPrototypeSet::sources() const {
  std::vector<Index> out;
  out.reserve(prototypes.size());
  for (const auto& p : prototypes) out.push_back(p.source);
  return out;
}

Eigen::MatrixXd cosine_similarity_matrix(const Eigen::MatrixXd& vectors) {
  Eigen::MatrixXd unit = vectors;
  for (Index i = 0; i < unit.rows(); ++i) {
    const double norm = unit.row(i).norm();
    if (norm > 0.0) unit.row(i) /= norm;
  }
  Eigen::MatrixXd s = (unit * unit.transpose()).cwiseMax(-1.0).cwiseMin(1.0);
  // Exact symmetry and exact 1 for identical rows keep centre ties decidable
  // by index alone.
  for (Index i = 0; i < s.rows(); ++i) {
    const bool nonzero = unit.row(i).squaredNorm() > 0.0;
    s(i, i) = nonzero ? 1.0 : 0.0;
    for (Index j = i + 1; j < s.cols(); ++j) {
      if (nonzero && vectors.row(i) == vectors.row(j)) s(i, j) = 1.0;
      s(j, i) = s(i, j);
    }
  }
  return s;
}

Index region_centre(const Eigen::MatrixXd& similarity, const std::vector<Index>& members) {
  if (members.empty()) throw DataError("region_centre: empty region");
  Index best = members.front();
  double best_sum = -std::numeric_limits<double>::infinity();
  for (Index i : members) {
    double sum = 0.0;
    for (Index j : members) sum += similarity(i, j);
    if (sum > best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

Index global_centre(const Eigen::MatrixXd& similarity) {
  std::vector<Index> all(static_cast<std::size_t>(similarity.rows()));
  std::iota(all.begin(), all.end(), Index{0});
  return region_centre(similarity, all);
}

Index select_hard(const Eigen::MatrixXd& similarity, const std::vector<Index>& selected) {
  const Index n = similarity.rows();
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  for (Index s : selected) taken[static_cast<std::size_t>(s)] = true;
  Index best = -1;
  double best_sum = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    if (taken[static_cast<std::size_t>(i)]) continue;
    double sum = 0.0;
    for (Index s : selected) sum += 1.0 - similarity(i, s);
    if (sum > best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  if (best < 0) throw SelectionExhaustedError();
  return best;
}

PixelPrototypeSet select_pixel_prototypes(const Eigen::MatrixXd& vectors, const PtsConfig& cfg) {
  const Index n = vectors.rows();
  if (n < 1) throw DataError("select_pixel_prototypes: empty prototype set");
  const Index target = std::min<Index>(cfg.k, n);

  const Eigen::MatrixXd sim = cosine_similarity_matrix(vectors);
  const auto regions = optics_regions(cosine_distance_matrix(vectors), cfg.min_samples, cfg.xi);

  PixelPrototypeSet out;
  if (regions.empty()) {
    out.prototypes.push_back({global_centre(sim), PrototypeKind::kGlobal});
  } else {
    std::vector<std::size_t> keep(regions.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    if (static_cast<Index>(regions.size()) > target) {
      std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
        return regions[a].size() > regions[b].size();
      });
      keep.resize(static_cast<std::size_t>(target));
      std::sort(keep.begin(), keep.end());
    }
    for (std::size_t r : keep)
      out.prototypes.push_back({region_centre(sim, regions[r]), PrototypeKind::kEasy});
  }

  // Running objective: summed distance from each row to the selected set.
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  Eigen::VectorXd objective = Eigen::VectorXd::Zero(n);
  auto take = [&](Index s) {
    taken[static_cast<std::size_t>(s)] = true;
    objective += (1.0 - sim.col(s).array()).matrix();
  };
  for (const auto& p : out.prototypes) take(p.source);

  while (out.size() < target) {
    Index best = -1;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      if (best < 0 || objective(i) > objective(best)) best = i;
    }
    if (best < 0) throw SelectionExhaustedError();
    out.prototypes.push_back({best, PrototypeKind::kHard});
    take(best);
  }
  return out;
}

TemplateBank pts_compress(const TemplateBank& bank, const PtsConfig& cfg) {
  cfg.validate(bank.sheet_count());
  const Index n = bank.sheet_count();
  const auto k = static_cast<std::size_t>(cfg.k);

  std::map<int, BankLayer> layers;
  for (const auto& [layer_id, layer] : bank.layers()) {
    const Shape shape = layer.shape;
    BankLayer out{layer_id, shape, {}};
    for (std::size_t s = 0; s < k; ++s)
      out.sheets.emplace_back(layer_id, shape.height, shape.width, shape.channels);

    const Index pixels = shape.pixels();
#pragma omp parallel for schedule(dynamic, 16)
    for (Index p = 0; p < pixels; ++p) {
      Eigen::MatrixXd vectors(n, shape.channels);
      for (Index i = 0; i < n; ++i)
        vectors.row(i) = layer.sheets[static_cast<std::size_t>(i)].data().row(p).cast<double>();
      const PixelPrototypeSet chosen = select_pixel_prototypes(vectors, cfg);
      for (std::size_t s = 0; s < k; ++s) {
        const auto src = static_cast<std::size_t>(chosen.prototypes[s].source);
        out.sheets[s].data().row(p) = layer.sheets[src].data().row(p);
      }
    }
    layers[layer_id] = std::move(out);
  }

  std::vector<std::string> sheet_ids;
  for (std::size_t s = 0; s < k; ++s) sheet_ids.push_back("pts-rank-" + std::to_string(s));
  return TemplateBank::assemble(std::move(layers), std::move(sheet_ids), bank.sources(), cfg,
                                0);
}

}  // namespace hetmm
