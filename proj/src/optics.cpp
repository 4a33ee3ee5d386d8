#include "hetmm/optics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hetmm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Reachabilities are rounded to 15 decimals so that near-equal candidates tie
// deterministically.
double round15(double v) {
  if (!std::isfinite(v)) return v;
  return std::nearbyint(v * 1e15) / 1e15;
}

}  // namespace

Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& vectors) {
  const Index n = vectors.rows();
  Eigen::MatrixXd unit = vectors;
  std::vector<bool> zero(static_cast<std::size_t>(n), false);
  for (Index i = 0; i < n; ++i) {
    const double norm = unit.row(i).norm();
    if (norm == 0.0) {
      zero[static_cast<std::size_t>(i)] = true;
    } else {
      unit.row(i) /= norm;
    }
  }
  Eigen::MatrixXd d = (1.0 - (unit * unit.transpose()).array()).matrix();
  for (Index i = 0; i < n; ++i) {
    const bool zi = zero[static_cast<std::size_t>(i)];
    d(i, i) = zi ? 1.0 : 0.0;
    for (Index j = i + 1; j < n; ++j) {
      if (zi || zero[static_cast<std::size_t>(j)])
        d(i, j) = 1.0;
      else if (vectors.row(i) == vectors.row(j))
        d(i, j) = 0.0;
      else
        d(i, j) = std::clamp(d(i, j), 0.0, 2.0);
      d(j, i) = d(i, j);
    }
  }
  return d;
}

OpticsGraph optics_graph(const Eigen::MatrixXd& distances, int min_samples) {
  const Index n = distances.rows();
  OpticsGraph g;
  g.reachability.assign(static_cast<std::size_t>(n), kInf);
  g.predecessor.assign(static_cast<std::size_t>(n), -1);
  g.core_distance.assign(static_cast<std::size_t>(n), kInf);
  if (n == 0) return g;

  if (min_samples <= n) {
    std::vector<double> row(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = distances(i, j);
      std::nth_element(row.begin(), row.begin() + (min_samples - 1), row.end());
      g.core_distance[static_cast<std::size_t>(i)] =
          round15(row[static_cast<std::size_t>(min_samples - 1)]);
    }
  }

  std::vector<bool> processed(static_cast<std::size_t>(n), false);
  g.ordering.reserve(static_cast<std::size_t>(n));
  for (Index step = 0; step < n; ++step) {
    Index point = -1;
    double best = kInf;
    for (Index i = 0; i < n; ++i) {
      if (processed[static_cast<std::size_t>(i)]) continue;
      const double r = g.reachability[static_cast<std::size_t>(i)];
      if (point < 0 || r < best) {
        point = i;
        best = r;
      }
    }
    processed[static_cast<std::size_t>(point)] = true;
    g.ordering.push_back(point);

    const double core = g.core_distance[static_cast<std::size_t>(point)];
    if (core == kInf) continue;
    for (Index j = 0; j < n; ++j) {
      if (processed[static_cast<std::size_t>(j)]) continue;
      const double reach = round15(std::max(distances(point, j), core));
      if (reach < g.reachability[static_cast<std::size_t>(j)]) {
        g.reachability[static_cast<std::size_t>(j)] = reach;
        g.predecessor[static_cast<std::size_t>(j)] = point;
      }
    }
  }
  return g;
}

namespace {

struct SteepDownArea {
  Index start;
  Index end;
  double mib;
};

Index extend_region(const std::vector<bool>& steep, const std::vector<bool>& xward, Index start,
                    int min_samples) {
  const auto n = static_cast<Index>(steep.size());
  int non_xward = 0;
  Index end = start;
  for (Index i = start; i < n; ++i) {
    if (steep[static_cast<std::size_t>(i)]) {
      non_xward = 0;
      end = i;
    } else if (!xward[static_cast<std::size_t>(i)]) {
      // neither steep nor heading the other way
      if (++non_xward > min_samples) break;
    } else {
      return end;
    }
  }
  return end;
}

void update_filter_sdas(std::vector<SteepDownArea>& sdas, double mib, double xi_complement,
                        const std::vector<double>& plot) {
  if (std::isinf(mib)) {
    sdas.clear();
    return;
  }
  std::erase_if(sdas, [&](const SteepDownArea& d) {
    return !(mib <= plot[static_cast<std::size_t>(d.start)] * xi_complement);
  });
  for (auto& d : sdas) d.mib = std::max(d.mib, mib);
}

bool correct_predecessor(const std::vector<double>& plot, const std::vector<Index>& pred_plot,
                         const std::vector<Index>& ordering, Index& s, Index& e) {
  while (s < e) {
    if (plot[static_cast<std::size_t>(s)] > plot[static_cast<std::size_t>(e)]) return true;
    const Index p_e = pred_plot[static_cast<std::size_t>(e)];
    for (Index i = s; i < e; ++i)
      if (p_e == ordering[static_cast<std::size_t>(i)]) return true;
    --e;
  }
  return false;
}

}  // namespace

std::vector<std::pair<Index, Index>> xi_clusters(const OpticsGraph& graph, int min_samples,
                                                 int min_cluster_size, double xi) {
  const auto n = static_cast<Index>(graph.ordering.size());
  std::vector<double> plot(static_cast<std::size_t>(n) + 1);
  std::vector<Index> pred_plot(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto p = static_cast<std::size_t>(graph.ordering[static_cast<std::size_t>(i)]);
    plot[static_cast<std::size_t>(i)] = graph.reachability[p];
    pred_plot[static_cast<std::size_t>(i)] = graph.predecessor[p];
  }
  // Trailing +inf closes a cluster that runs to the end of the plot.
  plot[static_cast<std::size_t>(n)] = kInf;

  const double xi_complement = 1.0 - xi;
  std::vector<bool> steep_up(static_cast<std::size_t>(n)), steep_down(static_cast<std::size_t>(n)),
      up(static_cast<std::size_t>(n)), down(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const double ratio = plot[static_cast<std::size_t>(i)] / plot[static_cast<std::size_t>(i) + 1];
    // NaN (inf/inf, 0/0) compares false everywhere.
    steep_up[static_cast<std::size_t>(i)] = ratio <= xi_complement;
    steep_down[static_cast<std::size_t>(i)] = ratio >= 1.0 / xi_complement;
    down[static_cast<std::size_t>(i)] = ratio > 1.0;
    up[static_cast<std::size_t>(i)] = ratio < 1.0;
  }

  std::vector<SteepDownArea> sdas;
  std::vector<std::pair<Index, Index>> clusters;
  Index index = 0;
  double mib = 0.0;

  for (Index steep = 0; steep < n; ++steep) {
    if (!steep_up[static_cast<std::size_t>(steep)] && !steep_down[static_cast<std::size_t>(steep)])
      continue;
    if (steep < index) continue;

    mib = std::max(mib, *std::max_element(plot.begin() + index, plot.begin() + steep + 1));

    if (steep_down[static_cast<std::size_t>(steep)]) {
      update_filter_sdas(sdas, mib, xi_complement, plot);
      const Index d_end = extend_region(steep_down, up, steep, min_samples);
      sdas.push_back({steep, d_end, 0.0});
      index = d_end + 1;
      mib = plot[static_cast<std::size_t>(index)];
      continue;
    }

    update_filter_sdas(sdas, mib, xi_complement, plot);
    const Index u_start = steep;
    const Index u_end = extend_region(steep_up, down, u_start, min_samples);
    index = u_end + 1;
    mib = plot[static_cast<std::size_t>(index)];

    std::vector<std::pair<Index, Index>> found;
    for (const auto& d : sdas) {
      Index c_start = d.start;
      Index c_end = u_end;
      const double after = plot[static_cast<std::size_t>(c_end) + 1];
      if (after * xi_complement < d.mib) continue;

      const double d_max = plot[static_cast<std::size_t>(d.start)];
      if (d_max * xi_complement >= after) {
        while (plot[static_cast<std::size_t>(c_start) + 1] > after && c_start < d.end) ++c_start;
      } else if (after * xi_complement >= d_max) {
        while (c_end > u_start && plot[static_cast<std::size_t>(c_end) - 1] > d_max) --c_end;
      }

      if (!correct_predecessor(plot, pred_plot, graph.ordering, c_start, c_end)) continue;
      if (c_end - c_start + 1 < min_cluster_size) continue;
      if (c_start > d.end) continue;
      if (c_end < u_start) continue;
      found.emplace_back(c_start, c_end);
    }
    clusters.insert(clusters.end(), found.rbegin(), found.rend());
  }
  return clusters;
}

std::vector<int> xi_labels(const OpticsGraph& graph,
                           const std::vector<std::pair<Index, Index>>& clusters) {
  const auto n = graph.ordering.size();
  std::vector<int> by_position(n, -1);
  int label = 0;
  for (const auto& [s, e] : clusters) {
    const bool free = std::all_of(by_position.begin() + s, by_position.begin() + e + 1,
                                  [](int l) { return l == -1; });
    if (!free) continue;
    std::fill(by_position.begin() + s, by_position.begin() + e + 1, label);
    ++label;
  }
  std::vector<int> labels(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    labels[static_cast<std::size_t>(graph.ordering[i])] = by_position[i];
  return labels;
}

std::vector<std::vector<Index>> optics_regions(const Eigen::MatrixXd& distances, int min_samples,
                                               double xi) {
  const Index n = distances.rows();
  if (n < 1 || min_samples > n) return {};
  const OpticsGraph g = optics_graph(distances, min_samples);
  const auto clusters = xi_clusters(g, min_samples, min_samples, xi);
  const auto labels = xi_labels(g, clusters);
  const int count = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<Index>> regions(static_cast<std::size_t>(std::max(count, 0)));
  for (Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l >= 0) regions[static_cast<std::size_t>(l)].push_back(i);
  }
  return regions;
}

std::vector<std::vector<Index>> optics_cluster(const Eigen::MatrixXd& vectors,
                                               const PtsConfig& cfg) {
  return optics_regions(cosine_distance_matrix(vectors), cfg.min_samples, cfg.xi);
}

}  // namespace hetmm
