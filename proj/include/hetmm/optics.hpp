#pragma once

#include "hetmm/types.hpp"

#include <utility>
#include <vector>

namespace hetmm {

/// OPTICS reachability graph over a precomputed distance matrix, unbounded
/// eps. Undefined reachabilities and core distances are +inf.
struct OpticsGraph {
  std::vector<Index> ordering;
  std::vector<double> reachability;    // indexed by point
  std::vector<double> core_distance;   // indexed by point
  std::vector<Index> predecessor;      // indexed by point, -1 if none
};

/// Core distance is the distance to the min_samples-th nearest point, the
/// point itself included. Ties in the expansion order go to the lowest index.
OpticsGraph optics_graph(const Eigen::MatrixXd& distances, int min_samples);

/// Xi-steep cluster extraction with predecessor correction. Returns
/// inclusive [start, end] spans in ordering positions, smaller nested
/// clusters before the clusters that contain them.
std::vector<std::pair<Index, Index>> xi_clusters(const OpticsGraph& graph, int min_samples,
                                                 int min_cluster_size, double xi);

/// Flat labels from nested spans: the first span covering unlabelled points
/// claims them. -1 marks noise.
std::vector<int> xi_labels(const OpticsGraph& graph,
                           const std::vector<std::pair<Index, Index>>& clusters);

/// Disjoint high-density regions (point index sets, ascending) in label
/// order. Empty when fewer than min_samples points are given.
std::vector<std::vector<Index>> optics_regions(const Eigen::MatrixXd& distances, int min_samples,
                                               double xi);

/// Cosine-distance matrix with zero vectors at distance 1 from everything.
Eigen::MatrixXd cosine_distance_matrix(const Eigen::MatrixXd& vectors);

/// optics_regions on the cosine distances between the rows of `vectors`.
std::vector<std::vector<Index>> optics_cluster(const Eigen::MatrixXd& vectors,
                                               const PtsConfig& cfg);

}  // namespace hetmm
