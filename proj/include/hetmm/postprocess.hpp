#pragma once

#include "hetmm/types.hpp"

#include <cmath>
#include <vector>

namespace hetmm {

struct PostConfig {
  double sigma = 6.8;
  double truncation = 4.0;  // kernel radius = round(truncation * sigma)

  void validate() const;
};

/// Normalised 1-D Gaussian taps, length 2 * radius + 1.
std::vector<double> gaussian_kernel(double sigma, double truncation);

/// Half-sample symmetric reflection: (d c b a | a b c d | d c b a).
inline Index reflect_index(Index i, Index n) {
  const Index period = 2 * n;
  Index m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

/// Separable Gaussian blur with reflect padding. Accumulates in double.
template <typename Derived>
AnomalyMapT<typename Derived::Scalar> gaussian_blur(const Eigen::MatrixBase<Derived>& map,
                                                    const PostConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const std::vector<double> k = gaussian_kernel(cfg.sigma, cfg.truncation);
  const auto radius = static_cast<Index>(k.size() / 2);
  const Index h = map.rows(), w = map.cols();

  RowMatrix<double> rows(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index t = -radius; t <= radius; ++t)
        acc += k[static_cast<std::size_t>(t + radius)] *
               static_cast<double>(map(y, reflect_index(x + t, w)));
      rows(y, x) = acc;
    }
  }
  AnomalyMapT<Scalar> out(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double acc = 0.0;
      for (Index t = -radius; t <= radius; ++t)
        acc += k[static_cast<std::size_t>(t + radius)] * rows(reflect_index(y + t, h), x);
      out(y, x) = static_cast<Scalar>(acc);
    }
  }
  return out;
}

/// Detection score: global maximum of the blurred map.
template <typename Derived>
typename Derived::Scalar image_score(const Eigen::MatrixBase<Derived>& map,
                                     const PostConfig& cfg) {
  return gaussian_blur(map, cfg).maxCoeff();
}

/// Min-max rescale to [0, 1]; a constant map becomes all zeros.
template <typename Derived>
AnomalyMapT<typename Derived::Scalar> normalize01(const Eigen::MatrixBase<Derived>& map) {
  using Scalar = typename Derived::Scalar;
  const double lo = static_cast<double>(map.minCoeff());
  const double hi = static_cast<double>(map.maxCoeff());
  if (!(hi > lo)) return AnomalyMapT<Scalar>::Zero(map.rows(), map.cols());
  return ((map.template cast<double>().array() - lo) / (hi - lo)).template cast<Scalar>().matrix();
}

}  // namespace hetmm
