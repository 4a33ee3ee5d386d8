#include "hetmm/postprocess.hpp"

namespace hetmm {

void PostConfig::validate() const {
  if (!(sigma > 0.0)) throw ConfigError("blur sigma must be positive");
  if (!(truncation >= 0.0)) throw ConfigError("blur truncation must be non-negative");
}

std::vector<double> gaussian_kernel(double sigma, double truncation) {
  const auto radius = static_cast<Index>(truncation * sigma + 0.5);
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (Index t = -radius; t <= radius; ++t) {
    const double v = std::exp(-0.5 * static_cast<double>(t * t) / (sigma * sigma));
    k[static_cast<std::size_t>(t + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace hetmm
