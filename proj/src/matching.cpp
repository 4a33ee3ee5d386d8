#include "hetmm/matching.hpp"

namespace hetmm {

PatchSpec::PatchSpec(int width, int height) : m(width), n(height) {
  if (m < 1 || n < 1 || m % 2 == 0 || n % 2 == 0)
    throw ConfigError("patch sizes must be odd and positive, got " + std::to_string(m) + "x" +
                      std::to_string(n));
}

std::vector<PixelCoord> patch_indices(Index x, Index y, PatchSpec p, Index height, Index width) {
  const PatchWindow w = clipped_window(x, y, p, height, width);
  std::vector<PixelCoord> coords;
  coords.reserve(static_cast<std::size_t>((w.x1 - w.x0 + 1) * (w.y1 - w.y0 + 1)));
  for (Index yy = w.y0; yy <= w.y1; ++yy)
    for (Index xx = w.x0; xx <= w.x1; ++xx) coords.push_back({xx, yy});
  return coords;
}

}  // namespace hetmm
