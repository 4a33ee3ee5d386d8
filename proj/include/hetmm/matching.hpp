#pragma once

#include "hetmm/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace hetmm {

/// 1 - cos(u, v), clamped to [0, 2]. A zero-norm operand has similarity 0,
/// so the distance is 1.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar cosine_distance(const Eigen::MatrixBase<DerivedU>& u,
                                          const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedU::Scalar;
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) return Scalar(1);
  const Scalar d = Scalar(1) - u.dot(v) / (nu * nv);
  return std::clamp(d, Scalar(0), Scalar(2));
}

struct PixelCoord {
  Index x = 0;
  Index y = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Inclusive bounds of a patch window clipped to the image.
struct PatchWindow {
  Index x0, x1, y0, y1;
};

inline PatchWindow clipped_window(Index x, Index y, PatchSpec p, Index height, Index width) {
  return {std::max<Index>(0, x - p.half_width()), std::min<Index>(width - 1, x + p.half_width()),
          std::max<Index>(0, y - p.half_height()),
          std::min<Index>(height - 1, y + p.half_height())};
}

/// In-bounds coordinates of the patch centred at (x, y), row-major order.
/// Out-of-bounds offsets are dropped rather than padded.
std::vector<PixelCoord> patch_indices(Index x, Index y, PatchSpec p, Index height, Index width);

/// Unit-normalised copy of a feature grid. Zero vectors stay zero and are
/// flagged; every distance involving them is 1.
template <typename Scalar>
struct NormalizedField {
  Index height = 0;
  Index width = 0;
  RowMatrix<Scalar> unit;
  std::vector<std::uint8_t> zero;
  Index zero_count = 0;
};

template <typename Scalar>
NormalizedField<Scalar> normalize_field(const FeatureMapT<Scalar>& fm) {
  NormalizedField<Scalar> out;
  out.height = fm.height();
  out.width = fm.width();
  out.unit.resize(fm.pixels(), fm.channels());
  out.zero.assign(static_cast<std::size_t>(fm.pixels()), 0);
  for (Index r = 0; r < fm.pixels(); ++r) {
    const double norm = fm.data().row(r).template cast<double>().norm();
    if (norm == 0.0) {
      out.unit.row(r).setZero();
      out.zero[static_cast<std::size_t>(r)] = 1;
      ++out.zero_count;
    } else {
      out.unit.row(r) = (fm.data().row(r).template cast<double>() / norm).template cast<Scalar>();
    }
  }
  return out;
}

namespace detail {

// Smallest cosine distance between `center` and any field vector inside the
// window. For unit vectors 1 - cos = |a - b|^2 / 2, which is exactly zero for
// identical inputs. Scan order is row-major; ties keep the first minimum.
template <typename Scalar, typename Row>
Scalar min_window_distance(const Row& center, bool center_zero, const NormalizedField<Scalar>& field,
                           const PatchWindow& w) {
  if (center_zero) return Scalar(1);
  Scalar best = std::numeric_limits<Scalar>::infinity();
  const Index len = w.x1 - w.x0 + 1;
  for (Index yy = w.y0; yy <= w.y1; ++yy) {
    const Index first = yy * field.width + w.x0;
    for (Index r = first; r < first + len; ++r) {
      const Scalar d = field.zero[static_cast<std::size_t>(r)]
                           ? Scalar(1)
                           : (field.unit.row(r) - center).squaredNorm() / Scalar(2);
      if (d < best) best = d;
    }
  }
  return std::clamp(best, Scalar(0), Scalar(2));
}

template <typename Scalar>
void check_same_shape(const NormalizedField<Scalar>& a, const NormalizedField<Scalar>& b) {
  if (a.height != b.height || a.width != b.width || a.unit.cols() != b.unit.cols())
    throw ShapeMismatchError("query and template sheets differ in shape");
}

}  // namespace detail

/// Normalised sheets of one bank layer, prepared once and reused per query.
template <typename Scalar>
class PreparedLayer {
 public:
  PreparedLayer() = default;
  explicit PreparedLayer(std::span<const FeatureMapT<Scalar>> sheets) {
    if (sheets.empty()) throw DataError("template layer has no sheets");
    sheets_.reserve(sheets.size());
    for (const auto& s : sheets) {
      if (s.shape() != sheets.front().shape())
        throw ShapeMismatchError("template sheets differ in shape");
      sheets_.push_back(normalize_field(s));
      zero_count_ += sheets_.back().zero_count;
    }
  }

  Shape shape() const {
    return {sheets_.front().height, sheets_.front().width, sheets_.front().unit.cols()};
  }
  Index sheet_count() const { return static_cast<Index>(sheets_.size()); }
  const NormalizedField<Scalar>& sheet(Index i) const {
    return sheets_[static_cast<std::size_t>(i)];
  }
  Index zero_count() const { return zero_count_; }

 private:
  std::vector<NormalizedField<Scalar>> sheets_;
  Index zero_count_ = 0;
};

/// Forward matching: per pixel, the minimum distance from the query vector to
/// every template vector inside the patch window, over all sheets.
template <typename Scalar>
AnomalyMapT<Scalar> forward_hetm(const NormalizedField<Scalar>& query,
                                 const PreparedLayer<Scalar>& bank, PatchSpec p) {
  for (Index n = 0; n < bank.sheet_count(); ++n) detail::check_same_shape(query, bank.sheet(n));
  const Index h = query.height, w = query.width;
  AnomalyMapT<Scalar> out(h, w);
#pragma omp parallel for schedule(static)
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Index r = y * w + x;
      const auto q = query.unit.row(r);
      const bool q_zero = query.zero[static_cast<std::size_t>(r)] != 0;
      const PatchWindow win = clipped_window(x, y, p, h, w);
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Index n = 0; n < bank.sheet_count(); ++n)
        best = std::min(best, detail::min_window_distance(q, q_zero, bank.sheet(n), win));
      out(y, x) = best;
    }
  }
  return out;
}

/// Backward matching: per pixel, the minimum over query vectors in the patch
/// window of their distance to the best template vector at the centre pixel.
template <typename Scalar>
AnomalyMapT<Scalar> backward_hetm(const NormalizedField<Scalar>& query,
                                  const PreparedLayer<Scalar>& bank, PatchSpec p) {
  for (Index n = 0; n < bank.sheet_count(); ++n) detail::check_same_shape(query, bank.sheet(n));
  const Index h = query.height, w = query.width;
  AnomalyMapT<Scalar> out(h, w);
#pragma omp parallel for schedule(static)
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const Index r = y * w + x;
      const PatchWindow win = clipped_window(x, y, p, h, w);
      Scalar best = std::numeric_limits<Scalar>::infinity();
      for (Index n = 0; n < bank.sheet_count(); ++n) {
        const auto& sheet = bank.sheet(n);
        best = std::min(best, detail::min_window_distance(
                                  sheet.unit.row(r), sheet.zero[static_cast<std::size_t>(r)] != 0,
                                  query, win));
      }
      out(y, x) = best;
    }
  }
  return out;
}

template <typename Scalar>
AnomalyMapT<Scalar> mix_directions(const AnomalyMapT<Scalar>& forward,
                                   const AnomalyMapT<Scalar>& backward, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  const auto a = static_cast<Scalar>(alpha);
  const auto b = static_cast<Scalar>(1.0 - alpha);
  return (a * forward.array() + b * backward.array()).matrix();
}

/// alpha * forward + (1 - alpha) * backward.
template <typename Scalar>
AnomalyMapT<Scalar> hetmm_score(const NormalizedField<Scalar>& query,
                                const PreparedLayer<Scalar>& bank, PatchSpec p, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
  return mix_directions<Scalar>(forward_hetm(query, bank, p), backward_hetm(query, bank, p),
                                alpha);
}

// Convenience overloads over raw feature maps.

template <typename Scalar>
AnomalyMapT<Scalar> forward_hetm(const FeatureMapT<Scalar>& query,
                                 std::span<const FeatureMapT<Scalar>> sheets, PatchSpec p) {
  return forward_hetm(normalize_field(query), PreparedLayer<Scalar>(sheets), p);
}

template <typename Scalar>
AnomalyMapT<Scalar> backward_hetm(const FeatureMapT<Scalar>& query,
                                  std::span<const FeatureMapT<Scalar>> sheets, PatchSpec p) {
  return backward_hetm(normalize_field(query), PreparedLayer<Scalar>(sheets), p);
}

template <typename Scalar>
AnomalyMapT<Scalar> hetmm_score(const FeatureMapT<Scalar>& query,
                                std::span<const FeatureMapT<Scalar>> sheets, PatchSpec p,
                                double alpha) {
  return hetmm_score(normalize_field(query), PreparedLayer<Scalar>(sheets), p, alpha);
}

/// Bilinear resize with half-pixel centres (corners not aligned). Source
/// coordinates below zero clamp to the first sample.
template <typename Derived>
AnomalyMapT<typename Derived::Scalar> bilinear_resize(const Eigen::MatrixBase<Derived>& in,
                                                      Index out_h, Index out_w) {
  using Scalar = typename Derived::Scalar;
  const Index in_h = in.rows(), in_w = in.cols();
  if (out_h < 1 || out_w < 1 || in_h < 1 || in_w < 1)
    throw ConfigError("bilinear_resize: empty shape");
  if (out_h == in_h && out_w == in_w) return in;

  struct Tap {
    Index i0, i1;
    double w1;
  };
  auto taps = [](Index in_n, Index out_n) {
    std::vector<Tap> t(static_cast<std::size_t>(out_n));
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (Index o = 0; o < out_n; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      Index i0 = std::min<Index>(static_cast<Index>(src), in_n - 1);
      Index i1 = std::min<Index>(i0 + 1, in_n - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, src - static_cast<double>(i0)};
    }
    return t;
  };
  const auto ty = taps(in_h, out_h);
  const auto tx = taps(in_w, out_w);

  AnomalyMapT<Scalar> out(out_h, out_w);
  for (Index y = 0; y < out_h; ++y) {
    const Tap& a = ty[static_cast<std::size_t>(y)];
    for (Index x = 0; x < out_w; ++x) {
      const Tap& b = tx[static_cast<std::size_t>(x)];
      const double top = (1.0 - b.w1) * static_cast<double>(in(a.i0, b.i0)) +
                         b.w1 * static_cast<double>(in(a.i0, b.i1));
      const double bottom = (1.0 - b.w1) * static_cast<double>(in(a.i1, b.i0)) +
                            b.w1 * static_cast<double>(in(a.i1, b.i1));
      out(y, x) = static_cast<Scalar>((1.0 - a.w1) * top + a.w1 * bottom);
    }
  }
  return out;
}

/// Rescales every layer map to (out_h, out_w) and sums them, in list order.
template <typename Scalar>
AnomalyMapT<Scalar> aggregate_layers(std::span<const AnomalyMapT<Scalar>> maps, Index out_h,
                                     Index out_w) {
  if (maps.empty()) throw ConfigError("aggregate_layers: no layer maps");
  AnomalyMapT<Scalar> sum = AnomalyMapT<Scalar>::Zero(out_h, out_w);
  for (const auto& m : maps) sum += bilinear_resize(m, out_h, out_w);
  return sum;
}

}  // namespace hetmm
