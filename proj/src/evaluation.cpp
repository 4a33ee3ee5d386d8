#include "hetmm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

namespace hetmm {

Mask to_mask(const AnomalyMap& map) {
  Mask m(map.rows(), map.cols());
  for (Index y = 0; y < map.rows(); ++y) {
    for (Index x = 0; x < map.cols(); ++x) {
      const float v = map(y, x);
      if (v != 0.0f && v != 1.0f)
        throw DataError("mask value " + std::to_string(v) + " at (" + std::to_string(x) + ", " +
                        std::to_string(y) + ") is not binary");
      m(y, x) = v == 1.0f ? 1 : 0;
    }
  }
  return m;
}

double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DataError("auroc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, kept integral.
  std::uint64_t twice_u = 0;
  std::uint64_t neg_below = 0;
  std::uint64_t pos_total = 0, neg_total = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] ? pos : neg) += 1;
      ++j;
    }
    twice_u += 2 * pos * neg_below + pos * neg;
    neg_below += neg;
    pos_total += pos;
    neg_total += neg;
    i = j;
  }
  if (pos_total == 0 || neg_total == 0)
    throw DataError("auroc needs at least one positive and one negative label");
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

namespace {

void check_record(const PixelRecord& r) {
  if (r.scores.rows() != r.truth.rows() || r.scores.cols() != r.truth.cols())
    throw ShapeMismatchError("anomaly map and mask differ in shape");
}

}  // namespace

double pixel_auroc(std::span<const PixelRecord> records) {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (const auto& r : records) {
    check_record(r);
    for (Index i = 0; i < r.scores.size(); ++i) {
      scores.push_back(r.scores.data()[i]);
      labels.push_back(r.truth.data()[i]);
    }
  }
  return auroc(scores, labels);
}

std::vector<std::vector<PixelCoord>> connected_components(const Mask& mask) {
  const Index h = mask.rows(), w = mask.cols();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(h * w), 0);
  std::vector<std::vector<PixelCoord>> out;
  std::deque<PixelCoord> frontier;
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      if (!mask(y, x) || seen[static_cast<std::size_t>(y * w + x)]) continue;
      std::vector<PixelCoord> comp;
      seen[static_cast<std::size_t>(y * w + x)] = 1;
      frontier.push_back({x, y});
      while (!frontier.empty()) {
        const PixelCoord p = frontier.front();
        frontier.pop_front();
        comp.push_back(p);
        for (Index dy = -1; dy <= 1; ++dy) {
          for (Index dx = -1; dx <= 1; ++dx) {
            const Index nx = p.x + dx, ny = p.y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            auto& s = seen[static_cast<std::size_t>(ny * w + nx)];
            if (!mask(ny, nx) || s) continue;
            s = 1;
            frontier.push_back({nx, ny});
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

namespace {

// Every pixel of every record, sorted by descending score, with its
// ground-truth component (-1 for normal pixels).
struct PooledPixels {
  struct Pixel {
    double score;
    std::int32_t image;
    std::int32_t component;
  };
  std::vector<Pixel> pixels;
  std::vector<Index> component_size;
  std::vector<Index> image_truth;  // anomalous pixel count per image
  Index normal = 0;
  Index anomalous = 0;
};

PooledPixels pool(std::span<const PixelRecord> records) {
  if (records.empty()) throw DataError("no evaluation records");
  PooledPixels out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PixelRecord& r = records[i];
    check_record(r);
    const Index w = r.scores.cols();
    std::vector<std::int32_t> label(static_cast<std::size_t>(r.scores.size()), -1);
    for (const auto& comp : connected_components(r.truth)) {
      const auto id = static_cast<std::int32_t>(out.component_size.size());
      for (const auto& p : comp) label[static_cast<std::size_t>(p.y * w + p.x)] = id;
      out.component_size.push_back(static_cast<Index>(comp.size()));
    }
    Index truth = 0;
    for (Index k = 0; k < r.scores.size(); ++k) {
      const std::int32_t c = label[static_cast<std::size_t>(k)];
      out.pixels.push_back({static_cast<double>(r.scores.data()[k]), static_cast<std::int32_t>(i), c});
      if (c < 0) {
        ++out.normal;
      } else {
        ++out.anomalous;
        ++truth;
      }
    }
    out.image_truth.push_back(truth);
  }
  std::stable_sort(out.pixels.begin(), out.pixels.end(),
                   [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

std::vector<double> grid_from_pool(const PooledPixels& pooled, int steps) {
  if (steps < 1) throw ConfigError("threshold steps must be positive");
  const auto& px = pooled.pixels;  // descending
  const auto count = static_cast<Index>(px.size());
  std::vector<double> t;
  t.reserve(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j < steps; ++j) {
    // j-th quantile of the ascending order
    const double pos = steps == 1 ? 0.0
                                  : static_cast<double>(j) * static_cast<double>(count - 1) /
                                        static_cast<double>(steps - 1);
    const auto asc = static_cast<Index>(std::llround(pos));
    t.push_back(px[static_cast<std::size_t>(count - 1 - asc)].score);
  }
  // Anchor: the lowest score still above every normal pixel.
  double max_normal = -std::numeric_limits<double>::infinity();
  bool any_normal = false;
  for (const auto& p : px) {
    if (p.component < 0) {
      max_normal = p.score;
      any_normal = true;
      break;
    }
  }
  if (any_normal) {
    for (auto it = px.rbegin(); it != px.rend(); ++it) {
      if (it->score > max_normal) {
        t.push_back(it->score);
        break;
      }
    }
  }
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

// Counts of everything predicted anomalous at one threshold.
struct SweepState {
  Index predicted = 0;
  Index false_pos = 0;
  Index true_pos = 0;
  std::vector<Index> component_hits;
  std::vector<Index> image_tp;
  std::vector<Index> image_fp;
};

template <typename Visit>
void sweep(const PooledPixels& pooled, const std::vector<double>& thresholds, Visit&& visit) {
  SweepState s;
  s.component_hits.assign(pooled.component_size.size(), 0);
  s.image_tp.assign(pooled.image_truth.size(), 0);
  s.image_fp.assign(pooled.image_truth.size(), 0);
  std::size_t next = 0;
  for (double t : thresholds) {
    while (next < pooled.pixels.size() && pooled.pixels[next].score >= t) {
      const auto& p = pooled.pixels[next];
      if (p.component < 0) {
        ++s.false_pos;
        ++s.image_fp[static_cast<std::size_t>(p.image)];
      } else {
        ++s.true_pos;
        ++s.component_hits[static_cast<std::size_t>(p.component)];
        ++s.image_tp[static_cast<std::size_t>(p.image)];
      }
      ++s.predicted;
      ++next;
    }
    visit(t, s);
  }
}

double pro_value(const PooledPixels& pooled, const SweepState& s) {
  double sum = 0.0;
  for (std::size_t c = 0; c < pooled.component_size.size(); ++c)
    sum += static_cast<double>(s.component_hits[c]) /
           static_cast<double>(pooled.component_size[c]);
  return sum / static_cast<double>(pooled.component_size.size());
}

}  // namespace

std::vector<double> threshold_grid(std::span<const PixelRecord> records, int steps) {
  return grid_from_pool(pool(records), steps);
}

double trapezoid(std::span<const CurvePoint> points, double x_max) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    double x0 = points[i].x, y0 = points[i].y;
    double x1 = points[i + 1].x, y1 = points[i + 1].y;
    if (x0 >= x_max) break;
    if (x1 > x_max) {
      y1 = y0 + (y1 - y0) * (x_max - x0) / (x1 - x0);
      x1 = x_max;
    }
    area += (x1 - x0) * 0.5 * (y0 + y1);
  }
  return area;
}

ProCurve pro(std::span<const PixelRecord> records, double cap, int steps) {
  if (!(cap > 0.0 && cap <= 1.0)) throw ConfigError("PRO cap must lie in (0, 1]");
  const PooledPixels pooled = pool(records);
  if (pooled.component_size.empty()) throw DataError("PRO needs at least one anomalous pixel");
  if (pooled.normal == 0) throw DataError("PRO needs at least one normal pixel");

  ProCurve curve;
  curve.cap = cap;
  const std::vector<double> grid = grid_from_pool(pooled, steps);

  if (grid.size() == 1) {
    // Constant scores: only the predict-everything point exists.
    curve.degenerate = true;
    sweep(pooled, grid, [&](double t, const SweepState& s) {
      curve.points.push_back({1.0, pro_value(pooled, s), t});
    });
    curve.integral = curve.points.front().y;
    curve.raw_integral = curve.integral * cap;
    return curve;
  }

  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  sweep(pooled, grid, [&](double t, const SweepState& s) {
    const double fpr = static_cast<double>(s.false_pos) / static_cast<double>(pooled.normal);
    curve.points.push_back({fpr, pro_value(pooled, s), t});
  });

  // Integrate the shortfall from 1 so a curve pinned at PRO = 1 over [0, cap]
  // scores exactly 1.
  double deficit = 0.0;
  for (std::size_t i = 0; i + 1 < curve.points.size(); ++i) {
    double x0 = curve.points[i].x, y0 = curve.points[i].y;
    double x1 = curve.points[i + 1].x, y1 = curve.points[i + 1].y;
    if (x0 >= cap) break;
    if (x1 > cap) {
      y1 = y0 + (y1 - y0) * (cap - x0) / (x1 - x0);
      x1 = cap;
    }
    deficit += (x1 - x0) * (1.0 - 0.5 * (y0 + y1));
  }
  curve.raw_integral = std::clamp(cap - deficit, 0.0, cap);
  curve.integral = std::clamp(1.0 - deficit / cap, 0.0, 1.0);
  return curve;
}

CurveKind parse_curve_kind(const std::string& name) {
  if (name == "roc") return CurveKind::kRoc;
  if (name == "pro") return CurveKind::kPro;
  if (name == "iou") return CurveKind::kIou;
  if (name == "pr") return CurveKind::kPr;
  throw ConfigError("unknown curve kind '" + name + "'");
}

const char* to_string(CurveKind kind) {
  switch (kind) {
    case CurveKind::kRoc: return "roc";
    case CurveKind::kPro: return "pro";
    case CurveKind::kIou: return "iou";
    case CurveKind::kPr: return "pr";
  }
  return "unknown";
}

std::vector<CurvePoint> curve_points(std::span<const PixelRecord> records, CurveKind kind,
                                     int steps) {
  const PooledPixels pooled = pool(records);
  const std::vector<double> grid = grid_from_pool(pooled, steps);
  const auto normal = static_cast<double>(pooled.normal);
  const auto anomalous = static_cast<double>(pooled.anomalous);
  const auto total = static_cast<double>(pooled.pixels.size());
  if ((kind == CurveKind::kRoc || kind == CurveKind::kPro) && (normal == 0 || anomalous == 0))
    throw DataError("curve needs both normal and anomalous pixels");
  if ((kind == CurveKind::kPr || kind == CurveKind::kIou) && anomalous == 0)
    throw DataError("curve needs anomalous pixels");

  std::vector<CurvePoint> out;
  if (kind == CurveKind::kRoc || kind == CurveKind::kPro)
    out.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});

  sweep(pooled, grid, [&](double t, const SweepState& s) {
    const double fpr = normal > 0 ? static_cast<double>(s.false_pos) / normal : 0.0;
    const double tpr = static_cast<double>(s.true_pos) / anomalous;
    switch (kind) {
      case CurveKind::kRoc:
        out.push_back({fpr, tpr, t});
        break;
      case CurveKind::kPro:
        out.push_back({fpr, pro_value(pooled, s), t});
        break;
      case CurveKind::kPr: {
        const double precision =
            s.predicted > 0 ? static_cast<double>(s.true_pos) / static_cast<double>(s.predicted)
                            : 1.0;
        out.push_back({tpr, precision, t});
        break;
      }
      case CurveKind::kIou: {
        double sum = 0.0;
        int images = 0;
        for (std::size_t i = 0; i < pooled.image_truth.size(); ++i) {
          if (pooled.image_truth[i] == 0) continue;
          sum += static_cast<double>(s.image_tp[i]) /
                 static_cast<double>(pooled.image_truth[i] + s.image_fp[i]);
          ++images;
        }
        const double below = (total - static_cast<double>(s.predicted)) / total;
        out.push_back({below, sum / images, t});
        break;
      }
    }
  });
  return out;
}

}  // namespace hetmm
