#pragma once

#include "hetmm/matching.hpp"
#include "hetmm/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hetmm {

using Mask = RowMatrix<std::uint8_t>;

/// Converts a {0, 1}-valued map to a mask; any other value is a DataError.
Mask to_mask(const AnomalyMap& map);

/// One image's anomaly map with its ground-truth mask of equal shape.
struct PixelRecord {
  AnomalyMap scores;
  Mask truth;
};

struct EvalRecord {
  std::vector<double> image_scores;
  std::vector<std::uint8_t> image_labels;  // 1 = anomalous
  std::vector<PixelRecord> pixels;
};

/// Exact Mann-Whitney AUROC, ties counted as one half. Labels are 0/1.
double auroc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// AUROC over every pixel of every record.
double pixel_auroc(std::span<const PixelRecord> records);

/// 8-connected components of the set pixels, labelled in raster order of
/// their first pixel; each component lists its pixels in BFS order.
std::vector<std::vector<PixelCoord>> connected_components(const Mask& mask);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

/// Descending thresholds: `steps` evenly spaced quantiles of the pooled
/// scores plus the lowest score above every normal pixel, deduplicated.
/// A pixel is predicted anomalous when its score is >= the threshold.
std::vector<double> threshold_grid(std::span<const PixelRecord> records, int steps);

struct ProCurve {
  std::vector<CurvePoint> points;  // (fpr, pro), fpr nondecreasing
  double cap = 0.3;
  double raw_integral = 0.0;  // area under the curve on [0, cap]
  double integral = 0.0;      // raw_integral / cap
  bool degenerate = false;    // every pooled score is equal
};

inline constexpr double kDefaultFprCap = 0.3;
inline constexpr int kDefaultThresholdSteps = 500;

/// Per-region overlap curve, normalised area up to the FPR cap. FPR is
/// pooled over all normal pixels of all records.
ProCurve pro(std::span<const PixelRecord> records, double cap = kDefaultFprCap,
             int steps = kDefaultThresholdSteps);

enum class CurveKind { kRoc, kPro, kIou, kPr };

CurveKind parse_curve_kind(const std::string& name);
const char* to_string(CurveKind kind);

/// Threshold-swept curve on threshold_grid. ROC = (FPR, TPR), PRO = (FPR,
/// PRO), PR = (recall, precision), IoU = (fraction of pooled scores below
/// the threshold, mean IoU over images with a non-empty mask). ROC and PRO
/// start at (0, 0) for the above-everything threshold.
std::vector<CurvePoint> curve_points(std::span<const PixelRecord> records, CurveKind kind,
                                     int steps = kDefaultThresholdSteps);

/// Trapezoidal area under points sorted by x, clipped to x <= x_max with
/// linear interpolation at the boundary.
double trapezoid(std::span<const CurvePoint> points, double x_max);

}  // namespace hetmm
