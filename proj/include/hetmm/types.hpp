#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace hetmm {

using Index = Eigen::Index;

/// Row-major dense storage. For feature data rows are pixels (y * W + x) and
/// columns are channels; for anomaly maps rows are image rows.
template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using AnomalyMapT = RowMatrix<Scalar>;
using AnomalyMap = AnomalyMapT<float>;

struct Shape {
  Index height = 0;
  Index width = 0;
  Index channels = 0;

  Index pixels() const { return height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// One layer's feature grid for one image. Pixel (x, y) lives in row
/// y * width + x of data(), channel-fastest, matching the FTN payload order.
template <typename Scalar>
class FeatureMapT {
 public:
  using Matrix = RowMatrix<Scalar>;

  FeatureMapT() = default;
  FeatureMapT(int layer_id, Index height, Index width, Index channels)
      : layer_id_(layer_id), height_(height), width_(width),
        data_(Matrix::Zero(height * width, channels)) {}
  FeatureMapT(int layer_id, Index height, Index width, Matrix data)
      : layer_id_(layer_id), height_(height), width_(width), data_(std::move(data)) {
    if (height_ < 1 || width_ < 1 || data_.cols() < 1 || data_.rows() != height_ * width_)
      throw std::invalid_argument("FeatureMap: data does not match " + std::to_string(height_) +
                                  "x" + std::to_string(width_));
  }

  int layer_id() const { return layer_id_; }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index channels() const { return data_.cols(); }
  Index pixels() const { return height_ * width_; }
  Shape shape() const { return {height_, width_, data_.cols()}; }

  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }

  auto pixel(Index x, Index y) const { return data_.row(y * width_ + x); }
  auto pixel(Index x, Index y) { return data_.row(y * width_ + x); }

  template <typename Other>
  FeatureMapT<Other> cast() const {
    return FeatureMapT<Other>(layer_id_, height_, width_, data_.template cast<Other>());
  }

  friend bool operator==(const FeatureMapT& a, const FeatureMapT& b) {
    return a.layer_id_ == b.layer_id_ && a.height_ == b.height_ && a.width_ == b.width_ &&
           a.data_.cols() == b.data_.cols() && a.data_ == b.data_;
  }

 private:
  int layer_id_ = 0;
  Index height_ = 0;
  Index width_ = 0;
  Matrix data_;
};

using FeatureMap = FeatureMapT<float>;

/// Odd-sized matching window: m columns wide, n rows tall.
struct PatchSpec {
  int m = 1;
  int n = 1;

  PatchSpec() = default;
  PatchSpec(int width, int height);
  static PatchSpec square(int size) { return {size, size}; }

  int half_width() const { return m / 2; }
  int half_height() const { return n / 2; }
  friend bool operator==(const PatchSpec&, const PatchSpec&) = default;
};

/// Prototype selection parameters.
struct PtsConfig {
  int k = 60;
  int min_samples = 5;
  double xi = 0.05;

  void validate(Index sheet_count) const;
  friend bool operator==(const PtsConfig&, const PtsConfig&) = default;
};

// Errors. ConfigError maps to CLI exit code 2, DataError to exit code 3.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ShapeMismatchError : public DataError {
 public:
  using DataError::DataError;
};

class LockConflictError : public DataError {
 public:
  using DataError::DataError;
};

class SelectionExhaustedError : public Error {
 public:
  SelectionExhaustedError() : Error("selection exhausted: no unselected candidates remain") {}
};

}  // namespace hetmm
