#ifndef ZEROONE_CORE_HPP
#define ZEROONE_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

#include "zeroone/parallel.hpp"

namespace zeroone {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
      if (row.size() != m.cols_) throw std::invalid_argument("Matrix::from_rows: ragged rows");
      std::copy(row.begin(), row.end(), m.data_.begin() + static_cast<std::ptrdiff_t>(r * m.cols_));
      ++r;
    }
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const double& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

/// Sign activation: +1 for v >= 0, -1 otherwise. Zero maps to +1 so the
/// output is always one of exactly two values.
inline int sign_activation(double v) {
  if (!std::isfinite(v)) throw std::invalid_argument("sign_activation: non-finite input");
  return v >= 0.0 ? +1 : -1;
}

namespace detail {

// sign_activation without the finiteness check, for inner loops over
// already-validated data.
inline int raw_sign(double v) { return v >= 0.0 ? +1 : -1; }

}  // namespace detail

/// Median with the even-count rule: mean of the two middle order statistics.
inline double median(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
}

/// Binary-class dataset: n rows of d features, labels in {-1, +1}.
/// Immutable after construction and safe to share across threads.
class LabeledDataset {
 public:
  LabeledDataset(Matrix features, std::vector<int> labels)
      : features_(std::move(features)), labels_(std::move(labels)) {
    if (features_.rows() == 0) throw std::invalid_argument("LabeledDataset: no samples");
    if (labels_.size() != features_.rows())
      throw std::invalid_argument("LabeledDataset: label count != sample count");
    if (!all_finite(features_.data()))
      throw std::invalid_argument("LabeledDataset: non-finite feature");
    for (int y : labels_)
      if (y != -1 && y != +1) throw std::invalid_argument("LabeledDataset: label not in {-1,+1}");
  }

  std::size_t size() const { return features_.rows(); }
  std::size_t dim() const { return features_.cols(); }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  std::span<const double> row(std::size_t i) const { return features_.row(i); }
  int label(std::size_t i) const { return labels_[i]; }

  std::size_t class_count(int label) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
  }
  bool has_both_classes() const { return class_count(-1) > 0 && class_count(+1) > 0; }

  LabeledDataset subset(std::span<const std::size_t> indices) const {
    Matrix f(indices.size(), dim());
    std::vector<int> y(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
      const auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), f.row(i).begin());
      y[i] = labels_[indices[i]];
    }
    return LabeledDataset(std::move(f), std::move(y));
  }

 private:
  Matrix features_;
  std::vector<int> labels_;
};

/// Single-hidden-layer network with sign activations. Weights W are d x h
/// (column j = hidden node j); thresholds are stored as additive biases,
/// i.e. a node fires on sign(projection + bias), so a threshold t from the
/// usual formulation is stored as bias = -t.
struct SignNetwork {
  Matrix hidden_weights;               // d x h
  std::vector<double> hidden_biases;   // h
  std::vector<double> output_weights;  // h
  double output_bias = 0.0;
  bool binary_mode = false;

  std::size_t input_dim() const { return hidden_weights.rows(); }
  std::size_t hidden_nodes() const { return hidden_weights.cols(); }

  void validate() const {
    const std::size_t h = hidden_nodes();
    if (h == 0 || input_dim() == 0) throw std::invalid_argument("SignNetwork: empty layer");
    if (hidden_biases.size() != h || output_weights.size() != h)
      throw std::invalid_argument("SignNetwork: inconsistent dimensions");
    if (!all_finite(hidden_weights.data()) || !all_finite(hidden_biases) ||
        !all_finite(output_weights) || !std::isfinite(output_bias))
      throw std::invalid_argument("SignNetwork: non-finite parameter");
    if (binary_mode) {
      auto binary = [](double w) { return w == 1.0 || w == -1.0; };
      if (!std::all_of(hidden_weights.data().begin(), hidden_weights.data().end(), binary) ||
          !std::all_of(output_weights.begin(), output_weights.end(), binary))
        throw std::invalid_argument("SignNetwork: binary_mode weight outside {-1,+1}");
    }
  }

  friend bool operator==(const SignNetwork&, const SignNetwork&) = default;
};

/// Projection of x onto hidden node j, before the bias.
inline double node_projection(const SignNetwork& net, std::size_t j, std::span<const double> x) {
  const std::size_t d = net.input_dim();
  double acc = 0.0;
  for (std::size_t i = 0; i < d; ++i) acc += net.hidden_weights(i, j) * x[i];
  return acc;
}

/// Signs of all hidden nodes for one input.
inline std::vector<int> hidden_forward(const SignNetwork& net, std::span<const double> x) {
  if (x.size() != net.input_dim())
    throw std::invalid_argument("hidden_forward: input dimension mismatch");
  std::vector<int> signs(net.hidden_nodes());
  for (std::size_t j = 0; j < signs.size(); ++j)
    signs[j] = sign_activation(node_projection(net, j, x) + net.hidden_biases[j]);
  return signs;
}

/// Network prediction in {-1, +1}.
inline int predict(const SignNetwork& net, std::span<const double> x) {
  const std::vector<int> signs = hidden_forward(net, x);
  double acc = net.output_bias;
  for (std::size_t j = 0; j < signs.size(); ++j) acc += net.output_weights[j] * signs[j];
  return sign_activation(acc);
}

/// Exact count of misclassified samples.
inline std::uint64_t zero_one_mismatches(const SignNetwork& net, const LabeledDataset& data) {
  if (data.dim() != net.input_dim())
    throw std::invalid_argument("zero_one_mismatches: dataset dimension mismatch");
  const std::size_t h = net.hidden_nodes();
  return parallel_count(data.size(), [&](std::size_t i) -> std::uint64_t {
    const auto x = data.row(i);
    double acc = net.output_bias;
    for (std::size_t j = 0; j < h; ++j) {
      const int s = detail::raw_sign(node_projection(net, j, x) + net.hidden_biases[j]);
      acc += net.output_weights[j] * s;
    }
    return detail::raw_sign(acc) != data.label(i) ? 1u : 0u;
  });
}

/// Fraction of misclassified samples; the mismatch count is exact integer
/// arithmetic divided once at the end.
inline double zero_one_loss(const SignNetwork& net, const LabeledDataset& data) {
  return static_cast<double>(zero_one_mismatches(net, data)) / static_cast<double>(data.size());
}

}  // namespace zeroone

#endif  // ZEROONE_CORE_HPP
