#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace calens {

// Dense row-major N x K block of doubles. No validation; see ScoreSet for that.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  RowMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  friend bool operator==(const RowMatrix&, const RowMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using ProbabilityMatrix = RowMatrix;

// N x K raw (pre-softmax) scores. Every entry finite, K >= 2, N >= 0.
class ScoreSet {
 public:
  ScoreSet() = default;
  explicit ScoreSet(RowMatrix scores);
  ScoreSet(std::size_t rows, std::size_t classes, std::vector<double> values);
  static ScoreSet from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return m_.rows(); }
  std::size_t classes() const noexcept { return m_.cols(); }
  bool empty() const noexcept { return m_.rows() == 0; }

  std::span<const double> row(std::size_t i) const { return m_.row(i); }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
  std::span<const double> values() const noexcept { return m_.values(); }
  const RowMatrix& matrix() const noexcept { return m_; }

  // Every entry multiplied by c (c finite).
  ScoreSet scaled(double c) const;
  // Every entry divided by t (t > 0). Division by 1.0 returns bitwise-equal scores.
  ScoreSet divided(double t) const;

  friend bool operator==(const ScoreSet&, const ScoreSet&) = default;

 private:
  RowMatrix m_;
};

// Scores with one class index per row and an optional group id per row.
struct LabeledScores {
  LabeledScores() = default;
  LabeledScores(ScoreSet s, std::vector<int> y, std::optional<std::vector<int>> g = std::nullopt);

  std::size_t rows() const noexcept { return scores.rows(); }
  std::size_t classes() const noexcept { return scores.classes(); }

  ScoreSet scores;
  std::vector<int> labels;
  std::optional<std::vector<int>> groups;

  friend bool operator==(const LabeledScores&, const LabeledScores&) = default;
};

// Per-class log prior m, with exp(m) a probability vector.
class ClassMarginals {
 public:
  static ClassMarginals uniform(std::size_t classes);
  static ClassMarginals from_probabilities(std::span<const double> probs);
  static ClassMarginals from_log_probs(std::vector<double> log_probs);
  // Label frequencies with add-one smoothing: (count_y + 1) / (N + K).
  static ClassMarginals estimate(std::span<const int> labels, std::size_t classes);

  std::size_t classes() const noexcept { return log_probs_.size(); }
  std::span<const double> log_probs() const noexcept { return log_probs_; }
  std::vector<double> probabilities() const;
  bool is_uniform(double tol = 1e-12) const;

  friend bool operator==(const ClassMarginals&, const ClassMarginals&) = default;

 private:
  explicit ClassMarginals(std::vector<double> m);
  std::vector<double> log_probs_;
};

ProbabilityMatrix softmax_rows(const ScoreSet& s);
RowMatrix log_softmax_rows(const ScoreSet& s);

// Smallest index attaining each row's maximum.
std::vector<int> predict(const ScoreSet& s);

std::size_t count_errors(std::span<const int> predictions, std::span<const int> labels);
double error_rate(std::span<const int> predictions, std::span<const int> labels);
double error_rate(const LabeledScores& d);
double accuracy(const LabeledScores& d);

// Accuracy of the worst (label, group) cell; requires groups.
double worst_group_accuracy(std::span<const int> predictions, const LabeledScores& d);

}  // namespace calens
