#include "calens/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "calens/error.hpp"
#include "calens/kernels.hpp"

namespace calens {

RowMatrix::RowMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require(data_.size() == rows_ * cols_, ErrorKind::shape,
          "matrix data has " + std::to_string(data_.size()) + " entries, expected " +
              std::to_string(rows_ * cols_));
}

ScoreSet::ScoreSet(RowMatrix scores) : m_(std::move(scores)) {
  require(m_.cols() >= 2, ErrorKind::validation, "score set needs at least 2 classes");
  const auto v = m_.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    require(std::isfinite(v[i]), ErrorKind::validation,
            "non-finite score at row " + std::to_string(i / m_.cols()) + ", class " +
                std::to_string(i % m_.cols()));
}

ScoreSet::ScoreSet(std::size_t rows, std::size_t classes, std::vector<double> values)
    : ScoreSet(RowMatrix(rows, classes, std::move(values))) {}

ScoreSet ScoreSet::from_rows(const std::vector<std::vector<double>>& rows) {
  require(!rows.empty(), ErrorKind::empty_input, "from_rows needs at least one row to infer K");
  const std::size_t k = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * k);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].size() == k, ErrorKind::shape,
            "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) + " entries, expected " +
                std::to_string(k));
    flat.insert(flat.end(), rows[i].begin(), rows[i].end());
  }
  return ScoreSet(rows.size(), k, std::move(flat));
}

ScoreSet ScoreSet::scaled(double c) const {
  RowMatrix out = m_;
  for (double& v : out.values()) v *= c;
  return ScoreSet(std::move(out));
}

ScoreSet ScoreSet::divided(double t) const {
  require(t > 0.0 && std::isfinite(t), ErrorKind::validation, "temperature must be positive and finite");
  RowMatrix out = m_;
  for (double& v : out.values()) v /= t;
  return ScoreSet(std::move(out));
}

LabeledScores::LabeledScores(ScoreSet s, std::vector<int> y, std::optional<std::vector<int>> g)
    : scores(std::move(s)), labels(std::move(y)), groups(std::move(g)) {
  require(labels.size() == scores.rows(), ErrorKind::shape,
          "label count " + std::to_string(labels.size()) + " does not match row count " +
              std::to_string(scores.rows()));
  const auto k = static_cast<int>(scores.classes());
  for (std::size_t i = 0; i < labels.size(); ++i)
    require(labels[i] >= 0 && labels[i] < k, ErrorKind::validation,
            "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " outside [0, " +
                std::to_string(k) + ")");
  if (groups)
    require(groups->size() == labels.size(), ErrorKind::shape, "group count does not match row count");
}

// ---------------------------------------------------------------------------

ClassMarginals::ClassMarginals(std::vector<double> m) : log_probs_(std::move(m)) {
  require(log_probs_.size() >= 2, ErrorKind::validation, "class marginals need at least 2 classes");
  double total = 0.0;
  for (double v : log_probs_) {
    require(std::isfinite(v) && v <= 0.0, ErrorKind::validation, "class marginal must lie in (0, 1]");
    total += std::exp(v);
  }
  require(std::abs(total - 1.0) <= 1e-9, ErrorKind::validation,
          "class marginals sum to " + std::to_string(total) + ", expected 1");
}

ClassMarginals ClassMarginals::uniform(std::size_t classes) {
  require(classes >= 2, ErrorKind::validation, "class marginals need at least 2 classes");
  return ClassMarginals(std::vector<double>(classes, -std::log(static_cast<double>(classes))));
}

ClassMarginals ClassMarginals::from_probabilities(std::span<const double> probs) {
  std::vector<double> m;
  m.reserve(probs.size());
  for (double p : probs) {
    require(p > 0.0 && p <= 1.0, ErrorKind::validation, "class marginal must lie in (0, 1]");
    m.push_back(std::log(p));
  }
  return ClassMarginals(std::move(m));
}

ClassMarginals ClassMarginals::from_log_probs(std::vector<double> log_probs) {
  return ClassMarginals(std::move(log_probs));
}

ClassMarginals ClassMarginals::estimate(std::span<const int> labels, std::size_t classes) {
  require(classes >= 2, ErrorKind::validation, "class marginals need at least 2 classes");
  std::vector<double> counts(classes, 1.0);
  for (int y : labels) {
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::validation, "label out of range");
    counts[static_cast<std::size_t>(y)] += 1.0;
  }
  const double total = static_cast<double>(labels.size() + classes);
  std::vector<double> m(classes);
  for (std::size_t y = 0; y < classes; ++y) m[y] = std::log(counts[y] / total);
  return ClassMarginals(std::move(m));
}

std::vector<double> ClassMarginals::probabilities() const {
  std::vector<double> p(log_probs_.size());
  std::transform(log_probs_.begin(), log_probs_.end(), p.begin(), [](double v) { return std::exp(v); });
  return p;
}

bool ClassMarginals::is_uniform(double tol) const {
  const auto [lo, hi] = std::minmax_element(log_probs_.begin(), log_probs_.end());
  return *hi - *lo <= tol;
}

// ---------------------------------------------------------------------------

ProbabilityMatrix softmax_rows(const ScoreSet& s) {
  ProbabilityMatrix out(s.rows(), s.classes());
  kernels::omp::softmax_rows(s.values(), s.classes(), out.values());
  return out;
}

RowMatrix log_softmax_rows(const ScoreSet& s) {
  RowMatrix out(s.rows(), s.classes());
  kernels::omp::log_softmax_rows(s.values(), s.classes(), out.values());
  return out;
}

std::vector<int> predict(const ScoreSet& s) {
  std::vector<int> out(s.rows());
  kernels::omp::argmax_rows(s.values(), s.classes(), out);
  return out;
}

std::size_t count_errors(std::span<const int> predictions, std::span<const int> labels) {
  require(predictions.size() == labels.size(), ErrorKind::shape, "prediction and label counts differ");
  return kernels::omp::count_mismatches(predictions, labels);
}

double error_rate(std::span<const int> predictions, std::span<const int> labels) {
  require(!labels.empty(), ErrorKind::empty_input, "error rate of an empty dataset is undefined");
  return static_cast<double>(count_errors(predictions, labels)) / static_cast<double>(labels.size());
}

double error_rate(const LabeledScores& d) { return error_rate(predict(d.scores), d.labels); }

double accuracy(const LabeledScores& d) {
  require(d.rows() > 0, ErrorKind::empty_input, "accuracy of an empty dataset is undefined");
  const auto n = d.rows();
  return static_cast<double>(n - count_errors(predict(d.scores), d.labels)) / static_cast<double>(n);
}

double worst_group_accuracy(std::span<const int> predictions, const LabeledScores& d) {
  require(d.groups.has_value(), ErrorKind::usage, "worst-group accuracy needs per-row group ids");
  require(d.rows() > 0, ErrorKind::empty_input, "worst-group accuracy of an empty dataset is undefined");
  require(predictions.size() == d.rows(), ErrorKind::shape, "prediction and label counts differ");
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> cells;  // (label, group) -> (correct, total)
  for (std::size_t i = 0; i < d.rows(); ++i) {
    auto& c = cells[{d.labels[i], (*d.groups)[i]}];
    c.first += (predictions[i] == d.labels[i]);
    c.second += 1;
  }
  double worst = 1.0;
  for (const auto& [key, c] : cells)
    worst = std::min(worst, static_cast<double>(c.first) / static_cast<double>(c.second));
  return worst;
}

}  // namespace calens
