#include "calens/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "calens/error.hpp"
#include "calens/kernels.hpp"

namespace calens {

namespace {

std::vector<double> row_confidences(const ScoreSet& s, double t) {
  std::vector<double> conf(s.rows());
  kernels::omp::max_softmax_rows(s.values(), s.classes(), t, conf);
  return conf;
}

}  // namespace

double average_confidence(const ScoreSet& s, double t) {
  require(!s.empty(), ErrorKind::empty_input, "average confidence of an empty score set is undefined");
  require(t > 0.0 && std::isfinite(t), ErrorKind::validation, "temperature must be positive and finite");
  const auto conf = row_confidences(s, t);
  return kernels::pairwise_sum(conf) / static_cast<double>(conf.size());
}

double average_confidence(const ScoreSet& s, const TemperatureScale& t) { return average_confidence(s, t.t); }

TemperatureScale fit_temperature_to_target(const ScoreSet& s, double target, const FitOptions& opt) {
  require(!s.empty(), ErrorKind::empty_input, "cannot fit a temperature on an empty score set");
  require(opt.tol > 0.0, ErrorKind::validation, "fit tolerance must be positive");
  require(std::isfinite(target), ErrorKind::validation, "confidence target must be finite");

  using TS = TemperatureScale;
  const double conf_lo_t = average_confidence(s, TS::kMin);  // most confident end
  const double conf_hi_t = average_confidence(s, TS::kMax);  // least confident end
  if (target >= conf_lo_t) return {TS::kMin, target - conf_lo_t > opt.tol};
  if (target <= conf_hi_t) return {TS::kMax, conf_hi_t - target > opt.tol};

  // Invariant: conf(lo) > target > conf(hi). Bisection in log t, until the
  // bracket stops shrinking.
  double lo = std::log(TS::kMin);
  double hi = std::log(TS::kMax);
  double best_t = 1.0;
  double best_gap = INFINITY;
  for (int step = 0; step < opt.max_steps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double t = std::exp(mid);
    const double gap = average_confidence(s, t) - target;
    if (std::abs(gap) < best_gap) {
      best_gap = std::abs(gap);
      best_t = t;
    }
    if (gap == 0.0) break;
    if (gap > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return {best_t, false};
}

TemperatureScale fit_temperature(const LabeledScores& d, const FitOptions& opt) {
  require(d.rows() > 0, ErrorKind::empty_input, "cannot fit a temperature on an empty dataset");
  const double acc = accuracy(d);
  if (acc == 0.0) return {TemperatureScale::kMax, true};
  return fit_temperature_to_target(d.scores, acc, opt);
}

std::vector<double> ReliabilityReport::bin_edges() const {
  std::vector<double> edges;
  if (bins.empty()) return edges;
  edges.push_back(bins.front().lower);
  for (const auto& b : bins) edges.push_back(b.upper);
  return edges;
}

double ReliabilityReport::recompute_ece() const {
  if (rows == 0) return 0.0;
  double e = 0.0;
  for (const auto& b : bins)
    if (b.count > 0)
      e += static_cast<double>(b.count) / static_cast<double>(rows) * std::abs(b.accuracy - b.mean_confidence);
  return e;
}

ReliabilityReport ece(const LabeledScores& d, const TemperatureScale& t, std::size_t bins) {
  require(d.rows() > 0, ErrorKind::empty_input, "ECE of an empty dataset is undefined");
  require(bins >= 1, ErrorKind::validation, "ECE needs at least one bin");

  const auto conf = row_confidences(d.scores, t.t);
  const auto pred = predict(d.scores);
  const double nb = static_cast<double>(bins);

  std::vector<std::vector<double>> bin_conf(bins);
  std::vector<std::size_t> bin_correct(bins, 0);
  for (std::size_t i = 0; i < conf.size(); ++i) {
    // Bin b holds (b/B, (b+1)/B].
    auto b = static_cast<std::ptrdiff_t>(std::ceil(conf[i] * nb)) - 1;
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    bin_conf[static_cast<std::size_t>(b)].push_back(conf[i]);
    bin_correct[static_cast<std::size_t>(b)] += (pred[i] == d.labels[i]);
  }

  ReliabilityReport r;
  r.rows = d.rows();
  r.bins.resize(bins);
  std::size_t correct = 0;
  for (std::size_t b = 0; b < bins; ++b) {
    auto& out = r.bins[b];
    out.lower = static_cast<double>(b) / nb;
    out.upper = static_cast<double>(b + 1) / nb;
    out.count = bin_conf[b].size();
    correct += bin_correct[b];
    if (out.count == 0) continue;
    out.mean_confidence = kernels::pairwise_sum(bin_conf[b]) / static_cast<double>(out.count);
    out.accuracy = static_cast<double>(bin_correct[b]) / static_cast<double>(out.count);
  }
  r.ece = r.recompute_ece();
  r.mean_confidence = kernels::pairwise_sum(conf) / static_cast<double>(conf.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.rows);
  return r;
}

}  // namespace calens
