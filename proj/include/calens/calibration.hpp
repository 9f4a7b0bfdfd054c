#pragma once

#include <cstddef>
#include <vector>

#include "calens/core.hpp"

namespace calens {

// Positive divisor applied to raw scores before the softmax.
struct TemperatureScale {
  static constexpr double kMin = 1e-3;
  static constexpr double kMax = 1e3;

  double t = 1.0;
  bool clamped = false;  // the fit stopped at kMin or kMax

  static TemperatureScale identity() { return {}; }
  friend bool operator==(const TemperatureScale&, const TemperatureScale&) = default;
};

struct FitOptions {
  double tol = 1e-6;          // allowed |confidence - accuracy| gap
  int max_steps = 200;        // bisection steps
};

struct ReliabilityBin {
  double lower = 0.0;  // exclusive
  double upper = 0.0;  // inclusive
  std::size_t count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct ReliabilityReport {
  std::vector<ReliabilityBin> bins;
  double ece = 0.0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
  std::size_t rows = 0;

  std::vector<double> bin_edges() const;
  // sum_b (n_b / N) |acc_b - conf_b| recomputed from the bins.
  double recompute_ece() const;
};

// Mean over rows of max_j softmax(row / t)_j.
double average_confidence(const ScoreSet& s, const TemperatureScale& t);
double average_confidence(const ScoreSet& s, double t);

// Bisection for the temperature whose average confidence equals `target`.
// Confidence falls as t grows, so the search moves toward larger t while the
// model is too confident. Targets outside the reachable range clamp to a bound.
TemperatureScale fit_temperature_to_target(const ScoreSet& s, double target, const FitOptions& opt = {});

// Confidence-matching fit: target is the ID accuracy of d.
TemperatureScale fit_temperature(const LabeledScores& d, const FitOptions& opt = {});
inline TemperatureScale fit_temperature(const LabeledScores& d, double tol) {
  return fit_temperature(d, FitOptions{.tol = tol});
}

// Equal-width bins over (0, 1], right-inclusive. Empty bins contribute 0.
ReliabilityReport ece(const LabeledScores& d, const TemperatureScale& t, std::size_t bins = 10);

}  // namespace calens
