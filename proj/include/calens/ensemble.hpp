#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "calens/calibration.hpp"
#include "calens/core.hpp"

namespace calens {

enum class EnsembleStrategy {
  logits,                      // std + rob
  probs,                       // log(softmax(std) + softmax(rob))
  tuned_logits,                // a*std + (1-a)*rob
  tuned_probs,                 // log(a*softmax(std) + (1-a)*softmax(rob))
  calibrated_logits,           // std/T_std + rob/T_rob
  calibrated_probs,            // log(softmax(std/T_std) + softmax(rob/T_rob))
  calibrated_logits_marginal,  // std/T_std + rob/T_rob - m
};

inline constexpr EnsembleStrategy kAllStrategies[] = {
    EnsembleStrategy::logits,           EnsembleStrategy::probs,
    EnsembleStrategy::tuned_logits,     EnsembleStrategy::tuned_probs,
    EnsembleStrategy::calibrated_logits, EnsembleStrategy::calibrated_probs,
    EnsembleStrategy::calibrated_logits_marginal,
};

// Kebab-case names used on the command line and in reports.
std::string_view to_string(EnsembleStrategy s);
std::optional<EnsembleStrategy> parse_strategy(std::string_view name);

bool is_tuned(EnsembleStrategy s);
bool is_calibrated(EnsembleStrategy s);

// The tuned-weight grid {0.0, 0.1, ..., 1.0}.
std::vector<double> weight_grid();

struct EnsembleConfig {
  EnsembleStrategy strategy = EnsembleStrategy::calibrated_probs;
  TemperatureScale t_std;
  TemperatureScale t_rob;
  double alpha = 0.5;
  ClassMarginals marginals = ClassMarginals::uniform(2);
  // Set when the calibration split had fewer rows than classes.
  bool sparse_validation = false;

  // Checks grid membership of alpha for tuned strategies, unit temperatures for
  // uncalibrated ones, and marginal size against `classes`.
  void validate(std::size_t classes) const;
};

EnsembleConfig make_config(EnsembleStrategy strategy, std::size_t classes);

ScoreSet combine(const ScoreSet& std_scores, const ScoreSet& rob_scores, const EnsembleConfig& cfg);

// Accuracy of the tuned combination at weight `alpha`.
double tuned_accuracy(const LabeledScores& std_val, const LabeledScores& rob_val, double alpha, bool probs_space);

// First grid weight, scanning upward from 0.0, that maximizes ID validation accuracy.
double tune_weight(const LabeledScores& std_val, const LabeledScores& rob_val, bool probs_space);

// Fit T_std and T_rob on ID validation data; estimate class marginals
// for the marginal-corrected variant. `strategy` must be a calibrated variant.
EnsembleConfig build_calibrated_ensemble(const LabeledScores& std_val, const LabeledScores& rob_val,
                                         EnsembleStrategy strategy, const FitOptions& opt = {});

// Any strategy: calibrated ones go through build_calibrated_ensemble, tuned ones
// through tune_weight, plain ones need no fitting.
EnsembleConfig fit_ensemble(const LabeledScores& std_val, const LabeledScores& rob_val, EnsembleStrategy strategy,
                            const FitOptions& opt = {});

struct MScaleReport {
  double m_factor = 1.0;
  std::size_t rows = 0;
  std::size_t agree_with_std = 0;
  double fraction_equal_std = 0.0;
  // Smallest factor beyond which every row's Logits ensemble follows std.
  // Infinite when some row has a tie at its std maximum.
  double threshold = 0.0;
  std::vector<double> row_thresholds;
};

// Logits ensemble of (m_factor * std, rob): how often it just repeats std.
MScaleReport mscale_demo(const ScoreSet& calibrated_std, const ScoreSet& calibrated_rob, double m_factor);

// Throws misaligned when the two validation sets do not share labels.
void require_aligned(const LabeledScores& a, const LabeledScores& b);

}  // namespace calens
