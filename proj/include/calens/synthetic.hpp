#pragma once

// Stylized two-model world. Each model sees its own latent feature, drawn from an
// isotropic Gaussian around a per-class mean and independently of the other
// model's feature given the label. A model's score is its exact log-posterior
// under a uniform prior, so both models are calibrated in-distribution.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "calens/core.hpp"
#include "calens/verdict.hpp"

namespace calens {

struct LatentModel {
  RowMatrix means;     // K x d, row y is the class-y mean
  double sigma = 1.0;  // shared isotropic spread
};

struct WorldSpec {
  std::size_t classes = 2;
  LatentModel std_model;
  LatentModel rob_model;
  std::uint64_t seed = 0;

  // Means at separation * e_y in R^K for each model.
  static WorldSpec symmetric(std::size_t classes, double std_separation, double rob_separation,
                             std::uint64_t seed, double sigma = 1.0);

  void validate() const;
  // True when each model's class means have a Gram matrix of the form aI + bJ,
  // so every label permutation is a symmetry of the world.
  bool label_symmetric(double tol = 1e-12) const;
};

struct MissingSpurious {
  friend bool operator==(const MissingSpurious&, const MissingSpurious&) = default;
};
struct Suppressed {
  double tau = 1.0;
  friend bool operator==(const Suppressed&, const Suppressed&) = default;
};
struct Anticorrelated {
  double alpha = 1.0;
  double beta = 1.0;
  friend bool operator==(const Anticorrelated&, const Anticorrelated&) = default;
};
using BaseShift = std::variant<MissingSpurious, Suppressed, Anticorrelated>;
// Row-level mixture; components cannot themselves be mixtures.
struct Mixture {
  double weight = 0.5;  // probability of component a
  BaseShift a;
  BaseShift b;
  friend bool operator==(const Mixture&, const Mixture&) = default;
};
using ShiftSpec = std::variant<MissingSpurious, Suppressed, Anticorrelated, Mixture>;

void validate(const ShiftSpec& shift);
// missing | suppressed:tau=X | anticorrelated:alpha=X,beta=Y | mix:w=X,a=(SPEC),b=(SPEC)
std::string to_string(const ShiftSpec& shift);
ShiftSpec parse_shift(std::string_view text);

enum class Regime : std::uint8_t { id, missing, suppressed, anticorrelated };
std::string_view to_string(Regime r);

struct SampledShiftSet {
  ScoreSet std_scores;
  ScoreSet rob_scores;
  std::vector<int> labels;
  RowMatrix exact_conditionals;  // label posterior each row was drawn from
  std::vector<Regime> regimes;   // which regime produced each row
  bool label_symmetric = false;  // copied from the world

  std::size_t rows() const noexcept { return labels.size(); }
  LabeledScores std_labeled() const { return {std_scores, labels}; }
  LabeledScores rob_labeled() const { return {rob_scores, labels}; }
};

struct SampleOptions {
  // Experimental: added to the OOD label logits, shifting class marginals away
  // from the ID ones. Nothing is asserted about sets drawn with it.
  std::optional<std::vector<double>> label_log_shift;
};

SampledShiftSet sample_id(const WorldSpec& w, std::size_t n);
SampledShiftSet sample_ood(const WorldSpec& w, const ShiftSpec& shift, std::size_t n, const SampleOptions& opt = {});

// E[1 - P(Y = pred | z)] over the recorded posteriors.
double expected_error(const RowMatrix& posteriors, std::span<const int> predictions);

struct VerifyOptions {
  std::uint64_t challenger_seed = 0x5eed;  // random-mixer challenger
  double sigma_slack = 3.0;                // Monte Carlo slack in binomial standard errors
};

enum class Proposition { id_optimal = 1, best_of_both = 2, anticorrelated = 3 };

VerdictReport verify_proposition(const SampledShiftSet& set, Proposition which, const VerifyOptions& opt = {});

}  // namespace calens
