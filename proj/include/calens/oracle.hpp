#pragma once

// Exact finite instances: a joint distribution over (standard score, robust score,
// label) with both models calibrated and conditionally independent given the label.

#include <cstddef>
#include <vector>

#include "calens/core.hpp"
#include "calens/verdict.hpp"

namespace calens {

class JointTable {
 public:
  using Support = std::vector<std::vector<double>>;

  // Validates normalization, conditional independence, and calibration of both
  // score coordinates. probs is indexed [(s_idx * |R| + r_idx) * K + y].
  static JointTable from_probabilities(std::size_t classes, Support s_values, Support r_values,
                                       std::vector<double> probs);

  std::size_t classes() const noexcept { return classes_; }
  const Support& s_values() const noexcept { return s_values_; }
  const Support& r_values() const noexcept { return r_values_; }
  std::size_t cells() const noexcept { return s_values_.size() * r_values_.size(); }

  double p(std::size_t s_idx, std::size_t r_idx, std::size_t y) const {
    return probs_[(s_idx * r_values_.size() + r_idx) * classes_ + y];
  }
  // Cell c = s_idx * |R| + r_idx.
  double p(std::size_t cell, std::size_t y) const { return probs_[cell * classes_ + y]; }
  double cell_mass(std::size_t cell) const;
  std::vector<double> conditional(std::size_t cell) const;  // P(y | s, r)
  std::vector<double> label_marginal() const;               // P(y)
  std::vector<double> s_weights() const;                    // P(s)
  std::vector<double> r_weights() const;                    // P(r)
  const std::vector<double>& probabilities() const noexcept { return probs_; }

 private:
  JointTable() = default;
  std::size_t classes_ = 0;
  Support s_values_, r_values_;
  std::vector<double> probs_;
};

// Builds the joint consistent with the label marginals, calibrated per-model
// conditionals, and conditional independence. Score weights solve
// sum_s P(s) softmax(s)_y = P(y); throws infeasible when no positive solution exists.
JointTable make_joint_table(std::size_t classes, const JointTable::Support& s_support,
                            const JointTable::Support& r_support, const ClassMarginals& marginals);

// Predicted class per cell.
using CombinerTable = std::vector<int>;

double bayes_error(const JointTable& t);

// sum over cells of P(s, r) (1 - P(y = h | s, r)).
double combiner_error(const JointTable& t, const CombinerTable& h);
// sum over (s, r, y) of P(s, r, y) [y != h(s, r)], the direct misclassification probability.
double combiner_error_direct(const JointTable& t, const CombinerTable& h);

// argmax of s + r - m per cell, with m the table's log label marginals.
CombinerTable ensemble_combiner(const JointTable& t);

struct LemmaOptions {
  bool drop_marginal = false;  // negative control: compare against softmax(s + r)
  double tol = 1e-9;
};

VerdictReport check_lemma_softmax(const JointTable& t, const LemmaOptions& opt = {});

inline constexpr std::size_t kMaxExhaustiveCells = 12;
VerdictReport check_prop1_exhaustive(const JointTable& t);

VerdictReport check_corollary_trivial_bound(const JointTable& t);

}  // namespace calens
