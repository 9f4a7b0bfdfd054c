#include "calens/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "calens/error.hpp"
#include "calens/kernels.hpp"

namespace calens {

namespace {

constexpr double kTableTol = 1e-12;
constexpr double kConstraintTol = 1e-10;

std::vector<double> softmax_of(const std::vector<double>& x) {
  std::vector<double> out(x.size());
  kernels::softmax_row(x, out);
  return out;
}

void validate_support(const JointTable::Support& sup, std::size_t k, const char* name) {
  require(!sup.empty(), ErrorKind::validation, std::string(name) + " support is empty");
  for (std::size_t i = 0; i < sup.size(); ++i) {
    require(sup[i].size() == k, ErrorKind::shape,
            std::string(name) + " support point " + std::to_string(i) + " has the wrong length");
    for (double v : sup[i])
      require(std::isfinite(v), ErrorKind::validation, std::string(name) + " support has a non-finite entry");
    for (std::size_t j = 0; j < i; ++j)
      require(sup[i] != sup[j], ErrorKind::validation,
              std::string(name) + " support points " + std::to_string(j) + " and " + std::to_string(i) +
                  " are identical");
  }
}

// Solves sum_i w_i softmax(support_i) = p with w > 0.
std::vector<double> solve_weights(const JointTable::Support& sup, const std::vector<double>& p, const char* name) {
  const auto k = static_cast<Eigen::Index>(p.size());
  const auto m = static_cast<Eigen::Index>(sup.size());
  Eigen::MatrixXd a(k, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto col = softmax_of(sup[static_cast<std::size_t>(i)]);
    for (Eigen::Index y = 0; y < k; ++y) a(y, i) = col[static_cast<std::size_t>(y)];
  }
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(p.data(), k);

  Eigen::VectorXd w;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  cod.setThreshold(1e-12);
  w = cod.solve(b);  // unique solution when full column rank, minimum-norm otherwise
  const bool unique = cod.rank() == m;

  const double residual = (a * w - b).lpNorm<Eigen::Infinity>();
  require(residual <= kConstraintTol, ErrorKind::infeasible,
          std::string(name) + " calibration constraint sum_s P(s) softmax(s)_y = P(y) has no solution (residual " +
              std::to_string(residual) + ")");
  for (Eigen::Index i = 0; i < m; ++i)
    require(w(i) > 0.0, ErrorKind::infeasible,
            std::string(name) + " support point " + std::to_string(i) + " needs weight " + std::to_string(w(i)) +
                " <= 0 to satisfy the calibration constraint" +
                (unique ? "" : " (minimum-norm solution of an underdetermined system)"));
  return {w.data(), w.data() + m};
}

}  // namespace

JointTable JointTable::from_probabilities(std::size_t classes, Support s_values, Support r_values,
                                          std::vector<double> probs) {
  require(classes >= 2, ErrorKind::validation, "joint table needs at least 2 classes");
  validate_support(s_values, classes, "standard");
  validate_support(r_values, classes, "robust");
  require(probs.size() == s_values.size() * r_values.size() * classes, ErrorKind::shape,
          "joint table has the wrong number of probabilities");

  JointTable t;
  t.classes_ = classes;
  t.s_values_ = std::move(s_values);
  t.r_values_ = std::move(r_values);
  t.probs_ = std::move(probs);

  double total = 0.0;
  for (double v : t.probs_) {
    require(v >= 0.0 && std::isfinite(v), ErrorKind::validation, "joint probabilities must be non-negative");
    total += v;
  }
  require(std::abs(total - 1.0) <= kTableTol, ErrorKind::validation,
          "joint probabilities sum to " + std::to_string(total));

  const std::size_t ns = t.s_values_.size(), nr = t.r_values_.size(), k = classes;
  const auto py = t.label_marginal();
  // P(s, y) and P(r, y)
  std::vector<double> psy(ns * k, 0.0), pry(nr * k, 0.0);
  for (std::size_t si = 0; si < ns; ++si)
    for (std::size_t ri = 0; ri < nr; ++ri)
      for (std::size_t y = 0; y < k; ++y) {
        psy[si * k + y] += t.p(si, ri, y);
        pry[ri * k + y] += t.p(si, ri, y);
      }

  for (std::size_t si = 0; si < ns; ++si)
    for (std::size_t ri = 0; ri < nr; ++ri)
      for (std::size_t y = 0; y < k; ++y) {
        // P(s, r, y) P(y) = P(s, y) P(r, y)
        const double lhs = t.p(si, ri, y) * py[y];
        const double rhs = psy[si * k + y] * pry[ri * k + y];
        require(std::abs(lhs - rhs) <= kTableTol, ErrorKind::validation,
                "conditional independence fails at cell (" + std::to_string(si) + ", " + std::to_string(ri) +
                    "), class " + std::to_string(y));
      }

  auto check_calibrated = [&](const Support& sup, const std::vector<double>& joint, const char* name) {
    for (std::size_t i = 0; i < sup.size(); ++i) {
      double mass = 0.0;
      for (std::size_t y = 0; y < k; ++y) mass += joint[i * k + y];
      if (mass <= 0.0) continue;
      const auto sm = softmax_of(sup[i]);
      for (std::size_t y = 0; y < k; ++y)
        require(std::abs(joint[i * k + y] / mass - sm[y]) <= kConstraintTol, ErrorKind::validation,
                std::string(name) + " score point " + std::to_string(i) + " is not calibrated for class " +
                    std::to_string(y));
    }
  };
  check_calibrated(t.s_values_, psy, "standard");
  check_calibrated(t.r_values_, pry, "robust");
  return t;
}

double JointTable::cell_mass(std::size_t cell) const {
  double m = 0.0;
  for (std::size_t y = 0; y < classes_; ++y) m += p(cell, y);
  return m;
}

std::vector<double> JointTable::conditional(std::size_t cell) const {
  const double m = cell_mass(cell);
  std::vector<double> out(classes_, 0.0);
  if (m > 0.0)
    for (std::size_t y = 0; y < classes_; ++y) out[y] = p(cell, y) / m;
  return out;
}

std::vector<double> JointTable::label_marginal() const {
  std::vector<double> out(classes_, 0.0);
  for (std::size_t c = 0; c < cells(); ++c)
    for (std::size_t y = 0; y < classes_; ++y) out[y] += p(c, y);
  return out;
}

std::vector<double> JointTable::s_weights() const {
  std::vector<double> out(s_values_.size(), 0.0);
  for (std::size_t si = 0; si < s_values_.size(); ++si)
    for (std::size_t ri = 0; ri < r_values_.size(); ++ri) out[si] += cell_mass(si * r_values_.size() + ri);
  return out;
}

std::vector<double> JointTable::r_weights() const {
  std::vector<double> out(r_values_.size(), 0.0);
  for (std::size_t si = 0; si < s_values_.size(); ++si)
    for (std::size_t ri = 0; ri < r_values_.size(); ++ri) out[ri] += cell_mass(si * r_values_.size() + ri);
  return out;
}

JointTable make_joint_table(std::size_t classes, const JointTable::Support& s_support,
                            const JointTable::Support& r_support, const ClassMarginals& marginals) {
  require(marginals.classes() == classes, ErrorKind::shape, "marginals do not match class count");
  validate_support(s_support, classes, "standard");
  validate_support(r_support, classes, "robust");
  const auto py = marginals.probabilities();
  const auto ws = solve_weights(s_support, py, "standard");
  const auto wr = solve_weights(r_support, py, "robust");

  std::vector<double> probs;
  probs.reserve(s_support.size() * r_support.size() * classes);
  for (std::size_t si = 0; si < s_support.size(); ++si) {
    const auto ps = softmax_of(s_support[si]);
    for (std::size_t ri = 0; ri < r_support.size(); ++ri) {
      const auto pr = softmax_of(r_support[ri]);
      // P(s, r, y) = P(y) P(s | y) P(r | y), P(s | y) = P(s) softmax(s)_y / P(y)
      for (std::size_t y = 0; y < classes; ++y) probs.push_back(ws[si] * ps[y] * wr[ri] * pr[y] / py[y]);
    }
  }
  return JointTable::from_probabilities(classes, s_support, r_support, std::move(probs));
}

double bayes_error(const JointTable& t) {
  double e = 0.0;
  for (std::size_t c = 0; c < t.cells(); ++c) {
    double best = 0.0;
    for (std::size_t y = 0; y < t.classes(); ++y) best = std::max(best, t.p(c, y));
    e += t.cell_mass(c) - best;
  }
  return e;
}

double combiner_error(const JointTable& t, const CombinerTable& h) {
  require(h.size() == t.cells(), ErrorKind::shape, "combiner must assign a class to every cell");
  double e = 0.0;
  for (std::size_t c = 0; c < t.cells(); ++c) {
    const double mass = t.cell_mass(c);
    if (mass <= 0.0) continue;
    e += mass * (1.0 - t.p(c, static_cast<std::size_t>(h[c])) / mass);
  }
  return e;
}

double combiner_error_direct(const JointTable& t, const CombinerTable& h) {
  require(h.size() == t.cells(), ErrorKind::shape, "combiner must assign a class to every cell");
  double e = 0.0;
  for (std::size_t c = 0; c < t.cells(); ++c)
    for (std::size_t y = 0; y < t.classes(); ++y)
      if (static_cast<int>(y) != h[c]) e += t.p(c, y);
  return e;
}

CombinerTable ensemble_combiner(const JointTable& t) {
  const auto py = t.label_marginal();
  const std::size_t k = t.classes();
  const std::size_t nr = t.r_values().size();
  CombinerTable h(t.cells());
  std::vector<double> z(k);
  for (std::size_t c = 0; c < t.cells(); ++c) {
    const auto& s = t.s_values()[c / nr];
    const auto& r = t.r_values()[c % nr];
    for (std::size_t y = 0; y < k; ++y) z[y] = s[y] + r[y] - std::log(py[y]);
    h[c] = static_cast<int>(kernels::argmax_row(z));
  }
  return h;
}

VerdictReport check_lemma_softmax(const JointTable& t, const LemmaOptions& opt) {
  const auto py = t.label_marginal();
  const std::size_t k = t.classes();
  const std::size_t nr = t.r_values().size();
  std::vector<double> m(k);
  for (std::size_t y = 0; y < k; ++y) m[y] = std::log(py[y]);
  const bool uniform_marginals = ClassMarginals::from_probabilities(py).is_uniform(1e-12);

  auto max_deviation = [&](bool with_marginal, std::optional<std::size_t>& worst_cell) {
    double worst = 0.0;
    std::vector<double> z(k), sm(k);
    for (std::size_t c = 0; c < t.cells(); ++c) {
      if (t.cell_mass(c) <= 0.0) continue;
      const auto& s = t.s_values()[c / nr];
      const auto& r = t.r_values()[c % nr];
      for (std::size_t y = 0; y < k; ++y) z[y] = s[y] + r[y] - (with_marginal ? m[y] : 0.0);
      kernels::softmax_row(z, sm);
      const auto cond = t.conditional(c);
      for (std::size_t y = 0; y < k; ++y) {
        const double d = std::abs(cond[y] - sm[y]);
        if (d > worst) {
          worst = d;
          worst_cell = c;
        }
      }
    }
    return worst;
  };

  VerdictReport rep;
  rep.subject = opt.drop_marginal ? "P(y | s, r) = softmax(s + r) (marginal term dropped)"
                                  : "P(y | s, r) = softmax(s + r - m)";
  {
    std::optional<std::size_t> cell;
    const double dev = max_deviation(!opt.drop_marginal, cell);
    Check c;
    c.name = opt.drop_marginal ? "posterior_matches_softmax_without_marginal" : "posterior_matches_softmax_with_marginal";
    c.passed = dev <= opt.tol;
    c.detail = "max |P(y | s, r) - softmax| over cells and classes";
    if (!c.passed) c.first_violation = cell;
    c.evidence = {{"max_deviation", dev}, {"tolerance", opt.tol}, {"cells", static_cast<double>(t.cells())}};
    rep.checks.push_back(std::move(c));
  }
  if (!opt.drop_marginal) {
    if (uniform_marginals) {
      std::optional<std::size_t> cell;
      const double dev = max_deviation(false, cell);
      Check c;
      c.name = "balanced_form";
      c.passed = dev <= opt.tol;
      c.detail = "uniform marginals: softmax(s + r) also matches";
      if (!c.passed) c.first_violation = cell;
      c.evidence = {{"max_deviation", dev}, {"tolerance", opt.tol}};
      rep.checks.push_back(std::move(c));
    } else {
      rep.notes.push_back("balanced form not checked: label marginals are not uniform");
    }
  }
  return rep;
}

VerdictReport check_prop1_exhaustive(const JointTable& t) {
  const std::size_t cells = t.cells();
  require(cells <= kMaxExhaustiveCells, ErrorKind::size_limit,
          "table has " + std::to_string(cells) + " cells; exhaustive enumeration is capped at " +
              std::to_string(kMaxExhaustiveCells) + " (use the sampled challenger panel instead)");
  const auto k = static_cast<std::uint64_t>(t.classes());
  std::uint64_t total = 1;
  for (std::size_t c = 0; c < cells; ++c) total *= k;

  const auto ens = ensemble_combiner(t);
  const double e_ens = combiner_error(t, ens);
  const double e_bayes = bayes_error(t);

  double best = std::numeric_limits<double>::infinity();
  std::int64_t beaten = 0;
  const auto n = static_cast<std::int64_t>(total);
#pragma omp parallel for schedule(static) reduction(min : best) reduction(+ : beaten)
  for (std::int64_t idx = 0; idx < n; ++idx) {
    CombinerTable h(cells);
    auto code = static_cast<std::uint64_t>(idx);
    for (std::size_t c = 0; c < cells; ++c) {
      h[c] = static_cast<int>(code % k);
      code /= k;
    }
    const double e = combiner_error(t, h);
    best = std::min(best, e);
    if (e + kTableTol < e_ens) ++beaten;
  }

  VerdictReport rep;
  rep.subject = "argmax(s + r - m) has the least error among all combiners";
  Check minimal;
  minimal.name = "ensemble_minimal_over_all_combiners";
  minimal.passed = beaten == 0;
  minimal.detail = "no enumerated combiner has lower error (tolerance 1e-12)";
  minimal.evidence = {{"combiners", static_cast<double>(total)},
                      {"err_ens", e_ens},
                      {"min_err_enumerated", best},
                      {"combiners_beating_ensemble", static_cast<double>(beaten)}};
  rep.checks.push_back(std::move(minimal));

  Check equals;
  equals.name = "ensemble_error_equals_bayes_error";
  equals.passed = std::abs(e_ens - e_bayes) <= kTableTol;
  equals.detail = "|err_ens - bayes_error| <= 1e-12";
  equals.evidence = {{"err_ens", e_ens}, {"bayes_error", e_bayes}};
  rep.checks.push_back(std::move(equals));
  return rep;
}

VerdictReport check_corollary_trivial_bound(const JointTable& t) {
  const auto py = t.label_marginal();
  const double bound = 1.0 - *std::max_element(py.begin(), py.end());
  const double e = bayes_error(t);
  VerdictReport rep;
  rep.subject = "Bayes error is at most one minus the majority-class frequency";
  Check c;
  c.name = "bayes_error_le_majority_bound";
  c.passed = e <= bound + kTableTol;
  c.detail = "bayes_error <= 1 - max_y P(y)";
  c.evidence = {{"bayes_error", e}, {"bound", bound}, {"margin", bound - e}};
  rep.checks.push_back(std::move(c));
  return rep;
}

}  // namespace calens
