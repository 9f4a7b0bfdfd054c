#include "calens/ensemble.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "calens/error.hpp"
#include "calens/kernels.hpp"

namespace calens {

namespace {

struct StrategyName {
  EnsembleStrategy strategy;
  std::string_view name;
};

constexpr StrategyName kNames[] = {
    {EnsembleStrategy::logits, "logits"},
    {EnsembleStrategy::probs, "probs"},
    {EnsembleStrategy::tuned_logits, "tuned-logits"},
    {EnsembleStrategy::tuned_probs, "tuned-probs"},
    {EnsembleStrategy::calibrated_logits, "calibrated-logits"},
    {EnsembleStrategy::calibrated_probs, "calibrated-probs"},
    {EnsembleStrategy::calibrated_logits_marginal, "calibrated-logits-marginal"},
};

// log(exp(a) + exp(b)) without overflow; finite for finite inputs.
double log_add_exp(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

void check_shapes(const ScoreSet& a, const ScoreSet& b) {
  require(a.rows() == b.rows() && a.classes() == b.classes(), ErrorKind::shape,
          "score sets differ in shape: " + std::to_string(a.rows()) + "x" + std::to_string(a.classes()) + " vs " +
              std::to_string(b.rows()) + "x" + std::to_string(b.classes()));
}

ScoreSet add_logits(const ScoreSet& a, const ScoreSet& b, double wa, double wb) {
  RowMatrix out(a.rows(), a.classes());
  const auto x = a.values();
  const auto y = b.values();
  auto o = out.values();
  const auto n = static_cast<std::int64_t>(o.size());
  if (wa == 1.0 && wb == 1.0) {
#pragma omp parallel for schedule(static) if (n >= 16384)
    for (std::int64_t i = 0; i < n; ++i) o[i] = x[i] + y[i];
  } else {
#pragma omp parallel for schedule(static) if (n >= 16384)
    for (std::int64_t i = 0; i < n; ++i) o[i] = wa * x[i] + wb * y[i];
  }
  return ScoreSet(std::move(out));
}

// log(wa * softmax(a) + wb * softmax(b)) evaluated in log space.
ScoreSet add_probs(const ScoreSet& a, const ScoreSet& b, double wa, double wb) {
  RowMatrix la = log_softmax_rows(a);
  if (wb == 0.0) return ScoreSet(std::move(la));
  RowMatrix lb = log_softmax_rows(b);
  if (wa == 0.0) return ScoreSet(std::move(lb));
  const double lwa = std::log(wa);
  const double lwb = std::log(wb);
  auto o = la.values();
  const auto y = lb.values();
  const auto n = static_cast<std::int64_t>(o.size());
#pragma omp parallel for schedule(static) if (n >= 16384)
  for (std::int64_t i = 0; i < n; ++i) o[i] = log_add_exp(lwa + o[i], lwb + y[i]);
  return ScoreSet(std::move(la));
}

bool on_grid(double alpha) {
  for (double g : weight_grid())
    if (std::abs(alpha - g) <= 1e-12) return true;
  return false;
}

}  // namespace

std::string_view to_string(EnsembleStrategy s) {
  for (const auto& e : kNames)
    if (e.strategy == s) return e.name;
  return "unknown";
}

std::optional<EnsembleStrategy> parse_strategy(std::string_view name) {
  for (const auto& e : kNames)
    if (e.name == name) return e.strategy;
  return std::nullopt;
}

bool is_tuned(EnsembleStrategy s) {
  return s == EnsembleStrategy::tuned_logits || s == EnsembleStrategy::tuned_probs;
}

bool is_calibrated(EnsembleStrategy s) {
  return s == EnsembleStrategy::calibrated_logits || s == EnsembleStrategy::calibrated_probs ||
         s == EnsembleStrategy::calibrated_logits_marginal;
}

std::vector<double> weight_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

void EnsembleConfig::validate(std::size_t classes) const {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::validation, "ensemble weight must lie in [0, 1]");
  if (is_tuned(strategy))
    require(on_grid(alpha), ErrorKind::validation, "tuned ensemble weight must be one of 0.0, 0.1, ..., 1.0");
  if (!is_calibrated(strategy))
    require(t_std.t == 1.0 && t_rob.t == 1.0, ErrorKind::validation,
            "uncalibrated strategies use unit temperatures");
  require(t_std.t > 0.0 && t_rob.t > 0.0, ErrorKind::validation, "temperatures must be positive");
  require(marginals.classes() == classes, ErrorKind::shape, "class marginals do not match class count");
}

EnsembleConfig make_config(EnsembleStrategy strategy, std::size_t classes) {
  EnsembleConfig cfg;
  cfg.strategy = strategy;
  cfg.marginals = ClassMarginals::uniform(classes);
  return cfg;
}

ScoreSet combine(const ScoreSet& s, const ScoreSet& r, const EnsembleConfig& cfg) {
  check_shapes(s, r);
  cfg.validate(s.classes());
  switch (cfg.strategy) {
    case EnsembleStrategy::logits:
      return add_logits(s, r, 1.0, 1.0);
    case EnsembleStrategy::probs:
      return add_probs(s, r, 1.0, 1.0);
    case EnsembleStrategy::tuned_logits:
      return add_logits(s, r, cfg.alpha, 1.0 - cfg.alpha);
    case EnsembleStrategy::tuned_probs:
      return add_probs(s, r, cfg.alpha, 1.0 - cfg.alpha);
    case EnsembleStrategy::calibrated_logits:
      return add_logits(s.divided(cfg.t_std.t), r.divided(cfg.t_rob.t), 1.0, 1.0);
    case EnsembleStrategy::calibrated_probs:
      return add_probs(s.divided(cfg.t_std.t), r.divided(cfg.t_rob.t), 1.0, 1.0);
    case EnsembleStrategy::calibrated_logits_marginal: {
      RowMatrix out = add_logits(s.divided(cfg.t_std.t), r.divided(cfg.t_rob.t), 1.0, 1.0).matrix();
      const auto m = cfg.marginals.log_probs();
      for (std::size_t i = 0; i < out.rows(); ++i) {
        auto row = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] -= m[j];
      }
      return ScoreSet(std::move(out));
    }
  }
  fail(ErrorKind::unknown_strategy, "unknown ensemble strategy");
}

void require_aligned(const LabeledScores& a, const LabeledScores& b) {
  require(a.rows() == b.rows(), ErrorKind::misaligned,
          "paired sets differ in row count: " + std::to_string(a.rows()) + " vs " + std::to_string(b.rows()));
  require(a.classes() == b.classes(), ErrorKind::shape, "paired sets differ in class count");
  for (std::size_t i = 0; i < a.rows(); ++i)
    require(a.labels[i] == b.labels[i], ErrorKind::misaligned,
            "paired sets disagree on the label of row " + std::to_string(i));
}

double tuned_accuracy(const LabeledScores& std_val, const LabeledScores& rob_val, double alpha, bool probs_space) {
  require_aligned(std_val, rob_val);
  require(std_val.rows() > 0, ErrorKind::empty_input, "cannot tune on an empty validation set");
  auto cfg = make_config(probs_space ? EnsembleStrategy::tuned_probs : EnsembleStrategy::tuned_logits,
                         std_val.classes());
  cfg.alpha = alpha;
  const auto pred = predict(combine(std_val.scores, rob_val.scores, cfg));
  const auto n = std_val.rows();
  return static_cast<double>(n - count_errors(pred, std_val.labels)) / static_cast<double>(n);
}

double tune_weight(const LabeledScores& std_val, const LabeledScores& rob_val, bool probs_space) {
  require_aligned(std_val, rob_val);
  require(std_val.rows() > 0, ErrorKind::empty_input, "cannot tune on an empty validation set");
  const auto grid = weight_grid();
  auto cfg = make_config(probs_space ? EnsembleStrategy::tuned_probs : EnsembleStrategy::tuned_logits,
                         std_val.classes());
  std::size_t best = 0;
  std::size_t best_errors = std::numeric_limits<std::size_t>::max();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    cfg.alpha = grid[g];
    const auto errors = count_errors(predict(combine(std_val.scores, rob_val.scores, cfg)), std_val.labels);
    if (errors < best_errors) {
      best_errors = errors;
      best = g;
    }
  }
  return grid[best];
}

EnsembleConfig build_calibrated_ensemble(const LabeledScores& std_val, const LabeledScores& rob_val,
                                         EnsembleStrategy strategy, const FitOptions& opt) {
  require(is_calibrated(strategy), ErrorKind::usage,
          std::string("strategy ") + std::string(to_string(strategy)) + " is not a calibrated variant");
  require_aligned(std_val, rob_val);
  auto cfg = make_config(strategy, std_val.classes());
  cfg.t_std = fit_temperature(std_val, opt);
  cfg.t_rob = fit_temperature(rob_val, opt);
  if (strategy == EnsembleStrategy::calibrated_logits_marginal)
    cfg.marginals = ClassMarginals::estimate(std_val.labels, std_val.classes());
  cfg.sparse_validation = std_val.rows() < std_val.classes();
  return cfg;
}

EnsembleConfig fit_ensemble(const LabeledScores& std_val, const LabeledScores& rob_val, EnsembleStrategy strategy,
                            const FitOptions& opt) {
  if (is_calibrated(strategy)) return build_calibrated_ensemble(std_val, rob_val, strategy, opt);
  require_aligned(std_val, rob_val);
  auto cfg = make_config(strategy, std_val.classes());
  if (is_tuned(strategy)) cfg.alpha = tune_weight(std_val, rob_val, strategy == EnsembleStrategy::tuned_probs);
  return cfg;
}

MScaleReport mscale_demo(const ScoreSet& std_scores, const ScoreSet& rob_scores, double m_factor) {
  check_shapes(std_scores, rob_scores);
  require(m_factor >= 1.0 && std::isfinite(m_factor), ErrorKind::validation, "m_factor must be >= 1");

  MScaleReport rep;
  rep.m_factor = m_factor;
  rep.rows = std_scores.rows();
  const auto std_pred = predict(std_scores);
  const auto ens_pred = predict(combine(std_scores.scaled(m_factor), rob_scores,
                                        make_config(EnsembleStrategy::logits, std_scores.classes())));
  rep.agree_with_std = rep.rows - count_errors(ens_pred, std_pred);
  rep.fraction_equal_std = rep.rows == 0 ? 1.0 : static_cast<double>(rep.agree_with_std) / static_cast<double>(rep.rows);

  // Row i follows std once M * (s_j* - s_j) beats r_j - r_j* for every j != j*.
  rep.row_thresholds.resize(rep.rows);
  rep.threshold = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.rows; ++i) {
    const auto s = std_scores.row(i);
    const auto r = rob_scores.row(i);
    const auto top = static_cast<std::size_t>(std_pred[i]);
    double th = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == top) continue;
      const double ds = s[top] - s[j];
      const double dr = r[j] - r[top];
      if (ds > 0.0)
        th = std::max(th, dr / ds);
      else if (dr > 0.0)  // tie in std; only rob can break it and it breaks it the wrong way
        th = std::numeric_limits<double>::infinity();
    }
    rep.row_thresholds[i] = th;
    rep.threshold = std::max(rep.threshold, th);
  }
  if (rep.rows == 0) rep.threshold = 0.0;
  return rep;
}

}  // namespace calens
