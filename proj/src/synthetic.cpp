#include "calens/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include "calens/ensemble.hpp"
#include "calens/error.hpp"
#include "calens/format.hpp"
#include "calens/kernels.hpp"
#include "calens/rng.hpp"

namespace calens {

namespace {

// Stream ids for StreamRng; one per independent draw within a row.
enum Stream : std::uint64_t { kLabel = 0, kStdFeature = 1, kRobFeature = 2, kShift = 3 };

void validate_model(const LatentModel& m, std::size_t classes, const char* name) {
  require(m.means.rows() == classes, ErrorKind::validation,
          std::string(name) + " model needs one mean per class");
  require(m.means.cols() >= 1, ErrorKind::validation, std::string(name) + " model needs feature dimension >= 1");
  require(m.sigma > 0.0 && std::isfinite(m.sigma), ErrorKind::validation,
          std::string(name) + " model spread must be positive");
  for (double v : m.means.values())
    require(std::isfinite(v), ErrorKind::validation, std::string(name) + " model has a non-finite mean");
}

bool gram_is_symmetric(const RowMatrix& means, double tol) {
  const std::size_t k = means.rows();
  auto dot = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t j = 0; j < means.cols(); ++j) s += means(a, j) * means(b, j);
    return s;
  };
  const double diag = dot(0, 0);
  const double off = dot(0, 1);
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      if (std::abs(dot(a, b) - (a == b ? diag : off)) > tol * std::max(1.0, std::abs(diag))) return false;
  return true;
}

// Feature draw around the class-y mean, scored as the exact log-posterior.
void draw_scores(const LatentModel& m, int y, StreamRng& rng, std::span<double> x, std::span<double> out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto mean = m.means.row(static_cast<std::size_t>(y));
  for (std::size_t j = 0; j < x.size(); ++j) x[j] = mean[j] + m.sigma * normal(rng);
  const double inv = 1.0 / (2.0 * m.sigma * m.sigma);
  for (std::size_t c = 0; c < out.size(); ++c) {
    const auto mu = m.means.row(c);
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - mu[j]) * (x[j] - mu[j]);
    out[c] = -d2 * inv;
  }
  kernels::log_softmax_row(out, out);
}

int draw_label(std::span<const double> posterior, double u) {
  double c = 0.0;
  for (std::size_t j = 0; j + 1 < posterior.size(); ++j) {
    c += posterior[j];
    if (u < c) return static_cast<int>(j);
  }
  return static_cast<int>(posterior.size() - 1);
}

Regime regime_of(const BaseShift& s) {
  if (std::holds_alternative<MissingSpurious>(s)) return Regime::missing;
  if (std::holds_alternative<Suppressed>(s)) return Regime::suppressed;
  return Regime::anticorrelated;
}

void validate_base(const BaseShift& s) {
  if (const auto* p = std::get_if<Suppressed>(&s))
    require(p->tau > 0.0 && std::isfinite(p->tau), ErrorKind::validation, "suppressed shift needs tau > 0");
  if (const auto* p = std::get_if<Anticorrelated>(&s))
    require(p->alpha > 0.0 && p->beta > 0.0 && std::isfinite(p->alpha) && std::isfinite(p->beta),
            ErrorKind::validation, "anticorrelated shift needs alpha > 0 and beta > 0");
}

// Rewrites row i of the set for the given base shift: label logits, posterior, label.
void apply_shift(const BaseShift& shift, std::span<double> s, std::span<const double> r, std::span<double> post,
                 const std::vector<double>* log_shift) {
  const std::size_t k = post.size();
  if (std::holds_alternative<MissingSpurious>(shift)) {
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) post[j] = r[j];
  } else if (const auto* sup = std::get_if<Suppressed>(&shift)) {
    for (std::size_t j = 0; j < k; ++j) post[j] = sup->tau * (s[j] + r[j]);
  } else {
    const auto& anti = std::get<Anticorrelated>(shift);
    for (std::size_t j = 0; j < k; ++j) post[j] = anti.alpha * r[j] - anti.beta * s[j];
  }
  if (log_shift)
    for (std::size_t j = 0; j < k; ++j) post[j] += (*log_shift)[j];
  kernels::softmax_row(post, post);
}

struct RowBuffers {
  std::vector<double> x_std, x_rob;
};

// ID draw of row i: label, both score vectors, and the posterior softmax(s + r).
int draw_id_row(const WorldSpec& w, std::size_t i, std::span<double> s, std::span<double> r, std::span<double> post,
                RowBuffers& buf) {
  StreamRng label_rng(w.seed, i, kLabel);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(w.classes) - 1);
  const int y = pick(label_rng);
  StreamRng std_rng(w.seed, i, kStdFeature);
  StreamRng rob_rng(w.seed, i, kRobFeature);
  draw_scores(w.std_model, y, std_rng, buf.x_std, s);
  draw_scores(w.rob_model, y, rob_rng, buf.x_rob, r);
  for (std::size_t j = 0; j < post.size(); ++j) post[j] = s[j] + r[j];
  kernels::softmax_row(post, post);
  return y;
}

template <class RowFn>
SampledShiftSet sample_rows(const WorldSpec& w, std::size_t n, RowFn&& fill_row) {
  w.validate();
  require(n >= 1, ErrorKind::validation, "sample size must be at least 1");
  const std::size_t k = w.classes;
  RowMatrix s(n, k), r(n, k), post(n, k);
  std::vector<int> labels(n);
  std::vector<Regime> regimes(n, Regime::id);
  const auto rows = static_cast<std::int64_t>(n);
#pragma omp parallel
  {
    RowBuffers buf{std::vector<double>(w.std_model.means.cols()), std::vector<double>(w.rob_model.means.cols())};
#pragma omp for schedule(static)
    for (std::int64_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      fill_row(i, s.row(i), r.row(i), post.row(i), labels[i], regimes[i], buf);
    }
  }
  SampledShiftSet out{ScoreSet(std::move(s)), ScoreSet(std::move(r)), std::move(labels), std::move(post),
                      std::move(regimes), w.label_symmetric()};
  return out;
}

}  // namespace

WorldSpec WorldSpec::symmetric(std::size_t classes, double std_separation, double rob_separation,
                               std::uint64_t seed, double sigma) {
  WorldSpec w;
  w.classes = classes;
  w.seed = seed;
  w.std_model = {RowMatrix(classes, classes), sigma};
  w.rob_model = {RowMatrix(classes, classes), sigma};
  for (std::size_t y = 0; y < classes; ++y) {
    w.std_model.means(y, y) = std_separation;
    w.rob_model.means(y, y) = rob_separation;
  }
  return w;
}

void WorldSpec::validate() const {
  require(classes >= 2, ErrorKind::validation, "world needs at least 2 classes");
  validate_model(std_model, classes, "standard");
  validate_model(rob_model, classes, "robust");
}

bool WorldSpec::label_symmetric(double tol) const {
  return gram_is_symmetric(std_model.means, tol) && gram_is_symmetric(rob_model.means, tol);
}

void validate(const ShiftSpec& shift) {
  if (const auto* mix = std::get_if<Mixture>(&shift)) {
    require(mix->weight >= 0.0 && mix->weight <= 1.0, ErrorKind::validation, "mixture weight must lie in [0, 1]");
    validate_base(mix->a);
    validate_base(mix->b);
    return;
  }
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (!std::is_same_v<T, Mixture>) validate_base(BaseShift(s));
      },
      shift);
}

namespace {

std::string base_to_string(const BaseShift& s) {
  if (std::holds_alternative<MissingSpurious>(s)) return "missing";
  if (const auto* p = std::get_if<Suppressed>(&s)) return "suppressed:tau=" + format_double(p->tau);
  const auto& a = std::get<Anticorrelated>(s);
  return "anticorrelated:alpha=" + format_double(a.alpha) + ",beta=" + format_double(a.beta);
}

class ShiftParser {
 public:
  explicit ShiftParser(std::string_view text) : text_(text) {}

  ShiftSpec parse_top() {
    ShiftSpec out;
    if (peek_word("mix")) {
      out = parse_mix();
    } else {
      out = std::visit([](auto v) -> ShiftSpec { return v; }, parse_base());
    }
    require(pos_ == text_.size(), ErrorKind::parse, error("trailing text"));
    return out;
  }

 private:
  std::string error(const std::string& what) const {
    return "shift spec '" + std::string(text_) + "': " + what + " at offset " + std::to_string(pos_);
  }

  bool peek_word(std::string_view w) const { return text_.substr(pos_, w.size()) == w; }

  void expect(std::string_view w) {
    require(peek_word(w), ErrorKind::parse, error("expected '" + std::string(w) + "'"));
    pos_ += w.size();
  }

  double number() {
    const auto start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != ')') ++pos_;
    return parse_double(text_.substr(start, pos_ - start));
  }

  BaseShift parse_base() {
    if (peek_word("missing")) {
      expect("missing");
      return MissingSpurious{};
    }
    if (peek_word("suppressed")) {
      expect("suppressed:tau=");
      return Suppressed{number()};
    }
    if (peek_word("anticorrelated")) {
      expect("anticorrelated:alpha=");
      Anticorrelated a;
      a.alpha = number();
      expect(",beta=");
      a.beta = number();
      return a;
    }
    require(!peek_word("mix"), ErrorKind::parse, error("mixtures cannot be nested"));
    fail(ErrorKind::parse, error("unknown shift"));
  }

  BaseShift parse_component() {
    expect("(");
    auto c = parse_base();
    expect(")");
    return c;
  }

  Mixture parse_mix() {
    expect("mix:w=");
    Mixture m;
    m.weight = number();
    expect(",a=");
    m.a = parse_component();
    expect(",b=");
    m.b = parse_component();
    return m;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string to_string(const ShiftSpec& shift) {
  if (const auto* mix = std::get_if<Mixture>(&shift))
    return "mix:w=" + format_double(mix->weight) + ",a=(" + base_to_string(mix->a) + "),b=(" +
           base_to_string(mix->b) + ")";
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Mixture>)
          return {};
        else
          return base_to_string(BaseShift(s));
      },
      shift);
}

ShiftSpec parse_shift(std::string_view text) {
  auto spec = ShiftParser(text).parse_top();
  try {
    validate(spec);
  } catch (const Error& e) {
    fail(ErrorKind::parse, e.what());
  }
  return spec;
}

std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::id: return "id";
    case Regime::missing: return "missing";
    case Regime::suppressed: return "suppressed";
    case Regime::anticorrelated: return "anticorrelated";
  }
  return "unknown";
}

SampledShiftSet sample_id(const WorldSpec& w, std::size_t n) {
  return sample_rows(w, n, [&](std::size_t i, auto s, auto r, auto post, int& label, Regime& regime, RowBuffers& buf) {
    label = draw_id_row(w, i, s, r, post, buf);
    regime = Regime::id;
  });
}

SampledShiftSet sample_ood(const WorldSpec& w, const ShiftSpec& shift, std::size_t n, const SampleOptions& opt) {
  validate(shift);
  const std::vector<double>* log_shift = nullptr;
  if (opt.label_log_shift) {
    require(opt.label_log_shift->size() == w.classes, ErrorKind::shape, "label shift must have one entry per class");
    for (double v : *opt.label_log_shift)
      require(std::isfinite(v), ErrorKind::validation, "label shift entries must be finite");
    log_shift = &*opt.label_log_shift;
  }
  return sample_rows(w, n, [&](std::size_t i, auto s, auto r, auto post, int& label, Regime& regime, RowBuffers& buf) {
    draw_id_row(w, i, s, r, post, buf);
    StreamRng rng(w.seed, i, kShift);
    const double u_mix = rng.uniform();
    const double u_label = rng.uniform();
    const BaseShift* base = nullptr;
    BaseShift single;
    if (const auto* mix = std::get_if<Mixture>(&shift)) {
      base = u_mix < mix->weight ? &mix->a : &mix->b;
    } else {
      single = std::visit(
          [](const auto& v) -> BaseShift {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Mixture>)
              return MissingSpurious{};
            else
              return v;
          },
          shift);
      base = &single;
    }
    apply_shift(*base, s, r, post, log_shift);
    label = draw_label(post, u_label);
    regime = regime_of(*base);
  });
}

double expected_error(const RowMatrix& posteriors, std::span<const int> predictions) {
  require(posteriors.rows() == predictions.size(), ErrorKind::shape, "posterior and prediction counts differ");
  require(!predictions.empty(), ErrorKind::empty_input, "expected error of an empty set is undefined");
  std::vector<double> miss(predictions.size());
  for (std::size_t i = 0; i < miss.size(); ++i)
    miss[i] = 1.0 - posteriors(i, static_cast<std::size_t>(predictions[i]));
  return kernels::pairwise_sum(miss) / static_cast<double>(miss.size());
}

}  // namespace calens
