#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"

#include "calens/error.hpp"
#include "calens/oracle.hpp"
#include "support/fixtures.hpp"

using namespace calens;
using calens::testing::build;
using calens::testing::table_corpus;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::usage;
}

const JointTable::Support kLog3 = {{std::log(3.0), 0.0}, {0.0, std::log(3.0)}};

// Brute force over every combiner, misclassification counted straight from the
// joint probabilities.
struct BruteForce {
  double best = std::numeric_limits<double>::infinity();
  std::size_t combiners = 0;
};

BruteForce brute_force(const JointTable& t) {
  const std::size_t cells = t.cells();
  const std::size_t k = t.classes();
  BruteForce out;
  std::vector<std::size_t> h(cells, 0);
  while (true) {
    double err = 0.0;
    for (std::size_t c = 0; c < cells; ++c)
      for (std::size_t y = 0; y < k; ++y)
        if (y != h[c]) err += t.p(c, y);
    out.best = std::min(out.best, err);
    ++out.combiners;
    std::size_t c = 0;
    while (c < cells && ++h[c] == k) h[c++] = 0;
    if (c == cells) break;
  }
  return out;
}

}  // namespace

TEST_CASE("single-point table") {
  const auto t = make_joint_table(2, {{0.0, 0.0}}, {{0.0, 0.0}}, ClassMarginals::uniform(2));
  CHECK(t.cells() == 1);
  CHECK(t.conditional(0)[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(bayes_error(t) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(check_lemma_softmax(t).passed());
  CHECK(check_corollary_trivial_bound(t).passed());
}

TEST_CASE("symmetric log-3 table matches the hand solution") {
  const auto t = make_joint_table(2, kLog3, kLog3, ClassMarginals::uniform(2));
  CHECK(t.s_weights()[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(t.r_weights()[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(t.p(0, 0, 0) - 0.28125) <= 1e-14);
  CHECK(std::abs(t.p(0, 0, 1) - 0.03125) <= 1e-14);
  CHECK(std::abs(t.p(0, 1, 0) - 0.09375) <= 1e-14);
  CHECK(std::abs(t.p(0, 1, 1) - 0.09375) <= 1e-14);
  CHECK(std::abs(t.p(1, 1, 1) - 0.28125) <= 1e-14);
  CHECK(std::abs(t.conditional(0)[0] - 0.9) <= 1e-14);
  CHECK(std::abs(bayes_error(t) - 0.25) <= 1e-12);

  const auto cor = check_corollary_trivial_bound(t);
  CHECK(cor.passed());
  CHECK(cor.checks[0].evidence[1].second == doctest::Approx(0.5));

  const auto p1 = check_prop1_exhaustive(t);
  CHECK(p1.passed());
  CHECK(p1.find("ensemble_minimal_over_all_combiners")->evidence[0].second == 16.0);
}

TEST_CASE("infeasible marginals are reported") {
  CHECK(kind_of([] {
          make_joint_table(2, kLog3, kLog3, ClassMarginals::from_probabilities(std::vector<double>{0.99, 0.01}));
        }) == ErrorKind::infeasible);
}

TEST_CASE("from_probabilities validates its invariants") {
  const auto good = make_joint_table(2, kLog3, kLog3, ClassMarginals::uniform(2));
  auto probs = good.probabilities();
  CHECK(JointTable::from_probabilities(2, kLog3, kLog3, probs).probabilities() == probs);

  auto unnormalized = probs;
  unnormalized[0] += 0.01;
  CHECK(kind_of([&] { JointTable::from_probabilities(2, kLog3, kLog3, unnormalized); }) == ErrorKind::validation);

  // move mass between two cells of label 0: still normalized, no longer independent
  auto dependent = probs;
  dependent[0] += 0.01;
  dependent[2] -= 0.01;
  CHECK(kind_of([&] { JointTable::from_probabilities(2, kLog3, kLog3, dependent); }) == ErrorKind::validation);

  // an independent joint with uniform marginals but uncalibrated scores
  std::vector<double> flat(8, 1.0 / 8.0);
  CHECK(kind_of([&] { JointTable::from_probabilities(2, kLog3, kLog3, flat); }) == ErrorKind::validation);
}

TEST_CASE("near-deterministic table") {
  const JointTable::Support sharp = {{40.0, 0.0}, {0.0, 40.0}};
  const auto t = make_joint_table(2, sharp, sharp, ClassMarginals::uniform(2));
  CHECK(bayes_error(t) <= 1e-15);
  CHECK(check_corollary_trivial_bound(t).passed());
}

TEST_CASE("robust model with a single score value adds nothing") {
  const auto t = make_joint_table(2, kLog3, {{0.0, 0.0}}, ClassMarginals::uniform(2));
  // std-only Bayes error: each s has max posterior 3/4
  const double std_only = 0.25;
  CHECK(std::abs(combiner_error(t, ensemble_combiner(t)) - std_only) <= 1e-12);
  CHECK(check_prop1_exhaustive(t).passed());
}

TEST_CASE("size limit on exhaustive enumeration") {
  for (const auto& f : table_corpus()) {
    if (f.name != "k4-cyclic") continue;
    const auto t = build(f);
    CHECK(t.cells() == 16);
    CHECK(kind_of([&] { check_prop1_exhaustive(t); }) == ErrorKind::size_limit);
  }
}

TEST_CASE("corpus: the two error formulas agree for arbitrary combiners") {
  StreamRng rng(99, 0, 0);
  for (const auto& f : table_corpus()) {
    const auto t = build(f);
    for (int trial = 0; trial < 20; ++trial) {
      CombinerTable h(t.cells());
      for (auto& v : h) v = static_cast<int>(rng() % t.classes());
      CHECK(std::abs(combiner_error(t, h) - combiner_error_direct(t, h)) <= 1e-12);
    }
  }
}

TEST_CASE("corpus: lemma holds and the negative control fails off-uniform") {
  const auto corpus = table_corpus();
  CHECK(corpus.size() >= 20);
  std::size_t non_uniform = 0;
  for (const auto& f : corpus) {
    CAPTURE(f.name);
    const auto t = build(f);
    const auto rep = check_lemma_softmax(t);
    CHECK(rep.passed());
    CHECK((rep.find("balanced_form") != nullptr) == f.uniform);
    const auto control = check_lemma_softmax(t, LemmaOptions{.drop_marginal = true});
    if (f.uniform) {
      CHECK(control.passed());
    } else {
      ++non_uniform;
      CHECK_FALSE(control.passed());
    }
  }
  CHECK(non_uniform >= 10);
}

TEST_CASE("corpus: ensemble combiner is Bayes-optimal, checked by an independent brute force") {
  for (const auto& f : table_corpus()) {
    CAPTURE(f.name);
    const auto t = build(f);
    const double e_ens = combiner_error_direct(t, ensemble_combiner(t));
    CHECK(std::abs(e_ens - bayes_error(t)) <= 1e-12);
    CHECK(check_corollary_trivial_bound(t).passed());
    if (std::pow(static_cast<double>(t.classes()), static_cast<double>(t.cells())) > 300000.0) continue;
    const auto bf = brute_force(t);
    CHECK(e_ens <= bf.best + 1e-12);
    const auto rep = check_prop1_exhaustive(t);
    CHECK(rep.passed());
    CHECK(rep.find("ensemble_minimal_over_all_combiners")->evidence[0].second == static_cast<double>(bf.combiners));
  }
}
