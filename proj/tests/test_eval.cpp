#include <algorithm>
#include <vector>

#include "doctest.h"

#include "calens/error.hpp"
#include "calens/eval.hpp"

using namespace calens;

namespace {

// Binary rows where score[y] = margin and score[1 - y] = 0, labels alternating.
LabeledScores margins(const std::vector<double>& m, std::optional<std::vector<int>> groups = std::nullopt) {
  std::vector<std::vector<double>> rows;
  std::vector<int> y;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<double> row(2, 0.0);
    row[static_cast<std::size_t>(label)] = m[i];
    rows.push_back(row);
    y.push_back(label);
  }
  return LabeledScores(ScoreSet::from_rows(rows), y, std::move(groups));
}

const std::vector<double> kStdMargins = {2, 2, -2, -1, 1, -1, 3, 1, -0.5, -0.5};
const std::vector<double> kRobMargins = {1, -1, 1, 3, -3, 2, 3, 0.5, 2, -2};

const ModelAverage& find(const std::vector<ModelAverage>& v, const std::string& model, const std::string& group) {
  const auto it = std::find_if(v.begin(), v.end(), [&](const ModelAverage& a) { return a.model == model && a.group == group; });
  REQUIRE(it != v.end());
  return *it;
}

}  // namespace

TEST_CASE("gap_closed examples") {
  const auto g = gap_closed(55.3, 87.2, 86.1);
  CHECK_FALSE(g.degenerate);
  CHECK(std::abs(g.fraction - 0.966) <= 5e-4);
  CHECK(g.fraction == doctest::Approx(30.8 / 31.9).epsilon(1e-12));
  CHECK(gap_closed(60.0, 80.0, 80.0).fraction == 1.0);
  CHECK(gap_closed(70.0, 70.0, 75.0).degenerate);
  CHECK(gap_closed(60.0, 80.0, 90.0).fraction == doctest::Approx(1.5));
  CHECK(gap_closed(60.0, 80.0, 50.0).fraction == doctest::Approx(-0.5));
}

TEST_CASE("property: gap_closed is symmetric in std and rob") {
  for (double a = 10.0; a < 100.0; a += 7.3)
    for (double b = 5.0; b < 100.0; b += 11.1)
      for (double e : {0.0, 42.0, 99.0}) {
        const auto x = gap_closed(a, b, e);
        const auto y = gap_closed(b, a, e);
        CHECK(x.fraction == y.fraction);
        CHECK(x.degenerate == y.degenerate);
      }
}

TEST_CASE("aggregate examples") {
  const DatasetResult crop{"cropland", ShiftTag::natural, {{"cal-ensemble", 95.6, std::nullopt}}};
  const DatasetResult land{"landcover", ShiftTag::natural, {{"cal-ensemble", 77.2, std::nullopt}}};
  const DatasetResult celeb{"celeba", ShiftTag::adversarial, {{"cal-ensemble", 94.5, std::nullopt}}};
  const auto avg = aggregate({crop, land, celeb});
  const auto& all = find(avg, "cal-ensemble", "all");
  CHECK(all.datasets == 3);
  CHECK(std::abs(all.id_mean - 89.1) <= 5e-2);
  CHECK(find(avg, "cal-ensemble", "natural").id_mean == doctest::Approx(86.4));
  CHECK(find(avg, "cal-ensemble", "adversarial").id_mean == 94.5);

  const DatasetResult a{"a", ShiftTag::natural, {{"m", 80.0, 70.0}}};
  const DatasetResult b{"b", ShiftTag::natural, {{"m", 90.0, 60.0}}};
  CHECK(find(aggregate({a}), "m", "all").id_mean == 80.0);
  const auto two = find(aggregate({a, b}), "m", "all");
  CHECK(two.id_mean == 85.0);
  CHECK(*two.ood_mean == 65.0);

  CHECK_THROWS_AS(aggregate({}), Error);
}

TEST_CASE("aggregate uses worst-group accuracy on adversarial datasets") {
  EvalRow row{"m", 90.0, 80.0};
  row.ood_worst_group = 40.0;
  const auto avg = aggregate({{"waterbirds", ShiftTag::adversarial, {row}}, {"nat", ShiftTag::natural, {row}}});
  CHECK(*find(avg, "m", "adversarial").ood_mean == 40.0);
  CHECK(*find(avg, "m", "natural").ood_mean == 80.0);
  CHECK(*find(avg, "m", "all").ood_mean == 60.0);
}

TEST_CASE("property: aggregate commutes with dataset reordering") {
  std::vector<DatasetResult> ds;
  for (int i = 0; i < 6; ++i)
    ds.push_back({"d" + std::to_string(i), i % 3 == 0 ? ShiftTag::adversarial : ShiftTag::natural,
                  {{"x", 50.0 + 7.1 * i, 30.0 + 3.3 * i}, {"y", 61.7 - 2.9 * i, 44.4 + 1.1 * i}}});
  const auto base = aggregate(ds);
  std::vector<int> perm = {0, 1, 2, 3, 4, 5};
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<DatasetResult> shuffled;
    for (int p : perm) shuffled.push_back(ds[static_cast<std::size_t>(p)]);
    const auto got = aggregate(shuffled);
    for (const auto& b : base) {
      const auto& g = find(got, b.model, b.group);
      CHECK(g.id_mean == b.id_mean);
      CHECK(g.ood_mean == b.ood_mean);
      CHECK(g.datasets == b.datasets);
    }
  }
}

TEST_CASE("evaluate_models on a hand-counted fixture") {
  const SplitPair split{margins(kStdMargins), margins(kRobMargins)};
  const auto rows = evaluate_models(
      {ModelSpec::standard(), ModelSpec::robust(),
       ModelSpec::ensemble("logits", make_config(EnsembleStrategy::logits, 2))},
      split, split);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].id_accuracy == 50.0);
  CHECK(rows[1].id_accuracy == doctest::Approx(70.0));
  CHECK(rows[2].id_accuracy == doctest::Approx(70.0));
  CHECK(*rows[2].ood_accuracy == doctest::Approx(70.0));
  CHECK_FALSE(rows[2].ood_worst_group.has_value());
}

TEST_CASE("evaluate_models examples") {
  const auto perfect = margins({1, 1, 1, 1});
  const SplitPair split{perfect, margins({-1, 2, -3, 1})};
  auto alpha_one = make_config(EnsembleStrategy::tuned_logits, 2);
  alpha_one.alpha = 1.0;
  const auto rows = evaluate_models({ModelSpec::standard(), ModelSpec::ensemble("std-only", alpha_one)}, split, split);
  CHECK(rows[0].id_accuracy == 100.0);
  CHECK(*rows[0].ood_accuracy == 100.0);
  CHECK(rows[1].id_accuracy == rows[0].id_accuracy);
  CHECK(rows[1].ood_accuracy == rows[0].ood_accuracy);

  auto shifted = margins({1, 1, -1, 1});
  shifted.labels[0] = 1;
  CHECK_THROWS_AS(evaluate_models({ModelSpec::standard()}, SplitPair{perfect, shifted}), Error);
}

TEST_CASE("evaluate_models reports worst-group accuracy") {
  const std::vector<int> groups = {0, 0, 1, 1, 0, 0, 1, 1, 0, 0};
  const SplitPair ood{margins(kStdMargins, groups), margins(kRobMargins, groups)};
  const auto rows = evaluate_models({ModelSpec::standard()}, ood, ood);
  // std correct on rows 0, 1, 4, 6, 7; cells (label, group): (0,0) rows 0,4,8 -> 2/3;
  // (1,0) rows 1,5,9 -> 1/3; (0,1) rows 2,6 -> 1/2; (1,1) rows 3,7 -> 1/2
  CHECK(*rows[0].ood_worst_group == doctest::Approx(100.0 / 3.0));
}

TEST_CASE("calibrated-probs row matches a from-scratch recomputation") {
  const auto s = margins({2, -1, 0.3, 4, -2, 1, 1, -0.2});
  const auto r = margins({-1, 3, 0.1, -2, 2, 0.5, -1, 0.7});
  auto cfg = build_calibrated_ensemble(s, r, EnsembleStrategy::calibrated_probs);
  const auto rows = evaluate_models({ModelSpec::ensemble("cal", cfg)}, SplitPair{s, r});
  const auto combined = combine(s.scores, r.scores, cfg);
  CHECK(rows[0].id_accuracy == 100.0 * (1.0 - error_rate(LabeledScores(combined, s.labels))));
}
