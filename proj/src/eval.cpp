#include "calens/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "calens/error.hpp"

namespace calens {

std::vector<int> model_predictions(const ModelSpec& m, const SplitPair& split) {
  switch (m.kind) {
    case ModelSpec::Kind::standard: return predict(split.std_scores.scores);
    case ModelSpec::Kind::robust: return predict(split.rob_scores.scores);
    case ModelSpec::Kind::ensemble:
      return predict(combine(split.std_scores.scores, split.rob_scores.scores, m.config));
  }
  fail(ErrorKind::usage, "unknown model kind");
}

namespace {

double percent_correct(std::span<const int> pred, std::span<const int> labels) {
  return 100.0 * (1.0 - error_rate(pred, labels));
}

}  // namespace

std::vector<EvalRow> evaluate_models(const std::vector<ModelSpec>& models, const SplitPair& id_test,
                                     const std::optional<SplitPair>& ood_test) {
  require_aligned(id_test.std_scores, id_test.rob_scores);
  if (ood_test) require_aligned(ood_test->std_scores, ood_test->rob_scores);

  std::vector<EvalRow> rows;
  rows.reserve(models.size());
  for (const auto& m : models) {
    EvalRow row;
    row.model = m.name;
    row.id_accuracy = percent_correct(model_predictions(m, id_test), id_test.std_scores.labels);
    if (ood_test) {
      const auto pred = model_predictions(m, *ood_test);
      row.ood_accuracy = percent_correct(pred, ood_test->std_scores.labels);
      if (ood_test->std_scores.groups)
        row.ood_worst_group = 100.0 * worst_group_accuracy(pred, ood_test->std_scores);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

GapClosed gap_closed(double std_acc, double rob_acc, double ens_acc) {
  const double lo = std::min(std_acc, rob_acc);
  const double hi = std::max(std_acc, rob_acc);
  if (hi - lo < 1e-9) return {0.0, true};
  return {(ens_acc - lo) / (hi - lo), false};
}

std::string_view to_string(ShiftTag t) { return t == ShiftTag::natural ? "natural" : "adversarial"; }

std::vector<ModelAverage> aggregate(const std::vector<DatasetResult>& results) {
  require(!results.empty(), ErrorKind::empty_input, "aggregate needs at least one dataset");

  struct Acc {
    std::vector<double> id, ood;
  };
  std::vector<std::string> order;
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& ds : results) {
    require(!ds.rows.empty(), ErrorKind::empty_input, "dataset '" + ds.dataset + "' has no rows");
    for (const auto& row : ds.rows) {
      if (std::find(order.begin(), order.end(), row.model) == order.end()) order.push_back(row.model);
      std::optional<double> ood = row.ood_accuracy;
      if (ds.tag == ShiftTag::adversarial && row.ood_worst_group) ood = row.ood_worst_group;
      for (std::string group : {std::string("all"), std::string(to_string(ds.tag))}) {
        auto& a = acc[{row.model, group}];
        a.id.push_back(row.id_accuracy);
        if (ood) a.ood.push_back(*ood);
      }
    }
  }

  // Sorted before summing.
  auto mean = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };

  std::vector<ModelAverage> out;
  for (const auto& model : order)
    for (const char* group : {"all", "natural", "adversarial"}) {
      const auto it = acc.find({model, group});
      if (it == acc.end()) continue;
      ModelAverage avg;
      avg.model = model;
      avg.group = group;
      avg.datasets = it->second.id.size();
      avg.id_mean = mean(it->second.id);
      if (!it->second.ood.empty()) avg.ood_mean = mean(it->second.ood);
      out.push_back(std::move(avg));
    }
  return out;
}

}  // namespace calens
