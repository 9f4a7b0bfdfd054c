#pragma once

#include <optional>
#include <string>
#include <vector>

#include "calens/core.hpp"
#include "calens/ensemble.hpp"

namespace calens {

// Accuracies in percent.
struct EvalRow {
  std::string model;
  double id_accuracy = 0.0;
  std::optional<double> ood_accuracy;
  std::optional<double> id_stddev;
  std::optional<double> ood_stddev;
  std::optional<double> ood_worst_group;  // set when the OOD split carries group ids
};

struct GapClosed {
  double fraction = 0.0;
  bool degenerate = false;  // |std - rob| < 1e-9
};

struct ModelSpec {
  enum class Kind { standard, robust, ensemble };
  std::string name;
  Kind kind = Kind::ensemble;
  EnsembleConfig config;

  static ModelSpec standard(std::string name = "standard") { return {std::move(name), Kind::standard, {}}; }
  static ModelSpec robust(std::string name = "robust") { return {std::move(name), Kind::robust, {}}; }
  static ModelSpec ensemble(std::string name, EnsembleConfig cfg) {
    return {std::move(name), Kind::ensemble, std::move(cfg)};
  }
};

// Standard and robust scores on one split, sharing labels.
struct SplitPair {
  LabeledScores std_scores;
  LabeledScores rob_scores;
};

std::vector<int> model_predictions(const ModelSpec& m, const SplitPair& split);

std::vector<EvalRow> evaluate_models(const std::vector<ModelSpec>& models, const SplitPair& id_test,
                                     const std::optional<SplitPair>& ood_test = std::nullopt);

// (ens - min(std, rob)) / (max(std, rob) - min(std, rob))
GapClosed gap_closed(double std_acc, double rob_acc, double ens_acc);

enum class ShiftTag { natural, adversarial };
std::string_view to_string(ShiftTag t);

struct DatasetResult {
  std::string dataset;
  ShiftTag tag = ShiftTag::natural;
  std::vector<EvalRow> rows;
};

struct ModelAverage {
  std::string model;
  std::string group;  // "all", "natural" or "adversarial"
  std::size_t datasets = 0;
  double id_mean = 0.0;
  std::optional<double> ood_mean;  // over datasets reporting OOD; worst-group on adversarial ones when present
};

// Unweighted mean over datasets per model, overall and per shift tag.
std::vector<ModelAverage> aggregate(const std::vector<DatasetResult>& results);

}  // namespace calens
