#pragma once

// File formats: CSV score files and versioned JSON configs and reports.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "calens/calibration.hpp"
#include "calens/core.hpp"
#include "calens/ensemble.hpp"
#include "calens/eval.hpp"
#include "calens/oracle.hpp"
#include "calens/synthetic.hpp"
#include "calens/verdict.hpp"

namespace calens::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Header: score_0, ..., score_{K-1}, then optional `label`, then optional `group`.
struct ScoreFile {
  ScoreSet scores;
  std::optional<std::vector<int>> labels;
  std::optional<std::vector<int>> groups;

  // Throws parse when the file has no label column.
  LabeledScores labeled(const std::string& what = "score file") const;
};

ScoreFile parse_score_csv(std::istream& in, const std::string& source = "<stream>");
ScoreFile read_score_file(const std::filesystem::path& path);

void write_score_csv(std::ostream& out, const ScoreSet& scores, const std::vector<int>* labels = nullptr,
                     const std::vector<int>* groups = nullptr);
void write_score_file(const std::filesystem::path& path, const ScoreSet& scores,
                      const std::vector<int>* labels = nullptr, const std::vector<int>* groups = nullptr);

Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string dump(const Json& j);

// World config:
//   {"class_count": K, "seed": S,
//    "standard": {"means": [[...], ...], "sigma": x} | {"separation": x, "sigma": x},
//    "robust":   {...}}
WorldSpec world_from_json(const Json& j);
Json to_json(const WorldSpec& w);

// Joint-table fixture: {"class_count", "s_support", "r_support", "marginals"} or
// explicit {"class_count", "s_support", "r_support", "probabilities"}.
JointTable table_from_json(const Json& j);
Json to_json(const JointTable& t);

Json to_json(const TemperatureScale& t);
Json to_json(const ReliabilityReport& r);
Json to_json(const EnsembleConfig& cfg);
Json to_json(const EvalRow& row);
EvalRow eval_row_from_json(const Json& j);
Json to_json(const GapClosed& g);
Json to_json(const VerdictReport& v);
Json to_json(const ModelAverage& a);

}  // namespace calens::io
