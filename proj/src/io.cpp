#include "calens/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "calens/error.hpp"
#include "calens/format.hpp"

namespace calens::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view text, const std::string& where) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  require(ec == std::errc() && ptr == text.data() + text.size() && !text.empty(), ErrorKind::parse,
          where + ": not an integer: '" + std::string(text) + "'");
  return v;
}

template <class T>
T get_field(const Json& j, const char* key, const std::string& what) {
  require(j.is_object() && j.contains(key), ErrorKind::parse, what + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, what + ": field '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

LatentModel model_from_json(const Json& j, std::size_t k, const std::string& what) {
  require(j.is_object(), ErrorKind::parse, what + " must be an object");
  LatentModel m;
  m.sigma = j.contains("sigma") ? get_field<double>(j, "sigma", what) : 1.0;
  if (j.contains("means")) {
    const auto rows = get_field<std::vector<std::vector<double>>>(j, "means", what);
    require(rows.size() == k, ErrorKind::parse, what + ": need one mean per class");
    const std::size_t d = rows.front().size();
    m.means = RowMatrix(k, d);
    for (std::size_t y = 0; y < k; ++y) {
      require(rows[y].size() == d, ErrorKind::parse, what + ": means must share one dimension");
      for (std::size_t c = 0; c < d; ++c) m.means(y, c) = rows[y][c];
    }
  } else {
    const double sep = get_field<double>(j, "separation", what);
    m.means = RowMatrix(k, k);
    for (std::size_t y = 0; y < k; ++y) m.means(y, y) = sep;
  }
  return m;
}

Json model_to_json(const LatentModel& m) {
  Json means = Json::array();
  for (std::size_t y = 0; y < m.means.rows(); ++y) {
    const auto row = m.means.row(y);
    means.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return Json{{"means", means}, {"sigma", m.sigma}};
}

}  // namespace

LabeledScores ScoreFile::labeled(const std::string& what) const {
  require(labels.has_value(), ErrorKind::parse, what + " has no label column");
  try {
    return LabeledScores(scores, *labels, groups);
  } catch (const Error& e) {
    fail(ErrorKind::parse, what + ": " + e.what());
  }
}

ScoreFile parse_score_csv(std::istream& in, const std::string& source) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::parse, source + ": missing header row");
  const auto header = split_fields(trim(line));
  std::size_t k = 0;
  while (k < header.size() && trim(header[k]) == "score_" + std::to_string(k)) ++k;
  require(k >= 2, ErrorKind::parse, source + ": header must start with score_0, score_1, ...");
  bool has_label = false, has_group = false;
  std::size_t col = k;
  if (col < header.size() && trim(header[col]) == "label") has_label = true, ++col;
  if (col < header.size() && trim(header[col]) == "group") has_group = true, ++col;
  require(col == header.size(), ErrorKind::parse,
          source + ": unexpected header column '" + std::string(col < header.size() ? header[col] : "") + "'");

  std::vector<double> values;
  std::vector<int> labels, groups;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    const auto fields = split_fields(t);
    require(fields.size() == header.size(), ErrorKind::parse,
            where + ": expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    for (std::size_t j = 0; j < k; ++j) {
      double v = 0.0;
      try {
        v = parse_double(trim(fields[j]));
      } catch (const Error&) {
        fail(ErrorKind::parse, where + ": not a number: '" + std::string(fields[j]) + "'");
      }
      require(std::isfinite(v), ErrorKind::parse, where + ": non-finite score");
      values.push_back(v);
    }
    if (has_label) labels.push_back(parse_int(trim(fields[k]), where));
    if (has_group) groups.push_back(parse_int(trim(fields[k + (has_label ? 1 : 0)]), where));
    ++rows;
  }

  ScoreFile f{ScoreSet(rows, k, std::move(values)), std::nullopt, std::nullopt};
  if (has_label) {
    for (std::size_t i = 0; i < labels.size(); ++i)
      require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < k, ErrorKind::parse,
              source + ": label " + std::to_string(labels[i]) + " on data row " + std::to_string(i) +
                  " outside [0, " + std::to_string(k) + ")");
    f.labels = std::move(labels);
  }
  if (has_group) f.groups = std::move(groups);
  return f;
}

ScoreFile read_score_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::parse, "cannot open score file " + path.string());
  return parse_score_csv(in, path.string());
}

void write_score_csv(std::ostream& out, const ScoreSet& scores, const std::vector<int>* labels,
                     const std::vector<int>* groups) {
  for (std::size_t j = 0; j < scores.classes(); ++j) out << (j ? "," : "") << "score_" << j;
  if (labels) out << ",label";
  if (groups) out << ",group";
  out << '\n';
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << format_double(row[j]);
    if (labels) out << ',' << (*labels)[i];
    if (groups) out << ',' << (*groups)[i];
    out << '\n';
  }
}

void write_score_file(const std::filesystem::path& path, const ScoreSet& scores, const std::vector<int>* labels,
                      const std::vector<int>* groups) {
  std::ostringstream ss;
  write_score_csv(ss, scores, labels, groups);
  write_text_file(path, ss.str());
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::parse, "cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::parse, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorKind::parse, "failed writing " + path.string());
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

WorldSpec world_from_json(const Json& j) {
  const std::string what = "world config";
  WorldSpec w;
  w.classes = get_field<std::size_t>(j, "class_count", what);
  require(w.classes >= 2, ErrorKind::parse, what + ": class_count must be at least 2");
  w.seed = j.contains("seed") ? get_field<std::uint64_t>(j, "seed", what) : 0;
  require(j.contains("standard") && j.contains("robust"), ErrorKind::parse,
          what + ": needs 'standard' and 'robust' models");
  w.std_model = model_from_json(j.at("standard"), w.classes, what + " (standard)");
  w.rob_model = model_from_json(j.at("robust"), w.classes, what + " (robust)");
  try {
    w.validate();
  } catch (const Error& e) {
    fail(ErrorKind::parse, e.what());
  }
  return w;
}

Json to_json(const WorldSpec& w) {
  return Json{{"class_count", w.classes},
              {"seed", w.seed},
              {"standard", model_to_json(w.std_model)},
              {"robust", model_to_json(w.rob_model)}};
}

JointTable table_from_json(const Json& j) {
  const std::string what = "joint table";
  const auto k = get_field<std::size_t>(j, "class_count", what);
  const auto s = get_field<JointTable::Support>(j, "s_support", what);
  const auto r = get_field<JointTable::Support>(j, "r_support", what);
  if (j.contains("probabilities"))
    return JointTable::from_probabilities(k, s, r, get_field<std::vector<double>>(j, "probabilities", what));
  const auto p = get_field<std::vector<double>>(j, "marginals", what);
  return make_joint_table(k, s, r, ClassMarginals::from_probabilities(p));
}

Json to_json(const JointTable& t) {
  return Json{{"class_count", t.classes()},
              {"s_support", t.s_values()},
              {"r_support", t.r_values()},
              {"marginals", t.label_marginal()},
              {"probabilities", t.probabilities()}};
}

Json to_json(const TemperatureScale& t) { return Json{{"temperature", t.t}, {"clamped", t.clamped}}; }

Json to_json(const ReliabilityReport& r) {
  Json bins = Json::array();
  for (const auto& b : r.bins)
    bins.push_back(Json{{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mean_confidence", b.mean_confidence},
                        {"accuracy", b.accuracy}});
  return Json{{"ece", r.ece},
              {"mean_confidence", r.mean_confidence},
              {"accuracy", r.accuracy},
              {"rows", r.rows},
              {"bins", bins}};
}

Json to_json(const EnsembleConfig& cfg) {
  return Json{{"strategy", std::string(to_string(cfg.strategy))},
              {"t_std", to_json(cfg.t_std)},
              {"t_rob", to_json(cfg.t_rob)},
              {"alpha", cfg.alpha},
              {"log_marginals", std::vector<double>(cfg.marginals.log_probs().begin(), cfg.marginals.log_probs().end())},
              {"sparse_validation", cfg.sparse_validation}};
}

Json to_json(const EvalRow& row) {
  Json j{{"model", row.model}, {"id_accuracy", row.id_accuracy}};
  if (row.ood_accuracy) j["ood_accuracy"] = *row.ood_accuracy;
  if (row.id_stddev) j["id_stddev"] = *row.id_stddev;
  if (row.ood_stddev) j["ood_stddev"] = *row.ood_stddev;
  if (row.ood_worst_group) j["ood_worst_group"] = *row.ood_worst_group;
  return j;
}

EvalRow eval_row_from_json(const Json& j) {
  const std::string what = "report row";
  EvalRow row;
  row.model = get_field<std::string>(j, "model", what);
  row.id_accuracy = get_field<double>(j, "id_accuracy", what);
  if (j.contains("ood_accuracy")) row.ood_accuracy = get_field<double>(j, "ood_accuracy", what);
  if (j.contains("id_stddev")) row.id_stddev = get_field<double>(j, "id_stddev", what);
  if (j.contains("ood_stddev")) row.ood_stddev = get_field<double>(j, "ood_stddev", what);
  if (j.contains("ood_worst_group")) row.ood_worst_group = get_field<double>(j, "ood_worst_group", what);
  auto in_range = [](double v) { return v >= 0.0 && v <= 100.0; };
  require(in_range(row.id_accuracy) && (!row.ood_accuracy || in_range(*row.ood_accuracy)), ErrorKind::parse,
          what + ": accuracies must lie in [0, 100]");
  return row;
}

Json to_json(const GapClosed& g) { return Json{{"fraction", g.fraction}, {"degenerate", g.degenerate}}; }

Json to_json(const VerdictReport& v) {
  Json checks = Json::array();
  for (const auto& c : v.checks) {
    Json evidence = Json::object();
    for (const auto& [k, x] : c.evidence) evidence[k] = x;
    Json cj{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}, {"evidence", evidence}};
    if (c.first_violation) cj["first_violation"] = *c.first_violation;
    checks.push_back(std::move(cj));
  }
  return Json{{"subject", v.subject},
              {"verdict", v.passed() ? "PASS" : "FAIL"},
              {"checks", checks},
              {"notes", v.notes}};
}

Json to_json(const ModelAverage& a) {
  Json j{{"model", a.model}, {"group", a.group}, {"datasets", a.datasets}, {"id_mean", a.id_mean}};
  if (a.ood_mean) j["ood_mean"] = *a.ood_mean;
  return j;
}

}  // namespace calens::io
