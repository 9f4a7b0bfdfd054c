#include "calens/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "CLI11.hpp"

#include "calens/error.hpp"
#include "calens/format.hpp"
#include "calens/io.hpp"

namespace calens::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::empty_input: return kEmptyInput;
    case ErrorKind::misaligned:
    case ErrorKind::shape: return kMisaligned;
    case ErrorKind::unknown_strategy: return kUnknownStrategy;
    default: return kParseError;
  }
}

void emit(const Json& j, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-")
    out << io::dump(j);
  else
    io::write_text_file(path, io::dump(j));
}

std::pair<std::string, std::string> split_pair(const std::string& value, const char* flag) {
  const auto comma = value.find(',');
  require(comma != std::string::npos && value.find(',', comma + 1) == std::string::npos, ErrorKind::parse,
          std::string(flag) + " expects STD_PATH,ROB_PATH");
  return {value.substr(0, comma), value.substr(comma + 1)};
}

SplitPair load_pair(const std::string& std_path, const std::string& rob_path) {
  SplitPair p{io::read_score_file(std_path).labeled(std_path), io::read_score_file(rob_path).labeled(rob_path)};
  require_aligned(p.std_scores, p.rob_scores);
  return p;
}

// ---------------------------------------------------------------------------
// fit-temperature

struct FitArgs {
  std::string scores, out;
  double tol = 1e-6;
  std::size_t bins = 10;
};

int cmd_fit_temperature(const FitArgs& a, std::ostream& out, std::ostream& err) {
  const auto d = io::read_score_file(a.scores).labeled(a.scores);
  require(d.rows() > 0, ErrorKind::empty_input, a.scores + " has no rows");
  const auto t = fit_temperature(d, FitOptions{.tol = a.tol});
  const double acc = accuracy(d);
  const double conf = average_confidence(d.scores, t);
  if (t.clamped)
    err << "warning: temperature clamped at " << format_double(t.t) << "; accuracy " << format_double(acc)
        << " is outside the reachable confidence range\n";

  Json j{{"schema_version", io::kSchemaVersion},
         {"kind", "temperature_fit"},
         {"temperature", t.t},
         {"clamped", t.clamped},
         {"achieved_confidence", conf},
         {"accuracy", acc},
         {"tol", a.tol},
         {"rows", d.rows()},
         {"class_count", d.classes()},
         {"reliability_before", io::to_json(ece(d, TemperatureScale::identity(), a.bins))},
         {"reliability_after", io::to_json(ece(d, t, a.bins))}};
  emit(j, a.out, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// ensemble

struct EnsembleArgs {
  std::string std_test, rob_test, val_std, val_rob, strategy = "calibrated-probs", eval_id, eval_ood, report;
  std::string dataset = "dataset", tag = "natural";
  double tol = 1e-6;
};

int cmd_ensemble(const EnsembleArgs& a, std::ostream& out, std::ostream& err) {
  const auto strategy = parse_strategy(a.strategy);
  if (!strategy) fail(ErrorKind::unknown_strategy, "unknown strategy '" + a.strategy + "'");
  require(a.tag == "natural" || a.tag == "adversarial", ErrorKind::parse, "--tag must be natural or adversarial");

  std::string id_std = a.std_test, id_rob = a.rob_test;
  if (!a.eval_id.empty()) {
    require(a.std_test.empty() && a.rob_test.empty(), ErrorKind::parse, "give either --eval-id or --std/--rob, not both");
    std::tie(id_std, id_rob) = split_pair(a.eval_id, "--eval-id");
  }
  require(!id_std.empty() && !id_rob.empty(), ErrorKind::parse, "an ID test pair is required (--eval-id or --std/--rob)");

  const auto val = load_pair(a.val_std, a.val_rob);
  require(val.std_scores.rows() > 0, ErrorKind::empty_input, "ID validation set is empty");
  const auto cfg = fit_ensemble(val.std_scores, val.rob_scores, *strategy, FitOptions{.tol = a.tol});
  if (cfg.t_std.clamped) err << "warning: standard-model temperature clamped at " << format_double(cfg.t_std.t) << "\n";
  if (cfg.t_rob.clamped) err << "warning: robust-model temperature clamped at " << format_double(cfg.t_rob.t) << "\n";
  if (cfg.sparse_validation) err << "warning: validation set has fewer rows than classes\n";

  const auto id_test = load_pair(id_std, id_rob);
  require(id_test.std_scores.rows() > 0, ErrorKind::empty_input, "ID test set is empty");
  require(id_test.std_scores.classes() == val.std_scores.classes(), ErrorKind::shape,
          "test and validation class counts differ");
  std::optional<SplitPair> ood;
  if (!a.eval_ood.empty()) {
    const auto [s, r] = split_pair(a.eval_ood, "--eval-ood");
    ood = load_pair(s, r);
    require(ood->std_scores.rows() > 0, ErrorKind::empty_input, "OOD test set is empty");
    require(ood->std_scores.classes() == val.std_scores.classes(), ErrorKind::shape,
            "OOD and validation class counts differ");
  }

  const std::vector<ModelSpec> models = {ModelSpec::standard(), ModelSpec::robust(),
                                         ModelSpec::ensemble(std::string(to_string(*strategy)), cfg)};
  const auto rows = evaluate_models(models, id_test, ood);

  Json jrows = Json::array();
  for (const auto& r : rows) jrows.push_back(io::to_json(r));
  Json gaps{{"id", io::to_json(gap_closed(rows[0].id_accuracy, rows[1].id_accuracy, rows[2].id_accuracy))}};
  if (ood) gaps["ood"] = io::to_json(gap_closed(*rows[0].ood_accuracy, *rows[1].ood_accuracy, *rows[2].ood_accuracy));

  Json inputs{{"id_val_std", a.val_std}, {"id_val_rob", a.val_rob}, {"eval_id_std", id_std}, {"eval_id_rob", id_rob}};
  if (!a.eval_ood.empty()) inputs["eval_ood"] = a.eval_ood;
  Json j{{"schema_version", io::kSchemaVersion},
         {"kind", "eval_report"},
         {"dataset", a.dataset},
         {"tag", a.tag},
         {"class_count", val.std_scores.classes()},
         {"provenance", {{"ensemble", io::to_json(cfg)}, {"tol", a.tol}, {"inputs", inputs}}},
         {"rows", jrows},
         {"gap_closed", gaps}};
  emit(j, a.report, out);
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string world, shift, out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

void write_conditionals(const fs::path& path, const SampledShiftSet& set) {
  std::ostringstream ss;
  const std::size_t k = set.exact_conditionals.cols();
  for (std::size_t j = 0; j < k; ++j) ss << (j ? "," : "") << "p_" << j;
  ss << ",regime\n";
  for (std::size_t i = 0; i < set.rows(); ++i) {
    const auto row = set.exact_conditionals.row(i);
    for (std::size_t j = 0; j < k; ++j) ss << (j ? "," : "") << format_double(row[j]);
    ss << ',' << to_string(set.regimes[i]) << '\n';
  }
  io::write_text_file(path, ss.str());
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
  auto world = io::world_from_json(io::read_json_file(a.world));
  world.seed = a.seed;
  require(a.n >= 1, ErrorKind::parse, "--n must be at least 1");
  const bool id = a.shift.empty() || a.shift == "id";
  std::optional<ShiftSpec> shift;
  if (!id) shift = parse_shift(a.shift);
  const auto set = id ? sample_id(world, a.n) : sample_ood(world, *shift, a.n);

  const fs::path dir(a.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::parse, "cannot create output directory " + a.out);
  io::write_score_file(dir / "std.csv", set.std_scores, &set.labels);
  io::write_score_file(dir / "rob.csv", set.rob_scores, &set.labels);
  write_conditionals(dir / "conditionals.csv", set);
  Json manifest{{"schema_version", io::kSchemaVersion},
                {"kind", "simulation"},
                {"world", io::to_json(world)},
                {"shift", id ? std::string("id") : to_string(*shift)},
                {"n", a.n},
                {"seed", a.seed},
                {"label_symmetric", set.label_symmetric},
                {"files", {{"standard", "std.csv"}, {"robust", "rob.csv"}, {"conditionals", "conditionals.csv"}}}};
  io::write_text_file(dir / "manifest.json", io::dump(manifest));
  out << "wrote " << set.rows() << " rows to " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string prop, config, out;
};

void report_failure(const VerdictReport& v, const std::string& where, std::ostream& err) {
  if (const auto* c = v.first_failure()) {
    err << "FAIL" << (where.empty() ? "" : " (" + where + ")") << ": " << c->name << " - " << c->detail;
    if (c->first_violation) err << "; first violation at index " << *c->first_violation;
    err << "\n";
  }
}

int verify_sampled(const VerifyArgs& a, const Json& cfg, std::ostream& out, std::ostream& err) {
  require(cfg.contains("world"), ErrorKind::parse, "config needs a 'world'");
  auto world = io::world_from_json(cfg.at("world"));
  require(cfg.contains("n") && cfg.at("n").is_number_unsigned(), ErrorKind::parse, "config needs a positive integer 'n'");
  const auto n = cfg.at("n").get<std::size_t>();
  if (cfg.contains("seed")) world.seed = cfg.at("seed").get<std::uint64_t>();
  const std::string shift_text = cfg.value("shift", std::string("id"));

  const auto which = static_cast<Proposition>(std::stoi(a.prop));
  SampledShiftSet set;
  if (shift_text == "id") {
    require(which == Proposition::id_optimal, ErrorKind::usage, "proposition " + a.prop + " needs an OOD shift");
    set = sample_id(world, n);
  } else {
    require(which != Proposition::id_optimal, ErrorKind::usage, "proposition 1 is checked on in-distribution samples");
    set = sample_ood(world, parse_shift(shift_text), n);
  }
  VerifyOptions opt;
  if (cfg.contains("challenger_seed")) opt.challenger_seed = cfg.at("challenger_seed").get<std::uint64_t>();
  const auto v = verify_proposition(set, which, opt);
  for (const auto& note : v.notes) err << "note: " << note << "\n";

  Json j{{"schema_version", io::kSchemaVersion},
         {"kind", "verification"},
         {"prop", a.prop},
         {"verdict", v.passed() ? "PASS" : "FAIL"},
         {"world", io::to_json(world)},
         {"shift", shift_text},
         {"n", n},
         {"seed", world.seed},
         {"label_symmetric", set.label_symmetric},
         {"report", io::to_json(v)}};
  emit(j, a.out, out);
  if (!v.passed()) {
    report_failure(v, "", err);
    return kVerificationFailed;
  }
  return kOk;
}

int verify_tables(const VerifyArgs& a, const Json& cfg, std::ostream& out, std::ostream& err) {
  Json entries = Json::array();
  if (cfg.contains("tables")) {
    entries = cfg.at("tables");
  } else {
    require(cfg.contains("table"), ErrorKind::parse, "config needs 'table' or 'tables'");
    entries.push_back(cfg.at("table"));
  }
  require(entries.is_array() && !entries.empty(), ErrorKind::parse, "'tables' must be a non-empty array");

  Json results = Json::array();
  bool all_pass = true;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const auto table = io::table_from_json(e);
    const std::string name = e.value("name", "table " + std::to_string(i));
    VerdictReport v;
    if (a.prop == "lemma")
      v = check_lemma_softmax(table, LemmaOptions{.drop_marginal = e.value("drop_marginal", false)});
    else if (a.prop == "prop1-exhaustive")
      v = check_prop1_exhaustive(table);
    else
      v = check_corollary_trivial_bound(table);
    if (!v.passed()) {
      if (all_pass) report_failure(v, name, err);
      all_pass = false;
    }
    results.push_back(Json{{"table", name}, {"bayes_error", bayes_error(table)}, {"report", io::to_json(v)}});
  }
  Json j{{"schema_version", io::kSchemaVersion},
         {"kind", "verification"},
         {"prop", a.prop},
         {"verdict", all_pass ? "PASS" : "FAIL"},
         {"results", results}};
  emit(j, a.out, out);
  return all_pass ? kOk : kVerificationFailed;
}

int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = io::read_json_file(a.config);
  require(cfg.is_object(), ErrorKind::parse, "config must be a JSON object");
  if (cfg.contains("schema_version"))
    require(cfg.at("schema_version") == io::kSchemaVersion, ErrorKind::parse, "unsupported config schema_version");
  try {
    if (a.prop == "1" || a.prop == "2" || a.prop == "3") return verify_sampled(a, cfg, out, err);
    return verify_tables(a, cfg, out, err);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::parse, std::string("config: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "json", out;
};

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  std::vector<Json> reports;
  std::vector<DatasetResult> datasets;
  std::optional<std::size_t> k;
  for (const auto& path : a.inputs) {
    auto j = io::read_json_file(path);
    require(j.is_object() && j.value("kind", "") == "eval_report", ErrorKind::parse, path + ": not an eval_report");
    require(j.value("schema_version", 0) == io::kSchemaVersion, ErrorKind::parse, path + ": unsupported schema_version");
    require(j.contains("rows") && j.at("rows").is_array() && j.contains("class_count"), ErrorKind::parse,
            path + ": missing rows or class_count");
    const auto kk = j.at("class_count").get<std::size_t>();
    require(!k || *k == kk, ErrorKind::parse, path + ": class_count " + std::to_string(kk) + " conflicts with " +
                                                  std::to_string(k.value_or(0)));
    k = kk;
    DatasetResult ds;
    ds.dataset = j.value("dataset", path);
    const std::string tag = j.value("tag", "natural");
    require(tag == "natural" || tag == "adversarial", ErrorKind::parse, path + ": unknown tag '" + tag + "'");
    ds.tag = tag == "natural" ? ShiftTag::natural : ShiftTag::adversarial;
    for (const auto& r : j.at("rows")) ds.rows.push_back(io::eval_row_from_json(r));
    for (const auto& prev : datasets)
      require(prev.dataset != ds.dataset, ErrorKind::parse, path + ": duplicate dataset '" + ds.dataset + "'");
    datasets.push_back(std::move(ds));
    reports.push_back(std::move(j));
  }
  const auto averages = aggregate(datasets);

  // One table row per model: per-dataset ID, per-dataset OOD, averages, gap closed.
  std::vector<std::string> models;
  for (const auto& avg : averages)
    if (avg.group == "all") models.push_back(avg.model);
  auto lookup = [&](const DatasetResult& ds, const std::string& model) -> const EvalRow* {
    for (const auto& r : ds.rows)
      if (r.model == model) return &r;
    return nullptr;
  };
  auto overall = [&](const std::string& model) -> const ModelAverage* {
    for (const auto& avg : averages)
      if (avg.model == model && avg.group == "all") return &avg;
    return nullptr;
  };
  const auto* std_avg = overall("standard");
  const auto* rob_avg = overall("robust");

  std::vector<std::string> columns = {"model"};
  for (const auto& ds : datasets) columns.push_back(ds.dataset + " ID");
  for (const auto& ds : datasets) columns.push_back(ds.dataset + " OOD");
  columns.insert(columns.end(), {"average ID", "average OOD", "gap closed ID", "gap closed OOD"});

  Json table = Json::array();
  for (const auto& model : models) {
    Json row = Json::array();
    row.push_back(model);
    for (const auto& ds : datasets) {
      const auto* r = lookup(ds, model);
      row.push_back(r ? Json(r->id_accuracy) : Json());
    }
    for (const auto& ds : datasets) {
      const auto* r = lookup(ds, model);
      std::optional<double> v;
      if (r) v = ds.tag == ShiftTag::adversarial && r->ood_worst_group ? r->ood_worst_group : r->ood_accuracy;
      row.push_back(v ? Json(*v) : Json());
    }
    const auto* avg = overall(model);
    row.push_back(avg->id_mean);
    row.push_back(avg->ood_mean ? Json(*avg->ood_mean) : Json());
    const bool base = model == "standard" || model == "robust";
    if (!base && std_avg && rob_avg) {
      const auto g = gap_closed(std_avg->id_mean, rob_avg->id_mean, avg->id_mean);
      row.push_back(g.degenerate ? Json() : Json(g.fraction));
      if (std_avg->ood_mean && rob_avg->ood_mean && avg->ood_mean) {
        const auto go = gap_closed(*std_avg->ood_mean, *rob_avg->ood_mean, *avg->ood_mean);
        row.push_back(go.degenerate ? Json() : Json(go.fraction));
      } else {
        row.push_back(Json());
      }
    } else {
      row.push_back(Json());
      row.push_back(Json());
    }
    table.push_back(std::move(row));
  }

  if (a.format == "json") {
    Json jav = Json::array();
    for (const auto& avg : averages) jav.push_back(io::to_json(avg));
    Json j{{"schema_version", io::kSchemaVersion},
           {"kind", "merged_report"},
           {"class_count", *k},
           {"inputs", reports},
           {"columns", columns},
           {"table", table},
           {"averages", jav}};
    emit(j, a.out, out);
    return kOk;
  }

  std::ostringstream md;
  md << "|";
  for (const auto& c : columns) md << ' ' << c << " |";
  md << "\n|";
  for (std::size_t i = 0; i < columns.size(); ++i) md << (i == 0 ? " --- |" : " ---: |");
  md << "\n";
  for (const auto& row : table) {
    md << "|";
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (row[i].is_null())
        md << " - |";
      else if (row[i].is_string())
        md << ' ' << row[i].get<std::string>() << " |";
      else if (i + 2 >= row.size())
        md << ' ' << fixed2(100.0 * row[i].get<double>()) << "% |";
      else
        md << ' ' << fixed2(row[i].get<double>()) << " |";
    }
    md << "\n";
  }
  if (a.out.empty() || a.out == "-")
    out << md.str();
  else
    io::write_text_file(a.out, md.str());
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Calibrated ensembling of a standard and a robust classifier", "calens"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-temperature", "Fit the confidence-matching temperature for one score file");
  fit_cmd->add_option("--scores", fit.scores, "Labeled score CSV")->required();
  fit_cmd->add_option("--out", fit.out, "Output JSON record (default: stdout)");
  fit_cmd->add_option("--tol", fit.tol, "Allowed |confidence - accuracy| gap")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--bins", fit.bins, "Reliability bins")->check(CLI::PositiveNumber);

  EnsembleArgs ens;
  auto* ens_cmd = app.add_subcommand("ensemble", "Fit an ensemble on ID validation data and evaluate it");
  ens_cmd->add_option("--std", ens.std_test, "Standard-model ID test scores (same as the first --eval-id path)");
  ens_cmd->add_option("--rob", ens.rob_test, "Robust-model ID test scores (same as the second --eval-id path)");
  ens_cmd->add_option("--id-val-std", ens.val_std, "Standard-model ID validation scores")->required();
  ens_cmd->add_option("--id-val-rob", ens.val_rob, "Robust-model ID validation scores")->required();
  ens_cmd->add_option("--strategy", ens.strategy, "logits | probs | tuned-logits | tuned-probs | calibrated-logits | "
                                                  "calibrated-probs | calibrated-logits-marginal");
  ens_cmd->add_option("--eval-id", ens.eval_id, "STD_PATH,ROB_PATH of the ID test split");
  ens_cmd->add_option("--eval-ood", ens.eval_ood, "STD_PATH,ROB_PATH of the OOD test split");
  ens_cmd->add_option("--report", ens.report, "Output report JSON (default: stdout)");
  ens_cmd->add_option("--dataset", ens.dataset, "Dataset name recorded in the report");
  ens_cmd->add_option("--tag", ens.tag, "natural | adversarial");
  ens_cmd->add_option("--tol", ens.tol, "Temperature fit tolerance")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Sample the synthetic two-model world");
  sim_cmd->add_option("--world", sim.world, "World config JSON")->required();
  sim_cmd->add_option("--shift", sim.shift, "id | missing | suppressed:tau=X | anticorrelated:alpha=X,beta=Y | "
                                            "mix:w=X,a=(SPEC),b=(SPEC)");
  sim_cmd->add_option("--n", sim.n, "Rows to sample")->required();
  sim_cmd->add_option("--seed", sim.seed, "Sampling seed")->required();
  sim_cmd->add_option("--out", sim.out, "Output directory")->required();

  VerifyArgs ver;
  auto* ver_cmd = app.add_subcommand("verify", "Check an ensembling claim on a synthetic world or exact tables");
  ver_cmd->add_option("--prop", ver.prop, "1 | 2 | 3 | lemma | prop1-exhaustive | corollary")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "lemma", "prop1-exhaustive", "corollary"}));
  ver_cmd->add_option("--config", ver.config, "Config JSON")->required();
  ver_cmd->add_option("--out", ver.out, "Evidence JSON (default: stdout)");

  ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "Merge evaluation reports into one table");
  rep_cmd->add_option("--inputs", rep.inputs, "Report JSON files")->required()->expected(1, -1);
  rep_cmd->add_option("--format", rep.format, "json | markdown")->check(CLI::IsMember({"json", "markdown"}));
  rep_cmd->add_option("--out", rep.out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kParseError;
  }

  try {
    if (*fit_cmd) return cmd_fit_temperature(fit, out, err);
    if (*ens_cmd) return cmd_ensemble(ens, out, err);
    if (*sim_cmd) return cmd_simulate(sim, out, err);
    if (*ver_cmd) return cmd_verify(ver, out, err);
    if (*rep_cmd) return cmd_report(rep, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kParseError;
  }
  return kParseError;
}

}  // namespace calens::cli
