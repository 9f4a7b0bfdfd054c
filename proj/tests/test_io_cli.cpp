#include <cmath>
#include <sstream>

#include "doctest.h"

#include "calens/error.hpp"
#include "calens/io.hpp"
#include "calens/synthetic.hpp"
#include "support/cli_run.hpp"

using namespace calens;
using calens::testing::run_cli;
using calens::testing::slurp;
using calens::testing::TempDir;

namespace {

const char* kWorld2 = R"({"class_count": 2, "standard": {"separation": 1.0}, "robust": {"separation": 1.5}})";
const char* kWorldAsym =
    R"({"class_count": 3, "standard": {"separation": 1.0},
        "robust": {"means": [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.7, 0.0, 1.0]]}})";

std::string csv(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  std::ostringstream ss;
  io::write_score_csv(ss, ScoreSet::from_rows(rows), &labels);
  return ss.str();
}

io::Json read_json(const std::filesystem::path& p) { return io::read_json_file(p); }

}  // namespace

TEST_CASE("score CSV round-trip") {
  const auto s = ScoreSet::from_rows({{0.1, -2.5e-7, 3.0}, {1.0 / 3.0, 1e300, -0.0}});
  const std::vector<int> y = {2, 0};
  const std::vector<int> g = {1, 4};
  std::stringstream ss;
  io::write_score_csv(ss, s, &y, &g);
  CHECK(ss.str().rfind("score_0,score_1,score_2,label,group\n", 0) == 0);
  const auto back = io::parse_score_csv(ss);
  CHECK(back.scores == s);
  CHECK(*back.labels == y);
  CHECK(*back.groups == g);
  CHECK(back.labeled() == LabeledScores(s, y, g));
}

TEST_CASE("score CSV errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return io::parse_score_csv(in);
  };
  CHECK_THROWS_AS(parse(""), Error);
  CHECK_THROWS_AS(parse("a,b\n1,2\n"), Error);
  CHECK_THROWS_AS(parse("score_0,score_1,label\n1,x,0\n"), Error);
  CHECK_THROWS_AS(parse("score_0,score_1,label\n1,2\n"), Error);
  CHECK_THROWS_AS(parse("score_0,score_1,label\n1,2,5\n"), Error);
  CHECK_THROWS_AS(parse("score_0,score_1,label\n1,nan,0\n"), Error);
  const auto unlabeled = parse("score_0,score_1\n1,2\n");
  CHECK_FALSE(unlabeled.labels.has_value());
  CHECK_THROWS_AS(unlabeled.labeled(), Error);
}

TEST_CASE("fit-temperature command") {
  TempDir dir("fit");
  const auto scores = dir.write("s.csv", csv({{std::log(9.0), 0}, {std::log(9.0), 0}, {std::log(9.0), 0}, {std::log(9.0), 0}},
                                             {0, 0, 0, 1}));
  auto r = run_cli({"fit-temperature", "--scores", scores, "--out", (dir / "t.json").string()});
  REQUIRE(r.code == 0);
  const auto j = read_json(dir / "t.json");
  CHECK(std::abs(j["temperature"].get<double>() - 2.0) <= 1e-5);
  CHECK(std::abs(j["achieved_confidence"].get<double>() - j["accuracy"].get<double>()) <= 1e-6);
  CHECK_FALSE(j["clamped"].get<bool>());

  // accuracy 1/4 < 1/K: clamped, still exit 0, warning on err
  const auto low = dir.write("low.csv", csv({{2, 0}, {2, 0}, {2, 0}, {2, 0}}, {0, 1, 1, 1}));
  r = run_cli({"fit-temperature", "--scores", low});
  CHECK(r.code == 0);
  CHECK(io::Json::parse(r.out)["clamped"].get<bool>());
  CHECK(r.err.find("warning") != std::string::npos);

  const auto nolabel = dir.write("nolabel.csv", "score_0,score_1\n1,0\n");
  CHECK(run_cli({"fit-temperature", "--scores", nolabel}).code == 2);
  const auto empty = dir.write("empty.csv", "score_0,score_1,label\n");
  CHECK(run_cli({"fit-temperature", "--scores", empty}).code == 3);
  CHECK(run_cli({"fit-temperature", "--scores", (dir / "missing.csv").string()}).code == 2);
  CHECK(run_cli({"fit-temperature"}).code == 2);
}

TEST_CASE("ensemble command") {
  TempDir dir("ens");
  const auto world = dir.write("world.json", kWorld2);
  REQUIRE(run_cli({"simulate", "--world", world, "--n", "4000", "--seed", "1", "--out", (dir / "val").string()}).code == 0);
  REQUIRE(run_cli({"simulate", "--world", world, "--n", "20000", "--seed", "2", "--out", (dir / "test").string()}).code == 0);
  REQUIRE(run_cli({"simulate", "--world", world, "--shift", "mix:w=0.5,a=(missing),b=(suppressed:tau=2)", "--n", "4000",
                   "--seed", "3", "--out", (dir / "ood").string()})
              .code == 0);
  const std::string vs = (dir / "val/std.csv").string(), vr = (dir / "val/rob.csv").string();
  const std::string ts = (dir / "test/std.csv").string(), tr = (dir / "test/rob.csv").string();
  const std::string os = (dir / "ood/std.csv").string(), orob = (dir / "ood/rob.csv").string();

  auto r = run_cli({"ensemble", "--id-val-std", vs, "--id-val-rob", vr, "--eval-id", ts + "," + tr, "--eval-ood",
                    os + "," + orob, "--report", (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  const auto j = read_json(dir / "report.json");
  CHECK(j["kind"] == "eval_report");
  const auto& rows = j["rows"];
  REQUIRE(rows.size() == 3);
  CHECK(rows[2]["model"] == "calibrated-probs");
  const double n = 20000.0;
  const double best = std::max(rows[0]["id_accuracy"].get<double>(), rows[1]["id_accuracy"].get<double>());
  const double slack = 100.0 * 3.0 * std::sqrt(0.25 / n);
  CHECK(rows[2]["id_accuracy"].get<double>() >= best - slack);
  CHECK(rows[2].contains("ood_accuracy"));
  CHECK(j["gap_closed"].contains("ood"));

  // --std/--rob form, no OOD split
  r = run_cli({"ensemble", "--id-val-std", vs, "--id-val-rob", vr, "--std", ts, "--rob", tr, "--strategy", "tuned-logits"});
  REQUIRE(r.code == 0);
  const auto k = io::Json::parse(r.out);
  CHECK_FALSE(k["rows"][0].contains("ood_accuracy"));
  CHECK_FALSE(k["gap_closed"].contains("ood"));

  CHECK(run_cli({"ensemble", "--id-val-std", vs, "--id-val-rob", vr, "--eval-id", ts + "," + tr, "--strategy", "average"})
            .code == 5);
  // validation split paired with the test split's robust file
  CHECK(run_cli({"ensemble", "--id-val-std", vs, "--id-val-rob", tr, "--eval-id", ts + "," + tr}).code == 4);
  const auto empty = dir.write("empty.csv", "score_0,score_1,label\n");
  CHECK(run_cli({"ensemble", "--id-val-std", empty, "--id-val-rob", empty, "--eval-id", ts + "," + tr}).code == 3);
}

TEST_CASE("simulate command") {
  TempDir dir("sim");
  const auto world = dir.write("world.json", kWorld2);
  auto sim = [&](const std::string& out, const std::string& shift) {
    return run_cli({"simulate", "--world", world, "--shift", shift, "--n", "500", "--seed", "7", "--out",
                    (dir / out).string()});
  };
  REQUIRE(sim("a", "suppressed:tau=0.5").code == 0);
  REQUIRE(sim("b", "suppressed:tau=0.5").code == 0);
  for (const char* f : {"std.csv", "rob.csv", "conditionals.csv", "manifest.json"})
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));

  const auto file = io::read_score_file(dir / "a/std.csv");
  CHECK(file.scores.rows() == 500);

  // written scores parse back bit-for-bit
  auto w = io::world_from_json(io::Json::parse(kWorld2));
  w.seed = 7;
  const auto set = sample_ood(w, parse_shift("suppressed:tau=0.5"), 500);
  CHECK(file.labeled() == set.std_labeled());
  CHECK(io::read_score_file(dir / "a/rob.csv").labeled() == set.rob_labeled());

  CHECK(sim("c", "mix:w=0.5,a=(missing),b=(suppressed:tau=2)").code == 0);
  CHECK(sim("d", "suppressed:tau=0").code == 2);
  CHECK(sim("e", "mix:w=0.5,a=(mix:w=1,a=(missing),b=(missing)),b=(missing)").code == 2);
  CHECK(sim("f", "rotated").code == 2);
}

TEST_CASE("verify command on sampled worlds") {
  TempDir dir("ver");
  auto config = [&](const std::string& name, const std::string& world, const std::string& shift, int n) {
    return dir.write(name, std::string(R"({"world": )") + world + R"(, "n": )" + std::to_string(n) +
                               R"(, "seed": 11, "shift": ")" + shift + "\"}");
  };
  auto r = run_cli({"verify", "--prop", "3", "--config", config("p3.json", kWorld2, "anticorrelated:alpha=1,beta=1", 20000)});
  CHECK(r.code == 0);
  CHECK(io::Json::parse(r.out)["verdict"] == "PASS");

  r = run_cli({"verify", "--prop", "1", "--config", config("p1.json", kWorld2, "id", 20000)});
  CHECK(r.code == 0);

  r = run_cli({"verify", "--prop", "2", "--config", config("p2.json", kWorldAsym, "suppressed:tau=2", 5000)});
  CHECK(r.code == 0);
  CHECK(r.err.find("note: aggregate error comparison skipped") != std::string::npos);
  const auto j = io::Json::parse(r.out);
  CHECK_FALSE(j["label_symmetric"].get<bool>());

  CHECK(run_cli({"verify", "--prop", "1", "--config", config("bad.json", kWorld2, "missing", 100)}).code == 2);
  CHECK(run_cli({"verify", "--prop", "7", "--config", config("p7.json", kWorld2, "missing", 100)}).code == 2);
  CHECK(run_cli({"verify", "--prop", "3", "--config", dir.write("broken.json", "{\"world\": 3")}).code == 2);
}

TEST_CASE("verify command on tables") {
  TempDir dir("tab");
  const auto lemma = dir.write("lemma.json", R"({"tables": [
      {"name": "sym", "class_count": 2, "s_support": [[1.0986122886681098, 0], [0, 1.0986122886681098]],
       "r_support": [[1.0986122886681098, 0], [0, 1.0986122886681098]], "marginals": [0.5, 0.5]},
      {"name": "skewed", "class_count": 2, "s_support": [[0.5108256237659907, 0]], "r_support": [[1.0986122886681098, 0], [0, 1.0986122886681098]],
       "marginals": [0.625, 0.375], "drop_marginal": true}]})");
  auto r = run_cli({"verify", "--prop", "lemma", "--config", lemma});
  CHECK(r.code == 1);
  CHECK(r.err.find("FAIL (skewed)") != std::string::npos);
  const auto j = io::Json::parse(r.out);
  CHECK(j["results"][0]["report"]["checks"][0]["passed"] == true);
  const auto& evidence = j["results"][1]["report"]["checks"][0]["evidence"];
  CHECK(evidence["max_deviation"].get<double>() > 1e-9);

  CHECK(run_cli({"verify", "--prop", "prop1-exhaustive", "--config", lemma}).code == 0);
  CHECK(run_cli({"verify", "--prop", "corollary", "--config", lemma}).code == 0);
}

TEST_CASE("report command") {
  TempDir dir("rep");
  auto report = [&](const std::string& name, const std::string& dataset, int k, double s, double rob, double e) {
    io::Json j{{"schema_version", 1},
               {"kind", "eval_report"},
               {"dataset", dataset},
               {"tag", "natural"},
               {"class_count", k},
               {"rows", io::Json::array({io::Json{{"model", "standard"}, {"id_accuracy", s}, {"ood_accuracy", s - 20}},
                                         io::Json{{"model", "robust"}, {"id_accuracy", rob}, {"ood_accuracy", rob - 5}},
                                         io::Json{{"model", "calibrated-probs"}, {"id_accuracy", e}, {"ood_accuracy", e - 6}}})}};
    return dir.write(name, io::dump(j));
  };
  const auto a = report("a.json", "alpha", 2, 90.0, 80.0, 91.0);
  const auto b = report("b.json", "beta", 2, 70.0, 60.0, 69.0);
  const auto c = report("c.json", "gamma", 5, 70.0, 60.0, 69.0);

  auto r = run_cli({"report", "--inputs", a});
  REQUIRE(r.code == 0);
  const auto one = io::Json::parse(r.out);
  CHECK(one.dump().find("alpha") != std::string::npos);

  r = run_cli({"report", "--inputs", a, b, "--format", "json"});
  REQUIRE(r.code == 0);
  const auto merged = r.out;
  CHECK(merged.find("\"beta\"") != std::string::npos);

  r = run_cli({"report", "--inputs", a, b, "--format", "markdown"});
  REQUIRE(r.code == 0);
  std::istringstream md(r.out);
  std::string header;
  std::getline(md, header);
  CHECK(header.rfind("| model", 0) == 0);
  CHECK(header.find("alpha ID") < header.find("beta ID"));
  CHECK(header.find("beta ID") < header.find("alpha OOD"));
  CHECK(header.find("average ID") < header.find("gap closed ID"));
  CHECK(run_cli({"report", "--inputs", a, b, "--format", "markdown"}).out == r.out);

  CHECK(run_cli({"report", "--inputs", a, c}).code == 2);
  CHECK(run_cli({"report", "--inputs", dir.write("junk.json", R"({"kind": "simulation"})")}).code == 2);
  CHECK(run_cli({"report", "--inputs", a, "--format", "html"}).code == 2);
}
