#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>

#include "msedid/simulate.hpp"

using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

#ifndef MSEDID_CLI_PATH
#error "MSEDID_CLI_PATH must point at the built command-line binary"
#endif

namespace {

struct RunResult {
  int code = -1;
  std::string output;  // combined stdout + stderr
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> fields_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string f;
  while (std::getline(in, f, ',')) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Fresh directory per test case, removed afterwards.
struct TempDir {
  fs::path path;
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "msedid_cli_XXXXXX").string();
    REQUIRE(mkdtemp(tmpl.data()) != nullptr);
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  fs::path operator/(const std::string& sub) const { return path / sub; }
};

RunResult run_cli(const TempDir& dir, const std::string& args) {
  const fs::path log = dir.path / "run.log";
  const std::string cmd =
      std::string(MSEDID_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult res;
  res.code = (rc != -1 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
  res.output = read_file(log);
  return res;
}

}  // namespace

TEST_CASE("simulate emits the dataset, group means, and manifest", "[cli]") {
  TempDir dir;
  fs::create_directory(dir / "a");
  auto r = run_cli(dir, "--seed 4242 --output " + (dir / "a").string() +
                            " simulate --kind static");
  INFO(r.output);
  REQUIRE(r.code == 0);

  auto data = lines_of(read_file(dir / "a" / "dataset.csv"));
  REQUIRE(data.size() == 2101);
  CHECK(data[0] == "unit,time,treated,outcome");
  CHECK(data[1].rfind("T1,-10,1,", 0) == 0);

  auto means = lines_of(read_file(dir / "a" / "group_means.csv"));
  REQUIRE(means.size() == 22);  // header + 21 periods
  CHECK(means[0] == "time,treated_mean,control_mean");

  const std::string manifest = read_file(dir / "a" / "manifest.json");
  CHECK_THAT(manifest, ContainsSubstring("\"subcommand\": \"simulate\""));
  CHECK_THAT(manifest, ContainsSubstring("dataset.csv"));
  CHECK_THAT(manifest, ContainsSubstring("group_means.csv"));
  CHECK_THAT(manifest, ContainsSubstring("\"seed\": 4242"));

  SECTION("same seed means byte-identical data, new seed means new data") {
    fs::create_directory(dir / "b");
    fs::create_directory(dir / "c");
    REQUIRE(run_cli(dir, "--seed 4242 --output " + (dir / "b").string() +
                             " simulate --kind static")
                .code == 0);
    REQUIRE(run_cli(dir, "--seed 4243 --output " + (dir / "c").string() +
                             " simulate --kind static")
                .code == 0);
    CHECK(read_file(dir / "a" / "dataset.csv") == read_file(dir / "b" / "dataset.csv"));
    CHECK(read_file(dir / "a" / "dataset.csv") != read_file(dir / "c" / "dataset.csv"));
  }
}

TEST_CASE("noise-free group means land on the closed-form path", "[cli]") {
  TempDir dir;
  auto r = run_cli(dir, "--output " + dir.path.string() +
                            " simulate --kind dynamic --noise-sd 0 --n-per-group 3");
  INFO(r.output);
  REQUIRE(r.code == 0);
  bool saw_t5 = false;
  for (const auto& line : lines_of(read_file(dir / "group_means.csv"))) {
    auto f = fields_of(line);
    if (f.size() == 3 && f[0] == "5") {
      saw_t5 = true;
      CHECK(f[1] == "180");
      CHECK(f[2] == "-50");
    }
  }
  CHECK(saw_t5);
}

TEST_CASE("select writes the pinned candidate table and a selection record",
          "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "--seed 11 --output " + dir.path.string() +
                           " simulate --kind static")
              .code == 0);
  auto r = run_cli(dir, "--output " + dir.path.string() + " select --input " +
                            (dir / "dataset.csv").string());
  INFO(r.output);
  REQUIRE(r.code == 0);

  auto cands = lines_of(read_file(dir / "candidates.csv"));
  REQUIRE(cands.size() == 11);  // header + lengths 0..9
  CHECK(cands[0] == "length,mse,bias_squared,variance,coefficient,se");
  CHECK(cands[1].rfind("0,", 0) == 0);
  CHECK(cands[10].rfind("9,", 0) == 0);

  auto diag = lines_of(read_file(dir / "diagnostics.csv"));
  CHECK(diag[0] == "length,mse_debiased");
  REQUIRE(diag.size() == 11);

  const std::string sel = read_file(dir / "selected.json");
  CHECK_THAT(sel, ContainsSubstring("\"optimal_length\""));
  CHECK_THAT(sel, ContainsSubstring("\"se_type\": \"iid\""));
  CHECK_THAT(sel, ContainsSubstring("\"candidates_file\": \"candidates.csv\""));
  CHECK_THAT(read_file(dir / "manifest.json"),
             ContainsSubstring("\"subcommand\": \"select\""));

  SECTION("a zero-length scan has one candidate and selects it") {
    fs::create_directory(dir / "zero");
    auto rz = run_cli(dir, "--output " + (dir / "zero").string() + " select --input " +
                               (dir / "dataset.csv").string() + " --max-length 0");
    REQUIRE(rz.code == 0);
    auto zc = lines_of(read_file(dir / "zero" / "candidates.csv"));
    REQUIRE(zc.size() == 2);
    CHECK_THAT(read_file(dir / "zero" / "selected.json"),
               ContainsSubstring("\"optimal_length\": 0"));
  }
  SECTION("cluster standard errors are labeled in the outputs") {
    fs::create_directory(dir / "cl");
    auto rc = run_cli(dir, "--se cluster --output " + (dir / "cl").string() +
                               " select --input " + (dir / "dataset.csv").string());
    REQUIRE(rc.code == 0);
    CHECK_THAT(read_file(dir / "cl" / "selected.json"),
               ContainsSubstring("\"se_type\": \"cluster\""));
    CHECK_THAT(read_file(dir / "cl" / "manifest.json"),
               ContainsSubstring("\"se\": \"cluster\""));
  }
}

TEST_CASE("estimate fits a single window and reports it as JSON", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "--output " + dir.path.string() +
                           " simulate --kind dynamic --noise-sd 0 --n-per-group 3")
              .code == 0);

  SECTION("pooled model") {
    auto r = run_cli(dir, "--output " + dir.path.string() + " estimate --input " +
                              (dir / "dataset.csv").string() +
                              " --model twfe --pre-length 0");
    INFO(r.output);
    REQUIRE(r.code == 0);
    const std::string est = read_file(dir / "estimate.json");
    CHECK_THAT(est, ContainsSubstring("\"model\": \"twfe\""));
    CHECK_THAT(est, ContainsSubstring("\"pre_length\": 0"));
    CHECK_THAT(est, ContainsSubstring("\"coefficient\""));
    CHECK_THAT(est, ContainsSubstring("\"se_type\": \"iid\""));
  }
  SECTION("curve models write curve.csv without a reference row") {
    auto r = run_cli(dir, "--output " + dir.path.string() + " estimate --input " +
                              (dir / "dataset.csv").string() +
                              " --model modified_event_study --pre-length 2 --target 6");
    INFO(r.output);
    REQUIRE(r.code == 0);
    auto curve = lines_of(read_file(dir / "curve.csv"));
    CHECK(curve[0] == "event_time,coefficient,se,ci_low,ci_high");
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].rfind("0,", 0) != 0);
    bool saw_target = false;
    for (const auto& line : curve)
      if (line.rfind("6,36,", 0) == 0) saw_target = true;
    CHECK(saw_target);  // noise-free pooled bias makes event time 6 exactly 36
    CHECK_THAT(read_file(dir / "estimate.json"), ContainsSubstring("\"target\": 6"));
  }
}

TEST_CASE("plotdata emits a curve with optional truth column and a scan sidecar",
          "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "--output " + dir.path.string() +
                           " simulate --kind dynamic --noise-sd 0 --n-per-group 3")
              .code == 0);
  auto r = run_cli(dir, "--output " + dir.path.string() + " plotdata --input " +
                            (dir / "dataset.csv").string() +
                            " --model mse_optimal --target 6 --truth-kind dynamic");
  INFO(r.output);
  REQUIRE(r.code == 0);

  auto curve = lines_of(read_file(dir / "curve.csv"));
  REQUIRE(curve.size() >= 3);
  CHECK(curve[0] == "event_time,coefficient,se,ci_low,ci_high,true_value");
  for (const auto& line : curve) {
    auto f = fields_of(line);
    if (f.empty()) continue;
    if (f[0] == "1") CHECK(f.back() == "0");   // ramp truth starts at zero
    if (f[0] == "6") CHECK(f.back() == "30");  // five periods after onset
  }

  auto sidecar = lines_of(read_file(dir / "selection.csv"));
  CHECK(sidecar[0] == "length,mse,bias_squared,variance,coefficient,se");
  CHECK_THAT(read_file(dir / "manifest.json"),
             ContainsSubstring("\"optimal_length\""));
}

TEST_CASE("one Monte Carlo replication is exactly simulate plus select", "[cli]") {
  TempDir dir;
  fs::create_directory(dir / "mc");
  fs::create_directory(dir / "manual");

  auto r = run_cli(dir, "--seed 4242 --full-precision --output " +
                            (dir / "mc").string() +
                            " mc --kind static --replications 1 --rules feasible_mse");
  INFO(r.output);
  REQUIRE(r.code == 0);

  auto reps = lines_of(read_file(dir / "mc" / "mc_replications.csv"));
  REQUIRE(reps.size() == 2);
  CHECK(reps[0] == "replication,seed,rule,selected_length,coefficient,se");
  auto rec = fields_of(reps[1]);
  REQUIRE(rec.size() == 6);
  CHECK(rec[0] == "0");
  CHECK(rec[2] == "feasible_mse");

  const std::uint64_t derived = 4242ULL ^ msedid::splitmix64(0);
  CHECK(rec[1] == std::to_string(derived));

  REQUIRE(run_cli(dir, "--seed " + std::to_string(derived) +
                           " --full-precision --output " + (dir / "manual").string() +
                           " simulate --kind static")
              .code == 0);
  REQUIRE(run_cli(dir, "--full-precision --output " + (dir / "manual").string() +
                           " select --input " + (dir / "manual" / "dataset.csv").string())
              .code == 0);

  bool matched = false;
  for (const auto& line : lines_of(read_file(dir / "manual" / "candidates.csv"))) {
    auto f = fields_of(line);
    if (f.size() == 6 && f[0] == rec[3]) {
      matched = true;
      CHECK(f[4] == rec[4]);  // coefficient, full precision text
      CHECK(f[5] == rec[5]);  // se
    }
  }
  CHECK(matched);
  CHECK_THAT(read_file(dir / "manual" / "selected.json"),
             ContainsSubstring("\"optimal_length\": " + rec[3]));
}

TEST_CASE("Monte Carlo summary histograms account for every replication", "[cli]") {
  TempDir dir;
  std::ofstream(dir / "small.cfg") << "n_per_group = 6\nseed = 99\n";
  auto r = run_cli(dir, "--config " + (dir / "small.cfg").string() + " --output " +
                            dir.path.string() +
                            " mc --kind static --replications 5"
                            " --rules 'feasible_mse,fixed(0),oracle'");
  INFO(r.output);
  REQUIRE(r.code == 0);

  auto summary = lines_of(read_file(dir / "mc_summary.csv"));
  REQUIRE(summary.size() == 4);  // header + three rules
  auto header = fields_of(summary[0]);
  REQUIRE(header.size() >= 10);
  CHECK(header[0] == "rule");
  CHECK(header[9] == "sel_0");
  CHECK(header.back() == "sel_9");

  for (size_t row = 1; row < summary.size(); ++row) {
    auto f = fields_of(summary[row]);
    REQUIRE(f.size() == header.size());
    long sum = 0;
    for (size_t j = 9; j < f.size(); ++j)
      if (!f[j].empty()) sum += std::stol(f[j]);
    CHECK(sum == 5);
    CHECK(f[1] == "5");  // replications column
  }

  auto reps = lines_of(read_file(dir / "mc_replications.csv"));
  CHECK(reps.size() == 16);  // header + 5 replications x 3 rules
  CHECK_THAT(read_file(dir / "manifest.json"), ContainsSubstring("\"true_value\""));
}

TEST_CASE("command-line seed overrides the config file seed", "[cli]") {
  TempDir dir;
  std::ofstream(dir / "seeded.cfg") << "seed = 1\nn_per_group = 3\n";
  fs::create_directory(dir / "cfg_only");
  fs::create_directory(dir / "overridden");
  fs::create_directory(dir / "flag_only");

  const std::string cfg = " --config " + (dir / "seeded.cfg").string();
  REQUIRE(run_cli(dir, cfg + " --output " + (dir / "cfg_only").string() +
                           " simulate --kind static")
              .code == 0);
  REQUIRE(run_cli(dir, cfg + " --seed 9 --output " + (dir / "overridden").string() +
                           " simulate --kind static")
              .code == 0);
  REQUIRE(run_cli(dir, " --seed 9 --output " + (dir / "flag_only").string() +
                           " simulate --kind static --n-per-group 3")
              .code == 0);

  CHECK(read_file(dir / "overridden" / "dataset.csv") ==
        read_file(dir / "flag_only" / "dataset.csv"));
  CHECK(read_file(dir / "overridden" / "dataset.csv") !=
        read_file(dir / "cfg_only" / "dataset.csv"));
}

TEST_CASE("column remapping flags flow into the loader", "[cli]") {
  TempDir dir;
  // Three units keep residual df at 1 so the estimate can report an se.
  std::ofstream(dir / "odd.csv") << "id,period,grp,value\n"
                                    "a,-1,1,0\n"
                                    "a,0,1,3\n"
                                    "b,-1,0,0\n"
                                    "b,0,0,1\n"
                                    "c,-1,0,0\n"
                                    "c,0,0,1\n";
  auto r = run_cli(dir, "--col-unit id --col-time period --col-treated grp"
                        " --col-outcome value --output " +
                            dir.path.string() + " estimate --input " +
                            (dir / "odd.csv").string() + " --model twfe --pre-length 0");
  INFO(r.output);
  REQUIRE(r.code == 0);

  const std::string est = read_file(dir / "estimate.json");
  const auto pos = est.find("\"coefficient\": ");
  REQUIRE(pos != std::string::npos);
  const double coef = std::strtod(est.c_str() + pos + 15, nullptr);
  CHECK(std::abs(coef - 2.0) <= 1e-12);
}

TEST_CASE("failures exit with documented codes", "[cli]") {
  TempDir dir;
  REQUIRE(run_cli(dir, "--output " + dir.path.string() +
                           " simulate --kind static --n-per-group 3")
              .code == 0);
  const std::string data = (dir / "dataset.csv").string();

  SECTION("usage errors") {
    CHECK(run_cli(dir, "--definitely-not-a-flag simulate --kind static").code == 2);
    CHECK(run_cli(dir, "simulate").code == 2);           // --kind is required
    CHECK(run_cli(dir, "").code == 2);                   // a subcommand is required
    CHECK(run_cli(dir, "simulate --kind sideways").code == 2);
  }
  SECTION("input errors") {
    auto r = run_cli(dir, "select --input /nonexistent/panel.csv");
    CHECK(r.code == 2);
    CHECK_THAT(r.output, ContainsSubstring("error"));
    CHECK(run_cli(dir, "--t-star -25 select --input " + data).code == 2);
  }
  SECTION("estimation errors") {
    auto r = run_cli(dir, "--output " + dir.path.string() + " select --input " + data +
                              " --max-length 99");
    CHECK(r.code == 3);
    CHECK_THAT(r.output, ContainsSubstring("feasible"));
    CHECK(run_cli(dir, "--output " + dir.path.string() + " estimate --input " + data +
                           " --model twfe --pre-length 99")
              .code == 3);
  }
  SECTION("error runs do not leave a manifest behind") {
    fs::create_directory(dir / "failed");
    auto r = run_cli(dir, "--output " + (dir / "failed").string() + " select --input " +
                              data + " --max-length 99");
    REQUIRE(r.code == 3);
    CHECK_FALSE(fs::exists(dir / "failed" / "manifest.json"));
  }
}
