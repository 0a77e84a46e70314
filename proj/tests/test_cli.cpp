#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "routed_bell/constants.hpp"

#ifndef ROUTED_BELL_CLI
#error "ROUTED_BELL_CLI must name the CLI executable"
#endif

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(ROUTED_BELL_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

nlohmann::json run_json(const std::string& args, int expect_code = 0) {
  const Run r = run(args + " --format json");
  CHECK(r.code == expect_code);
  return nlohmann::json::parse(r.out);
}

std::string q_str(double q) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", q);
  return buf;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("routed_bell_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::size_t count_with_suffix(const std::filesystem::path& dir, const std::string& suffix) {
  std::size_t n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().string().ends_with(suffix)) ++n;
  return n;
}

}  // namespace

TEST_CASE("score subcommand") {
  const auto j = run_json("score --strategy rbb84 --n 1 --eta 1 --v 1 --q 0.7071067811865476");
  const auto& row = j["rows"][0];
  CHECK(row["value"].get<double>() == doctest::Approx(0.2928932).epsilon(1e-7));
  CHECK(row["jm_threshold"].get<double>() == doctest::Approx(0.1464466).epsilon(1e-7));
  CHECK(row["certified"] == true);
  CHECK(j["metadata"]["command"] == "score");
  CHECK(j["metadata"]["version"].is_string());

  const auto zero = run_json("score --strategy rbb84 --n 1 --eta 0 --v 1 --q 0.7071067811865476");
  CHECK(zero["rows"][0]["value"].get<double>() == 0.0);
  CHECK(zero["rows"][0]["certified"] == false);

  const double q = routed_bell::alpha * routed_bell::beta_prime;
  const auto edge = run_json("score --strategy rchsh --n 2 --eta 0.25 --v 1 --q " + q_str(q));
  CHECK(std::abs(edge["rows"][0]["value"].get<double>() - edge["rows"][0]["jm_threshold"].get<double>()) < 1e-9);
  CHECK(edge["rows"][0]["certified"] == false);

  const Run csv = run("score --strategy rbb84 --n 1 --eta 1 --v 1 --q 0.7071067811865476");
  CHECK(csv.code == 0);
  CHECK(csv.out.starts_with("# routed-bell"));
  CHECK(csv.out.find("functional,value,ideal,jm_threshold,penalty_window,certified") != std::string::npos);
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run("score --strategy rbb84 --n 1 --eta 2").code == 1);
  CHECK(run("score --strategy nope --n 1").code == 1);
  CHECK(run("score --strategy rbb84 --n 0").code == 1);
  CHECK(run("score --strategy rbb84 --n 1 --v -1").code == 1);
  CHECK(run("score --strategy rbb84 --n 1 --q -0.5").code == 1);
  CHECK(run("jm-scan --family bb84 --n 4").code == 1);
  CHECK(run("npa-export --strategy rbb84 --n 1 --level 1+X --out-dir /tmp").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("").code == 1);
}

TEST_CASE("jm-scan subcommand") {
  const auto ok = run_json("jm-scan --family bb84 --n 2 --q 0.7071067811865476");
  CHECK(ok["verified"] == true);
  CHECK(ok["patterns_scanned"] == 625);
  CHECK(ok["max_lambda"].get<double>() == doctest::Approx(1 - routed_bell::inv_sqrt2).epsilon(1e-9));
  CHECK(ok.contains("wall_time_seconds"));
  CHECK(ok["argmax_pattern"].is_array());

  const auto bad = run_json("jm-scan --family chsh --n 1 --q 0.6", 3);
  CHECK(bad["verified"] == false);

  // Worker count and pruning leave the result unchanged.
  const auto a = run_json("jm-scan --family chsh --n 2 --q 0.5 --workers 1", 3);
  const auto b = run_json("jm-scan --family chsh --n 2 --q 0.5 --workers max", 3);
  const auto c = run_json("jm-scan --family chsh --n 2 --q 0.5 --workers 3 --prune", 3);
  CHECK(a["max_lambda"] == b["max_lambda"]);
  CHECK(a["argmax_index"] == b["argmax_index"]);
  CHECK(std::abs(a["max_lambda"].get<double>() - c["max_lambda"].get<double>()) < 1e-12);
  CHECK(c["pruned"] == true);

  const Run env = run("jm-scan --family bb84 --n 1 --format json --q 0.8 --workers 2");
  CHECK(env.code == 0);
  const Run forced = run("--help");
  CHECK(forced.code == 0);
}

TEST_CASE("thread override from the environment") {
  const std::string cmd = std::string("ROUTED_BELL_THREADS=2 ") + ROUTED_BELL_CLI +
                          " jm-scan --family bb84 --n 1 --q 0.8 --format json 2>/dev/null";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, n);
  pclose(p);
  CHECK(nlohmann::json::parse(out)["workers"] == 2);
}

TEST_CASE("robust subcommand") {
  const auto zero = run_json("robust --n 2 --f 0");
  CHECK(zero["variants"][0]["eta_star"].get<double>() == 0.25);
  const auto forced = run_json("robust --n 1 --delta 0.01 --epsilon 0.01");
  CHECK(forced["variants"][0]["eta_star"].get<double>() == doctest::Approx(0.7592108).epsilon(1e-6));
  CHECK(forced["variants"][1]["eta_star"].get<double>() == doctest::Approx(0.8083047).epsilon(1e-6));
  CHECK(forced["metadata"]["config"]["f_provenance"].is_string());
  const auto empty = run_json("robust --n 1 --f 0.5 --epsilon 0.1", 2);
  CHECK(empty["error"] == "robustness window empty");
}

TEST_CASE("eta-scan writes one problem and sidecar per grid point") {
  const auto dir = scratch_dir("eta");
  const Run r = run("eta-scan --strategy rbb84 --n 1 --v-grid 0:1:11 --level 1 --out-dir " + dir.string());
  CHECK(r.code == 0);
  CHECK(count_with_suffix(dir, ".dat-s") == 11);
  CHECK(count_with_suffix(dir, ".dat-s.json") == 11);
  CHECK(std::filesystem::exists(dir / "bisection_plan.json"));
  CHECK(r.out.find("v,strategy,n_copies,level,depth,probe_eta,probe_file,eta_star_closed_form") != std::string::npos);
  // The v = 1 row carries the closed form.
  CHECK(r.out.find("\n1,rbb84,1,1,0,0.5,") != std::string::npos);
  CHECK(r.out.find(",0.5,,,") != std::string::npos);

  const auto j = run_json("eta-scan --strategy rbb84 --n 2 --v 1 --level 1 --out-dir " + dir.string());
  CHECK(j["rows"][0]["eta_star_closed_form"].get<double>() == 0.25);
  std::filesystem::remove_all(dir);
}

TEST_CASE("npa-export is reproducible") {
  const auto d1 = scratch_dir("npa1"), d2 = scratch_dir("npa2");
  CHECK(run("npa-export --strategy rchsh --n 1 --eta 0.8 --v 0.9 --level 1+AB --out-dir " + d1.string()).code == 0);
  CHECK(run("npa-export --strategy rchsh --n 1 --eta 0.8 --v 0.9 --level 1+AB --out-dir " + d2.string()).code == 0);
  for (const auto& e : std::filesystem::directory_iterator(d1)) {
    if (!e.path().string().ends_with(".dat-s")) continue;
    std::ifstream a(e.path()), b(d2 / e.path().filename());
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(!sa.str().empty());
    CHECK(sa.str() == sb.str());
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}
