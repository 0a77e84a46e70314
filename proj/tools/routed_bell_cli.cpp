// routed-bell: batch front-end for scores, JM certification scans, robust
// efficiencies and NPA problem export.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/inequalities.hpp"
#include "routed_bell/jm_certifier.hpp"
#include "routed_bell/kernels.hpp"
#include "routed_bell/npa.hpp"
#include "routed_bell/robustness.hpp"
#include "routed_bell/strategies.hpp"
#include "routed_bell/version.hpp"

namespace rb = routed_bell;
using nlohmann::json;

namespace {

enum Exit { ok = 0, usage = 1, computation = 2, not_verified = 3 };

struct Common {
  std::string format = "csv";
  std::string out;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty() || c.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(c.out, std::ios::binary | std::ios::trunc);
  if (!f) throw rb::ComputationError("cannot open '" + c.out + "' for writing");
  f << text;
  if (!f) throw rb::ComputationError("failed writing '" + c.out + "'");
}

json metadata(const std::string& command, const json& config) {
  return json{{"tool", "routed-bell"},
              {"version", std::string(rb::version)},
              {"command", command},
              {"kernels", std::string(rb::kernels::isa_name(rb::kernels::active_isa()))},
              {"config", config}};
}

std::string csv_header(const std::string& command, const json& config) {
  std::string out = "# routed-bell " + std::string(rb::version) + "\n# command: " + command + "\n";
  for (const auto& [key, value] : config.items()) out += "# " + key + ": " + value.dump() + "\n";
  return out;
}

void require_unit(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw rb::PreconditionError(std::string(name) + " must lie in [0, 1]");
}

void require_copies(std::size_t n) {
  if (n < 1) throw rb::PreconditionError("n must be at least 1");
}

std::size_t resolve_workers(const std::string& text) {
  std::string value = text;
  if (const char* env = std::getenv("ROUTED_BELL_THREADS"); env != nullptr && *env != '\0') value = env;
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  if (value == "max") return hw;
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size() || v < 1) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw rb::PreconditionError("workers must be a positive integer or 'max'");
  }
}

rb::Family family_of(rb::StrategyKind kind) {
  switch (kind) {
    case rb::StrategyKind::rbb84:
      return rb::Family::bb84;
    case rb::StrategyKind::rchsh:
      return rb::Family::chsh;
    case rb::StrategyKind::rbb84_chsh:
      break;
  }
  throw rb::PreconditionError("rbb84chsh has no product penalized functional; use npa-export or eta-scan");
}

double closed_form_eta_star(rb::StrategyKind kind, std::size_t n) {
  if (kind == rb::StrategyKind::rbb84_chsh) return 0.25;
  return rb::inv_pow2(n);
}

json report_json(const rb::CertificationReport& r) {
  json pattern = json::array();
  for (int e : r.argmax_pattern.entries()) pattern.push_back(e == rb::ClickPattern::no_click ? json(nullptr) : json(e));
  return json{{"family", std::string(rb::to_string(r.family))},
              {"n_copies", r.n_copies},
              {"q", r.q},
              {"max_lambda", r.max_lambda},
              {"bound_rhs", r.bound_rhs},
              {"verified", r.verified},
              {"argmax_pattern", pattern},
              {"argmax_index", r.argmax_pattern.index()},
              {"argmax_clicks", r.argmax_pattern.click_count()},
              {"patterns_scanned", r.patterns_scanned},
              {"patterns_total", r.patterns_total},
              {"pruned", r.pruned},
              {"workers", r.workers},
              {"wall_time_seconds", r.wall_time.count()},
              {"penalty_window", std::string(rb::to_string(rb::penalty_window(r.family, r.n_copies, r.q)))}};
}

// ---- score -----------------------------------------------------------------

struct ScoreArgs {
  Common common;
  std::string strategy = "rbb84";
  std::size_t n = 1;
  double eta = 1.0;
  double v = 1.0;
  std::optional<double> q;
};

int run_score(const ScoreArgs& a) {
  require_copies(a.n);
  require_unit(a.eta, "eta");
  require_unit(a.v, "v");
  const rb::StrategyKind kind = rb::parse_strategy_kind(a.strategy);
  const rb::Family family = family_of(kind);
  const double q = a.q.value_or(rb::default_penalty(family, a.n));
  if (!(q >= 0.0)) throw rb::PreconditionError("q must be non-negative");

  const rb::RoutedStrategy s = rb::build_strategy(kind, a.n, a.eta, a.v);
  const rb::RoutedCorrelation corr = rb::correlation(s);
  const rb::PenalizedScore score = rb::penalized_score(corr, family, q);
  const std::string functional = family == rb::Family::bb84 ? "bb84_penalized" : "chsh_penalized";
  const double short_chsh = rb::chsh_n_score(corr, rb::Leg::b0);

  const json config{{"strategy", a.strategy}, {"n", a.n}, {"eta", a.eta}, {"v", a.v}, {"q", q}};
  if (a.common.format == "json") {
    json out{{"metadata", metadata("score", config)},
             {"rows",
              json::array({json{{"functional", functional},
                                {"value", score.value},
                                {"ideal", score.ideal_value},
                                {"jm_threshold", score.jm_threshold},
                                {"penalty_window", std::string(rb::to_string(score.window))},
                                {"certified", score.certified()}}})},
             {"short_path_chsh", short_chsh}};
    emit(a.common, out.dump(2) + "\n");
  } else {
    std::string text = csv_header("score", config);
    text += "functional,value,ideal,jm_threshold,penalty_window,certified\n";
    text += functional + "," + fmt(score.value) + "," + fmt(score.ideal_value) + "," + fmt(score.jm_threshold) + "," +
            std::string(rb::to_string(score.window)) + "," + (score.certified() ? "true" : "false") + "\n";
    emit(a.common, text);
  }
  return ok;
}

// ---- jm-scan ---------------------------------------------------------------

struct ScanArgs {
  Common common{"json", ""};
  std::string family = "bb84";
  std::size_t n = 1;
  std::optional<double> q;
  std::string workers = "1";
  bool prune = false;
  bool progress = false;
};

int run_jm_scan(const ScanArgs& a) {
  require_copies(a.n);
  const rb::Family family = rb::parse_family(a.family);
  const double q = a.q.value_or(rb::default_penalty(family, a.n));
  if (!(q >= 0.0)) throw rb::PreconditionError("q must be non-negative");
  rb::ScanOptions opts;
  opts.workers = resolve_workers(a.workers);
  opts.prune = a.prune;
  if (a.progress) {
    opts.progress = [](std::uint64_t done, std::uint64_t total) {
      std::fprintf(stderr, "progress: %llu/%llu patterns\n", static_cast<unsigned long long>(done),
                   static_cast<unsigned long long>(total));
    };
  }
  const rb::CertificationReport r = rb::exhaustive_scan(family, a.n, q, opts);
  const json config{{"family", a.family}, {"n", a.n}, {"q", q}, {"workers", opts.workers}, {"prune", a.prune}};
  json body = report_json(r);
  if (a.common.format == "csv") {
    std::string text = csv_header("jm-scan", config);
    text += "family,n_copies,q,max_lambda,bound_rhs,verified,argmax_index,patterns_scanned,patterns_total,wall_time_seconds\n";
    text += a.family + "," + std::to_string(r.n_copies) + "," + fmt(r.q) + "," + fmt(r.max_lambda) + "," + fmt(r.bound_rhs) +
            "," + (r.verified ? "true" : "false") + "," + std::to_string(r.argmax_pattern.index()) + "," +
            std::to_string(r.patterns_scanned) + "," + std::to_string(r.patterns_total) + "," + fmt(r.wall_time.count()) + "\n";
    emit(a.common, text);
  } else {
    body["metadata"] = metadata("jm-scan", config);
    emit(a.common, body.dump(2) + "\n");
  }
  return r.verified ? ok : not_verified;
}

// ---- eta-scan --------------------------------------------------------------

struct EtaScanArgs {
  Common common;
  std::string strategy = "rbb84";
  std::size_t n = 1;
  std::vector<double> v_values;
  std::string v_grid;
  std::string level = "1+AB";
  double eta_lo = 0.0;
  double eta_hi = 1.0;
  std::size_t iterations = 1;
  std::string out_dir = ".";
  bool no_long_path = false;
  bool no_commutation = false;
};

std::vector<double> grid_values(const EtaScanArgs& a) {
  std::vector<double> values = a.v_values;
  if (!a.v_grid.empty()) {
    // lo:hi:count, endpoints included
    double lo = 0, hi = 0;
    long count = 0;
    char c1 = 0, c2 = 0;
    std::istringstream in(a.v_grid);
    if (!(in >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':' || count < 1 || !in.eof()) {
      throw rb::PreconditionError("v-grid must read lo:hi:count");
    }
    for (long i = 0; i < count; ++i) {
      values.push_back(count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    }
  }
  if (values.empty()) values.push_back(1.0);
  for (double v : values) require_unit(v, "v");
  return values;
}

int run_eta_scan(const EtaScanArgs& a) {
  require_copies(a.n);
  const rb::StrategyKind kind = rb::parse_strategy_kind(a.strategy);
  const std::vector<double> values = grid_values(a);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  rb::npa::ProblemOptions popts;
  popts.constrain_long_path = !a.no_long_path;
  popts.impose_b1_commutation = !a.no_commutation;

  const json config{{"strategy", a.strategy}, {"n", a.n},           {"level", a.level},
                    {"eta_lo", a.eta_lo},     {"eta_hi", a.eta_hi}, {"iterations", a.iterations},
                    {"out_dir", a.out_dir},   {"constrain_long_path", popts.constrain_long_path},
                    {"impose_b1_commutation", popts.impose_b1_commutation}};
  json rows = json::array();
  json plans = json::array();
  for (double v : values) {
    const auto plan = rb::npa::bisection_plan(kind, a.n, v, a.level, a.eta_lo, a.eta_hi, a.iterations);
    json probes = json::array();
    for (const auto& probe : plan) {
      const rb::RoutedStrategy s = rb::build_strategy(kind, a.n, probe.eta, v);
      const rb::npa::MomentProblem p = rb::npa::build_problem(s, probe.eta, a.level, popts);
      const std::filesystem::path path = dir / probe.file_name;
      rb::npa::write_sdpa(p, path);
      rb::npa::write_sidecar(p, path);
      probes.push_back(json{{"depth", probe.depth}, {"eta", probe.eta}, {"file", probe.file_name}});
      json row{{"v", v}, {"depth", probe.depth}, {"probe_eta", probe.eta}, {"probe_file", probe.file_name}};
      if (v == 1.0) row["eta_star_closed_form"] = closed_form_eta_star(kind, a.n);
      rows.push_back(row);
    }
    plans.push_back(json{{"v", v}, {"eta_lo", a.eta_lo}, {"eta_hi", a.eta_hi}, {"iterations", a.iterations},
                         {"level", a.level}, {"probes", probes},
                         {"rule", "infeasible at eta: NJM certified, search lower; feasible: search higher"}});
  }
  {
    std::ofstream f(dir / "bisection_plan.json", std::ios::binary | std::ios::trunc);
    if (!f) throw rb::ComputationError("cannot write bisection plan");
    f << json{{"metadata", metadata("eta-scan", config)}, {"plans", plans}}.dump(2) << "\n";
  }

  if (a.common.format == "json") {
    emit(a.common, json{{"metadata", metadata("eta-scan", config)}, {"rows", rows}}.dump(2) + "\n");
    return ok;
  }
  std::string text = csv_header("eta-scan", config);
  text += "v,strategy,n_copies,level,depth,probe_eta,probe_file,eta_star_closed_form,eta_star_upper,solver,tolerance\n";
  for (const json& r : rows) {
    text += fmt(r["v"].get<double>()) + "," + a.strategy + "," + std::to_string(a.n) + "," + a.level + "," +
            std::to_string(r["depth"].get<std::size_t>()) + "," + fmt(r["probe_eta"].get<double>()) + "," +
            r["probe_file"].get<std::string>() + "," +
            (r.contains("eta_star_closed_form") ? fmt(r["eta_star_closed_form"].get<double>()) : std::string()) + ",,,\n";
  }
  emit(a.common, text);
  return ok;
}

// ---- robust ----------------------------------------------------------------

struct RobustArgs {
  Common common{"json", ""};
  std::size_t n = 1;
  double epsilon = 0.0;
  double f = 0.0;
  std::optional<double> delta;
};

int run_robust(const RobustArgs& a) {
  require_copies(a.n);
  const json config{{"n", a.n},
                    {"epsilon", a.epsilon},
                    {"f", a.f},
                    {"f_provenance", "user supplied"},
                    {"delta_override", a.delta ? json(*a.delta) : json(nullptr)}};
  rb::RobustnessInput in{a.n, a.epsilon, a.f, false};
  json out{{"metadata", metadata("robust", config)}};
  if (in.inconsistent()) out["warning"] = "epsilon is 0 but f is nonzero";
  int code = ok;
  json variants = json::array();
  for (bool linear : {false, true}) {
    in.linear_translation = linear;
    json row{{"variant", linear ? "linear_translation" : "idealized"}};
    try {
      const rb::RobustEta r = a.delta ? rb::robust_eta_star(in, *a.delta) : rb::robust_eta_star(in);
      row["delta"] = r.delta;
      row["q"] = r.q;
      row["eta_star"] = r.eta_star;
    } catch (const rb::PreconditionError& e) {
      row["error"] = e.what();
      code = computation;
    }
    variants.push_back(row);
  }
  out["variants"] = variants;
  if (code != ok) out["error"] = "robustness window empty";
  if (a.common.format == "csv") {
    std::string text = csv_header("robust", config);
    text += "variant,delta,q,eta_star,error\n";
    for (const json& r : variants) {
      text += r["variant"].get<std::string>() + ",";
      if (r.contains("error")) {
        text += ",,," + r["error"].get<std::string>() + "\n";
      } else {
        text += fmt(r["delta"].get<double>()) + "," + fmt(r["q"].get<double>()) + "," + fmt(r["eta_star"].get<double>()) + ",\n";
      }
    }
    emit(a.common, text);
  } else {
    emit(a.common, out.dump(2) + "\n");
  }
  return code;
}

// ---- npa-export ------------------------------------------------------------

struct ExportArgs {
  Common common{"json", ""};
  std::string strategy = "rbb84";
  std::size_t n = 1;
  double eta = 1.0;
  double v = 1.0;
  std::string level = "1";
  std::string out_dir = ".";
  bool no_long_path = false;
  bool no_commutation = false;
};

int run_npa_export(const ExportArgs& a) {
  require_copies(a.n);
  require_unit(a.eta, "eta");
  require_unit(a.v, "v");
  const rb::StrategyKind kind = rb::parse_strategy_kind(a.strategy);
  rb::npa::ProblemOptions popts;
  popts.constrain_long_path = !a.no_long_path;
  popts.impose_b1_commutation = !a.no_commutation;
  const rb::RoutedStrategy s = rb::build_strategy(kind, a.n, a.eta, a.v);
  const rb::npa::MomentProblem p = rb::npa::build_problem(s, a.eta, a.level, popts);
  const std::filesystem::path dir(a.out_dir);
  std::filesystem::create_directories(dir);
  const std::string name = rb::npa::problem_file_name(kind, a.n, a.v, a.level, a.eta);
  rb::npa::write_sdpa(p, dir / name);
  rb::npa::write_sidecar(p, dir / name);
  const json config{{"strategy", a.strategy}, {"n", a.n}, {"eta", a.eta}, {"v", a.v}, {"level", a.level}, {"out_dir", a.out_dir}};
  json out = rb::npa::sidecar(p, name);
  out["metadata"] = metadata("npa-export", config);
  emit(a.common, out.dump(2) + "\n");
  return ok;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", c.out, "Output file (default: stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Routed Bell experiment thresholds: scores, JM certification, robustness, NPA export"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(rb::version));

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "Penalized score of an ideal noisy strategy against its JM threshold");
  c_score->add_option("--strategy", score.strategy, "rbb84 | rchsh");
  c_score->add_option("--n", score.n, "Number of parallel copies");
  c_score->add_option("--eta", score.eta, "Far-device detection efficiency");
  c_score->add_option("--v", score.v, "Source visibility");
  c_score->add_option("--q", score.q, "Penalty (default: lower end of the proven window)");
  add_common(c_score, score.common);

  ScanArgs scan;
  auto* c_scan = app.add_subcommand("jm-scan", "Exhaustive max-eigenvalue scan over click patterns");
  c_scan->add_option("--family", scan.family, "bb84 | chsh");
  c_scan->add_option("--n", scan.n, "Number of parallel copies (<= 3)");
  c_scan->add_option("--q", scan.q, "Penalty");
  c_scan->add_option("--workers", scan.workers, "Worker threads or 'max' (ROUTED_BELL_THREADS overrides)");
  c_scan->add_flag("--prune", scan.prune, "Scan one pattern per symmetry orbit");
  c_scan->add_flag("--progress", scan.progress, "Report progress on stderr");
  add_common(c_scan, scan.common);

  EtaScanArgs eta;
  auto* c_eta = app.add_subcommand("eta-scan", "Closed-form eta* at v = 1 and SDPA bisection probes per visibility");
  c_eta->add_option("--strategy", eta.strategy, "rbb84 | rchsh | rbb84chsh");
  c_eta->add_option("--n", eta.n, "Number of parallel copies");
  c_eta->add_option("--v", eta.v_values, "Visibility values")->delimiter(',');
  c_eta->add_option("--v-grid", eta.v_grid, "Visibility grid lo:hi:count");
  c_eta->add_option("--level", eta.level, "NPA level, e.g. 1+AB");
  c_eta->add_option("--eta-lo", eta.eta_lo, "Lower end of the bisection interval");
  c_eta->add_option("--eta-hi", eta.eta_hi, "Upper end of the bisection interval");
  c_eta->add_option("--iterations", eta.iterations, "Bisection depth");
  c_eta->add_option("--out-dir", eta.out_dir, "Directory for SDPA files and sidecars");
  c_eta->add_flag("--no-long-path", eta.no_long_path, "Do not fix the long-path statistics");
  c_eta->add_flag("--no-b1-commutation", eta.no_commutation, "Do not impose far-device commutation");
  add_common(c_eta, eta.common);

  RobustArgs robust;
  auto* c_robust = app.add_subcommand("robust", "Robust critical efficiency from a self-testing error");
  c_robust->add_option("--n", robust.n, "Number of parallel copies");
  c_robust->add_option("--epsilon", robust.epsilon, "Bell-violation gap");
  c_robust->add_option("--f", robust.f, "Self-testing error f(N, epsilon)");
  c_robust->add_option("--delta", robust.delta, "Use this delta instead of the bound from f");
  add_common(c_robust, robust.common);

  ExportArgs exp;
  auto* c_export = app.add_subcommand("npa-export", "Write one moment problem as SDPA plus JSON sidecar");
  c_export->add_option("--strategy", exp.strategy, "rbb84 | rchsh | rbb84chsh");
  c_export->add_option("--n", exp.n, "Number of parallel copies");
  c_export->add_option("--eta", exp.eta, "Far-device detection efficiency");
  c_export->add_option("--v", exp.v, "Source visibility");
  c_export->add_option("--level", exp.level, "NPA level, e.g. 1+AB");
  c_export->add_option("--out-dir", exp.out_dir, "Output directory");
  c_export->add_flag("--no-long-path", exp.no_long_path, "Do not fix the long-path statistics");
  c_export->add_flag("--no-b1-commutation", exp.no_commutation, "Do not impose far-device commutation");
  add_common(c_export, exp.common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : usage;
  }

  try {
    if (c_score->parsed()) return run_score(score);
    if (c_scan->parsed()) return run_jm_scan(scan);
    if (c_eta->parsed()) return run_eta_scan(eta);
    if (c_robust->parsed()) return run_robust(robust);
    if (c_export->parsed()) return run_npa_export(exp);
  } catch (const rb::PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return usage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return computation;
  }
  return usage;
}
