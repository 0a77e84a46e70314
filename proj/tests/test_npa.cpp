#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "routed_bell/error.hpp"
#include "routed_bell/npa.hpp"

using namespace routed_bell;
using namespace routed_bell::npa;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("routed_bell_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool is_bob(const OperatorSymbol& s) { return s.party != Party::a; }

// Rewrites with one randomly chosen applicable rule at a time until no rule
// applies. Returns nullopt when the word vanishes.
std::optional<std::vector<OperatorSymbol>> rewrite(std::vector<OperatorSymbol> w, bool b1_commute,
                                                   std::mt19937_64& rng) {
  for (;;) {
    std::vector<std::size_t> sites;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      const auto &l = w[i], &r = w[i + 1];
      const bool same_meas = l.party == r.party && l.setting == r.setting;
      const bool a_after_b = is_bob(l) && r.party == Party::a;
      const bool b1_swap = b1_commute && l.party == Party::b1 && r.party == Party::b1 && l.setting != r.setting && r < l;
      if (same_meas || a_after_b || b1_swap) sites.push_back(i);
    }
    if (sites.empty()) return w;
    const std::size_t i = sites[std::uniform_int_distribution<std::size_t>(0, sites.size() - 1)(rng)];
    const auto &l = w[i], &r = w[i + 1];
    if (l.party == r.party && l.setting == r.setting) {
      if (l.outcome != r.outcome) return std::nullopt;
      w.erase(w.begin() + static_cast<std::ptrdiff_t>(i));
    } else {
      std::swap(w[i], w[i + 1]);
    }
  }
}

OperatorSymbol random_symbol(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> p(0, 2), bit(0, 1);
  OperatorSymbol s;
  s.party = static_cast<Party>(p(rng));
  s.setting = static_cast<unsigned>(bit(rng));
  s.outcome = s.party == Party::b1 ? static_cast<unsigned>(bit(rng)) : 0U;
  return s;
}

std::set<std::pair<std::string, double>> constraint_set(const MomentProblem& p) {
  std::set<std::pair<std::string, double>> out;
  for (const auto& c : p.equality_constraints) out.insert({p.moments[c.moment].to_string(), c.target});
  return out;
}

}  // namespace

TEST_CASE("level grammar") {
  const LevelSpec one = parse_level("1");
  CHECK(one.length == 1);
  CHECK(one.extras.empty());
  const LevelSpec ab = parse_level("1+AB");
  REQUIRE(ab.extras.size() == 1);
  CHECK(ab.extras[0] == std::vector<Token>{Token::a, Token::b});
  const LevelSpec aab1 = parse_level("2+AAB1");
  CHECK(aab1.length == 2);
  CHECK(aab1.extras[0] == std::vector<Token>{Token::a, Token::a, Token::b1});
  CHECK(parse_level("3+AB0+B1B1").extras.size() == 2);

  struct Bad {
    const char* text;
    std::size_t pos;
  };
  const Bad bad[] = {{"", 0}, {"+AB", 0}, {"1+ABX", 4}, {"1+", 2}, {"1++A", 2}, {"1 +A", 1}, {"2+AB2", 4}};
  for (const auto& b : bad) {
    CAPTURE(b.text);
    try {
      parse_level(b.text);
      FAIL("expected a parse error");
    } catch (const LevelParseError& e) {
      CHECK(e.position() == b.pos);
      CHECK(std::string(e.what()).find("at position " + std::to_string(b.pos)) != std::string::npos);
    }
  }
}

TEST_CASE("canonical forms") {
  const CanonicalRules commute{true};
  const OperatorSymbol a0{Party::a, 0, 0}, b00{Party::b0, 0, 0}, c00{Party::b1, 0, 0}, c01{Party::b1, 0, 1},
      c10{Party::b1, 1, 0};
  const OperatorSymbol w1[] = {c00, a0, a0};
  CHECK(canonicalize(w1, commute)->factors == std::vector<OperatorSymbol>{a0, c00});
  const OperatorSymbol w2[] = {c00, c01};
  CHECK_FALSE(canonicalize(w2, commute).has_value());
  const OperatorSymbol w3[] = {c10, c00};
  CHECK(canonicalize(w3, commute)->factors == std::vector<OperatorSymbol>{c00, c10});
  CHECK(canonicalize(w3, CanonicalRules{false})->factors == std::vector<OperatorSymbol>{c10, c00});
  const OperatorSymbol w4[] = {c00, c10, c01};
  CHECK_FALSE(canonicalize(w4, commute).has_value());
  CHECK(canonicalize(w4, CanonicalRules{false}).has_value());
  const OperatorSymbol w5[] = {b00, c00, b00};
  CHECK(canonicalize(w5, commute)->size() == 3);
  CHECK(canonicalize(std::span<const OperatorSymbol>{}, commute)->empty());
}

TEST_CASE("canonicalization is confluent") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> len(0, 8);
  for (bool commute : {true, false}) {
    const CanonicalRules rules{commute};
    for (int t = 0; t < 1000; ++t) {
      std::vector<OperatorSymbol> w(len(rng));
      for (auto& s : w) s = random_symbol(rng);
      const auto direct = canonicalize(w, rules);
      // Reduce the two halves first, in either order.
      const std::size_t cut = std::uniform_int_distribution<std::size_t>(0, w.size())(rng);
      const std::vector<OperatorSymbol> left(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(cut));
      const std::vector<OperatorSymbol> right(w.begin() + static_cast<std::ptrdiff_t>(cut), w.end());
      const auto cl = canonicalize(left, rules);
      const auto cr = canonicalize(right, rules);
      std::optional<Monomial> split;
      if (cl && cr) {
        std::vector<OperatorSymbol> joined = cl->factors;
        joined.insert(joined.end(), cr->factors.begin(), cr->factors.end());
        split = canonicalize(joined, rules);
      }
      CHECK(direct.has_value() == split.has_value());
      if (direct && split) CHECK(*direct == *split);
      for (int order = 0; order < 3; ++order) {
        const auto r = rewrite(w, commute, rng);
        CHECK(r.has_value() == direct.has_value());
        if (r && direct) CHECK(*r == direct->factors);
      }
      if (direct) {
        const auto twice = canonicalize(direct->factors, rules);
        CHECK(twice == direct);
        const auto dag = adjoint(*direct, rules);
        REQUIRE(dag.has_value());
        CHECK(adjoint(*dag, rules) == direct);
        CHECK(moment_representative(*direct, rules) == moment_representative(*dag, rules));
      }
    }
  }
}

TEST_CASE("basis sizes") {
  const RoutedStrategy s = build_strategy(StrategyKind::rbb84, 1, 1.0, 1.0);
  const MomentProblem l1 = build_problem(s, 1.0, "1");
  CHECK(l1.size() == 9);
  CHECK(l1.basis[0].empty());
  CHECK(build_problem(s, 1.0, "1+AB").size() == 21);
  const MomentProblem l0 = build_problem(s, 1.0, "0");
  CHECK(l0.size() == 1);
  CHECK(l0.equality_constraints.size() == 1);
  CHECK(l0.equality_constraints[0].moment == 0);
  CHECK(l0.equality_constraints[0].target == 1.0);
  CHECK(build_problem(s, 1.0, "1+AB0").size() == 13);
  CHECK(build_problem(s, 1.0, "1+AB1").size() == 17);
  CHECK_THROWS_WITH(build_problem(build_strategy(StrategyKind::rbb84, 3, 1.0, 1.0), 1.0, "6"),
                    doctest::Contains("level too high for scenario"));
  CHECK_THROWS_AS(build_problem(s, 1.0, "1+Q"), LevelParseError);
  CHECK_THROWS_AS(build_problem(s, 1.5, "1"), PreconditionError);
}

TEST_CASE("moment matrix is symmetric and normalized") {
  for (const char* level : {"1", "1+AB", "2", "2+AAB1"}) {
    for (auto kind : {StrategyKind::rbb84, StrategyKind::rbb84_chsh}) {
      const MomentProblem p = build_problem(build_strategy(kind, 1, 1.0, 1.0), 0.7, level);
      CHECK(p.entry(0, 0) == 0);
      CHECK(p.moments[0].empty());
      for (std::size_t r = 0; r < p.size(); ++r)
        for (std::size_t c = 0; c < p.size(); ++c) CHECK(p.entry(r, c) == p.entry(c, r));
      // Every id is used and names its own representative.
      std::vector<bool> used(p.moments.size(), false);
      for (auto id : p.matrix)
        if (id >= 0) used[static_cast<std::size_t>(id)] = true;
      CHECK(std::all_of(used.begin(), used.end(), [](bool b) { return b; }));
      const CanonicalRules rules{p.options.impose_b1_commutation};
      for (const auto& m : p.moments) CHECK(moment_representative(m, rules) == m);
    }
  }
}

TEST_CASE("raising the level keeps every constraint") {
  for (auto kind : {StrategyKind::rbb84, StrategyKind::rchsh, StrategyKind::rbb84_chsh}) {
    const RoutedStrategy s = build_strategy(kind, 1, 0.8, 0.9);
    const auto c1 = constraint_set(build_problem(s, 0.8, "1"));
    const auto c2 = constraint_set(build_problem(s, 0.8, "2"));
    const auto c3 = constraint_set(build_problem(s, 0.8, "3"));
    CHECK(std::includes(c2.begin(), c2.end(), c1.begin(), c1.end()));
    CHECK(std::includes(c3.begin(), c3.end(), c2.begin(), c2.end()));
    ProblemOptions short_only;
    short_only.constrain_long_path = false;
    const auto cs = constraint_set(build_problem(s, 0.8, "1", short_only));
    CHECK(cs.size() < c1.size());
    CHECK(std::includes(c1.begin(), c1.end(), cs.begin(), cs.end()));
  }
}

TEST_CASE("honest substitution is a PSD witness") {
  ProblemOptions no_commute;
  no_commute.impose_b1_commutation = false;
  for (auto kind : {StrategyKind::rbb84, StrategyKind::rchsh, StrategyKind::rbb84_chsh}) {
    const RoutedStrategy s = build_strategy(kind, 1, 1.0, 1.0);
    for (const char* level : {"1", "1+AB", "2"}) {
      CAPTURE(level);
      const MomentProblem p = build_problem(s, 1.0, level, no_commute);
      const HonestCheck h = honest_substitution(p, s);
      CHECK(h.min_eigenvalue >= -1e-8);
      CHECK(h.max_constraint_residual < 1e-12);
      CHECK(h.max_consistency_residual < 1e-12);
      CHECK(h.moment_matrix[0] == doctest::Approx(1.0));
    }
  }
  // Noisy source and lossy far device: the thinned data still admit the
  // unthinned operators on the short path.
  const RoutedStrategy noisy = build_strategy(StrategyKind::rchsh, 1, 1.0, 0.8);
  const HonestCheck h = honest_substitution(build_problem(noisy, 1.0, "1+AB", no_commute), noisy);
  CHECK(h.min_eigenvalue >= -1e-8);
  CHECK(h.max_constraint_residual < 1e-12);
}

TEST_CASE("SDPA export") {
  const RoutedStrategy s = build_strategy(StrategyKind::rbb84, 1, 0.75, 0.95);
  const SdpaProblem zero = to_sdpa(build_problem(s, 0.75, "0"));
  CHECK(zero.m == 1);
  CHECK(zero.block_sizes == std::vector<long>{1});
  CHECK(zero.objective == std::vector<double>{1.0});

  const MomentProblem p1 = build_problem(s, 0.75, "1");
  const SdpaProblem sd = to_sdpa(p1);
  CHECK(sd.block_sizes == std::vector<long>{9});
  const std::string text = format_sdpa(sd);
  std::istringstream lines(text);
  std::string l1, l2, l3;
  std::getline(lines, l1);
  std::getline(lines, l2);
  std::getline(lines, l3);
  CHECK(std::stoul(l1) == sd.m);
  CHECK(l2.find('1') != std::string::npos);
  CHECK(l3.find('9') != std::string::npos);
  for (const auto& e : sd.entries) {
    CHECK(e.row <= e.col);
    CHECK(e.matrix >= 1);
    CHECK(e.matrix <= sd.m);
  }
  CHECK(parse_sdpa(text) == sd);

  for (const char* level : {"1+AB", "2+AAB1"}) {
    const SdpaProblem big = to_sdpa(build_problem(build_strategy(StrategyKind::rbb84_chsh, 1, 0.6, 0.9), 0.6, level));
    CHECK(parse_sdpa(format_sdpa(big)) == big);
  }
  CHECK_THROWS_AS(parse_sdpa("3\n1\n"), ComputationError);
}

TEST_CASE("SDPA files are byte-reproducible") {
  const auto dir = scratch_dir("sdpa");
  const RoutedStrategy s = build_strategy(StrategyKind::rchsh, 1, 0.8, 0.9);
  const auto a = dir / "a.dat-s", b = dir / "b.dat-s";
  write_sdpa(build_problem(s, 0.8, "1+AB"), a);
  write_sdpa(build_problem(s, 0.8, "1+AB"), b);
  CHECK(slurp(a) == slurp(b));
  CHECK(read_sdpa(a) == to_sdpa(build_problem(s, 0.8, "1+AB")));

  const MomentProblem p = build_problem(s, 0.8, "1");
  write_sidecar(p, a);
  const auto j = nlohmann::json::parse(slurp(dir / "a.dat-s.json"));
  CHECK(j["strategy_kind"] == "rchsh");
  CHECK(j["n_copies"] == 1);
  CHECK(j["basis_size"] == p.size());
  CHECK(j["level"] == "1");
  CHECK(j["eta"] == 0.8);
  CHECK(j["visibility"] == 0.9);
  CHECK(j.contains("constraint_count"));
  CHECK_THROWS_AS(write_sdpa(p, dir / "missing" / "x.dat-s"), ComputationError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("bisection plan") {
  const auto one = bisection_plan(StrategyKind::rbb84, 1, 1.0, "3", 0.0, 1.0, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].eta == 0.5);
  CHECK(one[0].depth == 0);
  CHECK(one[0].file_name == problem_file_name(StrategyKind::rbb84, 1, 1.0, "3", 0.5));

  const auto three = bisection_plan(StrategyKind::rbb84, 1, 1.0, "1+AB", 0.2, 0.3, 3);
  const double expect[] = {0.25, 0.225, 0.275, 0.2125, 0.2375, 0.2625, 0.2875};
  const std::size_t depth[] = {0, 1, 1, 2, 2, 2, 2};
  REQUIRE(three.size() == 7);
  std::set<std::string> names;
  for (std::size_t i = 0; i < 7; ++i) {
    CHECK(three[i].eta == doctest::Approx(expect[i]).epsilon(1e-15));
    CHECK(three[i].depth == depth[i]);
    names.insert(three[i].file_name);
  }
  CHECK(names.size() == 7);
  CHECK(three[0].file_name.find("1pAB") != std::string::npos);
  CHECK(three[0].file_name.ends_with(".dat-s"));

  CHECK(bisection_plan(StrategyKind::rbb84, 1, 1.0, "1", 0.0, 1.0, 0).empty());
  CHECK_THROWS_AS(bisection_plan(StrategyKind::rbb84, 1, 1.0, "1", 0.5, 0.5, 1), PreconditionError);
  CHECK_THROWS_AS(bisection_plan(StrategyKind::rbb84, 1, 1.0, "1", 0.0, 1.0, 21), PreconditionError);
  CHECK_THROWS_AS(bisection_plan(StrategyKind::rbb84, 1, 1.0, "x", 0.0, 1.0, 1), LevelParseError);
}
