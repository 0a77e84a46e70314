#include "routed_bell/npa.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "routed_bell/eigen.hpp"
#include "routed_bell/error.hpp"

namespace routed_bell::npa {

namespace {

constexpr std::size_t max_extra_candidates = 50'000'000;

bool is_bob(Party p) { return p != Party::a; }

bool same_projector_family(const OperatorSymbol& x, const OperatorSymbol& y) {
  return x.party == y.party && x.setting == y.setting;
}

// Pushes symbols onto a reduced stack; false when the product vanishes.
bool reduce_into(std::vector<OperatorSymbol>& stack, const OperatorSymbol& s) {
  if (!stack.empty() && same_projector_family(stack.back(), s)) {
    return stack.back().outcome == s.outcome;
  }
  stack.push_back(s);
  return true;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<OperatorSymbol> make_symbols(const RoutedStrategy& s) {
  std::vector<OperatorSymbol> out;
  auto add = [&out](Party p, std::size_t settings, std::size_t outcomes) {
    for (std::size_t y = 0; y < settings; ++y) {
      for (std::size_t b = 0; b < outcomes; ++b) out.push_back({p, static_cast<unsigned>(y), static_cast<unsigned>(b)});
    }
  };
  add(Party::a, s.alice.n_settings, s.alice.outcomes_per_setting - 1);
  add(Party::b0, s.b0.n_settings, s.b0.outcomes_per_setting - 1);
  add(Party::b1, s.b1.n_settings, s.b1.outcomes_per_setting);
  return out;
}

[[noreturn]] void too_large() { throw PreconditionError("level too high for scenario"); }

}  // namespace

std::string_view to_string(Party party) {
  switch (party) {
    case Party::a:
      return "A";
    case Party::b0:
      return "B0";
    case Party::b1:
      return "B1";
  }
  return "?";
}

std::string OperatorSymbol::to_string() const {
  return std::string(npa::to_string(party)) + "(" + std::to_string(setting) + "," + std::to_string(outcome) + ")";
}

std::string Monomial::to_string() const {
  if (factors.empty()) return "1";
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += ' ';
    out += factors[i].to_string();
  }
  return out;
}

std::optional<Monomial> canonicalize(std::span<const OperatorSymbol> word, const CanonicalRules& rules) {
  std::vector<OperatorSymbol> a_part, b_part;
  for (const OperatorSymbol& s : word) {
    if (!reduce_into(is_bob(s.party) ? b_part : a_part, s)) return std::nullopt;
  }
  if (rules.b1_commute) {
    // Sort each maximal run of far-device projectors, then merge equal ones.
    std::vector<OperatorSymbol> merged;
    merged.reserve(b_part.size());
    std::size_t i = 0;
    while (i < b_part.size()) {
      if (b_part[i].party != Party::b1) {
        merged.push_back(b_part[i++]);
        continue;
      }
      std::size_t j = i;
      while (j < b_part.size() && b_part[j].party == Party::b1) ++j;
      std::sort(b_part.begin() + static_cast<std::ptrdiff_t>(i), b_part.begin() + static_cast<std::ptrdiff_t>(j));
      const std::size_t run_start = merged.size();
      for (std::size_t k = i; k < j; ++k) {
        if (merged.size() > run_start && same_projector_family(merged.back(), b_part[k])) {
          if (merged.back().outcome != b_part[k].outcome) return std::nullopt;
          continue;
        }
        merged.push_back(b_part[k]);
      }
      i = j;
    }
    b_part = std::move(merged);
  }
  Monomial m;
  m.factors = std::move(a_part);
  m.factors.insert(m.factors.end(), b_part.begin(), b_part.end());
  return m;
}

std::optional<Monomial> adjoint(const Monomial& m, const CanonicalRules& rules) {
  std::vector<OperatorSymbol> word(m.factors.rbegin(), m.factors.rend());
  return canonicalize(word, rules);
}

Monomial moment_representative(const Monomial& m, const CanonicalRules& rules) {
  const std::optional<Monomial> dag = adjoint(m, rules);
  if (dag && *dag < m) return *dag;
  return m;
}

LevelParseError::LevelParseError(const std::string& what, std::size_t position)
    : std::invalid_argument(what + " at position " + std::to_string(position)), position_(position) {}

LevelSpec parse_level(std::string_view text) {
  LevelSpec spec;
  spec.text = std::string(text);
  std::size_t pos = 0;
  if (pos >= text.size() || !std::isdigit(static_cast<unsigned char>(text[pos]))) {
    throw LevelParseError("level must start with an integer", pos);
  }
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), spec.length);
  if (ec != std::errc()) throw LevelParseError("level integer out of range", pos);
  pos = static_cast<std::size_t>(end - text.data());
  while (pos < text.size()) {
    if (text[pos] != '+') throw LevelParseError("expected '+'", pos);
    ++pos;
    std::vector<Token> word;
    while (pos < text.size() && text[pos] != '+') {
      if (text[pos] == 'A') {
        word.push_back(Token::a);
        ++pos;
      } else if (text[pos] == 'B') {
        ++pos;
        if (pos < text.size() && text[pos] == '0') {
          word.push_back(Token::b0);
          ++pos;
        } else if (pos < text.size() && text[pos] == '1') {
          word.push_back(Token::b1);
          ++pos;
        } else {
          word.push_back(Token::b);
        }
      } else {
        throw LevelParseError(std::string("unexpected character '") + text[pos] + "'", pos);
      }
    }
    if (word.empty()) throw LevelParseError("empty word", pos);
    spec.extras.push_back(std::move(word));
  }
  return spec;
}

MomentProblem build_problem(const RoutedStrategy& strategy, double eta, std::string_view level,
                            const ProblemOptions& options) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw PreconditionError("eta must lie in [0, 1]");
  const LevelSpec spec = parse_level(level);
  const CanonicalRules rules{options.impose_b1_commutation};

  MomentProblem p;
  p.kind = strategy.kind;
  p.n_copies = strategy.n_copies;
  p.visibility = strategy.visibility;
  p.eta = eta;
  p.level_spec = spec.text;
  p.options = options;
  p.symbols = make_symbols(strategy);

  std::map<Monomial, std::size_t> seen;
  auto add_basis = [&](Monomial m) {
    if (seen.contains(m)) return;
    if (p.basis.size() >= max_basis_size) too_large();
    seen.emplace(m, p.basis.size());
    p.basis.push_back(std::move(m));
  };
  add_basis(Monomial{});

  // Words up to the level length, grown one symbol at a time from the
  // previous layer of canonical words.
  std::size_t layer_begin = 0;
  for (std::size_t len = 1; len <= spec.length; ++len) {
    const std::size_t layer_end = p.basis.size();
    for (std::size_t i = layer_begin; i < layer_end; ++i) {
      for (const OperatorSymbol& s : p.symbols) {
        std::vector<OperatorSymbol> word = p.basis[i].factors;
        word.push_back(s);
        if (auto m = canonicalize(word, rules); m && m->size() == len) add_basis(std::move(*m));
      }
    }
    if (p.basis.size() == layer_end) break;
    layer_begin = layer_end;
  }

  for (const std::vector<Token>& shape : spec.extras) {
    std::vector<std::vector<OperatorSymbol>> choices;
    std::size_t candidates = 1;
    for (Token t : shape) {
      std::vector<OperatorSymbol> c;
      for (const OperatorSymbol& s : p.symbols) {
        const bool match = (t == Token::a && s.party == Party::a) || (t == Token::b0 && s.party == Party::b0) ||
                           (t == Token::b1 && s.party == Party::b1) || (t == Token::b && is_bob(s.party));
        if (match) c.push_back(s);
      }
      if (c.empty()) throw PreconditionError("level word uses a party without symbols");
      candidates *= c.size();
      if (candidates > max_extra_candidates) too_large();
      choices.push_back(std::move(c));
    }
    std::vector<std::size_t> digit(shape.size(), 0);
    bool done = false;
    while (!done) {
      std::vector<OperatorSymbol> word;
      for (std::size_t i = 0; i < shape.size(); ++i) word.push_back(choices[i][digit[i]]);
      if (auto m = canonicalize(word, rules)) add_basis(std::move(*m));
      std::size_t i = shape.size();
      for (;;) {
        if (i == 0) {
          done = true;
          break;
        }
        --i;
        if (++digit[i] < choices[i].size()) break;
        digit[i] = 0;
      }
    }
  }

  const std::size_t n = p.basis.size();
  p.matrix.assign(n * n, -1);
  std::map<Monomial, std::size_t> ids;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<OperatorSymbol> left(p.basis[i].factors.rbegin(), p.basis[i].factors.rend());
    for (std::size_t j = i; j < n; ++j) {
      std::vector<OperatorSymbol> word = left;
      word.insert(word.end(), p.basis[j].factors.begin(), p.basis[j].factors.end());
      const std::optional<Monomial> m = canonicalize(word, rules);
      std::int32_t id = -1;
      if (m) {
        const Monomial rep = moment_representative(*m, rules);
        auto [it, inserted] = ids.emplace(rep, p.moments.size());
        if (inserted) p.moments.push_back(rep);
        id = static_cast<std::int32_t>(it->second);
      }
      p.matrix[i * n + j] = id;
      p.matrix[j * n + i] = id;
    }
  }

  RoutedStrategy at_eta = strategy;
  at_eta.eta = eta;
  const RoutedCorrelation corr = correlation(at_eta);
  const std::size_t last_a = corr.a_count - 1;

  p.equality_constraints.push_back({0, 1.0});
  for (std::size_t id = 1; id < p.moments.size(); ++id) {
    const auto& f = p.moments[id].factors;
    std::optional<double> target;
    if (f.size() == 1) {
      const OperatorSymbol& s = f[0];
      if (s.party == Party::a) {
        target = corr.alice_marginal(s.setting, s.outcome, 0, 0);
      } else if (s.party == Party::b0) {
        double v = 0.0;
        for (std::size_t a = 0; a <= last_a; ++a) v += corr.p0(0, s.setting, a, s.outcome);
        target = v;
      } else if (options.constrain_long_path) {
        target = corr.b1_marginal(s.setting, s.outcome);
      }
    } else if (f.size() == 2 && f[0].party == Party::a) {
      if (f[1].party == Party::b0) {
        target = corr.p0(f[0].setting, f[1].setting, f[0].outcome, f[1].outcome);
      } else if (f[1].party == Party::b1 && options.constrain_long_path) {
        target = corr.p1(f[0].setting, f[1].setting, f[0].outcome, f[1].outcome);
      }
    }
    if (target) p.equality_constraints.push_back({id, *target});
  }
  return p;
}

SdpaProblem to_sdpa(const MomentProblem& problem) {
  const std::size_t n = problem.size();
  std::vector<std::pair<std::size_t, std::size_t>> first(problem.moments.size(), {n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const std::int32_t id = problem.entry(i, j);
      if (id >= 0 && first[static_cast<std::size_t>(id)].first == n) first[static_cast<std::size_t>(id)] = {i, j};
    }
  }
  auto coefficient = [](std::size_t i, std::size_t j) { return i == j ? 1.0 : 0.5; };

  SdpaProblem out;
  out.block_sizes = {static_cast<long>(n)};
  auto add_row = [&out](double c) {
    out.objective.push_back(c);
    return ++out.m;
  };

  for (const EqualityConstraint& c : problem.equality_constraints) {
    const auto [i, j] = first.at(c.moment);
    const std::size_t row = add_row(c.target);
    out.entries.push_back({row, 1, i + 1, j + 1, coefficient(i, j)});
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const std::int32_t id = problem.entry(i, j);
      if (id < 0) continue;
      const auto [fi, fj] = first[static_cast<std::size_t>(id)];
      if (fi == i && fj == j) continue;
      const std::size_t row = add_row(0.0);
      out.entries.push_back({row, 1, fi + 1, fj + 1, coefficient(fi, fj)});
      out.entries.push_back({row, 1, i + 1, j + 1, -coefficient(i, j)});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      if (problem.entry(i, j) >= 0) continue;
      const std::size_t row = add_row(0.0);
      out.entries.push_back({row, 1, i + 1, j + 1, coefficient(i, j)});
    }
  }
  std::sort(out.entries.begin(), out.entries.end());
  return out;
}

std::string format_sdpa(const SdpaProblem& sdpa) {
  std::string out;
  out += std::to_string(sdpa.m) + "\n";
  out += std::to_string(sdpa.block_sizes.size()) + "\n";
  for (std::size_t i = 0; i < sdpa.block_sizes.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(sdpa.block_sizes[i]);
  }
  out += "\n";
  for (std::size_t i = 0; i < sdpa.objective.size(); ++i) {
    if (i) out += ' ';
    out += format_double(sdpa.objective[i]);
  }
  out += "\n";
  for (const SdpaEntry& e : sdpa.entries) {
    out += std::to_string(e.matrix) + ' ' + std::to_string(e.block) + ' ' + std::to_string(e.row) + ' ' +
           std::to_string(e.col) + ' ' + format_double(e.value) + '\n';
  }
  return out;
}

SdpaProblem parse_sdpa(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  std::istringstream lines{std::string(text)};
  std::string line;
  bool header = true;
  while (std::getline(lines, line)) {
    if (header && (line.starts_with('"') || line.starts_with('*'))) continue;
    header = false;
    for (char& ch : line) {
      if (ch == '{' || ch == '}' || ch == '(' || ch == ')' || ch == ',') ch = ' ';
    }
    cleaned += line;
    cleaned += '\n';
  }
  std::istringstream in(cleaned);
  auto next = [&in]() {
    std::string tok;
    if (!(in >> tok)) throw ComputationError("truncated SDPA data");
    return tok;
  };
  auto to_size = [](const std::string& t) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ComputationError("bad SDPA integer '" + t + "'");
    return v;
  };
  auto to_long = [](const std::string& t) {
    long v = 0;
    const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size()) throw ComputationError("bad SDPA integer '" + t + "'");
    return v;
  };
  auto to_double = [](const std::string& t) {
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size()) throw ComputationError("bad SDPA number '" + t + "'");
    return v;
  };

  SdpaProblem p;
  p.m = to_size(next());
  const std::size_t nblocks = to_size(next());
  for (std::size_t b = 0; b < nblocks; ++b) p.block_sizes.push_back(to_long(next()));
  for (std::size_t i = 0; i < p.m; ++i) p.objective.push_back(to_double(next()));
  std::string tok;
  while (in >> tok) {
    SdpaEntry e;
    e.matrix = to_size(tok);
    e.block = to_size(next());
    e.row = to_size(next());
    e.col = to_size(next());
    e.value = to_double(next());
    if (e.matrix > p.m || e.block == 0 || e.block > nblocks) throw ComputationError("SDPA entry out of range");
    p.entries.push_back(e);
  }
  return p;
}

void write_sdpa(const MomentProblem& problem, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputationError("cannot open '" + path.string() + "' for writing");
  out << format_sdpa(to_sdpa(problem));
  out.flush();
  if (!out) throw ComputationError("failed writing '" + path.string() + "'");
}

SdpaProblem read_sdpa(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ComputationError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_sdpa(buf.str());
}

nlohmann::json sidecar(const MomentProblem& problem, const std::string& file_name) {
  std::size_t constraint_rows = to_sdpa(problem).m;
  return nlohmann::json{
      {"file", file_name},
      {"strategy_kind", std::string(to_string(problem.kind))},
      {"n_copies", problem.n_copies},
      {"visibility", problem.visibility},
      {"eta", problem.eta},
      {"level", problem.level_spec},
      {"level_b_token", "either Bob leg (B0 or B1)"},
      {"basis_size", problem.size()},
      {"moment_count", problem.moments.size()},
      {"data_constraint_count", problem.equality_constraints.size()},
      {"constraint_count", constraint_rows},
      {"constrain_long_path", problem.options.constrain_long_path},
      {"impose_b1_commutation", problem.options.impose_b1_commutation},
      {"sdpa_form", "dual: F_i . Y = c_i, Y psd, F_0 = 0"},
  };
}

void write_sidecar(const MomentProblem& problem, const std::filesystem::path& sdpa_path) {
  std::filesystem::path json_path = sdpa_path;
  json_path += ".json";
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ComputationError("cannot open '" + json_path.string() + "' for writing");
  out << sidecar(problem, sdpa_path.filename().string()).dump(2) << '\n';
  if (!out) throw ComputationError("failed writing '" + json_path.string() + "'");
}

std::string problem_file_name(StrategyKind kind, std::size_t n_copies, double visibility, std::string_view level,
                              double eta) {
  std::string lvl(level);
  std::replace(lvl.begin(), lvl.end(), '+', 'p');
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s_n%zu_v%.6f_l%s_eta%.12f.dat-s", std::string(to_string(kind)).c_str(), n_copies,
                visibility, lvl.c_str(), eta);
  return buf;
}

std::vector<BisectionProbe> bisection_plan(StrategyKind kind, std::size_t n_copies, double visibility,
                                           std::string_view level, double eta_lo, double eta_hi,
                                           std::size_t iterations) {
  if (!(eta_lo >= 0.0 && eta_lo < eta_hi && eta_hi <= 1.0)) throw PreconditionError("need 0 <= eta_lo < eta_hi <= 1");
  if (iterations > 20) throw PreconditionError("at most 20 bisection iterations");
  parse_level(level);
  std::vector<BisectionProbe> plan;
  const double width = eta_hi - eta_lo;
  for (std::size_t d = 0; d < iterations; ++d) {
    const std::size_t count = std::size_t{1} << d;
    for (std::size_t i = 0; i < count; ++i) {
      // Midpoint of the i-th of 2^d equal subintervals.
      const double eta = eta_lo + width * (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(2 * count);
      plan.push_back({d, eta, problem_file_name(kind, n_copies, visibility, level, eta)});
    }
  }
  return plan;
}

HonestCheck honest_substitution(const MomentProblem& problem, const RoutedStrategy& strategy) {
  const std::size_t da = strategy.alice.dim();
  const std::size_t db = strategy.b0.dim();
  const Operator id_a = Operator::identity(da);
  const Operator id_b = Operator::identity(db);
  auto op_of = [&](const OperatorSymbol& s) {
    switch (s.party) {
      case Party::a:
        return tensor({strategy.alice.effect(s.setting, s.outcome), id_b});
      case Party::b0:
        return tensor({id_a, strategy.b0.effect(s.setting, s.outcome)});
      case Party::b1:
        break;
    }
    return tensor({id_a, strategy.b1.effect(s.setting, s.outcome)});
  };
  const Operator ident = Operator::identity(da * db);
  auto product = [&](const std::vector<OperatorSymbol>& word) {
    Operator m = ident;
    for (const OperatorSymbol& s : word) m = m * op_of(s);
    return m;
  };
  auto expectation = [&](const Operator& w) { return (strategy.state * w).trace().real(); };

  std::vector<double> moment_value(problem.moments.size());
  for (std::size_t id = 0; id < problem.moments.size(); ++id) moment_value[id] = expectation(product(problem.moments[id].factors));

  HonestCheck out;
  for (const EqualityConstraint& c : problem.equality_constraints) {
    out.max_constraint_residual = std::max(out.max_constraint_residual, std::abs(moment_value[c.moment] - c.target));
  }

  const std::size_t n = problem.size();
  std::vector<Operator> ops;
  ops.reserve(n);
  for (const Monomial& m : problem.basis) ops.push_back(product(m.factors));
  out.moment_matrix.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Operator left = ops[i].adjoint();
    for (std::size_t j = 0; j < n; ++j) {
      const std::int32_t id = problem.entry(i, j);
      const double v = id < 0 ? 0.0 : moment_value[static_cast<std::size_t>(id)];
      out.moment_matrix[i * n + j] = v;
      const double direct = expectation(left * ops[j]);
      out.max_consistency_residual = std::max(out.max_consistency_residual, std::abs(direct - v));
    }
  }
  out.min_eigenvalue = linalg::symmetric_eigen(out.moment_matrix, n, false).values.front();
  return out;
}

}  // namespace routed_bell::npa
