#include "routed_bell/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/kernels.hpp"

namespace routed_bell {

namespace {

void require_unit_interval(double value, const char* name) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw PreconditionError(std::string(name) + " must lie in [0, 1]");
  }
}

MeasurementAssembly product_assembly(std::size_t n_copies, Operator (*qubit_effect)(unsigned, unsigned)) {
  const std::size_t count = std::size_t{1} << n_copies;
  MeasurementAssembly m;
  m.n_settings = count;
  m.outcomes_per_setting = count;
  m.effects.reserve(count * count);
  std::vector<Operator> factors(n_copies);
  for (std::size_t s = 0; s < count; ++s) {
    for (std::size_t o = 0; o < count; ++o) {
      for (std::size_t j = 0; j < n_copies; ++j) {
        factors[j] = qubit_effect(static_cast<unsigned>((s >> j) & 1U), static_cast<unsigned>((o >> j) & 1U));
      }
      m.effects.push_back(tensor(factors));
    }
  }
  return m;
}

}  // namespace

double MeasurementAssembly::completeness_error() const {
  double worst = 0.0;
  const Operator id = Operator::identity(dim());
  for (std::size_t s = 0; s < n_settings; ++s) {
    Operator sum = Operator::zero(dim());
    for (std::size_t o = 0; o < outcomes_per_setting; ++o) sum = sum + effect(s, o);
    worst = std::max(worst, sum.max_abs_diff(id));
  }
  return worst;
}

bool MeasurementAssembly::all_psd(double tol) const {
  return std::all_of(effects.begin(), effects.end(), [tol](const Operator& e) { return is_psd(e, tol); });
}

bool MeasurementAssembly::all_projective(double tol) const {
  return std::all_of(effects.begin(), effects.end(),
                     [tol](const Operator& e) { return (e * e).max_abs_diff(e) <= tol; });
}

Operator alice_qubit_effect(unsigned x, unsigned a) {
  const double sign = (a & 1U) ? -1.0 : 1.0;
  const Operator axis = (x & 1U) ? pauli(Pauli::X) : pauli(Pauli::Z);
  return (pauli(Pauli::I) + axis * sign) * 0.5;
}

Operator bob_qubit_effect(unsigned y, unsigned b) {
  const double sign = (b & 1U) ? -1.0 : 1.0;
  // Setting 1 measures Z - X: with the (X - Z) sign the win rule
  // a xor b = x y would score 1/2 on |phi+>.
  const Operator axis = (y & 1U) ? pauli(Pauli::Z) - pauli(Pauli::X) : pauli(Pauli::X) + pauli(Pauli::Z);
  return (pauli(Pauli::I) + axis * (sign * inv_sqrt2)) * 0.5;
}

std::pair<MeasurementAssembly, MeasurementAssembly> ideal_chsh_measurements(std::size_t n_copies) {
  if (n_copies < 1 || n_copies > max_strategy_copies) {
    throw PreconditionError("dimension cap: n_copies must lie in [1, 4]");
  }
  return {product_assembly(n_copies, &alice_qubit_effect), product_assembly(n_copies, &bob_qubit_effect)};
}

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::rbb84:
      return "rbb84";
    case StrategyKind::rchsh:
      return "rchsh";
    case StrategyKind::rbb84_chsh:
      return "rbb84chsh";
  }
  return "unknown";
}

StrategyKind parse_strategy_kind(std::string_view text) {
  if (text == "rbb84") return StrategyKind::rbb84;
  if (text == "rchsh") return StrategyKind::rchsh;
  if (text == "rbb84chsh" || text == "rbb84+chsh") return StrategyKind::rbb84_chsh;
  throw PreconditionError("unknown strategy kind '" + std::string(text) + "'");
}

Operator noisy_max_entangled(std::size_t n_copies, double visibility) {
  require_unit_interval(visibility, "visibility");
  const Operator ideal = PureState::max_entangled(n_copies).projector();
  const std::size_t dim = ideal.dim();
  return ideal * visibility + Operator::identity(dim) * ((1.0 - visibility) / static_cast<double>(dim));
}

RoutedStrategy build_strategy(StrategyKind kind, std::size_t n_copies, double eta, double visibility) {
  require_unit_interval(eta, "eta");
  require_unit_interval(visibility, "visibility");
  if (kind == StrategyKind::rbb84_chsh && n_copies != 1) {
    throw PreconditionError("rBB84+CHSH is a single-copy strategy (n_copies must be 1)");
  }
  auto [alice, bob] = ideal_chsh_measurements(n_copies);

  RoutedStrategy s;
  s.kind = kind;
  s.n_copies = n_copies;
  s.eta = eta;
  s.visibility = visibility;
  s.state = noisy_max_entangled(n_copies, visibility);
  switch (kind) {
    case StrategyKind::rbb84:
      s.b1 = alice;
      break;
    case StrategyKind::rchsh:
      s.b1 = bob;
      break;
    case StrategyKind::rbb84_chsh: {
      MeasurementAssembly b1;
      b1.n_settings = 4;
      b1.outcomes_per_setting = 2;
      for (unsigned y = 0; y < 4; ++y) {
        for (unsigned b = 0; b < 2; ++b) {
          b1.effects.push_back(y < 2 ? alice_qubit_effect(y, b) : bob_qubit_effect(y - 2, b));
        }
      }
      s.b1 = std::move(b1);
      break;
    }
  }
  s.alice = std::move(alice);
  s.b0 = std::move(bob);
  return s;
}

Operator steered_operator(const Operator& state, const Operator& alice_effect) {
  const std::size_t da = alice_effect.dim();
  if (da == 0 || state.dim() % da != 0) throw PreconditionError("state and effect dimensions are incompatible");
  const std::size_t db = state.dim() / da;
  const std::size_t full = state.dim();
  // sigma[k][l] = sum_{i,j} A[j][i] rho[(i,k),(j,l)]
  std::vector<complex> sigma(db * db);
  const auto rho = state.entries();
  for (std::size_t i = 0; i < da; ++i) {
    for (std::size_t j = 0; j < da; ++j) {
      const complex coeff = alice_effect(j, i);
      if (coeff == complex(0.0)) continue;
      for (std::size_t k = 0; k < db; ++k) {
        kernels::caxpy(coeff, rho.subspan((i * db + k) * full + j * db, db),
                       std::span<complex>(sigma.data() + k * db, db));
      }
    }
  }
  return Operator(db, std::move(sigma));
}

std::vector<double> born_table(const Operator& state, const MeasurementAssembly& alice,
                               const MeasurementAssembly& bob) {
  if (alice.dim() * bob.dim() != state.dim()) throw PreconditionError("state and measurement dimensions are incompatible");
  const std::size_t nx = alice.n_settings, na = alice.outcomes_per_setting;
  const std::size_t ny = bob.n_settings, nb = bob.outcomes_per_setting;
  std::vector<double> table(nx * ny * na * nb);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t a = 0; a < na; ++a) {
      const Operator sigma = steered_operator(state, alice.effect(x, a));
      for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t b = 0; b < nb; ++b) {
          // tr(sigma B) = Re sum conj(B_kl) sigma_kl for Hermitian B.
          table[((x * ny + y) * na + a) * nb + b] = kernels::real_inner(bob.effect(y, b).entries(), sigma.entries());
        }
      }
    }
  }
  return table;
}

RoutedCorrelation correlation(const RoutedStrategy& strategy) {
  RoutedCorrelation c;
  c.n_copies = strategy.n_copies;
  c.eta = strategy.eta;
  c.x_count = strategy.alice.n_settings;
  c.a_count = strategy.alice.outcomes_per_setting;
  c.y0_count = strategy.b0.n_settings;
  c.b0_count = strategy.b0.outcomes_per_setting;
  c.y1_count = strategy.b1.n_settings;
  c.b1_clicks = strategy.b1.outcomes_per_setting;

  c.short_path = born_table(strategy.state, strategy.alice, strategy.b0);
  const std::vector<double> honest = born_table(strategy.state, strategy.alice, strategy.b1);

  const std::size_t nb = c.b1_clicks + 1;
  c.long_path.assign(c.x_count * c.y1_count * c.a_count * nb, 0.0);
  for (std::size_t x = 0; x < c.x_count; ++x) {
    for (std::size_t y = 0; y < c.y1_count; ++y) {
      for (std::size_t a = 0; a < c.a_count; ++a) {
        double p_a = 0.0;
        for (std::size_t b = 0; b < c.b1_clicks; ++b) {
          const double p = honest[((x * c.y1_count + y) * c.a_count + a) * c.b1_clicks + b];
          p_a += p;
          c.long_path[((x * c.y1_count + y) * c.a_count + a) * nb + b] = strategy.eta * p;
        }
        c.long_path[((x * c.y1_count + y) * c.a_count + a) * nb + c.b1_clicks] = (1.0 - strategy.eta) * p_a;
      }
    }
  }
  return c;
}

double RoutedCorrelation::alice_marginal(std::size_t x, std::size_t a, std::size_t y, int route) const {
  double p = 0.0;
  if (route == 0) {
    for (std::size_t b = 0; b < b0_count; ++b) p += p0(x, y, a, b);
  } else {
    for (std::size_t b = 0; b <= b1_clicks; ++b) p += p1(x, y, a, b);
  }
  return p;
}

double RoutedCorrelation::b1_marginal(std::size_t y, std::size_t b) const {
  // Alice's setting does not influence B's marginal; average over x anyway so
  // the value is symmetric in the table entries.
  double p = 0.0;
  for (std::size_t x = 0; x < x_count; ++x) {
    for (std::size_t a = 0; a < a_count; ++a) p += p1(x, y, a, b);
  }
  return p / static_cast<double>(x_count);
}

ConditionalStates conditional_states(const RoutedStrategy& strategy) {
  ConditionalStates out;
  for (std::size_t x = 0; x < strategy.alice.n_settings; ++x) {
    for (std::size_t a = 0; a < strategy.alice.outcomes_per_setting; ++a) {
      const Operator sigma = steered_operator(strategy.state, strategy.alice.effect(x, a));
      const double p = sigma.trace().real();
      if (p < 1e-14) {
        out.omitted.emplace_back(x, a);
        continue;
      }
      out.states.emplace(std::make_pair(x, a), ConditionalState{p, sigma * (1.0 / p)});
    }
  }
  return out;
}

}  // namespace routed_bell
