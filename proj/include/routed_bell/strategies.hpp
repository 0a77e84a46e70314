#pragma once

#include <cstddef>
#include <map>
#include <string_view>
#include <utility>
#include <vector>

#include "routed_bell/operator.hpp"

namespace routed_bell {

/// Largest number of parallel copies the dense strategy model supports.
inline constexpr std::size_t max_strategy_copies = 4;

/// POVM family indexed by (setting, outcome). Settings and outcomes of the
/// N-copy measurements are bit strings packed little-endian (bit j = copy j).
struct MeasurementAssembly {
  std::size_t n_settings = 0;
  std::size_t outcomes_per_setting = 0;
  std::vector<Operator> effects;  ///< setting-major

  const Operator& effect(std::size_t setting, std::size_t outcome) const {
    return effects.at(setting * outcomes_per_setting + outcome);
  }
  std::size_t dim() const { return effects.empty() ? 0 : effects.front().dim(); }

  /// Max deviation of sum_outcome effect from the identity over all settings.
  double completeness_error() const;
  bool all_psd(double tol = psd_tolerance) const;
  bool all_projective(double tol = 1e-12) const;
};

/// Single-qubit measurement effects of the optimal CHSH strategy.
/// Alice measures Z (x = 0) or X (x = 1); Bob measures (X + Z)/sqrt2 or (Z - X)/sqrt2.
Operator alice_qubit_effect(unsigned x, unsigned a);
Operator bob_qubit_effect(unsigned y, unsigned b);

/// N-fold product measurements for Alice and Bob's near device.
std::pair<MeasurementAssembly, MeasurementAssembly> ideal_chsh_measurements(std::size_t n_copies);

enum class StrategyKind { rbb84, rchsh, rbb84_chsh };

std::string_view to_string(StrategyKind kind);
StrategyKind parse_strategy_kind(std::string_view text);

struct RoutedStrategy {
  StrategyKind kind = StrategyKind::rbb84;
  std::size_t n_copies = 1;
  Operator state;  ///< density matrix on (A copies)(B copies), dim 4^N
  MeasurementAssembly alice;
  MeasurementAssembly b0;
  MeasurementAssembly b1;  ///< click outcomes only; loss is applied by correlation()
  double eta = 1.0;
  double visibility = 1.0;
};

/// Shared state v |phi+><phi+|^N + (1 - v) I / 4^N.
Operator noisy_max_entangled(std::size_t n_copies, double visibility);

RoutedStrategy build_strategy(StrategyKind kind, std::size_t n_copies, double eta, double visibility);

/// p(a,b|x,y,i) for both routes. The long path carries an extra no-click
/// outcome at index b1_clicks.
struct RoutedCorrelation {
  std::size_t n_copies = 1;
  double eta = 1.0;  ///< nominal click probability of the far device
  std::size_t x_count = 0, a_count = 0;
  std::size_t y0_count = 0, b0_count = 0;
  std::size_t y1_count = 0, b1_clicks = 0;
  std::vector<double> short_path;  ///< [x][y][a][b], b < b0_count
  std::vector<double> long_path;   ///< [x][y][a][b], b <= b1_clicks

  std::size_t no_click() const { return b1_clicks; }
  double p0(std::size_t x, std::size_t y, std::size_t a, std::size_t b) const {
    return short_path[((x * y0_count + y) * a_count + a) * b0_count + b];
  }
  double p1(std::size_t x, std::size_t y, std::size_t a, std::size_t b) const {
    return long_path[((x * y1_count + y) * a_count + a) * (b1_clicks + 1) + b];
  }
  /// Alice's marginal read from the short (route 0) or long (route 1) table.
  double alice_marginal(std::size_t x, std::size_t a, std::size_t y, int route) const;
  /// Far-device marginal p_B(b|y,1).
  double b1_marginal(std::size_t y, std::size_t b) const;
};

/// Unnormalized conditional state tr_A[(A (x) I) rho] for one Alice effect.
Operator steered_operator(const Operator& state, const Operator& alice_effect);

/// Born-rule probabilities for a state and product effects, evaluated through
/// Alice-steered operators: entry [x][y][a][b] of the returned table.
std::vector<double> born_table(const Operator& state, const MeasurementAssembly& alice,
                               const MeasurementAssembly& bob);

RoutedCorrelation correlation(const RoutedStrategy& strategy);

struct ConditionalState {
  double probability = 0.0;  ///< p_A(a|x)
  Operator state;            ///< unit-trace state of Bob's register
};

struct ConditionalStates {
  std::map<std::pair<std::size_t, std::size_t>, ConditionalState> states;  ///< keyed by (x, a)
  std::vector<std::pair<std::size_t, std::size_t>> omitted;  ///< p_A below 1e-14
};

ConditionalStates conditional_states(const RoutedStrategy& strategy);

}  // namespace routed_bell
