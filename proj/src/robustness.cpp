#include "routed_bell/robustness.hpp"

#include <cmath>

#include "routed_bell/constants.hpp"
#include "routed_bell/error.hpp"

namespace routed_bell {

namespace {

void check_input(const RobustnessInput& input) {
  if (input.n_copies == 0) throw PreconditionError("n_copies must be at least 1");
  if (!(input.f_value >= 0.0)) throw PreconditionError("self-testing error f must be non-negative");
  if (!(input.epsilon >= 0.0)) throw PreconditionError("epsilon must be non-negative");
}

}  // namespace

double delta_bound(const RobustnessInput& input) {
  check_input(input);
  const double f = input.f_value;
  const double g = f * f + 2.0 * f;
  const int n = static_cast<int>(input.n_copies);
  return std::ldexp(g, 2 * n + 1) + std::ldexp(g * g, 4 * n);
}

RobustEta robust_eta_star(const RobustnessInput& input) { return robust_eta_star(input, delta_bound(input)); }

RobustEta robust_eta_star(const RobustnessInput& input, double delta) {
  check_input(input);
  if (!(delta >= 0.0)) throw PreconditionError("delta must be non-negative");
  const double gap = 1.0 - inv_sqrt2;
  const double root = std::sqrt(delta);
  double denominator = gap - root;
  if (input.linear_translation) denominator -= input.epsilon / alpha_pow(input.n_copies);
  if (!(denominator > 0.0)) throw PreconditionError("robustness window empty");
  RobustEta out;
  out.delta = delta;
  out.q = inv_sqrt2 + root;
  out.eta_star = inv_pow2(input.n_copies) * gap / denominator;
  return out;
}

double robust_gram_bound(std::size_t n_copies, std::size_t k, double delta, double q) {
  if (n_copies == 0) throw PreconditionError("n_copies must be at least 1");
  if (k == 0) throw PreconditionError("click count must be at least 1");
  if (!(delta >= 0.0)) throw PreconditionError("delta must be non-negative");
  const double kd = static_cast<double>(k);
  return (1.0 - inv_sqrt2) + kd * (inv_sqrt2 + std::sqrt(delta)) - kd * q;
}

}  // namespace routed_bell
