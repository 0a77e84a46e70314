#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "routed_bell/inequalities.hpp"
#include "routed_bell/operator.hpp"
#include "routed_bell/strategies.hpp"

namespace routed_bell {

/// Largest N for which the (2^N + 1)^(2^N) pattern space is enumerated.
inline constexpr std::size_t max_scan_copies = 3;

/// Outcome (or no click) reported for every far-device setting by a parent
/// measurement. Pattern indices are mixed-radix little-endian with one digit
/// per setting (setting 0 fastest); digit value n_outcomes stands for no click.
class ClickPattern {
 public:
  static constexpr int no_click = -1;

  ClickPattern(std::size_t n_outcomes, std::vector<int> entries);

  /// All-no-click pattern for N product copies (2^N settings and outcomes).
  static ClickPattern empty(std::size_t n_copies);
  static ClickPattern from_index(std::size_t n_settings, std::size_t n_outcomes, std::uint64_t index);

  std::size_t n_settings() const { return entries_.size(); }
  std::size_t n_outcomes() const { return n_outcomes_; }
  const std::vector<int>& entries() const { return entries_; }
  int operator[](std::size_t setting) const { return entries_[setting]; }
  std::size_t click_count() const;
  std::uint64_t index() const;
  std::string to_string() const;

  bool operator==(const ClickPattern&) const = default;

 private:
  std::size_t n_outcomes_;
  std::vector<int> entries_;
};

/// (2^N + 1)^(2^N)
std::uint64_t pattern_count(std::size_t n_copies);

/// Single-copy factor of the C-operator terms: Alice's projector A^y_b for
/// BB84, and the averaged effect (A^0_b + A^1_{b xor y}) / 2 for CHSH.
Operator local_term(Family family, unsigned y, unsigned b);

/// Tensor product of local_term over the copies of (setting, outcome).
Operator pattern_term(Family family, std::size_t n_copies, std::size_t setting, std::size_t outcome);

/// C-operator: sum over clicked settings of (pattern_term - q I).
Operator c_operator(Family family, const ClickPattern& pattern, double q);

struct ScanOptions {
  std::size_t workers = 1;
  bool prune = false;
  /// Called with (patterns done, total) every 2^20 patterns and once at the end.
  std::function<void(std::uint64_t, std::uint64_t)> progress;
};

struct CertificationReport {
  Family family = Family::bb84;
  std::size_t n_copies = 1;
  double q = 0.0;
  double max_lambda = 0.0;
  ClickPattern argmax_pattern = ClickPattern::empty(1);
  std::uint64_t patterns_scanned = 0;  ///< eigenvalue evaluations
  std::uint64_t patterns_total = 0;
  double bound_rhs = 0.0;  ///< 1 - q or alpha^N - q
  bool verified = false;   ///< max_lambda <= bound_rhs + 1e-9
  bool pruned = false;
  std::size_t workers = 1;
  std::chrono::duration<double> wall_time{};
};

/// Maximum eigenvalue of every C-operator in the pattern space.
CertificationReport exhaustive_scan(Family family, std::size_t n_copies, double q, const ScanOptions& options = {});

/// Smallest CHSH penalty for which no pattern with two or more clicks beats
/// the one-click value: max over k >= 2 of (|| sum S || - alpha^N) / (k - 1).
double beta_prime_threshold(std::size_t n_copies, const ScanOptions& options = {});

struct GramScanEntry {
  std::uint64_t patterns = 0;
  double q = 0.0;
  double worst_true_norm = 0.0;   ///< max || sum S_l ||
  double worst_gram_bound = 0.0;  ///< max || Gamma ||
  double paper_gk_bound = 0.0;    ///< || G_k || with off-diagonal beta (CHSH) or 1/sqrt2 (BB84)
  double corrected_gk_bound = 0.0;  ///< || G_k || with the exact largest off-diagonal entry
  std::uint64_t violations = 0;     ///< patterns breaking norm <= Gamma bound <= corrected G_k (1e-9)
  std::uint64_t gk_exceeded = 0;    ///< patterns whose Gamma bound exceeds paper_gk_bound (1e-9)

  double gram_lambda_bound(std::size_t k) const { return worst_gram_bound - static_cast<double>(k) * q; }
  double paper_lambda_bound(std::size_t k) const { return paper_gk_bound - static_cast<double>(k) * q; }
};

/// Per click count, the Gram-matrix bound against the analytic G_k bound.
std::map<std::size_t, GramScanEntry> gram_bound_scan(Family family, std::size_t n_copies, double q,
                                                     const ScanOptions& options = {});

/// || G_k || for the family: 1 + (k-1)/sqrt2 or alpha^N + (k-1) alpha^{N-1} beta.
double analytic_gk_norm(Family family, std::size_t n_copies, std::size_t k);

/// Same with the CHSH off-diagonal alpha^{N-1} (1 + sqrt3)/4, which does bound
/// every Gamma entry. Equal to analytic_gk_norm for BB84.
double corrected_gk_norm(Family family, std::size_t n_copies, std::size_t k);

struct ParentEffect {
  ClickPattern pattern;
  Operator effect;
};

/// Parent POVM on the far device's input space.
struct ParentPovm {
  std::vector<ParentEffect> effects;
};

/// Measures the honest far-device setting 0 and reports its outcome there,
/// no click on every other setting.
ParentPovm build_jm_attack(Family family, std::size_t n_copies);

/// Long-path correlation generated by a parent measurement in place of the
/// far device; the short path is the honest one.
RoutedCorrelation simulate_jm_model(const RoutedStrategy& strategy, const ParentPovm& parent);

}  // namespace routed_bell
