#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "routed_bell/strategies.hpp"

namespace routed_bell::npa {

enum class Party : unsigned char { a, b0, b1 };

std::string_view to_string(Party party);

/// Projector of one party. The last outcome of A and B0 settings and the
/// no-click outcome of B1 are eliminated through completeness and never
/// appear as symbols.
struct OperatorSymbol {
  Party party = Party::a;
  unsigned setting = 0;
  unsigned outcome = 0;

  auto operator<=>(const OperatorSymbol&) const = default;
  std::string to_string() const;
};

/// Product of symbols in canonical form: A-symbols first, then Bob's symbols.
struct Monomial {
  std::vector<OperatorSymbol> factors;

  bool empty() const { return factors.empty(); }
  std::size_t size() const { return factors.size(); }
  auto operator<=>(const Monomial& rhs) const {
    if (auto c = factors.size() <=> rhs.factors.size(); c != 0) return c;
    return factors <=> rhs.factors;
  }
  bool operator==(const Monomial&) const = default;
  std::string to_string() const;
};

struct CanonicalRules {
  bool b1_commute = true;  ///< B1 projectors of different settings commute
};

/// Canonical form of a product of symbols, or nullopt when it vanishes
/// (orthogonal projectors of one setting meet).
std::optional<Monomial> canonicalize(std::span<const OperatorSymbol> word, const CanonicalRules& rules);

/// Reverses the word (adjoint of a product of projectors), then canonicalizes.
std::optional<Monomial> adjoint(const Monomial& m, const CanonicalRules& rules);

/// Representative of {m, m^dagger}: moments are real.
Monomial moment_representative(const Monomial& m, const CanonicalRules& rules);

enum class Token : unsigned char { a, b0, b1, b };

struct LevelSpec {
  std::size_t length = 0;                  ///< all words up to this length
  std::vector<std::vector<Token>> extras;  ///< extra word shapes; Token::b means either Bob leg
  std::string text;
};

/// Grammar: INT ("+" WORD)*, WORD in {A, B0, B1, B}+.
LevelSpec parse_level(std::string_view text);

/// Thrown by parse_level; position is the 0-based offset of the offending character.
class LevelParseError : public std::invalid_argument {
 public:
  LevelParseError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

inline constexpr std::size_t max_basis_size = 20000;

struct EqualityConstraint {
  std::size_t moment = 0;  ///< moment id
  double target = 0.0;
};

struct ProblemOptions {
  bool constrain_long_path = true;
  bool impose_b1_commutation = true;
};

struct MomentProblem {
  StrategyKind kind = StrategyKind::rbb84;
  std::size_t n_copies = 1;
  double visibility = 1.0;
  double eta = 1.0;
  std::string level_spec;
  ProblemOptions options;

  std::vector<OperatorSymbol> symbols;
  std::vector<Monomial> basis;    ///< basis[0] is the identity
  std::vector<Monomial> moments;  ///< moment id -> representative; moments[0] is the identity
  std::vector<std::int32_t> matrix;  ///< basis x basis, row-major; -1 marks a vanishing entry
  std::vector<EqualityConstraint> equality_constraints;  ///< normalization first

  std::size_t size() const { return basis.size(); }
  std::int32_t entry(std::size_t row, std::size_t col) const { return matrix[row * basis.size() + col]; }
};

/// Moment-matrix feasibility problem for the strategy's correlations at
/// efficiency eta: short-path statistics fixed, long-path statistics fixed
/// when requested, far-device projectors commuting when requested.
MomentProblem build_problem(const RoutedStrategy& strategy, double eta, std::string_view level,
                            const ProblemOptions& options = {});

/// Sparse SDPA data in the dual form: F_i . Y = c_i, Y >= 0, F_0 = 0.
struct SdpaEntry {
  std::size_t matrix = 0;  ///< constraint number, 1-based
  std::size_t block = 1;
  std::size_t row = 0;  ///< 1-based, row <= col
  std::size_t col = 0;
  double value = 0.0;

  auto operator<=>(const SdpaEntry&) const = default;
};

struct SdpaProblem {
  std::size_t m = 0;
  std::vector<long> block_sizes;
  std::vector<double> objective;  ///< c
  std::vector<SdpaEntry> entries;

  bool operator==(const SdpaProblem&) const = default;
};

SdpaProblem to_sdpa(const MomentProblem& problem);

std::string format_sdpa(const SdpaProblem& sdpa);
SdpaProblem parse_sdpa(std::string_view text);

void write_sdpa(const MomentProblem& problem, const std::filesystem::path& path);
SdpaProblem read_sdpa(const std::filesystem::path& path);

nlohmann::json sidecar(const MomentProblem& problem, const std::string& file_name);
void write_sidecar(const MomentProblem& problem, const std::filesystem::path& sdpa_path);

struct BisectionProbe {
  std::size_t depth = 0;  ///< 0 for the first midpoint
  double eta = 0.0;
  std::string file_name;
};

/// All midpoints the bisection may visit, breadth first: depth d holds the
/// 2^d midpoints of the dyadic subintervals of [eta_lo, eta_hi].
std::vector<BisectionProbe> bisection_plan(StrategyKind kind, std::size_t n_copies, double visibility,
                                           std::string_view level, double eta_lo, double eta_hi,
                                           std::size_t iterations);

/// File name of the SDPA problem for one probe.
std::string problem_file_name(StrategyKind kind, std::size_t n_copies, double visibility, std::string_view level,
                              double eta);

struct HonestCheck {
  std::vector<double> moment_matrix;  ///< basis x basis
  double min_eigenvalue = 0.0;
  double max_constraint_residual = 0.0;
  double max_consistency_residual = 0.0;  ///< entries sharing an id but differing in value
};

/// Substitutes the strategy's own operators (far-device click projectors
/// unthinned) into the moment matrix.
HonestCheck honest_substitution(const MomentProblem& problem, const RoutedStrategy& strategy);

}  // namespace routed_bell::npa
