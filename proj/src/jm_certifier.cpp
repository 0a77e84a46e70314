#include "routed_bell/jm_certifier.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "routed_bell/constants.hpp"
#include "routed_bell/eigen.hpp"
#include "routed_bell/error.hpp"
#include "routed_bell/kernels.hpp"

namespace routed_bell {

namespace {

constexpr std::uint64_t chunk_patterns = std::uint64_t{1} << 16;
constexpr std::uint64_t progress_stride = std::uint64_t{1} << 20;

void require_scan_copies(std::size_t n_copies) {
  if (n_copies == 0) throw PreconditionError("n_copies must be at least 1");
  if (n_copies > max_scan_copies) throw PreconditionError("pattern space too large: exhaustive scans need N <= 3");
}

std::uint64_t ipow(std::uint64_t base, std::size_t exp) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) r *= base;
  return r;
}

// Real row-major copies of every pattern term S_{y,b}.
struct TermTable {
  std::size_t n_copies = 0;
  std::size_t n = 0;    // settings = outcomes = 2^N
  std::size_t dim = 0;  // 2^N
  std::vector<double> data;

  const double* term(std::size_t y, std::size_t b) const { return data.data() + (y * n + b) * dim * dim; }
};

TermTable make_terms(Family family, std::size_t n_copies) {
  TermTable t;
  t.n_copies = n_copies;
  t.n = std::size_t{1} << n_copies;
  t.dim = t.n;
  t.data.reserve(t.n * t.n * t.dim * t.dim);
  for (std::size_t y = 0; y < t.n; ++y) {
    for (std::size_t b = 0; b < t.n; ++b) {
      const Operator s = pattern_term(family, n_copies, y, b);
      for (const complex& z : s.entries()) t.data.push_back(z.real());
    }
  }
  return t;
}

// Pattern with the smallest index in its orbit under the per-copy maps
// (y, b) -> (y ^ s, b ^ t ^ (r & y)). Every such map is implemented by a
// product unitary that permutes the term set of both families, so the
// spectrum of the C-operator is constant on orbits.
bool is_canonical(const std::uint16_t* digits, std::size_t n, std::size_t n_copies) {
  const std::uint16_t none = static_cast<std::uint16_t>(n);
  const std::size_t masks = std::size_t{1} << n_copies;
  for (std::size_t s = 0; s < masks; ++s) {
    for (std::size_t t = 0; t < masks; ++t) {
      for (std::size_t r = 0; r < masks; ++r) {
        if (s == 0 && t == 0 && r == 0) continue;
        // Compare image and pattern from the most significant digit down.
        for (std::size_t yi = n; yi-- > 0;) {
          const std::size_t src = yi ^ s;
          const std::uint16_t v = digits[src] == none ? none : static_cast<std::uint16_t>(digits[src] ^ t ^ (r & src));
          if (v < digits[yi]) return false;
          if (v > digits[yi]) break;
        }
      }
    }
  }
  return true;
}

// Enumerates [begin, end) keeping prefix sums P[j] = S_{j,d_j} + P[j+1]
// (P[n] = 0), so the sum of a pattern is evaluated in a fixed order that
// does not depend on where the chunk starts.
template <class Acc>
void scan_chunk(const TermTable& t, std::uint64_t begin, std::uint64_t end, bool prune, Acc& acc) {
  const std::size_t n = t.n;
  const std::size_t area = t.dim * t.dim;
  const std::uint16_t none = static_cast<std::uint16_t>(n);
  std::vector<std::uint16_t> digits(n);
  std::vector<double> prefix((n + 1) * area, 0.0);
  std::vector<std::size_t> clicks(n + 1, 0);

  std::uint64_t rest = begin;
  for (std::size_t y = 0; y < n; ++y) {
    digits[y] = static_cast<std::uint16_t>(rest % (n + 1));
    rest /= n + 1;
  }
  auto rebuild = [&](std::size_t top) {
    for (std::size_t j = top + 1; j-- > 0;) {
      double* dst = prefix.data() + j * area;
      const double* src = prefix.data() + (j + 1) * area;
      std::copy(src, src + area, dst);
      clicks[j] = clicks[j + 1];
      if (digits[j] != none) {
        kernels::axpy(1.0, {t.term(j, digits[j]), area}, {dst, area});
        ++clicks[j];
      }
    }
  };
  rebuild(n - 1);

  for (std::uint64_t index = begin; index < end; ++index) {
    if (!prune || is_canonical(digits.data(), n, t.n_copies)) {
      acc.visit(digits.data(), clicks[0], prefix.data(), index);
    }
    if (index + 1 == end) break;
    std::size_t j = 0;
    while (digits[j] == none) {
      digits[j] = 0;
      ++j;
    }
    ++digits[j];
    rebuild(j);
  }
}

template <class Acc>
Acc run_scan(const TermTable& t, const ScanOptions& options, const Acc& proto) {
  const std::uint64_t total = ipow(t.n + 1, t.n);
  const std::uint64_t chunks = (total + chunk_patterns - 1) / chunk_patterns;
  std::vector<Acc> locals(chunks, proto);
  std::atomic<std::uint64_t> next{0};
  std::atomic<std::uint64_t> done{0};
  std::mutex progress_mutex;

  auto worker = [&] {
    for (;;) {
      const std::uint64_t c = next.fetch_add(1);
      if (c >= chunks) return;
      const std::uint64_t begin = c * chunk_patterns;
      const std::uint64_t end = std::min(total, begin + chunk_patterns);
      scan_chunk(t, begin, end, options.prune, locals[c]);
      const std::uint64_t before = done.fetch_add(end - begin);
      const std::uint64_t after = before + (end - begin);
      if (options.progress && before / progress_stride != after / progress_stride) {
        std::lock_guard lock(progress_mutex);
        options.progress(after, total);
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min<std::uint64_t>(options.workers, chunks));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  // Final report, unless the last chunk already landed on a stride boundary.
  if (options.progress && total % progress_stride != 0) options.progress(total, total);

  Acc result = proto;
  for (const Acc& local : locals) result.merge(local);
  return result;
}

// Upper bound on the largest eigenvalue of a symmetric matrix: the smaller of
// the Frobenius norm and the largest absolute row sum.
double cheap_eigen_bound(const double* a, std::size_t dim) {
  double frob = 0.0;
  double rows = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double x = a[i * dim + j];
      frob += x * x;
      row += std::abs(x);
    }
    rows = std::max(rows, row);
  }
  return std::min(std::sqrt(frob), rows);
}

// Patterns whose bound sits clearly below the running maximum cannot change
// (max, argmax) and skip the eigensolver.
constexpr double skip_margin = 1e-12;

struct MaxAcc {
  std::size_t dim = 0;
  double q = 0.0;
  bool threshold_mode = false;  // (norm - alpha^N)/(k-1) over k >= 2
  double alpha_n = 0.0;
  double best = -std::numeric_limits<double>::infinity();
  std::uint64_t best_index = 0;
  std::uint64_t evaluated = 0;
  std::vector<double> work;

  double objective(double norm, std::size_t k) const {
    if (threshold_mode) return (norm - alpha_n) / static_cast<double>(k - 1);
    return norm - static_cast<double>(k) * q;
  }

  void visit(const std::uint16_t*, std::size_t k, const double* sum, std::uint64_t index) {
    ++evaluated;
    double value = 0.0;
    if (threshold_mode && k < 2) return;
    if (k > 0) {
      if (objective(cheap_eigen_bound(sum, dim), k) < best - skip_margin) return;
      value = objective(linalg::symmetric_max_eigenvalue({sum, dim * dim}, dim, work), k);
    }
    if (value > best) {
      best = value;
      best_index = index;
    }
  }

  void merge(const MaxAcc& other) {
    evaluated += other.evaluated;
    if (other.best > best) {
      best = other.best;
      best_index = other.best_index;
    }
  }
};

struct GramAcc {
  const TermTable* terms = nullptr;
  const std::vector<double>* pair_norms = nullptr;  // || sqrt S_l sqrt S_l' || over term indices
  Family family = Family::bb84;
  std::map<std::size_t, GramScanEntry> entries;
  std::vector<double> work;
  std::vector<double> gram;
  std::vector<std::size_t> ids;

  void visit(const std::uint16_t* digits, std::size_t k, const double* sum, std::uint64_t) {
    GramScanEntry& e = entries[k];
    ++e.patterns;
    if (k == 0) return;
    const std::size_t dim = terms->dim;
    const std::size_t n_terms = terms->n * terms->n;
    ids.clear();
    for (std::size_t y = 0; y < terms->n; ++y) {
      if (digits[y] != terms->n) ids.push_back(y * terms->n + digits[y]);
    }
    gram.assign(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) gram[i * k + j] = (*pair_norms)[ids[i] * n_terms + ids[j]];
    }
    const double norm = linalg::symmetric_max_eigenvalue({sum, dim * dim}, dim, work);
    const double bound = linalg::symmetric_max_eigenvalue(gram, k, work);
    e.worst_true_norm = std::max(e.worst_true_norm, norm);
    e.worst_gram_bound = std::max(e.worst_gram_bound, bound);
    if (norm > bound + 1e-9 || bound > corrected_gk_norm(family, terms->n_copies, k) + 1e-9) ++e.violations;
    if (bound > analytic_gk_norm(family, terms->n_copies, k) + 1e-9) ++e.gk_exceeded;
  }

  void merge(const GramAcc& other) {
    for (const auto& [k, o] : other.entries) {
      GramScanEntry& e = entries[k];
      e.patterns += o.patterns;
      e.worst_true_norm = std::max(e.worst_true_norm, o.worst_true_norm);
      e.worst_gram_bound = std::max(e.worst_gram_bound, o.worst_gram_bound);
      e.violations += o.violations;
      e.gk_exceeded += o.gk_exceeded;
    }
  }
};

Operator product_factor(const std::vector<Operator>& factors) { return tensor(std::span<const Operator>(factors)); }

}  // namespace

ClickPattern::ClickPattern(std::size_t n_outcomes, std::vector<int> entries)
    : n_outcomes_(n_outcomes), entries_(std::move(entries)) {
  if (entries_.empty()) throw PreconditionError("click pattern needs at least one setting");
  for (int e : entries_) {
    if (e != no_click && (e < 0 || static_cast<std::size_t>(e) >= n_outcomes_)) {
      throw PreconditionError("click pattern entry out of range");
    }
  }
}

ClickPattern ClickPattern::empty(std::size_t n_copies) {
  const std::size_t n = std::size_t{1} << n_copies;
  return ClickPattern(n, std::vector<int>(n, no_click));
}

ClickPattern ClickPattern::from_index(std::size_t n_settings, std::size_t n_outcomes, std::uint64_t index) {
  std::vector<int> entries(n_settings);
  for (std::size_t y = 0; y < n_settings; ++y) {
    const std::uint64_t digit = index % (n_outcomes + 1);
    index /= n_outcomes + 1;
    entries[y] = digit == n_outcomes ? no_click : static_cast<int>(digit);
  }
  if (index != 0) throw PreconditionError("pattern index out of range");
  return ClickPattern(n_outcomes, std::move(entries));
}

std::size_t ClickPattern::click_count() const {
  return static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](int e) { return e != no_click; }));
}

std::uint64_t ClickPattern::index() const {
  std::uint64_t idx = 0;
  for (std::size_t y = entries_.size(); y-- > 0;) {
    const std::uint64_t digit = entries_[y] == no_click ? n_outcomes_ : static_cast<std::uint64_t>(entries_[y]);
    idx = idx * (n_outcomes_ + 1) + digit;
  }
  return idx;
}

std::string ClickPattern::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t y = 0; y < entries_.size(); ++y) {
    if (y) os << ',';
    if (entries_[y] == no_click) {
      os << '-';
    } else {
      os << entries_[y];
    }
  }
  os << ']';
  return os.str();
}

std::uint64_t pattern_count(std::size_t n_copies) {
  require_scan_copies(n_copies);
  const std::uint64_t n = std::uint64_t{1} << n_copies;
  return ipow(n + 1, n);
}

Operator local_term(Family family, unsigned y, unsigned b) {
  if (y > 1 || b > 1) throw PreconditionError("local term indices are bits");
  if (family == Family::bb84) return alice_qubit_effect(y, b);
  return (alice_qubit_effect(0, b) + alice_qubit_effect(1, b ^ y)) * 0.5;
}

Operator pattern_term(Family family, std::size_t n_copies, std::size_t setting, std::size_t outcome) {
  if (n_copies == 0 || n_copies > max_strategy_copies) throw PreconditionError("n_copies outside the dimension cap");
  const std::size_t n = std::size_t{1} << n_copies;
  if (setting >= n || outcome >= n) throw PreconditionError("pattern term index out of range");
  std::vector<Operator> factors;
  factors.reserve(n_copies);
  for (std::size_t j = 0; j < n_copies; ++j) {
    factors.push_back(local_term(family, static_cast<unsigned>((setting >> j) & 1U), static_cast<unsigned>((outcome >> j) & 1U)));
  }
  return product_factor(factors);
}

Operator c_operator(Family family, const ClickPattern& pattern, double q) {
  const std::size_t n = pattern.n_settings();
  if (n != pattern.n_outcomes() || !std::has_single_bit(n) || n < 2) {
    throw PreconditionError("pattern must have 2^N settings and outcomes");
  }
  const std::size_t n_copies = static_cast<std::size_t>(std::countr_zero(n));
  Operator sum = Operator::zero(n);
  const Operator shift = Operator::identity(n) * q;
  for (std::size_t y = 0; y < n; ++y) {
    if (pattern[y] == ClickPattern::no_click) continue;
    sum = sum + (pattern_term(family, n_copies, y, static_cast<std::size_t>(pattern[y])) - shift);
  }
  return sum;
}

CertificationReport exhaustive_scan(Family family, std::size_t n_copies, double q, const ScanOptions& options) {
  require_scan_copies(n_copies);
  if (!(q >= 0.0)) throw PreconditionError("penalty q must be non-negative");
  const auto start = std::chrono::steady_clock::now();
  const TermTable terms = make_terms(family, n_copies);

  MaxAcc proto;
  proto.dim = terms.dim;
  proto.q = q;
  const MaxAcc acc = run_scan(terms, options, proto);

  CertificationReport r;
  r.family = family;
  r.n_copies = n_copies;
  r.q = q;
  r.max_lambda = acc.best;
  r.argmax_pattern = ClickPattern::from_index(terms.n, terms.n, acc.best_index);
  r.patterns_scanned = acc.evaluated;
  r.patterns_total = pattern_count(n_copies);
  r.bound_rhs = (family == Family::bb84 ? 1.0 : alpha_pow(n_copies)) - q;
  r.verified = r.max_lambda <= r.bound_rhs + 1e-9;
  r.pruned = options.prune;
  r.workers = std::max<std::size_t>(1, options.workers);
  r.wall_time = std::chrono::steady_clock::now() - start;
  return r;
}

double beta_prime_threshold(std::size_t n_copies, const ScanOptions& options) {
  require_scan_copies(n_copies);
  const TermTable terms = make_terms(Family::chsh, n_copies);
  MaxAcc proto;
  proto.dim = terms.dim;
  proto.threshold_mode = true;
  proto.alpha_n = alpha_pow(n_copies);
  return run_scan(terms, options, proto).best;
}

double analytic_gk_norm(Family family, std::size_t n_copies, std::size_t k) {
  if (k == 0) return 0.0;
  const double off = static_cast<double>(k - 1);
  if (family == Family::bb84) return 1.0 + off * inv_sqrt2;
  return alpha_pow(n_copies) + off * alpha_pow(n_copies - 1) * beta;
}

double corrected_gk_norm(Family family, std::size_t n_copies, std::size_t k) {
  if (family == Family::bb84 || k == 0) return analytic_gk_norm(family, n_copies, k);
  return alpha_pow(n_copies) + static_cast<double>(k - 1) * alpha_pow(n_copies - 1) * chsh_pair_overlap;
}

std::map<std::size_t, GramScanEntry> gram_bound_scan(Family family, std::size_t n_copies, double q,
                                                     const ScanOptions& options) {
  require_scan_copies(n_copies);
  const TermTable terms = make_terms(family, n_copies);
  const std::size_t n_terms = terms.n * terms.n;
  std::vector<Operator> roots;
  roots.reserve(n_terms);
  for (std::size_t y = 0; y < terms.n; ++y) {
    for (std::size_t b = 0; b < terms.n; ++b) roots.push_back(sqrt_psd(pattern_term(family, n_copies, y, b)));
  }
  std::vector<double> pair_norms(n_terms * n_terms);
  for (std::size_t i = 0; i < n_terms; ++i) {
    for (std::size_t j = i; j < n_terms; ++j) {
      const double v = operator_norm(roots[i] * roots[j]);
      pair_norms[i * n_terms + j] = v;
      pair_norms[j * n_terms + i] = v;
    }
  }

  GramAcc proto;
  proto.terms = &terms;
  proto.pair_norms = &pair_norms;
  proto.family = family;
  GramAcc acc = run_scan(terms, options, proto);
  for (auto& [k, e] : acc.entries) {
    e.q = q;
    e.paper_gk_bound = analytic_gk_norm(family, n_copies, k);
    e.corrected_gk_bound = corrected_gk_norm(family, n_copies, k);
  }
  return acc.entries;
}

ParentPovm build_jm_attack(Family family, std::size_t n_copies) {
  require_scan_copies(n_copies);
  const auto [alice, bob] = ideal_chsh_measurements(n_copies);
  const MeasurementAssembly& honest = family == Family::bb84 ? alice : bob;
  const std::size_t n = std::size_t{1} << n_copies;
  ParentPovm parent;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<int> entries(n, ClickPattern::no_click);
    entries[0] = static_cast<int>(b);
    parent.effects.push_back({ClickPattern(n, std::move(entries)), honest.effect(0, b)});
  }
  return parent;
}

RoutedCorrelation simulate_jm_model(const RoutedStrategy& strategy, const ParentPovm& parent) {
  const std::size_t ny = strategy.b1.n_settings;
  const std::size_t nb = strategy.b1.outcomes_per_setting;
  const std::size_t dim = strategy.b1.dim();
  if (parent.effects.empty()) throw PreconditionError("incomplete parent POVM: no effects");
  Operator total = Operator::zero(dim);
  for (const ParentEffect& e : parent.effects) {
    if (e.effect.dim() != dim) throw PreconditionError("parent effect dimension mismatch");
    if (e.pattern.n_settings() != ny || e.pattern.n_outcomes() != nb) {
      throw PreconditionError("parent pattern does not match the far device's settings");
    }
    if (!is_psd(e.effect)) throw PreconditionError("parent effect is not positive semidefinite");
    total = total + e.effect;
  }
  if (total.max_abs_diff(Operator::identity(dim)) > 1e-10) {
    throw PreconditionError("incomplete parent POVM: effects do not sum to the identity");
  }

  RoutedCorrelation c;
  c.n_copies = strategy.n_copies;
  c.eta = strategy.eta;
  c.x_count = strategy.alice.n_settings;
  c.a_count = strategy.alice.outcomes_per_setting;
  c.y0_count = strategy.b0.n_settings;
  c.b0_count = strategy.b0.outcomes_per_setting;
  c.y1_count = ny;
  c.b1_clicks = nb;
  c.short_path = born_table(strategy.state, strategy.alice, strategy.b0);
  c.long_path.assign(c.x_count * ny * c.a_count * (nb + 1), 0.0);

  for (std::size_t x = 0; x < c.x_count; ++x) {
    for (std::size_t a = 0; a < c.a_count; ++a) {
      const Operator sigma = steered_operator(strategy.state, strategy.alice.effect(x, a));
      for (const ParentEffect& e : parent.effects) {
        const double p = kernels::real_inner(e.effect.entries(), sigma.entries());
        for (std::size_t y = 0; y < ny; ++y) {
          const int b = e.pattern[y];
          const std::size_t col = b == ClickPattern::no_click ? nb : static_cast<std::size_t>(b);
          c.long_path[((x * ny + y) * c.a_count + a) * (nb + 1) + col] += p;
        }
      }
    }
  }
  return c;
}

}  // namespace routed_bell
