#pragma once

// Partition-indexed integrals.
//
// An Integrand is a product of indicator functions whose arguments are affine
// in the integration variables: x0 (and optionally y0) on [0, 1], and
// x_1..x_D on a symmetric region (by default [-1, 1]). Arguments have the form
//
//     base + b * sum_l c_l x_l        tested against [0, 1]
//
// with integer coefficients c_l. A Type I integrand also carries a delta
// constraint on a linear form in the x_l; resolve_delta() eliminates it. Linear
// constraints of the form chi{L(x) = 0} are decided symbolically: they are
// either identically satisfied (L == 0) or make the integral vanish.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "toepclt/error.hpp"
#include "toepclt/partitions.hpp"
#include "toepclt/rng.hpp"

namespace toepclt {

inline constexpr std::int64_t kDefaultSamplesPerTerm = 1'000'000;

enum class BaseVariable { none, x0, y0 };

/// Interval an indicator tests its argument against.
enum class FormRange {
  unit,    ///< [0, 1]
  region,  ///< the sampling region of the x-variables
};

struct AffineForm {
  BaseVariable base = BaseVariable::x0;
  std::vector<int> coeffs;  ///< coefficient of x_{l+1} at index l
  bool scaled = true;       ///< multiply the coefficient part by b
  FormRange range = FormRange::unit;

  friend bool operator==(const AffineForm&, const AffineForm&) = default;
};

struct Integrand {
  int dim = 0;          ///< number of x-variables x_1..x_D
  bool has_y0 = false;
  double b = 0.0;
  std::vector<AffineForm> indicators;
  std::optional<std::vector<int>> delta;       ///< delta(sum c_l x_l), unscaled
  std::vector<std::vector<int>> hyperplanes;   ///< chi{sum c_l x_l = 0}
  std::vector<int> colors;                     ///< random-matrix label of each x-variable
};

/// Symmetric union B = B+ u B- inside [-1, 1] from which x-variables are drawn.
class SamplingRegion {
 public:
  /// The full interval [-1, 1].
  SamplingRegion() : SamplingRegion(std::vector<std::pair<double, double>>{{0.0, 1.0}}) {}

  /// Builds B from the non-negative half B+ (intervals inside [0, 1]).
  explicit SamplingRegion(std::vector<std::pair<double, double>> positive) {
    require(!positive.empty(), "sampling region must not be empty");
    std::sort(positive.begin(), positive.end());
    double prev_hi = -1.0;
    for (const auto& [lo, hi] : positive) {
      require(lo >= 0.0 && hi <= 1.0 && lo < hi, "region intervals must be non-empty and inside [0, 1]");
      require(lo >= prev_hi, "region intervals must be disjoint");
      prev_hi = hi;
      half_length_ += hi - lo;
    }
    positive_ = std::move(positive);
  }

  [[nodiscard]] double length() const noexcept { return 2.0 * half_length_; }
  [[nodiscard]] bool is_full() const noexcept {
    return positive_.size() == 1 && positive_[0].first == 0.0 && positive_[0].second == 1.0;
  }
  [[nodiscard]] const std::vector<std::pair<double, double>>& positive_part() const noexcept {
    return positive_;
  }

  [[nodiscard]] bool contains(double x) const noexcept {
    const double a = std::abs(x);
    for (const auto& [lo, hi] : positive_)
      if (a >= lo && a <= hi) return true;
    return false;
  }

  /// Inverse CDF of the uniform law on B.
  [[nodiscard]] double sample(double u) const noexcept {
    if (is_full()) return 2.0 * u - 1.0;
    const double sign = u < 0.5 ? -1.0 : 1.0;
    double t = (u < 0.5 ? 0.5 - u : u - 0.5) * 2.0 * half_length_;
    for (const auto& [lo, hi] : positive_) {
      if (t <= hi - lo) return sign * (lo + t);
      t -= hi - lo;
    }
    return sign * positive_.back().second;
  }

 private:
  std::vector<std::pair<double, double>> positive_;
  double half_length_ = 0.0;
};

struct MCEstimate {
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;

  /// Sum of independent estimates; standard errors add in quadrature.
  MCEstimate& operator+=(const MCEstimate& o) {
    value += o.value;
    std_error = std::hypot(std_error, o.std_error);
    samples += o.samples;
    return *this;
  }
  [[nodiscard]] MCEstimate scaled(double c) const {
    return {c * value, std::abs(c) * std_error, samples, seed};
  }
};

// ---------------------------------------------------------------------------
// Integrand construction

namespace detail {

/// One chain of indicator forms: for j in [first, last] the argument is
/// base + direction * b * sum_{i=first..j} step[i] * y_i, where y_i = y_sign[i] x_{pi(i)}.
inline void append_chain(Integrand& f, const Partition& pi, std::span<const int> y_sign,
                         std::span<const int> step, int first, int last, BaseVariable base,
                         int direction) {
  std::vector<int> acc(static_cast<std::size_t>(f.dim), 0);
  for (int i = first; i <= last; ++i) {
    const auto e = static_cast<std::size_t>(i - 1);
    acc[static_cast<std::size_t>(pi.block_of(i))] += direction * step[e] * y_sign[e];
    f.indicators.push_back({base, acc, true, FormRange::unit});
  }
}

inline std::vector<int> linear_sum(const Partition& pi, int dim, std::span<const int> y_sign,
                                   std::span<const int> step, int first, int last) {
  std::vector<int> c(static_cast<std::size_t>(dim), 0);
  for (int i = first; i <= last; ++i) {
    const auto e = static_cast<std::size_t>(i - 1);
    c[static_cast<std::size_t>(pi.block_of(i))] += step[e] * y_sign[e];
  }
  return c;
}

inline bool is_zero(std::span<const int> c) {
  return std::all_of(c.begin(), c.end(), [](int v) { return v == 0; });
}

inline std::vector<int> block_colors(const Partition& pi, const Partition* coloring) {
  std::vector<int> colors(static_cast<std::size_t>(pi.num_blocks()), 0);
  if (coloring) {
    for (int id = 0; id < pi.num_blocks(); ++id)
      colors[static_cast<std::size_t>(id)] =
          coloring->block_of(pi.blocks()[static_cast<std::size_t>(id)].front());
  }
  return colors;
}

}  // namespace detail

/// Moment integrand: chi(x0 + b sum_{i<=j} eps(i) x_{pi(i)}) for j = 1..2k.
[[nodiscard]] inline Integrand build_moment_integrand(const PairPartition& pi, double b) {
  require(b >= 0.0 && b <= 1.0, "b must lie in [0, 1]");
  const auto eps = sign_assignment(pi).signs;
  const std::vector<int> ones(eps.size(), 1);
  Integrand f;
  f.dim = pi.num_blocks();
  f.b = b;
  f.colors.assign(static_cast<std::size_t>(f.dim), 0);
  detail::append_chain(f, pi.partition(), eps, ones, 1, pi.size(), BaseVariable::x0, 1);
  return f;
}

enum class SignVariant { minus, plus };

/// Type I covariance integrand for pi in P2(p, q): x0-chain over the first p
/// positions, y0-chain over the last q (with +b for minus, -b for plus), and
/// delta on sum_{i<=p} y_i.
[[nodiscard]] inline Integrand build_covariance_integrand(const PairPartition& pi, int p, int q,
                                                          SignVariant variant, double b,
                                                          const Partition* coloring = nullptr) {
  require(p >= 1 && q >= 1 && pi.size() == p + q, "partition does not match p + q");
  require(pi.crossings(p) > 0, "Type I integrands need a crossing pair partition");
  const auto eps = sign_assignment(pi).signs;
  const std::vector<int> ones(eps.size(), 1);
  Integrand f;
  f.dim = pi.num_blocks();
  f.has_y0 = true;
  f.b = b;
  f.colors = detail::block_colors(pi.partition(), coloring);
  detail::append_chain(f, pi.partition(), eps, ones, 1, p, BaseVariable::x0, 1);
  detail::append_chain(f, pi.partition(), eps, ones, p + 1, p + q, BaseVariable::y0,
                       variant == SignVariant::minus ? 1 : -1);
  f.delta = detail::linear_sum(pi.partition(), f.dim, eps, ones, 1, p);
  return f;
}

/// Type II covariance integrand for pi in P2,4(p, q), using tau signs; no delta.
[[nodiscard]] inline Integrand build_covariance_integrand(const FourBlockPartition& pi,
                                                          SignVariant variant, double b,
                                                          const Partition* coloring = nullptr) {
  const int p = pi.left(), q = pi.right();
  const auto tau = sign_assignment(pi).signs;
  const std::vector<int> ones(tau.size(), 1);
  Integrand f;
  f.dim = pi.partition().num_blocks();
  f.has_y0 = true;
  f.b = b;
  f.colors = detail::block_colors(pi.partition(), coloring);
  detail::append_chain(f, pi.partition(), tau, ones, 1, p, BaseVariable::x0, 1);
  detail::append_chain(f, pi.partition(), tau, ones, p + 1, p + q, BaseVariable::y0,
                       variant == SignVariant::minus ? 1 : -1);
  return f;
}

namespace detail {
inline std::vector<int> alternating_steps(int m) {
  std::vector<int> s(static_cast<std::size_t>(m));
  for (int i = 1; i <= m; ++i) s[static_cast<std::size_t>(i - 1)] = (i % 2 == 0) ? 1 : -1;
  return s;
}
}  // namespace detail

/// Hankel Type I integrand for pi in P2(2p, 2q) with y_i = x_{pi(i)}: chains
/// x0 - b sum (-1)^i y_i and y0 - b sum (-1)^i y_i, delta on the first
/// alternating sum and a hyperplane on the second.
[[nodiscard]] inline Integrand build_hankel_integrand(const PairPartition& pi, int left, int right,
                                                      double b) {
  require(left >= 1 && right >= 1 && pi.size() == left + right, "partition does not match split");
  require(pi.crossings(left) > 0, "Type I integrands need a crossing pair partition");
  const std::vector<int> ones(static_cast<std::size_t>(pi.size()), 1);
  const auto alt = detail::alternating_steps(pi.size());
  Integrand f;
  f.dim = pi.num_blocks();
  f.has_y0 = true;
  f.b = b;
  f.colors.assign(static_cast<std::size_t>(f.dim), 0);
  detail::append_chain(f, pi.partition(), ones, alt, 1, left, BaseVariable::x0, -1);
  detail::append_chain(f, pi.partition(), ones, alt, left + 1, left + right, BaseVariable::y0, -1);
  f.delta = detail::linear_sum(pi.partition(), f.dim, ones, alt, 1, left);
  f.hyperplanes.push_back(detail::linear_sum(pi.partition(), f.dim, ones, alt, left + 1, left + right));
  return f;
}

/// Hankel Type II integrand for pi in P2,4(2p, 2q): both alternating sums are
/// hyperplane constraints.
[[nodiscard]] inline Integrand build_hankel_integrand(const FourBlockPartition& pi, double b) {
  const int left = pi.left(), right = pi.right();
  const int m = left + right;
  const std::vector<int> ones(static_cast<std::size_t>(m), 1);
  const auto alt = detail::alternating_steps(m);
  Integrand f;
  f.dim = pi.partition().num_blocks();
  f.has_y0 = true;
  f.b = b;
  f.colors.assign(static_cast<std::size_t>(f.dim), 0);
  detail::append_chain(f, pi.partition(), ones, alt, 1, left, BaseVariable::x0, -1);
  detail::append_chain(f, pi.partition(), ones, alt, left + 1, m, BaseVariable::y0, -1);
  f.hyperplanes.push_back(detail::linear_sum(pi.partition(), f.dim, ones, alt, 1, left));
  f.hyperplanes.push_back(detail::linear_sum(pi.partition(), f.dim, ones, alt, left + 1, m));
  return f;
}

/// Sign (-1)^floor((l-1)/s) of position l in the Wishart-type trace word.
[[nodiscard]] inline int wishart_sign(int l, int s) { return ((l - 1) / s) % 2 == 0 ? 1 : -1; }

/// Wishart-type moment integrand for pi in P2(2ps), y_i = x_{pi(i)}.
[[nodiscard]] inline Integrand build_wishart_integrand(const PairPartition& pi, int s, double b) {
  require(s >= 1 && pi.size() % (2 * s) == 0, "partition size must be a multiple of 2s");
  const std::vector<int> ones(static_cast<std::size_t>(pi.size()), 1);
  std::vector<int> steps(static_cast<std::size_t>(pi.size()));
  for (int l = 1; l <= pi.size(); ++l) steps[static_cast<std::size_t>(l - 1)] = wishart_sign(l, s);
  Integrand f;
  f.dim = pi.num_blocks();
  f.b = b;
  f.colors.assign(static_cast<std::size_t>(f.dim), 0);
  detail::append_chain(f, pi.partition(), ones, steps, 1, pi.size(), BaseVariable::x0, 1);
  f.hyperplanes.push_back(detail::linear_sum(pi.partition(), f.dim, ones, steps, 1, pi.size()));
  return f;
}

/// Eliminates the delta constraint: the lowest-index variable with coefficient
/// +-1 is expressed through the others in every form, dropped, and replaced by
/// an indicator keeping the substituted value inside the sampling region.
[[nodiscard]] inline Integrand resolve_delta(const Integrand& f) {
  require(f.delta.has_value(), "integrand has no delta constraint");
  const auto& d = *f.delta;
  require(!detail::is_zero(d), "delta form is identically zero");
  int v = -1;
  for (int l = 0; l < f.dim; ++l)
    if (d[static_cast<std::size_t>(l)] == 1 || d[static_cast<std::size_t>(l)] == -1) {
      v = l;
      break;
    }
  require(v >= 0, "delta form has no unit coefficient");
  const int cv = d[static_cast<std::size_t>(v)];

  // x_v = -cv * sum_{l != v} d_l x_l
  auto substitute = [&](const std::vector<int>& c) {
    std::vector<int> out;
    out.reserve(c.size() - 1);
    const int a = c[static_cast<std::size_t>(v)];
    for (int l = 0; l < f.dim; ++l) {
      if (l == v) continue;
      out.push_back(c[static_cast<std::size_t>(l)] - a * cv * d[static_cast<std::size_t>(l)]);
    }
    return out;
  };

  Integrand g;
  g.dim = f.dim - 1;
  g.has_y0 = f.has_y0;
  g.b = f.b;
  for (const auto& form : f.indicators) g.indicators.push_back({form.base, substitute(form.coeffs), form.scaled, form.range});
  for (const auto& h : f.hyperplanes) g.hyperplanes.push_back(substitute(h));
  std::vector<int> unit(static_cast<std::size_t>(f.dim), 0);
  unit[static_cast<std::size_t>(v)] = 1;
  g.indicators.push_back({BaseVariable::none, substitute(unit), false, FormRange::region});
  for (int l = 0; l < f.dim; ++l)
    if (l != v && !f.colors.empty()) g.colors.push_back(f.colors[static_cast<std::size_t>(l)]);
  return g;
}

/// Plain Monte Carlo over [0,1] (x0, y0) and the region (x_l). The integrand is
/// a product of indicators, so each sample contributes 0 or the box volume.
[[nodiscard]] inline MCEstimate mc_evaluate(const Integrand& f, std::int64_t samples, std::uint64_t seed,
                                            const SamplingRegion& region = {}) {
  require(samples > 0, "sample count must be positive");
  require(!f.delta.has_value(), "resolve the delta constraint before evaluation");
  for (const auto& h : f.hyperplanes)
    if (!detail::is_zero(h)) return {0.0, 0.0, samples, seed};

  const int D = f.dim;
  const double volume = std::pow(region.length(), D);
  const auto nf = f.indicators.size();
  std::vector<double> coef(nf * static_cast<std::size_t>(D));
  std::vector<double> scale(nf);
  for (std::size_t k = 0; k < nf; ++k) {
    const auto& form = f.indicators[k];
    scale[k] = form.scaled ? f.b : 1.0;
    for (int l = 0; l < D; ++l)
      coef[k * static_cast<std::size_t>(D) + static_cast<std::size_t>(l)] = form.coeffs[static_cast<std::size_t>(l)];
  }

  SequentialStream rng(seed);
  std::vector<double> x(static_cast<std::size_t>(D));
  std::int64_t hits = 0;
  for (std::int64_t s = 0; s < samples; ++s) {
    const double x0 = rng.next_uniform();
    const double y0 = f.has_y0 ? rng.next_uniform() : 0.0;
    for (auto& xi : x) xi = region.sample(rng.next_uniform());
    bool inside = true;
    for (std::size_t k = 0; k < nf && inside; ++k) {
      const auto& form = f.indicators[k];
      double arg = 0.0;
      const double* c = coef.data() + k * static_cast<std::size_t>(D);
      for (int l = 0; l < D; ++l) arg += c[l] * x[static_cast<std::size_t>(l)];
      arg *= scale[k];
      if (form.base == BaseVariable::x0) arg += x0;
      else if (form.base == BaseVariable::y0) arg += y0;
      inside = form.range == FormRange::unit ? (arg >= 0.0 && arg <= 1.0) : region.contains(arg);
    }
    hits += inside ? 1 : 0;
  }
  const double N = static_cast<double>(samples);
  const double h = static_cast<double>(hits);
  const double mean = volume * h / N;
  const double var = samples > 1 ? volume * volume * h * (N - h) / (N * (N - 1.0)) : 0.0;
  return {mean, std::sqrt(var / N), samples, seed};
}

/// Evaluates an integrand without delta as a grid sum at matrix size n and
/// band `band` (so b = band / n): i over [n] for each base variable and
/// j_l over [-band, band] with half weight at the two ends.
[[nodiscard]] inline double riemann_sum(const Integrand& f, int n, int band) {
  require(!f.delta.has_value(), "grid sums need an integrand without delta");
  require(n >= 1 && band >= 1, "grid sizes must be positive");
  require(std::abs(f.b - static_cast<double>(band) / n) < 1e-9, "integrand b must equal band / n");
  for (const auto& form : f.indicators)
    require(form.scaled && form.range == FormRange::unit && form.base != BaseVariable::none,
            "grid sums support chain indicators only");
  for (const auto& h : f.hyperplanes)
    if (!detail::is_zero(h)) return 0.0;

  const int D = f.dim;
  std::vector<int> j(static_cast<std::size_t>(D), -band);
  double total = 0.0;
  while (true) {
    double w = 1.0;
    for (int v : j)
      if (v == band || v == -band) w *= 0.5;
    // Admissible i for each base: 1 <= i + S_f <= n for all forms on that base.
    std::int64_t count = 1;
    for (BaseVariable base : {BaseVariable::x0, BaseVariable::y0}) {
      if (base == BaseVariable::y0 && !f.has_y0) continue;
      std::int64_t lo = 1, hi = n;
      for (const auto& form : f.indicators) {
        if (form.base != base) continue;
        std::int64_t S = 0;
        for (int l = 0; l < D; ++l) S += static_cast<std::int64_t>(form.coeffs[static_cast<std::size_t>(l)]) * j[static_cast<std::size_t>(l)];
        lo = std::max(lo, 1 - S);
        hi = std::min(hi, static_cast<std::int64_t>(n) - S);
      }
      count *= std::max<std::int64_t>(0, hi - lo + 1);
    }
    total += w * static_cast<double>(count);
    int l = 0;
    while (l < D && j[static_cast<std::size_t>(l)] == band) j[static_cast<std::size_t>(l++)] = -band;
    if (l == D) break;
    ++j[static_cast<std::size_t>(l)];
  }
  const int bases = f.has_y0 ? 2 : 1;
  return total / std::pow(static_cast<double>(n), bases) / std::pow(static_cast<double>(band), D);
}

// ---------------------------------------------------------------------------
// Limit quantities

/// Sum over P2(2k) of the moment integrals; with a restricted region the
/// x-variables range over B instead of [-1, 1].
[[nodiscard]] inline MCEstimate limit_moment(int k, double b, std::int64_t samples, std::uint64_t seed,
                                             const SamplingRegion& region = {}) {
  require(k >= 1, "k must be positive");
  MCEstimate total{0.0, 0.0, 0, seed};
  const auto pairs = enumerate_pair_partitions(2 * k);
  for (std::size_t t = 0; t < pairs.size(); ++t)
    total += mc_evaluate(build_moment_integrand(pairs[t], b), samples, derive_key(seed, {1, t}), region);
  return total;
}

enum class CovarianceFlavor { real, hermitian, hankel };

/// Which Type I pairings enter the covariance.
enum class TypeIRule {
  /// Drop pairings whose balance constraint pins a variable to zero or forces
  /// two pair variables onto the same random entry; those configurations
  /// carry fourth-moment weight and are counted by the Type II sum.
  exclude_coincident,
  /// Every crossing pairing, exactly as the bare formula reads.
  literal,
};

struct CovarianceQuery {
  int p = 2, q = 2;
  double b = 1.0;
  double kappa = 3.0;
  CovarianceFlavor flavor = CovarianceFlavor::real;
  TypeIRule rule = TypeIRule::exclude_coincident;
  std::optional<Partition> coloring;  ///< multi-matrix word labels over [p+q]
  std::int64_t samples = kDefaultSamplesPerTerm;
  std::uint64_t seed = 0;
};

struct CovarianceEstimate {
  MCEstimate type_one;   ///< sum of Type I integrals
  MCEstimate type_two;   ///< sum of Type II integrals (before the kappa - 1 weight)
  int type_one_terms = 0;
  int type_one_excluded = 0;
  int type_two_terms = 0;
  double kappa = 3.0;

  [[nodiscard]] MCEstimate total() const { return total(kappa); }
  [[nodiscard]] MCEstimate total(double k) const {
    MCEstimate t = type_one;
    t += type_two.scaled(k - 1.0);
    return t;
  }
};

/// Whether a Type I delta constraint pins the integral to configurations that
/// are not pair-distinct for this ensemble.
[[nodiscard]] inline bool forces_coincidence(std::span<const int> delta, std::span<const int> colors,
                                             CovarianceFlavor flavor) {
  std::vector<int> support;
  for (std::size_t l = 0; l < delta.size(); ++l)
    if (delta[l] != 0) support.push_back(static_cast<int>(l));
  if (support.size() == 1) return true;
  if (support.size() != 2) return false;
  const auto a = static_cast<std::size_t>(support[0]), c = static_cast<std::size_t>(support[1]);
  const int color_a = colors.empty() ? 0 : colors[a];
  const int color_c = colors.empty() ? 0 : colors[c];
  if (color_a != color_c) return false;
  if (flavor == CovarianceFlavor::hankel) {
    // x_a = -(d_c / d_a) x_c; entries a_j and a_{-j} are independent here.
    return -delta[c] * delta[a] == 1;
  }
  return true;  // a_j and a_{-j} are the same (or conjugate) entry
}

/// Limiting covariance of the centered trace statistics of powers p and q
/// (for the Hankel flavor, of powers 2p and 2q).
[[nodiscard]] inline CovarianceEstimate limit_covariance(const CovarianceQuery& query) {
  CovarianceEstimate est;
  est.kappa = query.kappa;
  est.type_one.seed = est.type_two.seed = query.seed;
  const bool hankel = query.flavor == CovarianceFlavor::hankel;
  require(hankel ? (query.p >= 1 && query.q >= 1) : (query.p >= 2 && query.q >= 2),
          "covariance needs p, q >= 2 (>= 1 for Hankel)");
  const int left = hankel ? 2 * query.p : query.p;
  const int right = hankel ? 2 * query.q : query.q;
  if ((left + right) % 2 != 0) return est;  // odd p + q: exactly zero
  if (query.coloring) require(query.coloring->size() == left + right, "coloring must cover [p+q]");

  auto one = enumerate_crossing_pair_partitions(left, right);
  auto two = enumerate_p24(left, right);
  if (query.coloring) {
    one = restrict_by_color(one, *query.coloring);
    two = restrict_by_color(two, *query.coloring);
  }
  const Partition* coloring = query.coloring ? &*query.coloring : nullptr;

  for (std::size_t t = 0; t < one.size(); ++t) {
    const auto& pi = one[t];
    std::vector<Integrand> terms;
    if (hankel) {
      terms.push_back(build_hankel_integrand(pi, left, right, query.b));
      if (coloring) terms.back().colors = detail::block_colors(pi.partition(), coloring);
    } else {
      terms.push_back(build_covariance_integrand(pi, left, right, SignVariant::minus, query.b, coloring));
      if (query.flavor == CovarianceFlavor::real)
        terms.push_back(build_covariance_integrand(pi, left, right, SignVariant::plus, query.b, coloring));
    }
    if (query.rule == TypeIRule::exclude_coincident &&
        forces_coincidence(*terms.front().delta, terms.front().colors, query.flavor)) {
      ++est.type_one_excluded;
      continue;
    }
    ++est.type_one_terms;
    for (std::size_t v = 0; v < terms.size(); ++v)
      est.type_one += mc_evaluate(resolve_delta(terms[v]), query.samples, derive_key(query.seed, {2, t, v}));
  }
  for (std::size_t t = 0; t < two.size(); ++t) {
    const auto& pi = two[t];
    ++est.type_two_terms;
    if (hankel) {
      est.type_two += mc_evaluate(build_hankel_integrand(pi, query.b), query.samples, derive_key(query.seed, {3, t, 0}));
    } else {
      for (auto variant : {SignVariant::minus, SignVariant::plus}) {
        const auto v = static_cast<std::uint64_t>(variant);
        est.type_two += mc_evaluate(build_covariance_integrand(pi, variant, query.b, coloring), query.samples,
                                    derive_key(query.seed, {3, t, v}));
      }
    }
  }
  return est;
}

/// sigma_Q^2 = sum_{i,j} q_i q_j sigma_{i,j}; coeffs[d] multiplies the power d
/// (for the Hankel flavor, the power 2d). One covariance estimate per unordered pair.
[[nodiscard]] inline MCEstimate limit_variance_polynomial(std::span<const double> coeffs,
                                                          const CovarianceQuery& base) {
  const int min_degree = base.flavor == CovarianceFlavor::hankel ? 1 : 2;
  bool any = false;
  for (std::size_t d = 0; d < coeffs.size(); ++d) {
    if (coeffs[d] == 0.0) continue;
    require(static_cast<int>(d) >= min_degree, "polynomial terms below the minimum degree are not allowed");
    any = true;
  }
  require(any, "polynomial coefficients are all zero");
  MCEstimate total{0.0, 0.0, 0, base.seed};
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    for (std::size_t j = i; j < coeffs.size(); ++j) {
      if (coeffs[i] == 0.0 || coeffs[j] == 0.0) continue;
      CovarianceQuery q = base;
      q.p = static_cast<int>(i);
      q.q = static_cast<int>(j);
      q.seed = derive_key(base.seed, {4, i, j});
      const double mult = (i == j ? 1.0 : 2.0) * coeffs[i] * coeffs[j];
      total += limit_covariance(q).total().scaled(mult);
    }
  }
  return total;
}

struct WishartMoment {
  MCEstimate value;
  int surviving_partitions = 0;
};

/// Limit of E[(1/n) tr (W^(s))^p] as a sum over P2(2ps); partitions whose
/// alternating-sign constraint is not identically satisfied drop out symbolically.
[[nodiscard]] inline WishartMoment wishart_limit_moment(int p, int s, double b, std::int64_t samples,
                                                        std::uint64_t seed) {
  require(p >= 1 && s >= 1, "p and s must be positive");
  require(b >= 0.0 && b <= 1.0, "b must lie in [0, 1]");
  WishartMoment out;
  out.value.seed = seed;
  const auto pairs = enumerate_pair_partitions(2 * p * s);
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const auto f = build_wishart_integrand(pairs[t], s, b);
    if (!detail::is_zero(f.hyperplanes.front())) continue;
    ++out.surviving_partitions;
    out.value += mc_evaluate(f, samples, derive_key(seed, {5, t}));
  }
  return out;
}

}  // namespace toepclt
