#pragma once

// Trace statistics of sampled ensembles, their summaries, and the exact
// combinatorial trace sums used as oracles.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "toepclt/ensembles.hpp"
#include "toepclt/error.hpp"
#include "toepclt/rng.hpp"

namespace toepclt {

// ---------------------------------------------------------------------------
// Traces

/// tr(Op^p) through matrix-vector products: sum_i <Op^a e_i, Op^b e_i> with
/// a = floor(p/2), b = ceil(p/2); every single-operator kind is self-adjoint.
[[nodiscard]] inline double trace_power(const StructuredOperator& op, int p) {
  require(p >= 1, "power must be positive");
  const int n = op.n();
  const int a = p / 2, b = p - a;
  std::vector<cplx> u(static_cast<std::size_t>(n)), v(u.size()), tmp(u.size());
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::fill(u.begin(), u.end(), cplx{});
    u[static_cast<std::size_t>(i)] = 1.0;
    for (int k = 0; k < a; ++k) {
      op.apply(u, tmp);
      std::swap(u, tmp);
    }
    v = u;
    for (int k = a; k < b; ++k) {
      op.apply(v, tmp);
      std::swap(v, tmp);
    }
    cplx acc{};
    for (int r = 0; r < n; ++r) acc += std::conj(u[static_cast<std::size_t>(r)]) * v[static_cast<std::size_t>(r)];
    total += acc.real();
  }
  return total;
}

/// tr(T_{w_1} ... T_{w_p}) for a word of 1-based factor labels, by matvecs.
[[nodiscard]] inline double trace_word(const StructuredOperator& op, std::span<const int> word) {
  require(!word.empty(), "empty word");
  for (int w : word) require(w >= 1 && w <= op.spec().num_factors(), "word letter out of range");
  const int n = op.n();
  std::vector<cplx> v(static_cast<std::size_t>(n)), tmp(v.size());
  cplx total{};
  for (int i = 0; i < n; ++i) {
    std::fill(v.begin(), v.end(), cplx{});
    v[static_cast<std::size_t>(i)] = 1.0;
    for (auto it = word.rbegin(); it != word.rend(); ++it) {
      op.factor(*it - 1).apply(v, tmp);
      std::swap(v, tmp);
    }
    total += v[static_cast<std::size_t>(i)];
  }
  return total.real();
}

/// tr(F_1 ... F_m) from dense halves: the two half-products are built with the
/// Toeplitz product recurrence and contracted as sum_{i,k} L_{ik} R_{ki}.
[[nodiscard]] inline cplx trace_of_product(const std::vector<const ToeplitzFactor*>& word) {
  require(!word.empty(), "empty word");
  const int n = word.front()->n();
  if (word.size() == 1) return static_cast<double>(n) * word.front()->at(0);
  auto build = [](std::span<const ToeplitzFactor* const> w) {
    if (w.size() == 1) return w[0]->dense();
    DenseMatrix M = toeplitz_product(*w[0], *w[1]);
    for (std::size_t k = 2; k < w.size(); ++k) M = multiply(M, *w[k]);
    return M;
  };
  const std::size_t half = word.size() / 2;
  const std::span<const ToeplitzFactor* const> all(word);
  const DenseMatrix L = build(all.first(half));
  const bool same = word.size() % 2 == 0 && std::equal(word.begin(), word.begin() + static_cast<std::ptrdiff_t>(half),
                                                       word.begin() + static_cast<std::ptrdiff_t>(half));
  const DenseMatrix Rm = same ? DenseMatrix{} : build(all.subspan(half));
  const DenseMatrix& R = same ? L : Rm;
  cplx acc{};
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) acc += L(i, k) * R(k, i);
  return acc;
}

/// tr(Op^p) by the dense-half engine where the operator is a word in
/// Toeplitz factors; odd Hankel powers fall back to trace_power.
[[nodiscard]] inline double fast_trace_power(const StructuredOperator& op, int p) {
  require(p >= 1, "power must be positive");
  const auto& sp = op.spec();
  const ToeplitzFactor& T = op.factor(0);
  std::vector<const ToeplitzFactor*> word;
  ToeplitzFactor adj;
  if (sp.kind == EnsembleKind::wishart || sp.is_hankel()) adj = T.adjoint();
  if (sp.kind == EnsembleKind::wishart) {
    for (int k = 0; k < p; ++k) {
      for (int i = 0; i < sp.s; ++i) word.push_back(&adj);
      for (int i = 0; i < sp.s; ++i) word.push_back(&T);
    }
  } else if (sp.is_hankel()) {
    if (p % 2 == 1) return trace_power(op, p);
    for (int k = 0; k < p / 2; ++k) {  // H^2 = T^T T
      word.push_back(&adj);
      word.push_back(&T);
    }
  } else {
    require(sp.num_factors() == 1, "multi-matrix ensembles need a word");
    word.assign(static_cast<std::size_t>(p), &T);
  }
  return trace_of_product(word).real();
}

[[nodiscard]] inline double fast_trace_word(const StructuredOperator& op, std::span<const int> word) {
  std::vector<const ToeplitzFactor*> w;
  for (int l : word) {
    require(l >= 1 && l <= op.spec().num_factors(), "word letter out of range");
    w.push_back(&op.factor(l - 1));
  }
  return trace_of_product(w).real();
}

// ---------------------------------------------------------------------------
// Combinatorial trace sums

namespace detail {

/// sum_i sum_J prod_l coef_l(j_l) prod_k chi_[1,n](i + sum_{m<=k} step_l j_l),
/// with the closing condition sum_l step_l j_l = target(i).
inline cplx walk_sum(int n, int width, const std::vector<std::function<cplx(int)>>& coef,
                     const std::vector<int>& step, const std::function<int(int)>& target) {
  const int m = static_cast<int>(coef.size());
  cplx total{};
  std::function<void(int, int, int, cplx, int)> rec = [&](int l, int pos, int sum, cplx prod, int i) {
    if (l == m) {
      if (sum == target(i)) total += prod;
      return;
    }
    for (int j = -width; j <= width; ++j) {
      const int next = pos + step[static_cast<std::size_t>(l)] * j;
      if (next < 1 || next > n) continue;
      const cplx c = coef[static_cast<std::size_t>(l)](j);
      if (c == cplx{}) continue;
      rec(l + 1, next, sum + step[static_cast<std::size_t>(l)] * j, prod * c, i);
    }
  };
  for (int i = 1; i <= n; ++i) rec(0, i, 0, cplx{1.0}, i);
  return total;
}

inline void check_oracle_size(const StructuredOperator& op, int letters) {
  require(op.n() <= 12, "oracle guard: n must be at most 12");
  require(op.spec().band <= 4, "oracle guard: band must be at most 4");
  require(letters <= 8, "oracle guard: at most 8 factors");
}

}  // namespace detail

/// Exact trace as the balanced-vector sum over J: for Toeplitz kinds
/// sum_i sum_J a_J I_J delta(sum j), for Hankel the alternating version with
/// the target 2i - 1 - n for odd p, for Wishart the block-alternating version.
[[nodiscard]] inline double combinatorial_trace_oracle(const StructuredOperator& op, int p) {
  require(p >= 1, "power must be positive");
  const auto& sp = op.spec();
  require(sp.kind != EnsembleKind::multi_toeplitz || sp.r == 1, "multi-matrix ensembles need a word");
  const int n = op.n();
  const ToeplitzFactor& T = op.factor(0);
  std::vector<std::function<cplx(int)>> coef;
  std::vector<int> step;
  std::function<int(int)> target = [](int) { return 0; };
  if (sp.kind == EnsembleKind::wishart) {
    const int m = 2 * p * sp.s;
    detail::check_oracle_size(op, m);
    for (int l = 1; l <= m; ++l) {
      const bool plain = ((l - 1) / sp.s) % 2 == 0;
      step.push_back(plain ? 1 : -1);
      if (plain) coef.emplace_back([&T](int j) { return T.at(j); });
      else coef.emplace_back([&T](int j) { return std::conj(T.at(j)); });
    }
  } else if (sp.is_hankel()) {
    detail::check_oracle_size(op, p);
    for (int l = 1; l <= p; ++l) {
      step.push_back(l % 2 == 0 ? -1 : 1);  // i - sum (-1)^q j_q
      coef.emplace_back([&T](int j) { return T.at(j); });
    }
    // sum_q (-1)^q j_q = 0 (p even) or 2i - 1 - n (p odd); the walk sums -(-1)^q j_q.
    if (p % 2 == 1) target = [n](int i) { return -(2 * i - 1 - n); };
  } else {
    detail::check_oracle_size(op, p);
    for (int l = 1; l <= p; ++l) {
      step.push_back(1);
      coef.emplace_back([&T](int j) { return T.at(j); });
    }
  }
  return detail::walk_sum(n, sp.band, coef, step, target).real();
}

/// Word version for independent Toeplitz factors.
[[nodiscard]] inline double combinatorial_trace_oracle(const StructuredOperator& op, std::span<const int> word) {
  detail::check_oracle_size(op, static_cast<int>(word.size()));
  std::vector<std::function<cplx(int)>> coef;
  std::vector<int> step(word.size(), 1);
  for (int l : word) {
    require(l >= 1 && l <= op.spec().num_factors(), "word letter out of range");
    const ToeplitzFactor* F = &op.factor(l - 1);
    coef.emplace_back([F](int j) { return F->at(j); });
  }
  return detail::walk_sum(op.n(), op.spec().band, coef, step, [](int) { return 0; }).real();
}

// ---------------------------------------------------------------------------
// Replicated statistics

enum class StatisticKind {
  omega_p,    ///< (sqrt(b_n)/n) tr(A^p),   A = T / sqrt(b_n)
  omega_Q,    ///< (sqrt(b_n)/n) tr Q(A)
  zeta_p,     ///< (sqrt(b_n)/n) tr(A^{2p}), A = H / sqrt(b_n)
  zeta_Q,     ///< (sqrt(b_n)/n) tr Q(A^2)
  wishart_p,  ///< (sqrt(b_n)/n) tr(W^p),   W = T*^s T^s / b_n^s
  word,       ///< (sqrt(b_n)/n) b_n^{-p/2} tr(T_{i_1} ... T_{i_p})
  moment,     ///< (1/n) tr(A^p), not centred
};

inline std::string to_string(StatisticKind k) {
  switch (k) {
    case StatisticKind::omega_p: return "omega_p";
    case StatisticKind::omega_Q: return "omega_Q";
    case StatisticKind::zeta_p: return "zeta_p";
    case StatisticKind::zeta_Q: return "zeta_Q";
    case StatisticKind::wishart_p: return "wishart_p";
    case StatisticKind::word: return "word";
    case StatisticKind::moment: return "moment";
  }
  return "?";
}

inline StatisticKind statistic_kind_from_string(const std::string& s) {
  for (auto k : {StatisticKind::omega_p, StatisticKind::omega_Q, StatisticKind::zeta_p, StatisticKind::zeta_Q,
                 StatisticKind::wishart_p, StatisticKind::word, StatisticKind::moment})
    if (to_string(k) == s) return k;
  throw ContractViolation("unknown statistic kind: " + s);
}

struct StatisticRequest {
  StatisticKind kind = StatisticKind::omega_p;
  int p = 2;
  std::vector<double> coeffs;  ///< coeffs[d] multiplies the power d (Q statistics)
  std::vector<int> word;       ///< 1-based factor labels
};

struct TraceStatistic {
  StatisticRequest request;
  EnsembleSpec spec;
  std::uint64_t seed = 0;
  std::vector<double> replicates;  ///< centred by the replicate mean (except moments)
  double raw_mean = 0.0;           ///< mean before centring
};

inline constexpr int kMinReplicates = 100;

namespace detail {

inline void validate_request(const EnsembleSpec& spec, const StatisticRequest& q) {
  switch (q.kind) {
    case StatisticKind::omega_p:
      require(q.p >= 2, "omega_p needs p >= 2");
      require(spec.num_factors() == 1 && spec.kind != EnsembleKind::wishart, "omega_p needs a single Toeplitz or Hankel operator");
      break;
    case StatisticKind::omega_Q:
    case StatisticKind::zeta_Q: {
      require(!q.coeffs.empty(), "polynomial statistics need coefficients");
      bool any = false;
      for (double c : q.coeffs) any = any || c != 0.0;
      require(any, "polynomial coefficients are all zero");
      if (q.kind == StatisticKind::omega_Q) {
        require(q.coeffs.size() >= 3, "omega_Q needs degree >= 2");
        require(spec.num_factors() == 1 && spec.kind != EnsembleKind::wishart, "omega_Q needs a single Toeplitz or Hankel operator");
      } else {
        require(spec.is_hankel(), "zeta_Q needs a Hankel ensemble");
      }
      break;
    }
    case StatisticKind::zeta_p:
      require(q.p >= 1, "zeta_p needs p >= 1");
      require(spec.is_hankel(), "zeta_p needs a Hankel ensemble");
      break;
    case StatisticKind::wishart_p:
      require(q.p >= 1, "wishart_p needs p >= 1");
      require(spec.kind == EnsembleKind::wishart, "wishart_p needs a Wishart ensemble");
      break;
    case StatisticKind::word:
      require(spec.kind == EnsembleKind::multi_toeplitz, "word statistics need a multi-matrix ensemble");
      require(q.word.size() >= 2, "words need at least two letters");
      for (int l : q.word) require(l >= 1 && l <= spec.r, "unknown word letter");
      break;
    case StatisticKind::moment:
      require(q.p >= 1, "moment needs p >= 1");
      require(spec.num_factors() == 1, "moment needs a single operator");
      break;
  }
}

inline double evaluate(const StructuredOperator& op, const StatisticRequest& q) {
  const double bn = op.spec().band, n = op.n();
  const double pre = std::sqrt(bn) / n;
  switch (q.kind) {
    case StatisticKind::omega_p: return pre * std::pow(bn, -q.p / 2.0) * fast_trace_power(op, q.p);
    case StatisticKind::omega_Q: {
      double s = 0;
      for (std::size_t d = 1; d < q.coeffs.size(); ++d)
        if (q.coeffs[d] != 0.0) s += q.coeffs[d] * std::pow(bn, -static_cast<double>(d) / 2.0) * fast_trace_power(op, static_cast<int>(d));
      return pre * s;
    }
    case StatisticKind::zeta_p: return pre * std::pow(bn, -q.p) * fast_trace_power(op, 2 * q.p);
    case StatisticKind::zeta_Q: {
      double s = 0;
      for (std::size_t d = 1; d < q.coeffs.size(); ++d)
        if (q.coeffs[d] != 0.0) s += q.coeffs[d] * std::pow(bn, -static_cast<double>(d)) * fast_trace_power(op, 2 * static_cast<int>(d));
      return pre * s;
    }
    case StatisticKind::wishart_p:
      return pre * std::pow(bn, -static_cast<double>(q.p * op.spec().s)) * fast_trace_power(op, q.p);
    case StatisticKind::word:
      return pre * std::pow(bn, -static_cast<double>(q.word.size()) / 2.0) * fast_trace_word(op, q.word);
    case StatisticKind::moment: {
      // W^(s) has degree 2s in the coefficients, hence b_n^{-ps}
      const double deg = op.spec().kind == EnsembleKind::wishart ? q.p * op.spec().s : q.p / 2.0;
      return std::pow(bn, -deg) * fast_trace_power(op, q.p) / n;
    }
  }
  return 0.0;
}

}  // namespace detail

/// Seed of the operator sampled for replicate r.
[[nodiscard]] inline std::uint64_t replicate_seed(std::uint64_t master, std::int64_t r) {
  return derive_key(master, {0x5EED, static_cast<std::uint64_t>(r)});
}

/// Several statistics evaluated on the same replicate operators.
[[nodiscard]] inline std::vector<TraceStatistic> run_statistics(const EnsembleSpec& spec,
                                                                const std::vector<StatisticRequest>& requests,
                                                                int replicates, std::uint64_t master_seed) {
  spec.validate();
  require(!requests.empty(), "no statistics requested");
  require(replicates >= kMinReplicates, "at least 100 replicates are required");
  for (const auto& q : requests) detail::validate_request(spec, q);
  std::vector<TraceStatistic> out(requests.size());
  for (std::size_t k = 0; k < requests.size(); ++k) {
    out[k].request = requests[k];
    out[k].spec = spec;
    out[k].seed = master_seed;
    out[k].replicates.resize(static_cast<std::size_t>(replicates));
  }
  for (int r = 0; r < replicates; ++r) {
    const auto op = sample(spec, replicate_seed(master_seed, r));
    for (std::size_t k = 0; k < requests.size(); ++k)
      out[k].replicates[static_cast<std::size_t>(r)] = detail::evaluate(op, requests[k]);
  }
  for (auto& ts : out) {
    double mean = 0;
    for (double v : ts.replicates) mean += v;
    mean /= replicates;
    ts.raw_mean = mean;
    if (ts.request.kind != StatisticKind::moment)
      for (double& v : ts.replicates) v -= mean;
  }
  return out;
}

[[nodiscard]] inline TraceStatistic run_statistic(const EnsembleSpec& spec, const StatisticRequest& request,
                                                  int replicates, std::uint64_t master_seed) {
  return std::move(run_statistics(spec, {request}, replicates, master_seed).front());
}

// ---------------------------------------------------------------------------
// Balanced sums

enum class BalanceKind { toeplitz, hankel };

namespace detail {

inline std::vector<std::vector<int>> set_partitions(int m) {
  std::vector<std::vector<int>> out;
  std::vector<int> a(static_cast<std::size_t>(m), 0);
  std::function<void(int, int)> rec = [&](int i, int top) {
    if (i == m) {
      out.push_back(a);
      return;
    }
    for (int v = 0; v <= top + 1; ++v) {
      a[static_cast<std::size_t>(i)] = v;
      rec(i + 1, std::max(top, v));
    }
  };
  rec(1, 0);
  return out;
}

/// Sparse integer polynomial in z (exponent -> coefficient).
using Poly = std::map<std::int64_t, double>;

inline Poly poly_mul(const Poly& a, const Poly& b) {
  Poly c;
  for (const auto& [ea, ca] : a)
    for (const auto& [eb, cb] : b) c[ea + eb] += ca * cb;
  return c;
}

inline double poly_constant_of_product(const Poly& a, const Poly& b) {
  double s = 0;
  for (const auto& [e, c] : a) {
    auto it = b.find(-e);
    if (it != b.end()) s += c * it->second;
  }
  return s;
}

inline std::vector<double> cumulants(const EntryDistribution& d, int m) {
  std::vector<double> mom(static_cast<std::size_t>(m) + 1), kap(static_cast<std::size_t>(m) + 1, 0.0);
  for (int r = 0; r <= m; ++r) mom[static_cast<std::size_t>(r)] = d.moment(r);
  auto binom = [](int n, int k) {
    double b = 1;
    for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
    return b;
  };
  for (int r = 1; r <= m; ++r) {
    double s = mom[static_cast<std::size_t>(r)];
    for (int i = 1; i < r; ++i) s -= binom(r - 1, i - 1) * kap[static_cast<std::size_t>(i)] * mom[static_cast<std::size_t>(r - i)];
    kap[static_cast<std::size_t>(r)] = s;
  }
  return kap;
}

}  // namespace detail

/// E of the balanced sum sum_J a_J delta, exactly, via the moment-cumulant
/// expansion over set partitions of the p positions: each block shares one
/// underlying entry and contributes its cumulant times a count of balanced
/// index choices.
[[nodiscard]] inline double balanced_sum_expectation(int p, int n, const EntryDistribution& entry, BalanceKind kind) {
  require(p >= 1 && p <= 8 && n >= 1, "expectation needs 1 <= p <= 8");
  const auto kap = detail::cumulants(entry, p);
  double total = 0;
  for (const auto& labels : detail::set_partitions(p)) {
    const int nb = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<std::vector<int>> blocks(static_cast<std::size_t>(nb));
    for (int l = 0; l < p; ++l) blocks[static_cast<std::size_t>(labels[static_cast<std::size_t>(l)])].push_back(l + 1);
    double weight = 1;
    for (const auto& b : blocks) weight *= kap[b.size()];
    if (weight == 0.0) continue;
    // Generating polynomial of each block's contribution to the balance form.
    std::vector<detail::Poly> polys;
    for (const auto& b : blocks) {
      detail::Poly g;
      if (kind == BalanceKind::toeplitz) {
        // underlying entry v = |j| in [1, n]; each position picks a sign
        const int sz = static_cast<int>(b.size());
        for (int mask = 0; mask < (1 << sz); ++mask) {
          int t = 0;
          for (int e = 0; e < sz; ++e) t += (mask >> e & 1) ? -1 : 1;
          for (int v = 1; v <= n; ++v) g[static_cast<std::int64_t>(t) * v] += 1.0;
        }
      } else {
        int t = 0;
        for (int l : b) t += l % 2 == 0 ? 1 : -1;
        for (int j = -n; j <= n; ++j) g[static_cast<std::int64_t>(t) * j] += 1.0;
      }
      polys.push_back(std::move(g));
    }
    detail::Poly acc = polys[0];
    for (std::size_t k = 1; k + 1 < polys.size(); ++k) acc = detail::poly_mul(acc, polys[k]);
    const double count = polys.size() == 1 ? (acc.count(0) ? acc.at(0) : 0.0) : detail::poly_constant_of_product(acc, polys.back());
    total += weight * count;
  }
  return total;
}

/// Raw balanced sum sum_J a_J delta from the coefficient sequence: the
/// constant term of P(z)^p (Toeplitz, P = sum_{v=1}^n a_v (z^v + z^-v)) or of
/// |P(z)|^p on the unit circle (Hankel, P = sum_{j=-n}^n a_j z^j), extracted
/// by an FFT of length > p n.
/// `a` holds a_j at index j + n for j in [-n, n].
[[nodiscard]] inline double balanced_sum_convolution(std::span<const double> a, int n, int p, BalanceKind kind) {
  require(a.size() == static_cast<std::size_t>(2 * n + 1), "coefficient array must cover [-n, n]");
  require(kind == BalanceKind::toeplitz || p % 2 == 0, "alternating balance needs an even length");
  const int N = 2 * p * n + 2;
  std::vector<cplx> col(static_cast<std::size_t>(N));
  for (int j = -n; j <= n; ++j) {
    if (kind == BalanceKind::toeplitz && j == 0) continue;
    col[static_cast<std::size_t>((j + N) % N)] += a[static_cast<std::size_t>(j + n)];
  }
  detail::fft_workspace(N).run(col, true);
  double s = 0;
  for (const auto& v : col) s += kind == BalanceKind::toeplitz ? std::pow(v.real(), p) : std::pow(std::abs(v), p);
  return s / N;
}

/// Direct enumeration of the same sum (oracle scale only).
[[nodiscard]] inline double balanced_sum_enumeration(std::span<const double> a, int n, int p, BalanceKind kind) {
  require(p >= 1 && p <= 4 && n <= 60, "enumeration guard: p <= 4, n <= 60");
  require(a.size() == static_cast<std::size_t>(2 * n + 1), "coefficient array must cover [-n, n]");
  double total = 0;
  std::function<void(int, int, double)> rec = [&](int l, int sum, double prod) {
    if (l == p) {
      if (sum == 0) total += prod;
      return;
    }
    for (int j = -n; j <= n; ++j) {
      if (kind == BalanceKind::toeplitz && j == 0) continue;
      const int sign = kind == BalanceKind::toeplitz ? 1 : ((l + 1) % 2 == 0 ? 1 : -1);
      rec(l + 1, sum + sign * j, prod * a[static_cast<std::size_t>(j + n)]);
    }
  };
  rec(0, 0, 1.0);
  return total;
}

/// Coefficients a_{-n..n} for one corollary replicate: symmetric with a_0 = 0
/// (Toeplitz balance) or independent for every j (alternating balance).
[[nodiscard]] inline std::vector<double> balanced_sum_coefficients(int n, const EntryDistribution& entry,
                                                                   BalanceKind kind, std::uint64_t seed) {
  const CounterStream s(factor_key(seed, 0));
  std::vector<double> a(static_cast<std::size_t>(2 * n + 1), 0.0);
  for (int j = -n; j <= n; ++j) {
    if (kind == BalanceKind::toeplitz) {
      if (j <= 0) continue;
      a[static_cast<std::size_t>(j + n)] = a[static_cast<std::size_t>(n - j)] = entry.draw(s, coefficient_counter(n, j, 0));
    } else {
      a[static_cast<std::size_t>(j + n)] = entry.draw(s, coefficient_counter(n, j, 0));
    }
  }
  return a;
}

struct CorollaryStatistic {
  int p = 2;
  int n = 0;
  BalanceKind balance = BalanceKind::toeplitz;
  std::uint64_t seed = 0;
  double expectation = 0.0;        ///< exact E sum_J a_J delta
  std::vector<double> replicates;  ///< n^{-(p-1)/2} (sum_J a_J delta - E)
};

/// n^{-(p-1)/2} sum over balanced J in {+-1..+-n}^p of (a_J - E a_J); the
/// alternating balance uses J in {-n..n}^p with independent a_j.
[[nodiscard]] inline CorollaryStatistic corollary_sum_statistic(int p, int n, const EntryDistribution& entry,
                                                                BalanceKind kind, int replicates,
                                                                std::uint64_t master_seed) {
  require(p >= 2, "balanced sums need p >= 2");
  require(p <= 8, "balanced sums support p <= 8");
  require(n >= 1, "n must be positive");
  require(replicates >= kMinReplicates, "at least 100 replicates are required");
  CorollaryStatistic out{p, n, kind, master_seed, balanced_sum_expectation(p, n, entry, kind), {}};
  const double scale = std::pow(static_cast<double>(n), -(p - 1) / 2.0);
  out.replicates.reserve(static_cast<std::size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    const auto a = balanced_sum_coefficients(n, entry, kind, replicate_seed(master_seed, r));
    out.replicates.push_back(scale * (balanced_sum_convolution(a, n, p, kind) - out.expectation));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

struct StatSummary {
  std::int64_t count = 0;
  double mean = 0, variance = 0, skewness = 0, excess_kurtosis = 0, jarque_bera = 0;
  double variance_std_error = 0;  ///< sqrt((m4 - m2^2) / count)
  double skewness_std_error = 0;  ///< under normality
  double kurtosis_std_error = 0;  ///< under normality
};

[[nodiscard]] inline StatSummary summarize(std::span<const double> x) {
  require(x.size() >= static_cast<std::size_t>(kMinReplicates), "summaries need at least 100 values");
  StatSummary s;
  const double N = static_cast<double>(x.size());
  s.count = static_cast<std::int64_t>(x.size());
  for (double v : x) s.mean += v;
  s.mean /= N;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - s.mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= N;
  m3 /= N;
  m4 /= N;
  // Zero (or rounding-level) spread: the shape statistics are undefined.
  double scale = 0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  require(m2 > 0.0 && std::sqrt(m2) > 1e-12 * scale, "zero variance: skewness and kurtosis are undefined");
  s.variance = m2 * N / (N - 1.0);
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  s.jarque_bera = N / 6.0 * (s.skewness * s.skewness + s.excess_kurtosis * s.excess_kurtosis / 4.0);
  s.variance_std_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / N);
  s.skewness_std_error = std::sqrt(6.0 * (N - 2.0) / ((N + 1.0) * (N + 3.0)));
  s.kurtosis_std_error = std::sqrt(24.0 * N * (N - 2.0) * (N - 3.0) / ((N + 1.0) * (N + 1.0) * (N + 3.0) * (N + 5.0)));
  return s;
}

[[nodiscard]] inline StatSummary summarize(const TraceStatistic& ts) { return summarize(ts.replicates); }

struct CovarianceSample {
  double value = 0;
  double std_error = 0;
};

/// Sample covariance of paired replicates with the standard error of the mean product.
[[nodiscard]] inline CovarianceSample sample_covariance(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, "paired samples of equal length are required");
  const double N = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= N;
  my /= N;
  std::vector<double> prod(x.size());
  double c = 0;
  for (std::size_t i = 0; i < x.size(); ++i) c += prod[i] = (x[i] - mx) * (y[i] - my);
  c /= N;
  double v = 0;
  for (double p : prod) v += (p - c) * (p - c);
  v /= (N - 1.0);
  return {c * N / (N - 1.0), std::sqrt(v / N)};
}

}  // namespace toepclt
