#pragma once

// Random band matrices, held matrix-free.
//
// Convention: a Toeplitz factor has entry a_{r-c} at (r, c), so T e_i is
// sum_j a_j e_{i+j}. Hankel matrices are H = P T with P the backward identity
// and T a Toeplitz matrix with independent a_j for all j. Wishart-type
// operators are T*^s T^s (the 1/b_n^s factor belongs to the statistic).

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "toepclt/error.hpp"
#include "toepclt/rng.hpp"

namespace toepclt {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Entry distributions

enum class EntryKind { gaussian, rademacher, uniform_sym, custom };

/// A real law with mean 0 and variance 1.
class EntryDistribution {
 public:
  static EntryDistribution gaussian() { return EntryDistribution(EntryKind::gaussian); }
  static EntryDistribution rademacher() { return EntryDistribution(EntryKind::rademacher); }
  static EntryDistribution uniform_sym() { return EntryDistribution(EntryKind::uniform_sym); }

  /// Discrete law from a value/probability table; must be centred with unit variance.
  static EntryDistribution custom(std::vector<double> values, std::vector<double> probs) {
    require(!values.empty() && values.size() == probs.size(), "custom table needs matching values and probabilities");
    double total = 0, mean = 0, var = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      require(probs[i] > 0.0, "custom probabilities must be positive");
      total += probs[i];
      mean += probs[i] * values[i];
      var += probs[i] * values[i] * values[i];
    }
    require(std::abs(total - 1.0) < 1e-12, "custom probabilities must sum to 1");
    require(std::abs(mean) < 1e-12, "custom table must have mean 0");
    require(std::abs(var - 1.0) < 1e-12, "custom table must have variance 1");
    EntryDistribution d(EntryKind::custom);
    d.values_ = std::move(values);
    d.cdf_.resize(probs.size());
    std::partial_sum(probs.begin(), probs.end(), d.cdf_.begin());
    d.probs_ = std::move(probs);
    return d;
  }

  static EntryDistribution from_name(const std::string& name) {
    if (name == "gaussian") return gaussian();
    if (name == "rademacher") return rademacher();
    if (name == "uniform_sym" || name == "uniform") return uniform_sym();
    throw ContractViolation("unknown entry distribution: " + name);
  }

  [[nodiscard]] EntryKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::string name() const {
    switch (kind_) {
      case EntryKind::gaussian: return "gaussian";
      case EntryKind::rademacher: return "rademacher";
      case EntryKind::uniform_sym: return "uniform_sym";
      case EntryKind::custom: return "custom";
    }
    return "?";
  }
  [[nodiscard]] const std::vector<double>& table_values() const noexcept { return values_; }
  [[nodiscard]] const std::vector<double>& table_probs() const noexcept { return probs_; }

  /// E[a^k] of the real law.
  [[nodiscard]] double moment(int k) const {
    require(k >= 0, "moment order must be non-negative");
    if (k % 2 == 1 && kind_ != EntryKind::custom) return 0.0;
    switch (kind_) {
      case EntryKind::gaussian: {
        double m = 1;
        for (int j = k - 1; j > 1; j -= 2) m *= j;
        return m;
      }
      case EntryKind::rademacher: return 1.0;
      case EntryKind::uniform_sym: return std::pow(3.0, k / 2.0) / (k + 1);
      case EntryKind::custom: {
        double m = 0;
        for (std::size_t i = 0; i < values_.size(); ++i) m += probs_[i] * std::pow(values_[i], k);
        return m;
      }
    }
    return 0.0;
  }
  [[nodiscard]] double kappa() const { return moment(4); }
  /// E|a|^4 for a = (X + iY)/sqrt(2) with X, Y independent copies.
  [[nodiscard]] double complex_kappa() const { return 0.5 * kappa() + 0.5; }

  [[nodiscard]] double draw(const CounterStream& s, std::uint64_t counter) const {
    switch (kind_) {
      case EntryKind::gaussian: return s.normal(counter);
      case EntryKind::rademacher: return (s.bits(counter) >> 63) ? 1.0 : -1.0;
      case EntryKind::uniform_sym: return std::sqrt(3.0) * (2.0 * s.uniform(counter) - 1.0);
      case EntryKind::custom: {
        const double u = s.uniform(counter);
        const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        return values_[std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), values_.size() - 1)];
      }
    }
    return 0.0;
  }

  friend bool operator==(const EntryDistribution& a, const EntryDistribution& b) {
    return a.kind_ == b.kind_ && a.values_ == b.values_ && a.probs_ == b.probs_;
  }

 private:
  explicit EntryDistribution(EntryKind k) : kind_(k) {}
  EntryKind kind_;
  std::vector<double> values_, probs_, cdf_;
};

// ---------------------------------------------------------------------------
// Ensemble specification

enum class EnsembleKind {
  toeplitz_real,
  toeplitz_hermitian,
  hankel,
  sparse_toeplitz,
  sparse_hankel,
  wishart,
  multi_toeplitz,
};

enum class A0Policy { zero, sampled };

inline std::string to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::toeplitz_real: return "toeplitz_real";
    case EnsembleKind::toeplitz_hermitian: return "toeplitz_hermitian";
    case EnsembleKind::hankel: return "hankel";
    case EnsembleKind::sparse_toeplitz: return "sparse_toeplitz";
    case EnsembleKind::sparse_hankel: return "sparse_hankel";
    case EnsembleKind::wishart: return "wishart";
    case EnsembleKind::multi_toeplitz: return "multi_toeplitz";
  }
  return "?";
}

inline EnsembleKind ensemble_kind_from_string(const std::string& s) {
  for (auto k : {EnsembleKind::toeplitz_real, EnsembleKind::toeplitz_hermitian, EnsembleKind::hankel,
                 EnsembleKind::sparse_toeplitz, EnsembleKind::sparse_hankel, EnsembleKind::wishart,
                 EnsembleKind::multi_toeplitz})
    if (to_string(k) == s) return k;
  throw ContractViolation("unknown ensemble kind: " + s);
}

struct EnsembleSpec {
  EnsembleKind kind = EnsembleKind::toeplitz_real;
  int n = 64;
  int band = 63;
  EntryDistribution entry = EntryDistribution::gaussian();
  A0Policy a0 = A0Policy::zero;
  std::optional<EntryDistribution> diagonal;  ///< law of a_0 when sampled; defaults to `entry`
  std::vector<std::pair<int, int>> sparse;  ///< closed intervals of |r - c| carrying entries
  int s = 1;                                ///< Wishart power
  int r = 1;                                ///< number of independent Toeplitz factors

  [[nodiscard]] bool is_sparse() const {
    return kind == EnsembleKind::sparse_toeplitz || kind == EnsembleKind::sparse_hankel;
  }
  [[nodiscard]] bool is_hankel() const {
    return kind == EnsembleKind::hankel || kind == EnsembleKind::sparse_hankel;
  }
  [[nodiscard]] bool is_complex() const { return kind == EnsembleKind::toeplitz_hermitian; }
  /// Whether a_{-j} is tied to a_j (symmetric or Hermitian factors).
  [[nodiscard]] bool is_symmetric_symbol() const {
    return kind == EnsembleKind::toeplitz_real || kind == EnsembleKind::toeplitz_hermitian ||
           kind == EnsembleKind::sparse_toeplitz || kind == EnsembleKind::multi_toeplitz;
  }
  [[nodiscard]] int num_factors() const { return kind == EnsembleKind::multi_toeplitz ? r : 1; }
  [[nodiscard]] double b() const { return static_cast<double>(band) / n; }

  [[nodiscard]] bool carries(int j) const {
    const int a = std::abs(j);
    if (a > band) return false;
    if (!is_sparse()) return true;
    for (const auto& [lo, hi] : sparse)
      if (a >= lo && a <= hi) return true;
    return false;
  }

  void validate() const {
    require(n >= 2, "matrix size must be at least 2");
    require(band >= 1 && band <= n - 1, "band must lie in [1, n-1]");
    require(s >= 1, "Wishart power must be positive");
    require(r >= 1, "factor count must be positive");
    if (is_sparse()) {
      require(!sparse.empty(), "sparse ensembles need a region");
      auto iv = sparse;
      std::sort(iv.begin(), iv.end());
      for (std::size_t i = 0; i < iv.size(); ++i) {
        require(iv[i].first >= 0 && iv[i].first <= iv[i].second && iv[i].second <= n - 1,
                "sparse intervals must lie inside [0, n-1]");
        if (i > 0) require(iv[i].first > iv[i - 1].second, "sparse intervals must be disjoint");
      }
    } else {
      require(sparse.empty(), "only sparse ensembles take a region");
    }
  }
};

// ---------------------------------------------------------------------------
// Dense matrices (oracles and trace engines)

struct DenseMatrix {
  int n = 0;
  std::vector<cplx> a;  // row-major

  DenseMatrix() = default;
  explicit DenseMatrix(int size) : n(size), a(static_cast<std::size_t>(size) * static_cast<std::size_t>(size)) {}
  cplx& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)]; }
  const cplx& operator()(int r, int c) const {
    return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
  }
};

inline DenseMatrix multiply(const DenseMatrix& x, const DenseMatrix& y) {
  require(x.n == y.n, "dimension mismatch");
  DenseMatrix z(x.n);
  for (int r = 0; r < x.n; ++r)
    for (int k = 0; k < x.n; ++k) {
      const cplx v = x(r, k);
      if (v == cplx{}) continue;
      for (int c = 0; c < x.n; ++c) z(r, c) += v * y(k, c);
    }
  return z;
}

// ---------------------------------------------------------------------------
// FFT workspace for circulant embedding

namespace detail {

struct FftWorkspace {
  int size = 0;
  fftw_complex* in = nullptr;
  fftw_complex* out = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;

  explicit FftWorkspace(int N) : size(N) {
    in = fftw_alloc_complex(static_cast<std::size_t>(N));
    out = fftw_alloc_complex(static_cast<std::size_t>(N));
    forward = fftw_plan_dft_1d(N, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_1d(N, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  FftWorkspace(const FftWorkspace&) = delete;
  FftWorkspace& operator=(const FftWorkspace&) = delete;
  ~FftWorkspace() {
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
    fftw_free(in);
    fftw_free(out);
  }

  /// Transforms `data` in place (forward or backward, unnormalised).
  void run(std::vector<cplx>& data, bool fwd) {
    std::copy(data.begin(), data.end(), reinterpret_cast<cplx*>(in));
    fftw_execute(fwd ? forward : backward);
    std::copy(reinterpret_cast<cplx*>(out), reinterpret_cast<cplx*>(out) + size, data.begin());
  }
};

// Planner calls are not thread-safe; the library runs single-threaded.
inline FftWorkspace& fft_workspace(int N) {
  static std::map<int, std::unique_ptr<FftWorkspace>> cache;
  auto& slot = cache[N];
  if (!slot) slot = std::make_unique<FftWorkspace>(N);
  return *slot;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Toeplitz factor

/// n x n Toeplitz matrix with entry c_{r-c} at (r, c); offsets outside
/// [-width, width] are zero.
class ToeplitzFactor {
 public:
  /// Above this width/n ratio apply() uses the FFT path.
  static constexpr double kFftThreshold = 0.25;

  ToeplitzFactor() = default;
  ToeplitzFactor(int n, int width, std::vector<cplx> coeffs) : n_(n), width_(width), c_(std::move(coeffs)) {
    require(n >= 1 && width >= 0 && width <= n - 1, "invalid Toeplitz width");
    require(c_.size() == static_cast<std::size_t>(2 * width + 1), "coefficient array must cover [-width, width]");
    real_ = std::all_of(c_.begin(), c_.end(), [](cplx v) { return v.imag() == 0.0; });
  }

  [[nodiscard]] int n() const noexcept { return n_; }
  [[nodiscard]] int width() const noexcept { return width_; }
  [[nodiscard]] bool is_real() const noexcept { return real_; }
  [[nodiscard]] cplx at(int j) const {
    return std::abs(j) > width_ ? cplx{} : c_[static_cast<std::size_t>(j + width_)];
  }
  [[nodiscard]] const std::vector<cplx>& coefficients() const noexcept { return c_; }

  [[nodiscard]] ToeplitzFactor adjoint() const {
    std::vector<cplx> d(c_.size());
    for (int j = -width_; j <= width_; ++j) d[static_cast<std::size_t>(j + width_)] = std::conj(at(-j));
    return {n_, width_, std::move(d)};
  }
  [[nodiscard]] ToeplitzFactor scaled(cplx s) const {
    auto d = c_;
    for (auto& v : d) v *= s;
    return {n_, width_, std::move(d)};
  }

  /// (T v)_r = sum_j c_j v_{r-j}.
  void apply_direct(std::span<const cplx> v, std::span<cplx> out) const {
    require(v.size() == static_cast<std::size_t>(n_) && out.size() == v.size(), "dimension mismatch");
    for (int r = 0; r < n_; ++r) {
      cplx acc{};
      const int jlo = std::max(-width_, r - (n_ - 1)), jhi = std::min(width_, r);
      for (int j = jlo; j <= jhi; ++j) acc += c_[static_cast<std::size_t>(j + width_)] * v[static_cast<std::size_t>(r - j)];
      out[static_cast<std::size_t>(r)] = acc;
    }
  }

  /// Same product through a 2n-point circulant embedding.
  void apply_fft(std::span<const cplx> v, std::span<cplx> out) const {
    require(v.size() == static_cast<std::size_t>(n_) && out.size() == v.size(), "dimension mismatch");
    const int N = 2 * n_;
    auto& ws = detail::fft_workspace(N);
    if (symbol_hat_.empty()) {
      std::vector<cplx> col(static_cast<std::size_t>(N));
      for (int j = 0; j <= width_; ++j) col[static_cast<std::size_t>(j)] = at(j);
      for (int j = 1; j <= width_; ++j) col[static_cast<std::size_t>(N - j)] = at(-j);
      ws.run(col, true);
      symbol_hat_ = std::move(col);
    }
    std::vector<cplx> x(static_cast<std::size_t>(N));
    std::copy(v.begin(), v.end(), x.begin());
    ws.run(x, true);
    for (int k = 0; k < N; ++k) x[static_cast<std::size_t>(k)] *= symbol_hat_[static_cast<std::size_t>(k)];
    ws.run(x, false);
    for (int r = 0; r < n_; ++r) out[static_cast<std::size_t>(r)] = x[static_cast<std::size_t>(r)] / static_cast<double>(N);
  }

  [[nodiscard]] bool prefers_fft() const noexcept { return width_ > kFftThreshold * n_; }

  void apply(std::span<const cplx> v, std::span<cplx> out) const {
    if (prefers_fft()) apply_fft(v, out);
    else apply_direct(v, out);
  }

  [[nodiscard]] DenseMatrix dense() const {
    DenseMatrix d(n_);
    for (int r = 0; r < n_; ++r)
      for (int c = std::max(0, r - width_); c <= std::min(n_ - 1, r + width_); ++c) d(r, c) = at(r - c);
    return d;
  }

 private:
  int n_ = 0, width_ = 0;
  std::vector<cplx> c_;
  bool real_ = true;
  mutable std::vector<cplx> symbol_hat_;  // cached transform of the embedding
};

/// Dense product of two Toeplitz factors in O(n^2): first row and column
/// directly, then C(r+1, c+1) = C(r, c) + A(r+1, 0) B(0, c+1) - A(r, n-1) B(n-1, c).
inline DenseMatrix toeplitz_product(const ToeplitzFactor& A, const ToeplitzFactor& B) {
  require(A.n() == B.n(), "dimension mismatch");
  const int n = A.n();
  DenseMatrix C(n);
  auto a = [&](int r, int c) { return A.at(r - c); };
  auto b = [&](int r, int c) { return B.at(r - c); };
  for (int c = 0; c < n; ++c) {
    cplx acc{};
    for (int k = std::max(0, c - B.width()); k <= std::min({n - 1, A.width(), c + B.width()}); ++k) acc += a(0, k) * b(k, c);
    C(0, c) = acc;
  }
  for (int r = 1; r < n; ++r) {
    cplx acc{};
    for (int k = std::max(0, r - A.width()); k <= std::min(n - 1, r + A.width()); ++k) acc += a(r, k) * b(k, 0);
    C(r, 0) = acc;
  }
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) C(r + 1, c + 1) = C(r, c) + a(r + 1, 0) * b(0, c + 1) - a(r, n - 1) * b(n - 1, c);
  return C;
}

/// M * F for dense M and Toeplitz F, one row at a time: row(M F) = F^T row(M).
inline DenseMatrix multiply(const DenseMatrix& M, const ToeplitzFactor& F) {
  require(M.n == F.n(), "dimension mismatch");
  std::vector<cplx> d(F.coefficients().size());
  for (int j = -F.width(); j <= F.width(); ++j) d[static_cast<std::size_t>(j + F.width())] = F.at(-j);
  const ToeplitzFactor Ft(F.n(), F.width(), std::move(d));
  DenseMatrix out(M.n);
  for (int r = 0; r < M.n; ++r) {
    const auto off = static_cast<std::size_t>(r) * static_cast<std::size_t>(M.n);
    Ft.apply(std::span<const cplx>(M.a.data() + off, static_cast<std::size_t>(M.n)),
             std::span<cplx>(out.a.data() + off, static_cast<std::size_t>(M.n)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Structured operators

inline constexpr int kMaxMaterialize = 2048;

class StructuredOperator {
 public:
  StructuredOperator(EnsembleSpec spec, std::vector<ToeplitzFactor> factors)
      : spec_(std::move(spec)), factors_(std::move(factors)) {
    spec_.validate();
    require(static_cast<int>(factors_.size()) == spec_.num_factors(), "factor count does not match the ensemble");
    for (const auto& f : factors_) require(f.n() == spec_.n && f.width() == spec_.band, "factor shape does not match the ensemble");
  }

  [[nodiscard]] const EnsembleSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] int n() const noexcept { return spec_.n; }
  [[nodiscard]] const std::vector<ToeplitzFactor>& factors() const noexcept { return factors_; }
  [[nodiscard]] const ToeplitzFactor& factor(int k = 0) const { return factors_.at(static_cast<std::size_t>(k)); }

  /// The whole operator: T, P T, or T*^s T^s. Multi-matrix ensembles have no
  /// single operator; use apply_factor.
  void apply(std::span<const cplx> v, std::span<cplx> out, bool force_direct = false) const {
    require(v.size() == static_cast<std::size_t>(n()) && out.size() == v.size(), "dimension mismatch");
    require(spec_.kind != EnsembleKind::multi_toeplitz || spec_.r == 1, "multi-matrix ensembles: apply one factor at a time");
    auto step = [&](const ToeplitzFactor& f, std::span<const cplx> x, std::span<cplx> y) {
      if (force_direct) f.apply_direct(x, y);
      else f.apply(x, y);
    };
    if (spec_.kind == EnsembleKind::wishart) {
      if (!adjoint_) adjoint_ = std::make_shared<ToeplitzFactor>(factors_[0].adjoint());
      std::vector<cplx> x(v.begin(), v.end()), y(x.size());
      for (int i = 0; i < spec_.s; ++i) {
        step(factors_[0], x, y);
        std::swap(x, y);
      }
      for (int i = 0; i < spec_.s; ++i) {
        step(*adjoint_, x, y);
        std::swap(x, y);
      }
      std::copy(x.begin(), x.end(), out.begin());
      return;
    }
    step(factors_[0], v, out);
    if (spec_.is_hankel()) std::reverse(out.begin(), out.end());
  }

  [[nodiscard]] std::vector<cplx> apply(const std::vector<cplx>& v) const {
    std::vector<cplx> out(v.size());
    apply(v, out);
    return out;
  }

  void apply_factor(int k, std::span<const cplx> v, std::span<cplx> out) const { factor(k).apply(v, out); }

  [[nodiscard]] DenseMatrix materialize() const {
    require(n() <= kMaxMaterialize, "matrix too large to materialise");
    DenseMatrix d(n());
    std::vector<cplx> e(static_cast<std::size_t>(n())), col(e.size());
    for (int c = 0; c < n(); ++c) {
      std::fill(e.begin(), e.end(), cplx{});
      e[static_cast<std::size_t>(c)] = 1.0;
      apply(e, col, true);
      for (int r = 0; r < n(); ++r) d(r, c) = col[static_cast<std::size_t>(r)];
    }
    return d;
  }

 private:
  EnsembleSpec spec_;
  std::vector<ToeplitzFactor> factors_;
  mutable std::shared_ptr<ToeplitzFactor> adjoint_;
};

/// Counter of coefficient j (component 0 real part, 1 imaginary part) inside a factor stream.
[[nodiscard]] inline std::uint64_t coefficient_counter(int n, int j, int component) {
  return 2 * static_cast<std::uint64_t>(j + n) + static_cast<std::uint64_t>(component);
}

/// Stream key of factor k for a given sampling seed.
[[nodiscard]] inline std::uint64_t factor_key(std::uint64_t seed, int k) {
  return derive_key(seed, {0x7E, static_cast<std::uint64_t>(k)});
}

[[nodiscard]] inline StructuredOperator sample(const EnsembleSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int n = spec.n, w = spec.band;
  std::vector<ToeplitzFactor> factors;
  for (int k = 0; k < spec.num_factors(); ++k) {
    const CounterStream s(factor_key(seed, k));
    std::vector<cplx> c(static_cast<std::size_t>(2 * w + 1));
    auto slot = [&](int j) -> cplx& { return c[static_cast<std::size_t>(j + w)]; };
    auto draw = [&](int j, int comp) { return spec.entry.draw(s, coefficient_counter(n, j, comp)); };
    if (spec.a0 == A0Policy::sampled && spec.carries(0))
      slot(0) = spec.diagonal.value_or(spec.entry).draw(s, coefficient_counter(n, 0, 0));
    for (int j = 1; j <= w; ++j) {
      if (!spec.carries(j)) continue;
      if (spec.is_complex()) {
        const cplx v(draw(j, 0) / std::sqrt(2.0), draw(j, 1) / std::sqrt(2.0));
        slot(j) = v;
        slot(-j) = std::conj(v);
      } else if (spec.is_symmetric_symbol()) {
        slot(j) = slot(-j) = draw(j, 0);
      } else {
        slot(j) = draw(j, 0);
        slot(-j) = draw(-j, 0);
      }
    }
    factors.emplace_back(n, w, std::move(c));
  }
  return {spec, std::move(factors)};
}

// ---------------------------------------------------------------------------
// Coefficient text format
//
//   # toepclt-coefficients 1
//   kind=<kind> n=<n> band=<band> s=<s> r=<r> entry=<name> a0=<zero|sampled> [diagonal=<name>] sparse=<lo:hi,...>
//   <factor> <j> <re> <im>        one line per offset j in [-band, band], %.17g

inline void export_coefficients(const StructuredOperator& op, std::ostream& os) {
  const auto& sp = op.spec();
  os << "# toepclt-coefficients 1\n";
  os << "kind=" << to_string(sp.kind) << " n=" << sp.n << " band=" << sp.band << " s=" << sp.s << " r=" << sp.r
     << " entry=" << sp.entry.name() << " a0=" << (sp.a0 == A0Policy::zero ? "zero" : "sampled");
  if (sp.diagonal) os << " diagonal=" << sp.diagonal->name();
  os << " sparse=";
  for (std::size_t i = 0; i < sp.sparse.size(); ++i)
    os << (i ? "," : "") << sp.sparse[i].first << ":" << sp.sparse[i].second;
  os << "\n";
  char buf[96];
  for (int k = 0; k < sp.num_factors(); ++k)
    for (int j = -sp.band; j <= sp.band; ++j) {
      const cplx v = op.factor(k).at(j);
      std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", k, j, v.real(), v.imag());
      os << buf;
    }
}

inline StructuredOperator import_coefficients(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line == "# toepclt-coefficients 1", "not a coefficient file");
  require(static_cast<bool>(std::getline(is, line)), "missing coefficient header");
  EnsembleSpec sp;
  std::istringstream hs(line);
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    require(eq != std::string::npos, "malformed header token: " + tok);
    const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "kind") sp.kind = ensemble_kind_from_string(val);
    else if (key == "n") sp.n = std::stoi(val);
    else if (key == "band") sp.band = std::stoi(val);
    else if (key == "s") sp.s = std::stoi(val);
    else if (key == "r") sp.r = std::stoi(val);
    else if (key == "entry") sp.entry = val == "custom" ? EntryDistribution::gaussian() : EntryDistribution::from_name(val);
    else if (key == "diagonal") sp.diagonal = val == "custom" ? EntryDistribution::gaussian() : EntryDistribution::from_name(val);
    else if (key == "a0") sp.a0 = val == "sampled" ? A0Policy::sampled : A0Policy::zero;
    else if (key == "sparse") {
      std::istringstream ss(val);
      std::string iv;
      while (std::getline(ss, iv, ',')) {
        const auto colon = iv.find(':');
        require(colon != std::string::npos, "malformed sparse interval");
        sp.sparse.emplace_back(std::stoi(iv.substr(0, colon)), std::stoi(iv.substr(colon + 1)));
      }
    } else {
      throw ContractViolation("unknown header key: " + key);
    }
  }
  sp.validate();
  std::vector<std::vector<cplx>> coeffs(static_cast<std::size_t>(sp.num_factors()),
                                        std::vector<cplx>(static_cast<std::size_t>(2 * sp.band + 1)));
  std::vector<std::vector<bool>> seen(coeffs.size(), std::vector<bool>(coeffs[0].size(), false));
  int k, j;
  double re, im;
  while (is >> k >> j >> re >> im) {
    require(k >= 0 && k < sp.num_factors() && std::abs(j) <= sp.band, "coefficient index out of range");
    coeffs[static_cast<std::size_t>(k)][static_cast<std::size_t>(j + sp.band)] = {re, im};
    seen[static_cast<std::size_t>(k)][static_cast<std::size_t>(j + sp.band)] = true;
  }
  for (const auto& f : seen) require(std::all_of(f.begin(), f.end(), [](bool b) { return b; }), "missing coefficients");
  std::vector<ToeplitzFactor> factors;
  for (auto& c : coeffs) factors.emplace_back(sp.n, sp.band, std::move(c));
  return {sp, std::move(factors)};
}

}  // namespace toepclt
