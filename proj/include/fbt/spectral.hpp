#pragma once

#include "fbt/lattice.hpp"
#include "fbt/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace fbt {

struct SpectralBounds {
    Real lower = 0.0;
    Real upper = 0.0;
};

struct LanczosOptions {
    int max_iterations = 4000;
    int check_every = 10;
    Real stagnation = 1e-10;  ///< relative change of the extremal Ritz values between checks
    Real residual = 1e-3;     ///< relative residual accepted for the extremal Ritz pairs
    std::uint64_t seed = 0x5eed;
};

/// Interval containing the whole spectrum of a Hermitian operator (Lanczos extremal Ritz values
/// widened by their residuals, clipped to the Gershgorin interval). Throws NumericalError with the
/// iteration history when the extremal Ritz values fail to settle.
SpectralBounds spectral_bounds(const SparseOperator& ham, const LanczosOptions& options = {});

/// Root w of w² − 2z̃w + 1 = 0 with |w| < 1 (requires Im z̃ > 0).
Complex joukowski_root(Complex z_tilde);

/// g_n with 1/(z̃ − x) = Σ_n g_n(z̃) T_n(x) on [−1, 1]:
/// g_n = (2 − δ_n0) · 2w/(1 − w²) · wⁿ, equivalently −i(2 − δ_n0) wⁿ / √(1 − z̃²).
VectorXc resolvent_coeffs(Complex z_tilde, int moments);

/// Smallest M with |g_M| / |g_0| < tail.
int moments_for_tail(Complex z_tilde, Real tail = 1e-8);

/// H̃ = (H − b)/s, with s = (E_max − E_min)/(2(1 − ε)) and b the band centre.
class ChebyshevOperator {
public:
    ChebyshevOperator(const SparseOperator& ham, SpectralBounds bounds, Real margin = 0.01);

    Index dim() const { return dim_; }
    Real scale() const { return scale_; }
    Real center() const { return center_; }
    SpectralBounds bounds() const { return bounds_; }
    bool is_real() const { return std::holds_alternative<RealMatrix>(matrix_); }

    Complex to_unit(Complex z) const { return (z - center_) / scale_; }
    /// True when E maps strictly inside (−1, 1).
    bool contains(Real energy) const;

    /// T ← 2·H̃·T1 − T, column by column. Optionally acc += c·T (new T) in the same pass.
    void recurrence_step(const MatrixXc& t1, MatrixXc& t0, MatrixXc* acc = nullptr,
                         Real c = 0.0) const;
    /// out = H̃·in
    void apply(const MatrixXc& in, MatrixXc& out) const;

private:
    using RealMatrix = Eigen::SparseMatrix<Real, Eigen::RowMajor, int>;
    using ComplexMatrix = SparseOperator;

    std::variant<RealMatrix, ComplexMatrix> matrix_;
    Index dim_ = 0;
    Real scale_ = 1.0;
    Real center_ = 0.0;
    SpectralBounds bounds_;
};

/// One resolvent argument E + iη.
struct ResolventPoint {
    Real energy;
    Real eta;
};

/// Column k holds the Chebyshev coefficients of Im G(E_k + iη_k): Im g_n(z̃_k)/s, n < moments.
MatrixXr im_green_coeffs(const ChebyshevOperator& op, std::span<const ResolventPoint> points,
                         int moments);

/// Moment count meeting the tail bound at every point.
int auto_moments(const ChebyshevOperator& op, std::span<const ResolventPoint> points,
                 Real tail = 1e-8);

/// Im G(E + iη)·v for every column of v via the three-term Chebyshev recurrence.
/// O(M·nnz) work per column, O(dim) extra memory per column.
MatrixXc apply_im_green(const ChebyshevOperator& op, const Eigen::Ref<const VectorXr>& coeffs,
                        const Eigen::Ref<const MatrixXc>& v);

/// Several resolvent points sharing one recurrence. Result is (dim·cols) × K: column k is the
/// column-stacked Im G(z_k)·v.
MatrixXc apply_im_green_multi(const ChebyshevOperator& op, const MatrixXr& coeffs,
                              const Eigen::Ref<const MatrixXc>& v);

/// μ_n = Σ_columns ⟨v|T_n(H̃)|v⟩, n < moments (uses the doubling identities).
VectorXr chebyshev_moments(const ChebyshevOperator& op, const Eigen::Ref<const MatrixXc>& v,
                           int moments);

/// Unit-modulus random-phase vector, deterministic in `seed`.
VectorXc random_phase_vector(Index dim, std::uint64_t seed);

struct CPGFParams {
    Real eta = 1e-3;
    std::optional<int> moments;  ///< empty: chosen from the coefficient tail bound
    int random_vectors = 8;
    std::optional<SpectralBounds> bounds;
    Real margin = 0.01;
    std::uint64_t seed = 1;
    bool exact_trace = false;  ///< loop over all basis vectors instead of random vectors
    Real tail = 1e-8;

    void validate() const;
};

/// Largest dimension accepted in exact-trace mode.
inline constexpr Index kExactTraceMaxDim = 5000;

/// Energy grid with values and standard errors. For stochastic estimates `per_vector` keeps the
/// individual random-vector estimates (rows) so derived quantities can propagate errors exactly.
struct SpectrumSample {
    ArrayXr energies;
    ArrayXr values;
    ArrayXr stderr;
    bool stderr_available = false;
    MatrixXr per_vector;
    int moments = 0;
    int vectors = 0;
    SpectralBounds bounds;
};

struct KuboResult {
    Real value = 0.0;  ///< σ/σ0
    Real stderr = 0.0;
    bool stderr_available = false;
    int moments = 0;
    int vectors = 0;
};

/// ρ(E) = −(1/(π N_c)) Tr Im G(E + iη), per unit cell.
SpectrumSample dos_cpgf(const SparseOperator& ham, const SiteTable& sites,
                        std::span<const Real> energies, const CPGFParams& params);

/// σ(E)/σ0 = Tr[Im G v Im G v] / N_c (t = a = ħ = 1).
KuboResult kubo_cpgf(const LatticeModel& model, const SparseOperator& v, Real energy,
                     const CPGFParams& params);

/// Kubo-Greenwood at several resolvent points sharing the recurrences; one result per point.
std::vector<KuboResult> kubo_cpgf(const LatticeModel& model, const SparseOperator& v,
                                  std::span<const ResolventPoint> points, const CPGFParams& params);

struct WindowWeight {
    Real weight = 0.0;
    Real stderr = 0.0;
};

/// Trapezoidal ∫ρ dE over [lo, hi] (linear interpolation at the window edges).
WindowWeight integrate_dos_window(const SpectrumSample& sample, Real lo, Real hi);

/// Fraction of a unit Lorentzian of width η lying within ±k·η of its centre: (2/π)·atan(k).
Real lorentzian_window_fraction(Real k);

/// Spectral weight of a δ-peak at `energy`: window integral over ±k·η divided by the
/// Lorentzian window fraction.
WindowWeight flat_band_weight(const SpectrumSample& sample, Real energy, Real eta, Real k);

}  // namespace fbt
