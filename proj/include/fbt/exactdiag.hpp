#pragma once

#include "fbt/types.hpp"

namespace fbt {

/// Full eigendecomposition; eigenvalues ascending, eigenvectors as orthonormal columns.
struct Spectrum {
    VectorXr eigenvalues;
    MatrixXc eigenvectors;

    Index size() const { return eigenvalues.size(); }
    /// E_l − e_ref, e.g. offsets from the flat-band energy.
    VectorXr offsets(Real e_ref) const { return eigenvalues.array() - e_ref; }
};

inline constexpr Index kDenseCap = 6000;

/// Throws SizeLimitError above `cap`.
Spectrum eigh_dense(const SparseOperator& ham, Index cap = kDenseCap);

/// σ(E)/σ0 = (1/N_c) Σ_nm L(E−E_n) L(E−E_m) |⟨n|v|m⟩|², L(x) = η/(x² + η²).
Real kubo_exact(const Spectrum& spectrum, const SparseOperator& v, Real energy, Real eta,
                int n_cells);

/// Same as above at several energies, reusing the velocity matrix elements.
VectorXr kubo_exact(const Spectrum& spectrum, const SparseOperator& v,
                    const Eigen::Ref<const VectorXr>& energies, Real eta, int n_cells);

/// Im G(E + iη) = −Σ_l L(E−E_l) u_l u_l†.
MatrixXc resolvent_exact(const Spectrum& spectrum, Real energy, Real eta);

/// Number of eigenvalues within tol of `energy`.
Index count_degenerate(const Spectrum& spectrum, Real energy, Real tol);

}  // namespace fbt
