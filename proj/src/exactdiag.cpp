#include "fbt/exactdiag.hpp"

#include "fbt/errors.hpp"

namespace fbt {

Spectrum eigh_dense(const SparseOperator& ham, Index cap) {
    if (ham.rows() > cap)
        throw SizeLimitError("dense diagonalization capped at dimension " + std::to_string(cap) +
                             ", got " + std::to_string(ham.rows()));
    const MatrixXc dense(ham);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(dense);
    if (es.info() != Eigen::Success) throw NumericalError("dense eigensolver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

VectorXr kubo_exact(const Spectrum& spectrum, const SparseOperator& v,
                    const Eigen::Ref<const VectorXr>& energies, Real eta, int n_cells) {
    if (v.rows() != spectrum.size()) throw SizeMismatchError("velocity and spectrum differ");
    if (!(eta > 0)) throw DomainError("eta must be > 0");
    const MatrixXc& u = spectrum.eigenvectors;
    const MatrixXc vu = v * u;
    const MatrixXr w2 = (u.adjoint() * vu).cwiseAbs2();

    VectorXr out(energies.size());
    for (Index k = 0; k < energies.size(); ++k) {
        const VectorXr l =
            eta / ((energies[k] - spectrum.eigenvalues.array()).square() + eta * eta);
        out[k] = l.dot(w2 * l) / n_cells;
    }
    return out;
}

Real kubo_exact(const Spectrum& spectrum, const SparseOperator& v, Real energy, Real eta,
                int n_cells) {
    VectorXr e(1);
    e[0] = energy;
    return kubo_exact(spectrum, v, e, eta, n_cells)[0];
}

MatrixXc resolvent_exact(const Spectrum& spectrum, Real energy, Real eta) {
    if (!(eta > 0)) throw DomainError("eta must be > 0");
    const VectorXr l = eta / ((energy - spectrum.eigenvalues.array()).square() + eta * eta);
    const MatrixXc& u = spectrum.eigenvectors;
    return -(u * l.asDiagonal() * u.adjoint());
}

Index count_degenerate(const Spectrum& spectrum, Real energy, Real tol) {
    return ((spectrum.eigenvalues.array() - energy).abs() <= tol).count();
}

}  // namespace fbt
