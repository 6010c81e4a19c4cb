#include "doctest.h"

#include "fbt/errors.hpp"
#include "fbt/exactdiag.hpp"
#include "fbt/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace fbt;

TEST_CASE("eigh_dense basics") {
    auto ring = LatticeSpec::sawtooth(8);
    auto m = build_hamiltonian(ring, make_disorder(ring, 1.0, DisorderMode::Random, 0));
    const Spectrum sp = eigh_dense(m.hamiltonian);
    std::vector<Real> want;
    for (int n = 0; n < 8; ++n) want.push_back(-2 * std::cos(2 * kPi * n / 8));
    std::sort(want.begin(), want.end());
    for (int n = 0; n < 8; ++n) CHECK(std::abs(sp.eigenvalues[n] - want[static_cast<std::size_t>(n)]) < 1e-10);

    auto saw = LatticeSpec::sawtooth(50);
    const Spectrum ss = eigh_dense(build_hamiltonian(saw, clean_realization(saw)).hamiltonian);
    CHECK(count_degenerate(ss, 2.0, 1e-10) == 50);

    auto stub = LatticeSpec::stub(50, 0.7);
    const Spectrum st = eigh_dense(build_hamiltonian(stub, clean_realization(stub)).hamiltonian);
    CHECK(count_degenerate(st, 0.0, 1e-10) == 50);
    Real edge = 1e9;
    for (Index i = 0; i < st.size(); ++i)
        if (std::abs(st.eigenvalues[i]) > 1e-8) edge = std::min(edge, std::abs(st.eigenvalues[i]));
    CHECK(std::abs(edge - 0.7) < 1e-8);
}

TEST_CASE("eigendecomposition quality") {
    auto spec = LatticeSpec::stub(60, 1.1, 0.2);
    auto m = build_hamiltonian(spec, make_disorder(spec, 0.4, DisorderMode::Random, 3));
    const Spectrum sp = eigh_dense(m.hamiltonian);
    const MatrixXc h(m.hamiltonian);
    const Real norm = h.norm();
    const MatrixXc& u = sp.eigenvectors;
    CHECK((h * u - u * sp.eigenvalues.asDiagonal()).colwise().norm().maxCoeff() <= 1e-10 * norm);
    CHECK((u.adjoint() * u - MatrixXc::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(sp.offsets(0.0)[0] == sp.eigenvalues[0]);
}

TEST_CASE("dimension cap") {
    auto spec = LatticeSpec::sawtooth(40);
    auto m = build_hamiltonian(spec, clean_realization(spec));
    CHECK_THROWS_AS(eigh_dense(m.hamiltonian, 50), SizeLimitError);
}

TEST_CASE("resolvent_exact") {
    SparseOperator one(1, 1);
    one.insert(0, 0) = 0.0;
    const Spectrum s1 = eigh_dense(one);
    CHECK(resolvent_exact(s1, 0.3, 0.1)(0, 0).real() == doctest::Approx(-0.1 / (0.09 + 0.01)));

    auto spec = LatticeSpec::stub(20, 0.9, 0.4);
    auto m = build_hamiltonian(spec, make_disorder(spec, 0.3, DisorderMode::Random, 5));
    const Spectrum sp = eigh_dense(m.hamiltonian);
    const Real e = 0.37, eta = 0.08;
    const MatrixXc h(m.hamiltonian);
    const Index n = h.rows();
    const MatrixXc g = (Complex(e, eta) * MatrixXc::Identity(n, n) - h).inverse();
    const MatrixXc img = (g - g.adjoint()) / Complex(0.0, 2.0);
    CHECK((resolvent_exact(sp, e, eta) - img).cwiseAbs().maxCoeff() < 1e-10);

    // Sum rule: −(1/π) ∫ Tr Im G dE = dimension (trapezoid over a wide window).
    Real integral = 0.0;
    const Real lo = -60.0, hi = 60.0;
    const int pts = 120001;
    const Real de = (hi - lo) / (pts - 1);
    for (int i = 0; i < pts; ++i) {
        const Real en = lo + i * de;
        const Real w = (i == 0 || i == pts - 1) ? 0.5 : 1.0;
        const Real trace_img = -(eta / ((en - sp.eigenvalues.array()).square() + eta * eta)).sum();
        integral += w * de * (-trace_img / kPi);
    }
    CHECK(integral == doctest::Approx(static_cast<Real>(n)).epsilon(0.01));
}

TEST_CASE("kubo_exact") {
    SUBCASE("zero velocity gives zero") {
        auto spec = LatticeSpec::sawtooth(20);
        auto m = build_hamiltonian(spec, clean_realization(spec));
        SparseOperator v(m.hamiltonian.rows(), m.hamiltonian.cols());
        CHECK(kubo_exact(eigh_dense(m.hamiltonian), v, 2.0, 0.01, 20) == 0.0);
    }
    SUBCASE("clean sawtooth and bare chain") {
        auto saw = LatticeSpec::sawtooth(400);
        auto m = build_hamiltonian(saw, clean_realization(saw));
        auto v = build_velocity(saw, m.hamiltonian, m.sites);
        const Spectrum sp = eigh_dense(m.hamiltonian);
        const Real s1 = kubo_exact(sp, v, 2.0, 1e-3, 400);
        CHECK(s1 == doctest::Approx(2 / (3 * std::sqrt(3.0))).epsilon(0.01));
        // η-stability when the gap (2t) exceeds 100η.
        CHECK(kubo_exact(sp, v, 2.0, 5e-4, 400) == doctest::Approx(s1).epsilon(0.01));

        auto chain = build_hamiltonian(saw, make_disorder(saw, 1.0, DisorderMode::Random, 0));
        auto vc = build_velocity(saw, chain.hamiltonian, chain.sites);
        CHECK(kubo_exact(eigh_dense(chain.hamiltonian), vc, 0.0, 0.05, 400) ==
              doctest::Approx(20.0).epsilon(0.02));
    }
    SUBCASE("invariant under rotations inside the flat band") {
        auto spec = LatticeSpec::sawtooth(40);
        auto m = build_hamiltonian(spec, make_disorder(spec, 0.3, DisorderMode::Random, 6));
        auto v = build_velocity(spec, m.hamiltonian, m.sites);
        Spectrum sp = eigh_dense(m.hamiltonian);
        const Real before = kubo_exact(sp, v, 2.0, 0.02, 40);

        std::vector<Index> fb;
        for (Index i = 0; i < sp.size(); ++i)
            if (std::abs(sp.eigenvalues[i] - 2.0) < 1e-8) fb.push_back(i);
        const Index k = static_cast<Index>(fb.size());
        std::mt19937_64 rng(1);
        std::normal_distribution<Real> nd;
        MatrixXc a(k, k);
        for (Index i = 0; i < k; ++i)
            for (Index j = 0; j < k; ++j) a(i, j) = Complex(nd(rng), nd(rng));
        const MatrixXc q = Eigen::HouseholderQR<MatrixXc>(a).householderQ();
        MatrixXc block(sp.size(), k);
        for (Index j = 0; j < k; ++j) block.col(j) = sp.eigenvectors.col(fb[static_cast<std::size_t>(j)]);
        const MatrixXc rotated = block * q;
        for (Index j = 0; j < k; ++j) sp.eigenvectors.col(fb[static_cast<std::size_t>(j)]) = rotated.col(j);
        CHECK(kubo_exact(sp, v, 2.0, 0.02, 40) == doctest::Approx(before).epsilon(1e-10));
    }
}
