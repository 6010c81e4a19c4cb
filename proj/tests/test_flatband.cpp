#include "doctest.h"

#include "fbt/analytic.hpp"
#include "fbt/errors.hpp"
#include "fbt/exactdiag.hpp"
#include "fbt/flatband.hpp"

#include <cmath>

using namespace fbt;

namespace {

DisorderRealization with_survivors(int n, std::vector<int> cells) {
    DisorderRealization d;
    d.n_cells = n;
    d.x = 1.0 - static_cast<Real>(cells.size()) / n;
    d.mode = DisorderMode::Random;
    d.surviving_b = std::move(cells);
    return d;
}

Real residual(const LatticeSpec& spec, const DisorderRealization& dis, const FBState& s) {
    auto m = build_hamiltonian(spec, dis);
    const VectorXc psi = s.to_dense(m.sites.size());
    return (m.hamiltonian * psi - spec.flat_band_energy() * psi).norm();
}

Real operator_norm_bound(const SparseOperator& h) {
    Real worst = 0.0;
    for (int r = 0; r < h.outerSize(); ++r) {
        Real row = 0.0;
        for (SparseOperator::InnerIterator it(h, r); it; ++it) row += std::abs(it.value());
        worst = std::max(worst, row);
    }
    return worst;
}

}  // namespace

TEST_CASE("sawtooth CLS amplitudes") {
    auto spec = LatticeSpec::sawtooth(20);
    auto dis = with_survivors(20, {3, 7, 15});
    const FBState s = cls_disordered(spec, dis, 0, 0.0);
    CHECK(s.length == 4);
    CHECK(s.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const Real n = std::sqrt(10.0);
    CHECK(std::abs(s.amplitudes[0]) == doctest::Approx(1 / n));
    for (int j = 1; j <= 4; ++j)
        CHECK(std::abs(s.amplitudes[j]) == doctest::Approx(std::sqrt(2.0) / n));
    CHECK(residual(spec, dis, s) < 1e-12);

    // Wrap-around segment.
    const FBState w = cls_disordered(spec, dis, 2, 0.0);
    CHECK(w.left_cell == 15);
    CHECK(w.right_cell == 23);
    CHECK(w.length == 8);
    CHECK(residual(spec, dis, w) < 1e-12);
}

TEST_CASE("stub m = 1 recovers the clean CLS") {
    const Real alpha = 0.8;
    auto spec = LatticeSpec::stub(6, alpha);
    auto dis = clean_realization(spec);
    const FBState s = cls_disordered(spec, dis, 2, 0.0);
    auto m = build_hamiltonian(spec, dis);
    const VectorXc psi = s.to_dense(m.sites.size());
    const Real n = std::sqrt(alpha * alpha + 2);
    CHECK(psi[*m.sites.index_of(Sublattice::B, 2)].real() == doctest::Approx(1 / n));
    CHECK(psi[*m.sites.index_of(Sublattice::B, 3)].real() == doctest::Approx(1 / n));
    CHECK(psi[*m.sites.index_of(Sublattice::C, 2)].real() == doctest::Approx(-alpha / n));
    CHECK(residual(spec, dis, s) < 1e-12);
}

TEST_CASE("every CLS is an exact eigenstate") {
    int checked = 0;
    for (Real x : {0.5, 0.9, 0.99}) {
        for (auto base : {LatticeSpec::sawtooth(300), LatticeSpec::stub(300, 0.6)}) {
            for (Real phi : {0.0, 2 * kPi / 300, 0.013}) {
                auto spec = base;
                spec.phi = phi;
                auto dis = make_disorder(spec, x, DisorderMode::Random, 1000 + checked);
                if (dis.surviving_b.size() < 2) continue;
                auto m = build_hamiltonian(spec, dis);
                const Real hn = operator_norm_bound(m.hamiltonian);
                const FBBasis basis = fb_basis(spec, dis, phi);
                for (const auto& s : basis.states) {
                    const VectorXc psi = s.to_dense(m.sites.size());
                    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
                    CHECK((m.hamiltonian * psi - spec.flat_band_energy() * psi).norm() <= 1e-12 * hn);
                }
                ++checked;
            }
        }
    }
    CHECK(checked >= 16);
}

TEST_CASE("degenerate configurations") {
    auto spec = LatticeSpec::sawtooth(10);
    CHECK_THROWS_AS(cls_disordered(spec, with_survivors(10, {4}), 0, 0.0), DegenerateConfigurationError);
    CHECK_THROWS_AS(fb_basis(spec, with_survivors(10, {}), 0.0), DegenerateConfigurationError);
}

TEST_CASE("basis overlaps") {
    auto spec = LatticeSpec::sawtooth(40);
    SUBCASE("d1 = d2 = 4") {
        auto dis = with_survivors(40, {0, 4, 8, 20});
        const FBBasis b = fb_basis(spec, dis, 0.0);
        CHECK(std::abs(b.gram.coeff(0, 1)) == doctest::Approx(0.1));
        CHECK(b.gram.coeff(0, 2) == Complex(0.0));
    }
    SUBCASE("superlattice spacing 2") {
        auto dis = make_disorder(spec, 0.5, DisorderMode::Superlattice, 0);
        const FBBasis b = fb_basis(spec, dis, 0.3);
        const int nb = static_cast<int>(b.states.size());
        for (int j = 0; j < nb; ++j) {
            CHECK(std::abs(b.gram.coeff(j, (j + 1) % nb)) == doctest::Approx(1.0 / 6.0));
            CHECK(std::abs(b.gram.coeff(j, (j + 2) % nb)) == 0.0);
        }
    }
    SUBCASE("Gram is tridiagonal-cyclic and full rank") {
        auto dis = make_disorder(spec, 0.6, DisorderMode::Random, 77);
        const FBBasis b = fb_basis(spec, dis, 0.1);
        const int nb = static_cast<int>(b.states.size());
        const MatrixXc g(b.gram);
        for (int j = 0; j < nb; ++j)
            for (int k = 0; k < nb; ++k) {
                const int d = std::min((j - k + nb) % nb, (k - j + nb) % nb);
                if (d > 1) CHECK(g(j, k) == Complex(0.0));
            }
        Eigen::SelfAdjointEigenSolver<MatrixXc> es(g);
        CHECK(es.eigenvalues().minCoeff() > 1e-8);
    }
    SUBCASE("dilute overlaps are of order y/2") {
        // Adjacent overlap 1/(2√((m₁+1)(m₂+1))) with independent geometric spacings:
        // mean = ½ E[(m+1)^{-1/2}]². A max-based bound fails: neighbouring B atoms give ½.
        const Real y = 0.1;
        Real e = 0.0, w = y;
        for (int m = 1; m < 2000; ++m, w *= 1 - y) e += w / std::sqrt(m + 1.0);
        const Real expected = 0.5 * e * e;
        auto big = LatticeSpec::sawtooth(20000);
        Real sum = 0.0, worst = 0.0;
        int count = 0;
        for (int seed = 0; seed < 5; ++seed) {
            const FBBasis b = fb_basis(big, make_disorder(big, 1 - y, DisorderMode::Random, seed), 0.0);
            const int nb = static_cast<int>(b.states.size());
            for (int j = 0; j < nb; ++j, ++count) {
                const Real o = std::abs(b.gram.coeff(j, (j + 1) % nb));
                sum += o;
                worst = std::max(worst, o);
            }
        }
        CHECK(sum / count == doctest::Approx(expected).epsilon(0.02));
        CHECK(sum / count < y);
        CHECK(worst > y / 2 * (1 + 3 * y));
    }
}

TEST_CASE("stub weight ratio B/C = 2/(m α²)") {
    const Real alpha = 0.7;
    auto spec = LatticeSpec::stub(30, alpha);
    auto dis = with_survivors(30, {2, 9});
    auto m = build_hamiltonian(spec, dis);
    const FBState s = cls_disordered(spec, dis, 0, 0.0);
    Real wb = 0, wc = 0;
    for (std::size_t i = 0; i < s.sites.size(); ++i) {
        const Real w = std::norm(s.amplitudes[static_cast<Index>(i)]);
        (m.sites[s.sites[i]].sublattice == Sublattice::B ? wb : wc) += w;
    }
    CHECK(wb / wc == doctest::Approx(2 / (7 * alpha * alpha)).epsilon(1e-12));
}

TEST_CASE("quantum metric") {
    auto family_for = [](LatticeSpec spec, DisorderRealization dis, int seg) {
        return [=](Real phi) {
            auto s = spec;
            s.phi = phi;
            return cls_disordered(s, dis, seg, phi);
        };
    };
    SUBCASE("finite difference equals the closed forms") {
        for (int m : {1, 2, 3, 7, 40}) {
            auto saw = LatticeSpec::sawtooth(100);
            auto dis = with_survivors(100, {10, 10 + m});
            const auto fam = family_for(saw, dis, 0);
            const Real fd = quantum_metric(fam, 0.0, MetricMethod::FiniteDifference);
            CHECK(std::abs(fd - quantum_metric(fam, 0.0, MetricMethod::AnalyticSC)) < 1e-6 * std::max(1.0, fd));
            CHECK(quantum_metric(fam, 0.2, MetricMethod::FiniteDifference) == doctest::Approx(fd).epsilon(1e-8));

            for (Real alpha : {0.1, 0.9, 2.5}) {
                auto stub = LatticeSpec::stub(100, alpha);
                const auto fs = family_for(stub, dis, 0);
                const Real f2 = quantum_metric(fs, 0.0, MetricMethod::FiniteDifference);
                CHECK(std::abs(f2 - quantum_metric(fs, 0.0, MetricMethod::AnalyticSL)) < 1e-6 * std::max(1.0, f2));
            }
        }
    }
    SUBCASE("m = 3 sawtooth value") {
        CHECK(metric_sawtooth_segment(3) == doctest::Approx(3.0 * (27 + 36 + 6 + 2) / (12 * 16)));
    }
    SUBCASE("m = 100 sawtooth: m²/12 plus an O(m) correction") {
        // Exact value 849.75; m²/12 = 833.33 is the leading term only.
        CHECK(metric_sawtooth_segment(100) == doctest::Approx(849.7549).epsilon(1e-6));
        CHECK(metric_sawtooth_segment(100) / (100.0 * 100 / 12) == doctest::Approx(1.0).epsilon(0.025));
        CHECK(metric_sawtooth_segment(10000) / (1e8 / 12) == doctest::Approx(1.0).epsilon(2.5e-4));
    }
    SUBCASE("gauge invariance under a global phase") {
        auto saw = LatticeSpec::sawtooth(50);
        auto dis = with_survivors(50, {5, 11});
        const auto fam = family_for(saw, dis, 0);
        auto rotated = [&](Real phi) {
            FBState s = fam(phi);
            s.amplitudes *= std::polar(1.0, 1.234);
            return s;
        };
        CHECK(std::abs(quantum_metric(fam, 0.0, MetricMethod::FiniteDifference) -
                       quantum_metric(rotated, 0.0, MetricMethod::FiniteDifference)) < 1e-8);
    }
    SUBCASE("unconverged finite difference is reported") {
        auto saw = LatticeSpec::sawtooth(400);
        auto dis = with_survivors(400, {0, 150});
        CHECK_THROWS_AS(quantum_metric(family_for(saw, dis, 0), 0.0, MetricMethod::FiniteDifference, 0.5),
                        NumericalError);
    }
}

TEST_CASE("spread") {
    FBState two;
    two.sites = {0, 1};
    two.amplitudes = VectorXc::Constant(2, 1 / std::sqrt(2.0));
    two.positions = (VectorXr(2) << 0.0, 1.0).finished();
    auto spec = LatticeSpec::sawtooth(10);
    const SiteTable table(spec, clean_realization(spec));
    CHECK(spread(two, table) * spread(two, table) == doctest::Approx(0.25));

    FBState point;
    point.sites = {3};
    point.amplitudes = VectorXc::Ones(1);
    point.positions = VectorXr::Constant(1, 3.0);
    CHECK(spread(point, table) == 0.0);

    auto big = LatticeSpec::sawtooth(400);
    auto dis = with_survivors(400, {0, 100});
    const FBState s = cls_disordered(big, dis, 0, 0.0);
    const Real l = spread(s, SiteTable(big, dis));
    CHECK(l * l == doctest::Approx(metric_sawtooth_segment(100)).epsilon(1e-12));
    CHECK(l * l / metric_sawtooth_segment(100) == doctest::Approx(1.0).epsilon(0.01));
    // Segment spanning 300 cells of a 400-cell ring.
    CHECK_THROWS_AS(spread(cls_disordered(big, dis, 1, 0.0), SiteTable(big, dis)), GeometryError);
}

TEST_CASE("sigma from states") {
    SUBCASE("routes agree per realization") {
        for (auto spec : {LatticeSpec::sawtooth(2000), LatticeSpec::stub(2000, 0.8)}) {
            const FBSigma s = sigma_fb_from_states(spec, make_disorder(spec, 0.9, DisorderMode::Random, 5));
            CHECK(s.spread_route == doctest::Approx(s.metric_route).epsilon(1e-10));
            CHECK(s.n_states == 200);
        }
    }
    SUBCASE("random y = 0.1 approaches 1/(3y)") {
        auto spec = LatticeSpec::sawtooth(100000);
        Real sum = 0.0;
        for (int seed = 0; seed < 4; ++seed)
            sum += sigma_fb_from_states(spec, make_disorder(spec, 0.9, DisorderMode::Random, seed)).metric_route;
        // Discrete spacings and the O(m) metric terms keep this ~4% above the continuum value.
        CHECK(sum / 4 == doctest::Approx(sigma_sc(0.1, Arrangement::Random)).epsilon(0.05));
    }
    SUBCASE("superlattice y = 0.1") {
        auto spec = LatticeSpec::sawtooth(1000);
        const FBSigma s = sigma_fb_from_states(spec, make_disorder(spec, 0.9, DisorderMode::Superlattice, 0));
        // Exact per-segment metric at m = 10 versus the leading m²/12 term.
        CHECK(s.metric_route == doctest::Approx(0.2 * metric_sawtooth_segment(10)).epsilon(1e-12));
        CHECK_FALSE(s.overlap_warning);
    }
    SUBCASE("clean lattice warns about overlaps") {
        auto spec = LatticeSpec::sawtooth(50);
        CHECK(sigma_fb_from_states(spec, clean_realization(spec)).overlap_warning);
    }
}

TEST_CASE("Poisson average of the segment metric") {
    for (Real y : {0.05, 0.1}) {
        const MCEstimate mc =
            poisson_mc_average([](Real m) { return m * m / 12; }, y, 1000000, 12345);
        CHECK(std::abs(mc.mean - qm_avg_sc(y, Arrangement::Random)) < 3 * mc.stderr);
    }
}
