#include "fbt/analytic.hpp"

#include "fbt/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>

namespace fbt {

namespace {

void check_y(Real y) {
    if (!(y > 0.0 && y <= 1.0)) throw DomainError("survivor density y must lie in (0, 1]");
}

}  // namespace

Real qm_avg_sc(Real y, Arrangement mode) {
    check_y(y);
    return (mode == Arrangement::Random ? 1.0 / 6.0 : 1.0 / 12.0) / (y * y);
}

Real sigma_sc(Real y, Arrangement mode) { return 2.0 * y * qm_avg_sc(y, mode); }

Real sigma_sc_clean() { return 2.0 / (3.0 * std::sqrt(3.0)); }

Real sigma_sl_clean(Real alpha) {
    if (alpha == 0.0)
        throw DomainError("alpha = 0 is singular: the stub reduces to a bare chain (use drude_chain)");
    return 1.0 / (std::abs(alpha) * std::sqrt(4.0 + alpha * alpha));
}

Real metric_clean(LatticeKind kind, Real k, Real alpha) {
    if (kind == LatticeKind::Sawtooth) {
        const Real d = 2.0 + std::cos(k);
        return 1.0 / (2.0 * d * d);
    }
    if (alpha == 0.0) throw DomainError("alpha = 0 is singular for the stub metric");
    // Flat-band Bloch vector on (B, C) is (−2cos(k/2), α), real up to a gauge.
    const Real c = std::cos(0.5 * k), s = std::sin(0.5 * k);
    const Real d = 4.0 * c * c + alpha * alpha;
    return alpha * alpha * s * s / (d * d);
}

Real metric_clean_average(LatticeKind kind, Real alpha) {
    auto f = [&](Real k) { return metric_clean(kind, k, alpha); };
    Real err = 0.0;
    const Real v = boost::math::quadrature::gauss_kronrod<Real, 61>::integrate(f, -kPi, kPi, 15,
                                                                                1e-12, &err);
    return v / (2.0 * kPi);
}

Real i_np(Real alpha, Real y, int n, int p) {
    if (n < 0 || n > 3 || p < 0 || p > 2) throw DomainError("i_np needs n in 0..3 and p in 0..2");
    if (!(y > 0)) throw DomainError("y must be > 0");
    const Real a2 = alpha * alpha;
    if (p > 0 && a2 == 0.0) {
        // (xα² + 2)^p = 2^p: Poisson moments.
        return std::tgamma(n + 1.0) / std::pow(y, n) / std::pow(2.0, p);
    }
    // Substituting u = yx: ∫₀^∞ e^{−u} (u/y)ⁿ / ((u/y)α² + 2)^p du.
    auto f = [&](Real u) {
        if (u <= 0.0) return n == 0 ? std::pow(2.0, -p) : 0.0;
        if (u > 700.0) return 0.0;
        const Real x = u / y;
        return std::exp(-u + n * std::log(x) - p * std::log(x * a2 + 2.0));
    };
    boost::math::quadrature::exp_sinh<Real> integrator;
    Real err = 0.0, l1 = 0.0;
    const Real v = integrator.integrate(f, 1e-13, &err, &l1);
    if (!(err <= 1e-8 * std::abs(v)) || !std::isfinite(v))
        throw NumericalError("I_np quadrature did not reach 1e-8 relative error (estimate " +
                             std::to_string(err / std::abs(v)) + ")");
    return v;
}

Real metric_stub_published(Real m, Real alpha) {
    const Real a2 = alpha * alpha;
    const Real d = m * a2 + 2.0;
    const Real f3 = a2 / 3.0, f2 = 1.0 - a2 / 2.0, f1 = 1.0 + a2 / 6.0, f0 = 0.5;
    const Real first = (((f3 * m + f2) * m + f1) * m + f0) / d;
    const Real q = 1.0 - a2 / d;
    return first - 0.25 * m * m * q * q;
}

StubSigma sigma_sl(Real alpha, Real y, Arrangement mode, SpacingLaw law) {
    if (!(y > 0.0 && y < 1.0)) throw DomainError("sigma_sl needs y in (0, 1)");
    if (alpha == 0.0) throw DomainError("alpha = 0 is singular (use drude_chain)");
    const Real a2 = alpha * alpha;
    StubSigma out;

    Real mean_g = 0.0;
    if (mode == Arrangement::Ordered) {
        mean_g = metric_stub_published(1.0 / y, alpha);
        out.small_alpha = (1.0 + y) * (1.0 + y) / (2.0 * y);
        out.large_alpha = 1.0 / (6.0 * y);
    } else {
        if (law == SpacingLaw::Continuous) {
            // Expansion of the published metric in the I_np family.
            const Real f[4] = {0.5, 1.0 + a2 / 6.0, 1.0 - a2 / 2.0, a2 / 3.0};
            for (int i = 0; i < 4; ++i) mean_g += f[i] * i_np(alpha, y, i, 1);
            mean_g += -0.25 * i_np(alpha, y, 2, 0) + 0.5 * a2 * i_np(alpha, y, 2, 1) -
                      0.25 * a2 * a2 * i_np(alpha, y, 2, 2);
        } else {
            // Σ_{m≥1} y(1−y)^{m−1} g(m), truncated when the remaining weight is negligible.
            Real w = y, total = 0.0;
            for (int m = 1; w > 1e-17 * y || m < 10; ++m) {
                mean_g += w * metric_stub_published(m, alpha);
                total += w;
                w *= 1.0 - y;
                if (m > 100000000) throw NumericalError("geometric spacing sum did not converge");
            }
            mean_g /= total;
        }
        out.small_alpha = (1.0 + y) / y;
        out.large_alpha = 1.0 / (3.0 * y);
    }
    out.value = 2.0 * y * mean_g;
    out.regime = a2 <= 0.1 * y ? "alpha^2<<y" : (a2 >= 10.0 * y ? "alpha^2>>y" : "crossover");
    return out;
}

Real drude_chain(Real energy, Real eta) {
    if (!(std::abs(energy) < 2.0)) throw DomainError("drude_chain needs |E| < 2t");
    if (!(eta > 0)) throw DomainError("eta must be > 0");
    return std::sqrt(4.0 - energy * energy) / (2.0 * eta);
}

MCEstimate poisson_mc_average(const std::function<Real(Real)>& metric_fn, Real y,
                              std::int64_t samples, std::uint64_t seed) {
    if (samples < 2) throw DomainError("need at least two samples");
    if (!(y > 0)) throw DomainError("y must be > 0");
    std::mt19937_64 rng(seed);
    std::exponential_distribution<Real> spacing(y);
    // Welford accumulation.
    Real mean = 0.0, m2 = 0.0;
    for (std::int64_t i = 1; i <= samples; ++i) {
        const Real v = metric_fn(spacing(rng));
        const Real delta = v - mean;
        mean += delta / static_cast<Real>(i);
        m2 += delta * (v - mean);
    }
    const Real var = m2 / static_cast<Real>(samples - 1);
    return {mean, std::sqrt(var / static_cast<Real>(samples))};
}

std::vector<Prediction> predictions(LatticeKind kind, Real y, Real alpha) {
    std::vector<Prediction> rows;
    if (kind == LatticeKind::Sawtooth) {
        rows.push_back({"sigma_sc_clean", 1.0, LatticeSpec::kSqrt2, sigma_sc_clean(), "clean"});
        if (y > 0) {
            rows.push_back({"sigma_sc_random", y, LatticeSpec::kSqrt2, sigma_sc(y, Arrangement::Random),
                            "dilute"});
            rows.push_back({"sigma_sc_ordered", y, LatticeSpec::kSqrt2,
                            sigma_sc(y, Arrangement::Ordered), "dilute"});
        }
        return rows;
    }
    if (alpha != 0.0)
        rows.push_back({"sigma_sl_clean", 1.0, alpha, sigma_sl_clean(alpha), "clean"});
    if (y > 0 && y < 1 && alpha != 0.0) {
        const StubSigma r = sigma_sl(alpha, y, Arrangement::Random);
        rows.push_back({"sigma_sl_random", y, alpha, r.value, r.regime});
        rows.push_back({"sigma_sl_small_alpha", y, alpha, r.small_alpha, "alpha^2<<y"});
        rows.push_back({"sigma_sl_large_alpha", y, alpha, r.large_alpha, "alpha^2>>y"});
        const StubSigma o = sigma_sl(alpha, y, Arrangement::Ordered);
        rows.push_back({"sigma_sl_ordered", y, alpha, o.value, o.regime});
    }
    return rows;
}

}  // namespace fbt
