#pragma once

#include "fbt/lattice.hpp"
#include "fbt/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fbt {

/// Arrangement of the surviving B atoms in the closed forms: random (Poisson spacings) or
/// ordered (constant spacing 1/y).
enum class Arrangement { Random, Ordered };

/// Spacing law used by the stub quadratures: the continuous exponential density y·e^{−y·l}, or the
/// discrete geometric law P(m) = y(1−y)^{m−1}, m ≥ 1, that vacancies actually produce.
enum class SpacingLaw { Continuous, Geometric };

struct Prediction {
    std::string label;
    Real y = 0.0;
    Real alpha = 0.0;
    Real value = 0.0;
    std::string regime;
};

/// ⟨g⟩ of the sawtooth chain: 1/(6y²) random, 1/(12y²) ordered.
Real qm_avg_sc(Real y, Arrangement mode);
/// σ_fb/σ0 = 2y⟨g⟩: 1/(3y) random, 1/(6y) ordered.
Real sigma_sc(Real y, Arrangement mode);
/// Clean sawtooth chain: 2/(3√3).
Real sigma_sc_clean();

/// Clean stub lattice: 1/(|α|√(4+α²)). α = 0 is singular (the chain is then a Drude metal, see
/// drude_chain).
Real sigma_sl_clean(Real alpha);

/// Bloch flat-band metric: sawtooth 1/(2(2+cos k)²); stub sin²(k/2)/(α²D), D = 1 + 4cos²(k/2)/α².
Real metric_clean(LatticeKind kind, Real k, Real alpha = 0.0);
/// Brillouin-zone average of metric_clean by adaptive quadrature.
Real metric_clean_average(LatticeKind kind, Real alpha = 0.0);

/// I_np(α, y) = ∫₀^∞ y e^{−yx} xⁿ / (xα² + 2)^p dx, relative error ≤ 1e-8.
Real i_np(Real alpha, Real y, int n, int p);

struct StubSigma {
    Real value = 0.0;          ///< 2y⟨g⟩ from the published per-segment metric
    Real small_alpha = 0.0;    ///< α² ≪ y limit
    Real large_alpha = 0.0;    ///< α² ≫ y limit
    std::string regime;        ///< "alpha^2<<y", "alpha^2>>y" or "crossover"
};

/**
 Disordered stub lattice σ_fb/σ0 = 2y⟨g⟩ with the published per-segment metric

   g(m) = (f3 m³ + f2 m² + f1 m + f0)/(mα² + 2) − (m²/4)(1 − α²/(mα² + 2))²,
   f3 = α²/3, f2 = 1 − α²/2, f1 = 1 + α²/6, f0 = 1/2,

 averaged over the spacing law (random) or taken at m = 1/y (ordered).
 Limits: random (1/y)(1+y) for α² ≪ y and 1/(3y) for α² ≫ y; ordered (1+y)²/(2y) and 1/(6y).
 */
StubSigma sigma_sl(Real alpha, Real y, Arrangement mode = Arrangement::Random,
                   SpacingLaw law = SpacingLaw::Continuous);

/// Published per-segment stub metric (see sigma_sl).
Real metric_stub_published(Real m, Real alpha);

/// σ(E)/σ0 = √(4 − E²)/(2η) for the bare chain (t = 1).
Real drude_chain(Real energy, Real eta);

struct MCEstimate {
    Real mean = 0.0;
    Real stderr = 0.0;
};

/// Monte-Carlo average of metric_fn(l) over l ~ y·e^{−y·l}.
MCEstimate poisson_mc_average(const std::function<Real(Real)>& metric_fn, Real y,
                              std::int64_t samples, std::uint64_t seed);

/// Overlay rows for a survivor density and (stub) coupling.
std::vector<Prediction> predictions(LatticeKind kind, Real y, Real alpha);

}  // namespace fbt
