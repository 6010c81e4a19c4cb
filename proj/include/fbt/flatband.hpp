#pragma once

#include "fbt/lattice.hpp"
#include "fbt/types.hpp"

#include <functional>
#include <vector>

namespace fbt {

/**
 Compact flat-band eigenstate spanning the segment between two consecutive surviving B atoms.

 Only the support is stored. `positions` are unwrapped coordinates along the chain, starting at
 the left B atom's cell, so the segment has a well-defined position variance even when it wraps
 across the ring seam. Amplitudes already carry the flux phases exp(iφ·position).
 */
struct FBState {
    std::vector<Index> sites;
    VectorXc amplitudes;
    VectorXr positions;
    int left_cell = 0;
    int right_cell = 0;  ///< may exceed N_c − 1 for the wrap-around segment (unwrapped)
    int length = 0;      ///< m = right_cell − left_cell
    LatticeKind kind = LatticeKind::Sawtooth;
    Real alpha = 0.0;
    Real phi = 0.0;

    VectorXc to_dense(Index dim) const;
};

/// State of segment `segment` (between surviving_b[segment] and its successor around the ring).
/// Throws DegenerateConfigurationError with fewer than two survivors.
FBState cls_disordered(const LatticeSpec& spec, const DisorderRealization& dis, int segment,
                       Real phi);

struct FBBasis {
    std::vector<FBState> states;
    Eigen::SparseMatrix<Complex> gram;
};

FBBasis fb_basis(const LatticeSpec& spec, const DisorderRealization& dis, Real phi);

enum class MetricMethod { FiniteDifference, AnalyticSC, AnalyticSL };

using StateFamily = std::function<FBState(Real phi)>;

/// Flux quantum metric of a CLS family at `phi`. Analytic methods use the segment length (and α)
/// of family(phi); the finite difference uses the symmetric fidelity with step-halving control
/// and throws NumericalError when the halving check fails. `step` ≤ 0 selects 1e-4/max(m,1).
Real quantum_metric(const StateFamily& family, Real phi, MetricMethod method, Real step = 0.0);

/// Closed-form per-segment metrics (variance of the unwrapped position of the CLS).
Real metric_sawtooth_segment(int m);
Real metric_stub_segment(int m, Real alpha);

/// Root position variance of the state. Throws GeometryError when its support spans more than
/// half the ring.
Real spread(const FBState& state, const SiteTable& sites);

/// ⟨ψ|(x̂ − ⟨x̂⟩)²|ψ⟩ in unwrapped coordinates (no ring check).
Real position_variance(const FBState& state);

struct FBSigma {
    Real metric_route = 0.0;  ///< 2y⟨g⟩
    Real spread_route = 0.0;  ///< 2y⟨L²⟩
    Real mean_metric = 0.0;
    Real mean_spread2 = 0.0;
    int n_states = 0;
    Real max_overlap = 0.0;       ///< largest |Gram off-diagonal|
    bool overlap_warning = false;  ///< some overlap ≥ 0.25: the independent-state picture is poor
};

/// σ_fb from the CLS basis, neglecting overlaps between neighbouring states.
FBSigma sigma_fb_from_states(const LatticeSpec& spec, const DisorderRealization& dis);

}  // namespace fbt
