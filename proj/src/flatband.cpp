#include "fbt/flatband.hpp"

#include "fbt/errors.hpp"

#include <cmath>

namespace fbt {

VectorXc FBState::to_dense(Index dim) const {
    VectorXc v = VectorXc::Zero(dim);
    for (std::size_t k = 0; k < sites.size(); ++k) {
        if (sites[k] >= dim) throw SizeMismatchError("state support exceeds dimension");
        v[sites[k]] += amplitudes[static_cast<Index>(k)];
    }
    return v;
}

FBState cls_disordered(const LatticeSpec& spec, const DisorderRealization& dis, int segment,
                       Real phi) {
    const int nb = static_cast<int>(dis.surviving_b.size());
    if (nb < 2)
        throw DegenerateConfigurationError("need at least two surviving B atoms, have " +
                                           std::to_string(nb));
    if (segment < 0 || segment >= nb) throw DomainError("segment index out of range");
    if (dis.n_cells != spec.n_cells) throw SizeMismatchError("realization and lattice differ");

    const SiteTable table(spec, dis);
    const int n = spec.n_cells;
    const int p0 = dis.surviving_b[static_cast<std::size_t>(segment)];
    int p1 = dis.surviving_b[static_cast<std::size_t>((segment + 1) % nb)];
    if (p1 <= p0) p1 += n;
    const int m = p1 - p0;

    FBState s;
    s.left_cell = p0;
    s.right_cell = p1;
    s.length = m;
    s.kind = spec.kind;
    s.alpha = spec.alpha;
    s.phi = phi;

    std::vector<Complex> amp;
    std::vector<Real> pos;
    auto add = [&](Sublattice sub, int cell, Real x, Real a) {
        s.sites.push_back(*table.index_of(sub, cell));
        pos.push_back(x * spec.a);
        amp.push_back(a * std::polar(1.0, phi * x));
    };

    Real norm2 = 0.0;
    if (spec.kind == LatticeKind::Sawtooth) {
        // B_p0 : √2(−1)^j on A_{p0+j}, j = 1..m : −(−1)^m on B_p1, all at E = 2t.
        add(Sublattice::B, p0, p0, 1.0);
        for (int j = 1; j <= m; ++j) add(Sublattice::A, p0 + j, p0 + j, (j % 2 == 0 ? 1.0 : -1.0) * LatticeSpec::kSqrt2);
        add(Sublattice::B, p1, p1, m % 2 == 0 ? -1.0 : 1.0);
        norm2 = 2.0 * (m + 1);
    } else {
        // B_p0 : −α(−1)^j on C_{p0+j}, j = 0..m−1 : (−1)^{m−1} on B_p1, all at E = 0.
        add(Sublattice::B, p0, p0, 1.0);
        for (int j = 0; j < m; ++j)
            add(Sublattice::C, p0 + j, p0 + j + 0.5, (j % 2 == 0 ? -1.0 : 1.0) * spec.alpha);
        add(Sublattice::B, p1, p1, m % 2 == 1 ? 1.0 : -1.0);
        norm2 = m * spec.alpha * spec.alpha + 2.0;
    }
    const Real inv = 1.0 / std::sqrt(norm2);
    s.amplitudes = Eigen::Map<VectorXc>(amp.data(), static_cast<Index>(amp.size())) * inv;
    s.positions = Eigen::Map<VectorXr>(pos.data(), static_cast<Index>(pos.size()));
    return s;
}

FBBasis fb_basis(const LatticeSpec& spec, const DisorderRealization& dis, Real phi) {
    FBBasis basis;
    const int nb = static_cast<int>(dis.surviving_b.size());
    if (nb < 2) throw DegenerateConfigurationError("fewer than two surviving B atoms: no flat-band states");
    basis.states.reserve(static_cast<std::size_t>(nb));
    for (int k = 0; k < nb; ++k) basis.states.push_back(cls_disordered(spec, dis, k, phi));

    const SiteTable table(spec, dis);
    std::vector<Eigen::Triplet<Complex>> entries;
    for (int k = 0; k < nb; ++k) {
        const auto& st = basis.states[static_cast<std::size_t>(k)];
        for (std::size_t i = 0; i < st.sites.size(); ++i)
            entries.emplace_back(static_cast<int>(st.sites[i]), k, st.amplitudes[static_cast<Index>(i)]);
    }
    Eigen::SparseMatrix<Complex> psi(table.size(), nb);
    psi.setFromTriplets(entries.begin(), entries.end());
    basis.gram = Eigen::SparseMatrix<Complex>(psi.adjoint()) * psi;
    basis.gram.prune(Complex(0.0));
    return basis;
}

Real metric_sawtooth_segment(int m) {
    if (m < 1) throw DomainError("segment length must be >= 1");
    const Real x = m;
    return x * (x * x * x + 4 * x * x + 2 * x + 2) / (12 * (x + 1) * (x + 1));
}

Real metric_stub_segment(int m, Real alpha) {
    if (m < 1) throw DomainError("segment length must be >= 1");
    const Real x = m, a2 = alpha * alpha;
    return x * (a2 * x * x - a2 + 6 * x) / (12 * (a2 * x + 2));
}

namespace {

// 1 − |⟨a|b⟩|², computed as ‖b − a⟨a|b⟩‖² to avoid cancellation.
Real infidelity(const FBState& a, const FBState& b) {
    if (a.sites != b.sites) throw DomainError("state family changed its support");
    const Complex ov = a.amplitudes.dot(b.amplitudes);
    return (b.amplitudes - a.amplitudes * ov).squaredNorm();
}

Real fd_metric(const StateFamily& family, const FBState& centre, Real phi, Real h) {
    const Real plus = infidelity(centre, family(phi + h));
    const Real minus = infidelity(centre, family(phi - h));
    return (plus + minus) / (2 * h * h);
}

}  // namespace

Real quantum_metric(const StateFamily& family, Real phi, MetricMethod method, Real step) {
    const FBState centre = family(phi);
    switch (method) {
        case MetricMethod::AnalyticSC:
            return metric_sawtooth_segment(centre.length);
        case MetricMethod::AnalyticSL:
            return metric_stub_segment(centre.length, centre.alpha);
        case MetricMethod::FiniteDifference:
            break;
    }
    const Real h = step > 0 ? step : 1e-4 / std::max(centre.length, 1);
    const Real g = fd_metric(family, centre, phi, h);
    const Real g_half = fd_metric(family, centre, phi, h / 2);
    if (std::abs(g - g_half) > 1e-4 * std::max(std::abs(g_half), 1e-300))
        throw NumericalError("finite-difference metric unconverged: " + std::to_string(g) + " vs " +
                             std::to_string(g_half) + " after halving the step");
    // Richardson on the O(h²) truncation error.
    return (4 * g_half - g) / 3;
}

Real position_variance(const FBState& state) {
    const VectorXr w = state.amplitudes.cwiseAbs2();
    const Real total = w.sum();
    const Real mean = w.dot(state.positions) / total;
    return w.dot((state.positions.array() - mean).square().matrix()) / total;
}

Real spread(const FBState& state, const SiteTable& sites) {
    if (state.positions.size() > 0 && sites.n_cells() > 1) {
        const Real extent = state.positions.maxCoeff() - state.positions.minCoeff();
        const Real cell = sites[1].x - sites[0].x;  // A sites are one cell apart
        if (extent > 0.5 * sites.n_cells() * cell)
            throw GeometryError("state spans " + std::to_string(extent) +
                                ", more than half the ring");
    }
    return std::sqrt(position_variance(state));
}

FBSigma sigma_fb_from_states(const LatticeSpec& spec, const DisorderRealization& dis) {
    const FBBasis basis = fb_basis(spec, dis, 0.0);
    FBSigma out;
    out.n_states = static_cast<int>(basis.states.size());
    Real sum_g = 0.0, sum_l2 = 0.0;
    for (const auto& s : basis.states) {
        sum_g += s.kind == LatticeKind::Sawtooth ? metric_sawtooth_segment(s.length)
                                                 : metric_stub_segment(s.length, s.alpha);
        sum_l2 += position_variance(s) / (spec.a * spec.a);
    }
    for (int k = 0; k < basis.gram.outerSize(); ++k)
        for (Eigen::SparseMatrix<Complex>::InnerIterator it(basis.gram, k); it; ++it)
            if (it.row() != it.col()) out.max_overlap = std::max(out.max_overlap, std::abs(it.value()));
    out.overlap_warning = out.max_overlap >= 0.25;
    out.mean_metric = sum_g / out.n_states;
    out.mean_spread2 = sum_l2 / out.n_states;
    // 2y⟨g⟩ with y = N_B / N_c.
    out.metric_route = 2.0 * sum_g / spec.n_cells;
    out.spread_route = 2.0 * sum_l2 / spec.n_cells;
    return out;
}

}  // namespace fbt
