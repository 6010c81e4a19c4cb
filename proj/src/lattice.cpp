#include "fbt/lattice.hpp"

#include "fbt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace fbt {

std::string to_string(LatticeKind kind) {
    return kind == LatticeKind::Sawtooth ? "Sawtooth" : "Stub";
}

std::string to_string(DisorderMode mode) {
    return mode == DisorderMode::Random ? "Random" : "Superlattice";
}

namespace {

std::string lowercase(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

}  // namespace

LatticeKind parse_lattice_kind(std::string_view text) {
    const auto s = lowercase(text);
    if (s == "sawtooth" || s == "sc") return LatticeKind::Sawtooth;
    if (s == "stub" || s == "sl") return LatticeKind::Stub;
    throw DomainError("unknown lattice kind '" + std::string(text) + "'");
}

DisorderMode parse_disorder_mode(std::string_view text) {
    const auto s = lowercase(text);
    if (s == "random" || s == "disorder") return DisorderMode::Random;
    if (s == "superlattice" || s == "ordered") return DisorderMode::Superlattice;
    throw DomainError("unknown disorder mode '" + std::string(text) + "'");
}

LatticeSpec LatticeSpec::sawtooth(int n_cells, Real phi) {
    LatticeSpec s;
    s.kind = LatticeKind::Sawtooth;
    s.n_cells = n_cells;
    s.alpha = kSqrt2;
    s.phi = phi;
    return s;
}

LatticeSpec LatticeSpec::stub(int n_cells, Real alpha, Real phi) {
    LatticeSpec s;
    s.kind = LatticeKind::Stub;
    s.n_cells = n_cells;
    s.alpha = alpha;
    s.phi = phi;
    return s;
}

void LatticeSpec::validate() const {
    if (n_cells < 3) throw DomainError("n_cells must be >= 3");
    if (!(t > 0)) throw DomainError("t must be > 0");
    if (!(a > 0)) throw DomainError("a must be > 0");
    if (!std::isfinite(phi)) throw DomainError("phi must be finite");
    if (!std::isfinite(alpha)) throw DomainError("alpha must be finite");
    if (kind == LatticeKind::Sawtooth && std::abs(alpha - kSqrt2) > 1e-12)
        throw DomainError("sawtooth chain requires alpha = sqrt(2) for a flat band");
}

Real LatticeSpec::flat_band_energy() const {
    return kind == LatticeKind::Sawtooth ? 2.0 * t : 0.0;
}

int vacancy_count(int n_cells, Real x) {
    return static_cast<int>(std::llround(x * n_cells));
}

DisorderRealization make_disorder(const LatticeSpec& spec, Real x, DisorderMode mode,
                                  std::uint64_t seed) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("vacancy density x must lie in [0, 1]");
    const int n = spec.n_cells;
    const int removed = vacancy_count(n, x);
    const int kept = n - removed;

    DisorderRealization dis;
    dis.n_cells = n;
    dis.x = x;
    dis.mode = mode;
    dis.seed = seed;
    dis.surviving_b.reserve(static_cast<std::size_t>(kept));

    if (mode == DisorderMode::Superlattice) {
        for (int k = 0; k < kept; ++k)
            dis.surviving_b.push_back(static_cast<int>((static_cast<std::int64_t>(k) * n) / kept));
        return dis;
    }

    // Partial Fisher-Yates: the first `kept` entries are a uniform sample without replacement.
    std::vector<int> cells(static_cast<std::size_t>(n));
    std::iota(cells.begin(), cells.end(), 0);
    std::mt19937_64 rng(seed);
    for (int k = 0; k < kept; ++k) {
        std::uniform_int_distribution<int> pick(k, n - 1);
        std::swap(cells[static_cast<std::size_t>(k)], cells[static_cast<std::size_t>(pick(rng))]);
    }
    dis.surviving_b.assign(cells.begin(), cells.begin() + kept);
    std::sort(dis.surviving_b.begin(), dis.surviving_b.end());
    return dis;
}

DisorderRealization clean_realization(const LatticeSpec& spec) {
    return make_disorder(spec, 0.0, DisorderMode::Superlattice, 0);
}

SiteTable::SiteTable(const LatticeSpec& spec, const DisorderRealization& dis)
    : n_cells_(spec.n_cells), ring_length_(spec.length()), has_c_(spec.kind == LatticeKind::Stub) {
    if (dis.n_cells != spec.n_cells)
        throw SizeMismatchError("disorder realization built for " + std::to_string(dis.n_cells) +
                                " cells, lattice has " + std::to_string(spec.n_cells));
    for (std::size_t k = 0; k < dis.surviving_b.size(); ++k) {
        const int c = dis.surviving_b[k];
        if (c < 0 || c >= spec.n_cells || (k > 0 && c <= dis.surviving_b[k - 1]))
            throw SizeMismatchError("surviving B cells must be strictly increasing in [0, N_c)");
    }

    const int n = spec.n_cells;
    sites_.reserve(static_cast<std::size_t>(n * (has_c_ ? 2 : 1)) + dis.surviving_b.size());
    for (int i = 0; i < n; ++i) sites_.push_back({i, Sublattice::A, i * spec.a});
    if (has_c_)
        for (int i = 0; i < n; ++i) sites_.push_back({i, Sublattice::C, (i + 0.5) * spec.a});
    // B atoms sit at the x-coordinate of A_i in both lattices (see README, "Geometry").
    b_index_.assign(static_cast<std::size_t>(n), -1);
    for (int c : dis.surviving_b) {
        b_index_[static_cast<std::size_t>(c)] = static_cast<int>(sites_.size());
        sites_.push_back({c, Sublattice::B, c * spec.a});
    }
}

std::optional<Index> SiteTable::index_of(Sublattice sub, int cell) const {
    if (n_cells_ == 0) return std::nullopt;
    cell = ((cell % n_cells_) + n_cells_) % n_cells_;
    switch (sub) {
        case Sublattice::A:
            return cell;
        case Sublattice::C:
            if (!has_c_) return std::nullopt;
            return n_cells_ + cell;
        case Sublattice::B: {
            const int k = b_index_[static_cast<std::size_t>(cell)];
            if (k < 0) return std::nullopt;
            return k;
        }
    }
    return std::nullopt;
}

Real SiteTable::displacement(Index i, Index j) const {
    Real d = (*this)[i].x - (*this)[j].x;
    d -= ring_length_ * std::round(d / ring_length_);
    return d;
}

VectorXr SiteTable::positions() const {
    VectorXr x(size());
    for (Index i = 0; i < size(); ++i) x[i] = (*this)[i].x;
    return x;
}

std::vector<Bond> enumerate_bonds(const LatticeSpec& spec, const SiteTable& sites) {
    const int n = spec.n_cells;
    const Real tp = spec.alpha * spec.t;
    std::vector<Bond> bonds;
    auto A = [&](int c) { return *sites.index_of(Sublattice::A, c); };
    for (int i = 0; i < n; ++i) {
        const int next = (i + 1) % n;
        if (spec.kind == LatticeKind::Sawtooth) {
            bonds.push_back({A(i), A(next), spec.t});
            if (auto b = sites.index_of(Sublattice::B, i)) {
                bonds.push_back({*b, A(i), tp});
                bonds.push_back({*b, A(next), tp});
            }
        } else {
            const Index c = *sites.index_of(Sublattice::C, i);
            bonds.push_back({A(i), c, spec.t});
            bonds.push_back({c, A(next), spec.t});
            if (auto b = sites.index_of(Sublattice::B, i)) bonds.push_back({*b, A(i), tp});
        }
    }
    std::erase_if(bonds, [](const Bond& b) { return b.hopping == 0.0; });
    return bonds;
}

LatticeModel build_hamiltonian(const LatticeSpec& spec, const DisorderRealization& dis) {
    spec.validate();
    LatticeModel model{SparseOperator{}, SiteTable(spec, dis)};
    const auto bonds = enumerate_bonds(spec, model.sites);

    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(2 * bonds.size());
    for (const auto& b : bonds) {
        const Real d = model.sites.displacement(b.i, b.j);
        const Complex h = -b.hopping * std::polar(1.0, spec.phi * d / spec.a);
        triplets.emplace_back(static_cast<int>(b.i), static_cast<int>(b.j), h);
        triplets.emplace_back(static_cast<int>(b.j), static_cast<int>(b.i), std::conj(h));
    }
    const auto dim = static_cast<int>(model.sites.size());
    model.hamiltonian.resize(dim, dim);
    model.hamiltonian.setFromTriplets(triplets.begin(), triplets.end());
    model.hamiltonian.makeCompressed();
    return model;
}

SparseOperator build_velocity(const LatticeSpec& spec, const SparseOperator& ham,
                              const SiteTable& sites, VelocityMethod method) {
    if (ham.rows() != sites.size())
        throw SizeMismatchError("Hamiltonian and site table dimensions differ");
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(static_cast<std::size_t>(ham.nonZeros()));
    const Complex minus_i{0.0, -1.0};

    if (method == VelocityMethod::Commutator) {
        for (int row = 0; row < ham.outerSize(); ++row)
            for (SparseOperator::InnerIterator it(ham, row); it; ++it) {
                const Real d = sites.displacement(it.row(), it.col());
                if (d == 0.0) continue;
                triplets.emplace_back(it.row(), it.col(), minus_i * d * it.value());
            }
    } else {
        // v_ij = −a ∂/∂φ [−t_ij e^{iφ d_ij / a}] = i t_ij d_ij e^{iφ d_ij / a}
        for (const auto& b : enumerate_bonds(spec, sites)) {
            const Real d = sites.displacement(b.i, b.j);
            if (d == 0.0) continue;
            const Complex v = Complex{0.0, 1.0} * b.hopping * d *
                              std::polar(1.0, spec.phi * d / spec.a);
            triplets.emplace_back(static_cast<int>(b.i), static_cast<int>(b.j), v);
            triplets.emplace_back(static_cast<int>(b.j), static_cast<int>(b.i), std::conj(v));
        }
    }
    SparseOperator v(ham.rows(), ham.cols());
    v.setFromTriplets(triplets.begin(), triplets.end());
    v.makeCompressed();
    return v;
}

Real hermiticity_defect(const SparseOperator& op) {
    const SparseOperator adj = op.adjoint();
    const SparseOperator diff = op - adj;
    Real worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
        for (SparseOperator::InnerIterator it(diff, k); it; ++it)
            worst = std::max(worst, std::abs(it.value()));
    return worst;
}

}  // namespace fbt
