#pragma once

#include "fbt/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fbt {

enum class LatticeKind { Sawtooth, Stub };
enum class DisorderMode { Random, Superlattice };
enum class Sublattice : std::uint8_t { A, B, C };

std::string to_string(LatticeKind kind);
std::string to_string(DisorderMode mode);
LatticeKind parse_lattice_kind(std::string_view text);
DisorderMode parse_disorder_mode(std::string_view text);

/**
 Lattice kind, size, couplings and flux phase of a flux-threaded ring.

 `alpha` is t'/t. For the sawtooth chain it must equal √2 (flat-band condition).
 `phi` is the flux phase per unit cell, (2π/N_c)(Φ/φ0).
 */
struct LatticeSpec {
    LatticeKind kind = LatticeKind::Sawtooth;
    int n_cells = 0;
    Real t = 1.0;
    Real alpha = kSqrt2;
    Real a = 1.0;
    Real phi = 0.0;

    static constexpr Real kSqrt2 = 1.41421356237309504880;

    static LatticeSpec sawtooth(int n_cells, Real phi = 0.0);
    static LatticeSpec stub(int n_cells, Real alpha, Real phi = 0.0);

    /// Throws DomainError when an invariant is violated.
    void validate() const;

    Real length() const { return n_cells * a; }
    /// Flat-band energy: 2t (sawtooth) or 0 (stub).
    Real flat_band_energy() const;
    int sites_per_cell() const { return kind == LatticeKind::Sawtooth ? 2 : 3; }
};

/// Which B atoms survive dilution. `surviving_b` is sorted and holds unit-cell indices.
struct DisorderRealization {
    int n_cells = 0;
    Real x = 0.0;
    DisorderMode mode = DisorderMode::Random;
    std::uint64_t seed = 0;
    std::vector<int> surviving_b;

    Real survivor_density() const {
        return n_cells > 0 ? static_cast<Real>(surviving_b.size()) / n_cells : 0.0;
    }
};

/// Number of removed B atoms for vacancy density x: round(x·N_c).
int vacancy_count(int n_cells, Real x);

/// Random: uniform removal of round(x·N_c) B atoms. Superlattice: survivors as evenly spaced as
/// integer arithmetic allows (consecutive gaps differ by at most one cell).
DisorderRealization make_disorder(const LatticeSpec& spec, Real x, DisorderMode mode,
                                  std::uint64_t seed);

/// Realization with every B atom present.
DisorderRealization clean_realization(const LatticeSpec& spec);

struct Site {
    int cell;
    Sublattice sublattice;
    Real x;  ///< position along the chain, units of a
};

/**
 Site records and the dense-index mapping.

 Ordering: all A sites (index = cell), then C sites for the stub lattice (index = N_c + cell),
 then surviving B sites in increasing cell order.
 */
class SiteTable {
public:
    SiteTable() = default;
    SiteTable(const LatticeSpec& spec, const DisorderRealization& dis);

    Index size() const { return static_cast<Index>(sites_.size()); }
    const Site& operator[](Index i) const { return sites_[static_cast<std::size_t>(i)]; }
    const std::vector<Site>& sites() const { return sites_; }
    int n_cells() const { return n_cells_; }

    std::optional<Index> index_of(Sublattice sub, int cell) const;
    /// Minimum-image displacement x_i − x_j on the ring.
    Real displacement(Index i, Index j) const;
    /// Position vector x̂ (diagonal of the position operator).
    VectorXr positions() const;

private:
    std::vector<Site> sites_;
    std::vector<int> b_index_;  // cell -> dense index of B, or -1
    int n_cells_ = 0;
    Real ring_length_ = 0.0;
    bool has_c_ = false;
};

struct Bond {
    Index i;
    Index j;
    Real hopping;  ///< t_ij > 0; the matrix element is −t_ij·exp(iφ d_ij / a)
};

/// All bonds of the (diluted) ring; bonds touching removed B atoms are absent.
std::vector<Bond> enumerate_bonds(const LatticeSpec& spec, const SiteTable& sites);

struct LatticeModel {
    SparseOperator hamiltonian;
    SiteTable sites;
};

/// H = −Σ t_ij e^{iθ_ij} c†_i c_j + h.c. with Peierls phase θ_ij = φ·(x_i − x_j)/a (minimum image).
LatticeModel build_hamiltonian(const LatticeSpec& spec, const DisorderRealization& dis);

enum class VelocityMethod { Commutator, FluxDerivative };

/// Velocity operator v_x in units of a·t/ħ.
/// Commutator: v = −(i/ħ)[x̂, H]. FluxDerivative: v = −(a/ħ)∂H/∂φ from the bond phases.
SparseOperator build_velocity(const LatticeSpec& spec, const SparseOperator& ham,
                              const SiteTable& sites,
                              VelocityMethod method = VelocityMethod::Commutator);

/// max_ij |H_ij − conj(H_ji)|.
Real hermiticity_defect(const SparseOperator& op);

}  // namespace fbt
