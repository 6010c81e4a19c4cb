#include "fbt/spectral.hpp"

#include "fbt/errors.hpp"
#include "fbt/parallel.hpp"
#include "fbt/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <limits>
#include <sstream>

namespace fbt {

namespace {

// Scalar Hermitian eigenvalues of a small dense matrix, used below the Lanczos threshold.
SpectralBounds dense_bounds(const SparseOperator& ham) {
    const MatrixXc dense = MatrixXc(ham);
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(dense, Eigen::EigenvaluesOnly);
    return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

SpectralBounds gershgorin(const SparseOperator& ham) {
    SpectralBounds g{std::numeric_limits<Real>::infinity(), -std::numeric_limits<Real>::infinity()};
    for (int row = 0; row < ham.outerSize(); ++row) {
        Real centre = 0.0, radius = 0.0;
        for (SparseOperator::InnerIterator it(ham, row); it; ++it) {
            if (it.col() == row)
                centre = it.value().real();
            else
                radius += std::abs(it.value());
        }
        g.lower = std::min(g.lower, centre - radius);
        g.upper = std::max(g.upper, centre + radius);
    }
    return g;
}

Real sample_stderr(const Eigen::Ref<const VectorXr>& x) {
    const Index n = x.size();
    if (n < 2) return 0.0;
    const Real mean = x.mean();
    return std::sqrt((x.array() - mean).square().sum() / static_cast<Real>(n - 1) /
                     static_cast<Real>(n));
}

}  // namespace

SpectralBounds spectral_bounds(const SparseOperator& ham, const LanczosOptions& options) {
    const Index n = ham.rows();
    if (n == 0) throw DomainError("spectral_bounds: empty operator");
    if (n <= 64) return dense_bounds(ham);

    const SpectralBounds gersh = gershgorin(ham);
    const Real norm = std::max(std::abs(gersh.lower), std::abs(gersh.upper));

    VectorXc q = random_phase_vector(n, options.seed);
    q.normalize();
    VectorXc q_prev = VectorXc::Zero(n);
    VectorXc w(n);
    std::vector<Real> alpha, beta;
    Real last_lo = 0.0, last_hi = 0.0;
    std::ostringstream history;

    for (int k = 0; k < options.max_iterations; ++k) {
        w.noalias() = ham * q;
        const Real a = q.dot(w).real();
        w -= a * q;
        if (k > 0) w -= beta.back() * q_prev;
        const Real b = w.norm();
        alpha.push_back(a);

        const bool breakdown = b < 1e-12 * std::max(norm, 1.0);
        const bool check = breakdown || (k + 1) % options.check_every == 0 ||
                           k + 1 == options.max_iterations || k + 1 == n;
        if (check) {
            const Index m = static_cast<Index>(alpha.size());
            VectorXr diag = Eigen::Map<VectorXr>(alpha.data(), m);
            VectorXr sub(std::max<Index>(m - 1, 0));
            for (Index i = 0; i + 1 < m; ++i) sub[i] = beta[static_cast<std::size_t>(i)];
            Eigen::SelfAdjointEigenSolver<MatrixXr> es;
            es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
            const Real lo = es.eigenvalues()[0];
            const Real hi = es.eigenvalues()[m - 1];
            const Real res_lo = breakdown ? 0.0 : b * std::abs(es.eigenvectors()(m - 1, 0));
            const Real res_hi = breakdown ? 0.0 : b * std::abs(es.eigenvectors()(m - 1, m - 1));
            const Real scale = std::max(norm, 1e-300);
            const bool settled = k >= options.check_every &&
                                 std::abs(lo - last_lo) <= options.stagnation * scale + res_lo &&
                                 std::abs(hi - last_hi) <= options.stagnation * scale + res_hi;
            history << " [it " << k + 1 << ": " << lo << ", " << hi << "; res " << res_lo << ", "
                    << res_hi << "]";
            if (breakdown || k + 1 == n ||
                (settled && res_lo <= options.residual * scale && res_hi <= options.residual * scale)) {
                return {std::max(lo - res_lo, gersh.lower), std::min(hi + res_hi, gersh.upper)};
            }
            last_lo = lo;
            last_hi = hi;
        }
        beta.push_back(b);
        q_prev.swap(q);
        q = w / b;
    }
    throw NumericalError("spectral_bounds: Lanczos extremal Ritz values did not converge in " +
                         std::to_string(options.max_iterations) + " iterations;" +
                         history.str().substr(0, 2000));
}

Complex joukowski_root(Complex z) {
    if (!(z.imag() > 0)) throw DomainError("resolvent argument must have Im z > 0");
    // w = z − i·√(1 − z²) with the branch giving |w| < 1 in the upper half plane.
    Complex w = z - Complex{0.0, 1.0} * std::sqrt(1.0 - z * z);
    if (std::abs(w) >= 1.0) w = 1.0 / w;
    return w;
}

VectorXc resolvent_coeffs(Complex z, int moments) {
    if (moments < 1) throw DomainError("moment count must be positive");
    const Complex w = joukowski_root(z);
    VectorXc g(moments);
    Complex gn = 2.0 * w / (1.0 - w * w);
    g[0] = gn;
    gn *= 2.0;
    for (int n = 1; n < moments; ++n) {
        gn *= w;
        g[n] = gn;
    }
    return g;
}

int moments_for_tail(Complex z, Real tail) {
    const Real r = std::abs(joukowski_root(z));
    if (r == 0.0) return 2;
    const Real m = std::ceil(std::log(tail / 2.0) / std::log(r));
    if (!(m < 5e7)) throw DomainError("resolvent too close to the real axis: moment count > 5e7");
    return std::max(2, static_cast<int>(m));
}

ChebyshevOperator::ChebyshevOperator(const SparseOperator& ham, SpectralBounds bounds, Real margin)
    : dim_(ham.rows()), bounds_(bounds) {
    if (ham.rows() != ham.cols()) throw SizeMismatchError("Hamiltonian must be square");
    if (!(margin > 0.0 && margin <= 0.1)) throw DomainError("margin must lie in (0, 0.1]");
    if (!(bounds.upper >= bounds.lower)) throw DomainError("spectral bounds are inverted");
    Real width = bounds.upper - bounds.lower;
    if (width < 1e-12) width = std::max(1.0, std::abs(bounds.upper));
    scale_ = width / (2.0 * (1.0 - margin));
    center_ = 0.5 * (bounds.upper + bounds.lower);

    SparseOperator shifted = ham;
    SparseOperator identity(dim_, dim_);
    identity.setIdentity();
    shifted = (ham - Complex(center_) * identity) / Complex(scale_);
    shifted.prune(Complex(0.0));
    shifted.makeCompressed();

    bool real = true;
    for (Index k = 0; k < shifted.nonZeros() && real; ++k)
        real = shifted.valuePtr()[k].imag() == 0.0;
    if (real) {
        RealMatrix m = shifted.real();
        m.makeCompressed();
        matrix_ = std::move(m);
    } else {
        matrix_ = std::move(shifted);
    }
}

bool ChebyshevOperator::contains(Real energy) const {
    const Real e = (energy - center_) / scale_;
    return e > -1.0 && e < 1.0;
}

namespace {

// Row-major sparse kernels on column-major blocks. `acc` holds K column-stacked blocks.
template <class Matrix>
void kernel_apply(const Matrix& m, const Complex* in, Complex* out, Index dim, Index cols) {
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();
    const auto* val = m.valuePtr();
    for (Index c = 0; c < cols; ++c) {
        const Complex* x = in + c * dim;
        Complex* y = out + c * dim;
        for (Index i = 0; i < dim; ++i) {
            Complex sum{0.0, 0.0};
            for (int p = outer[i]; p < outer[i + 1]; ++p) sum += val[p] * x[inner[p]];
            y[i] = sum;
        }
    }
}

template <class Matrix>
void kernel_step(const Matrix& m, const Complex* t1, Complex* t0, Index dim, Index cols,
                 Complex* acc, Real c) {
    const int* outer = m.outerIndexPtr();
    const int* inner = m.innerIndexPtr();
    const auto* val = m.valuePtr();
    for (Index col = 0; col < cols; ++col) {
        const Complex* x = t1 + col * dim;
        Complex* y = t0 + col * dim;
        Complex* a = acc ? acc + col * dim : nullptr;
        for (Index i = 0; i < dim; ++i) {
            Complex sum{0.0, 0.0};
            for (int p = outer[i]; p < outer[i + 1]; ++p) sum += val[p] * x[inner[p]];
            const Complex next = 2.0 * sum - y[i];
            y[i] = next;
            if (a) a[i] += c * next;
        }
    }
}

}  // namespace

void ChebyshevOperator::apply(const MatrixXc& in, MatrixXc& out) const {
    out.resize(in.rows(), in.cols());
    std::visit([&](const auto& m) { kernel_apply(m, in.data(), out.data(), dim_, in.cols()); },
               matrix_);
}

void ChebyshevOperator::recurrence_step(const MatrixXc& t1, MatrixXc& t0, MatrixXc* acc,
                                        Real c) const {
    std::visit(
        [&](const auto& m) {
            kernel_step(m, t1.data(), t0.data(), dim_, t1.cols(), acc ? acc->data() : nullptr, c);
        },
        matrix_);
}

MatrixXr im_green_coeffs(const ChebyshevOperator& op, std::span<const ResolventPoint> points,
                         int moments) {
    MatrixXr c(moments, static_cast<Index>(points.size()));
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (!(points[k].eta > 0)) throw DomainError("eta must be > 0");
        const Complex z = op.to_unit({points[k].energy, points[k].eta});
        c.col(static_cast<Index>(k)) = resolvent_coeffs(z, moments).imag() / op.scale();
    }
    return c;
}

int auto_moments(const ChebyshevOperator& op, std::span<const ResolventPoint> points, Real tail) {
    int m = 2;
    for (const auto& p : points) {
        if (!(p.eta > 0)) throw DomainError("eta must be > 0");
        m = std::max(m, moments_for_tail(op.to_unit({p.energy, p.eta}), tail));
    }
    return m;
}

MatrixXc apply_im_green(const ChebyshevOperator& op, const Eigen::Ref<const VectorXr>& coeffs,
                        const Eigen::Ref<const MatrixXc>& v) {
    if (v.rows() != op.dim()) throw SizeMismatchError("vector dimension does not match operator");
    const Index moments = coeffs.size();
    MatrixXc t0 = v;
    MatrixXc acc = coeffs[0] * t0;
    if (moments == 1) return acc;
    MatrixXc t1;
    op.apply(t0, t1);
    acc += coeffs[1] * t1;
    for (Index n = 2; n < moments; ++n) {
        op.recurrence_step(t1, t0, &acc, coeffs[n]);
        t0.swap(t1);
    }
    return acc;
}

MatrixXc apply_im_green_multi(const ChebyshevOperator& op, const MatrixXr& coeffs,
                              const Eigen::Ref<const MatrixXc>& v) {
    if (v.rows() != op.dim()) throw SizeMismatchError("vector dimension does not match operator");
    const Index moments = coeffs.rows();
    const Index points = coeffs.cols();
    const Index len = v.size();
    if (points == 1) {
        MatrixXc one = apply_im_green(op, coeffs.col(0), v);
        return Eigen::Map<MatrixXc>(one.data(), len, 1);
    }

    // Chebyshev vectors are buffered and folded into the K accumulators with one real GEMM per
    // batch (complex data viewed as interleaved reals).
    constexpr Index kBatch = 32;
    MatrixXc acc = MatrixXc::Zero(len, points);
    MatrixXc buffer(len, kBatch);
    Index filled = 0, first = 0;
    auto flush = [&] {
        if (filled == 0) return;
        Eigen::Map<MatrixXr> acc_r(reinterpret_cast<Real*>(acc.data()), 2 * len, points);
        Eigen::Map<const MatrixXr> buf_r(reinterpret_cast<const Real*>(buffer.data()), 2 * len,
                                         filled);
        acc_r.noalias() += buf_r * coeffs.middleRows(first, filled);
        first += filled;
        filled = 0;
    };
    auto push = [&](const MatrixXc& t) {
        buffer.col(filled++) = Eigen::Map<const VectorXc>(t.data(), len);
        if (filled == kBatch) flush();
    };

    MatrixXc t0 = v;
    push(t0);
    if (moments > 1) {
        MatrixXc t1;
        op.apply(t0, t1);
        push(t1);
        for (Index n = 2; n < moments; ++n) {
            op.recurrence_step(t1, t0);
            t0.swap(t1);
            push(t1);
        }
    }
    flush();
    return acc;
}

VectorXr chebyshev_moments(const ChebyshevOperator& op, const Eigen::Ref<const MatrixXc>& v,
                           int moments) {
    if (v.rows() != op.dim()) throw SizeMismatchError("vector dimension does not match operator");
    VectorXr mu = VectorXr::Zero(moments);
    auto dot = [](const MatrixXc& a, const MatrixXc& b) {
        return (a.array().conjugate() * b.array()).sum().real();
    };
    MatrixXc t0 = v;
    MatrixXc t1;
    op.apply(t0, t1);
    const Real mu0 = dot(t0, t0);
    const Real mu1 = dot(t0, t1);
    mu[0] = mu0;
    if (moments > 1) mu[1] = mu1;
    // T_n pair (t0, t1) = (T_n v, T_{n+1} v): μ_2n = 2⟨T_n|T_n⟩ − μ0, μ_2n+1 = 2⟨T_n|T_n+1⟩ − μ1.
    for (int n = 1; 2 * n < moments; ++n) {
        op.recurrence_step(t1, t0);
        t0.swap(t1);
        mu[2 * n] = 2.0 * dot(t0, t0) - mu0;
        if (2 * n + 1 < moments) mu[2 * n + 1] = 2.0 * dot(t0, t1) - mu1;
    }
    return mu;
}

VectorXc random_phase_vector(Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> angle(0.0, 2.0 * kPi);
    VectorXc r(dim);
    for (Index i = 0; i < dim; ++i) r[i] = std::polar(1.0, angle(rng));
    return r;
}

void CPGFParams::validate() const {
    if (!(eta > 0) || !std::isfinite(eta)) throw DomainError("cpgf.eta must be > 0");
    if (moments && *moments < 2) throw DomainError("cpgf.moments must be >= 2");
    if (random_vectors < 1) throw DomainError("cpgf.random_vectors must be >= 1");
    if (!(margin > 0.0 && margin <= 0.1)) throw DomainError("cpgf.margin must lie in (0, 0.1]");
    if (!(tail > 0.0 && tail < 1.0)) throw DomainError("tail tolerance must lie in (0, 1)");
    if (bounds && !(bounds->upper >= bounds->lower)) throw DomainError("cpgf bounds are inverted");
}

namespace {

ChebyshevOperator make_operator(const SparseOperator& ham, const CPGFParams& params) {
    params.validate();
    const SpectralBounds b = params.bounds ? *params.bounds : spectral_bounds(ham);
    return ChebyshevOperator(ham, b, params.margin);
}

// Column chunks of the identity for exact traces.
constexpr Index kTraceChunk = 32;

Index trace_tasks(Index dim, const CPGFParams& params) {
    if (!params.exact_trace) return params.random_vectors;
    if (dim > kExactTraceMaxDim)
        throw SizeLimitError("exact trace limited to dimension " + std::to_string(kExactTraceMaxDim));
    return (dim + kTraceChunk - 1) / kTraceChunk;
}

MatrixXc trace_block(Index dim, Index task, const CPGFParams& params) {
    if (!params.exact_trace) return random_phase_vector(dim, derive_seed(params.seed, {static_cast<std::uint64_t>(task)}));
    const Index begin = task * kTraceChunk;
    const Index width = std::min(kTraceChunk, dim - begin);
    MatrixXc e = MatrixXc::Zero(dim, width);
    for (Index j = 0; j < width; ++j) e(begin + j, j) = 1.0;
    return e;
}

void check_grid(std::span<const Real> energies) {
    if (energies.empty()) throw DomainError("energy grid is empty");
    for (std::size_t i = 1; i < energies.size(); ++i)
        if (!(energies[i] > energies[i - 1]))
            throw DomainError("energy grid must be strictly increasing");
}

}  // namespace

SpectrumSample dos_cpgf(const SparseOperator& ham, const SiteTable& sites,
                        std::span<const Real> energies, const CPGFParams& params) {
    check_grid(energies);
    if (ham.rows() != sites.size()) throw SizeMismatchError("Hamiltonian and site table differ");
    const ChebyshevOperator op = make_operator(ham, params);
    const Index dim = op.dim();

    std::vector<ResolventPoint> points;
    for (Real e : energies) points.push_back({e, params.eta});
    const int moments = params.moments ? *params.moments : auto_moments(op, points, params.tail);
    const MatrixXr coeffs = im_green_coeffs(op, points, moments);

    const Index tasks = trace_tasks(dim, params);
    MatrixXr mu(moments, tasks);
    parallel_for(static_cast<std::size_t>(tasks), [&](std::size_t t) {
        mu.col(static_cast<Index>(t)) =
            chebyshev_moments(op, trace_block(dim, static_cast<Index>(t), params), moments);
    });

    const Real norm = -1.0 / (kPi * sites.n_cells());
    SpectrumSample out;
    out.energies = Eigen::Map<const ArrayXr>(energies.data(), static_cast<Index>(energies.size()));
    out.moments = moments;
    out.bounds = op.bounds();
    if (params.exact_trace) {
        out.values = norm * (coeffs.transpose() * mu.rowwise().sum()).array();
        out.stderr = ArrayXr::Zero(out.values.size());
        out.vectors = static_cast<int>(dim);
        return out;
    }
    out.per_vector = norm * (mu.transpose() * coeffs);  // R × energies
    out.values = out.per_vector.colwise().mean().transpose().array();
    out.stderr.resize(out.values.size());
    for (Index k = 0; k < out.values.size(); ++k) out.stderr[k] = sample_stderr(out.per_vector.col(k));
    out.stderr_available = tasks >= 2;
    out.vectors = static_cast<int>(tasks);
    return out;
}

std::vector<KuboResult> kubo_cpgf(const LatticeModel& model, const SparseOperator& v,
                                  std::span<const ResolventPoint> points, const CPGFParams& params) {
    const SparseOperator& ham = model.hamiltonian;
    if (v.rows() != ham.rows() || v.cols() != ham.cols())
        throw SizeMismatchError("velocity and Hamiltonian dimensions differ");
    if (points.empty()) throw DomainError("no energies requested");
    const ChebyshevOperator op = make_operator(ham, params);
    for (const auto& p : points)
        if (!op.contains(p.energy))
            throw DomainError("energy " + std::to_string(p.energy) + " outside the spectral bounds");

    const Index dim = op.dim();
    const Index npts = static_cast<Index>(points.size());
    const int moments = params.moments ? *params.moments : auto_moments(op, points, params.tail);
    const MatrixXr coeffs = im_green_coeffs(op, points, moments);
    const Index tasks = trace_tasks(dim, params);

    // Per task: block [r, v r] → W = ImG r, U = ImG v r; estimate Re⟨W| v |U⟩ = ⟨r|ImG v ImG v|r⟩.
    MatrixXr estimates(tasks, npts);
    parallel_for(static_cast<std::size_t>(tasks), [&](std::size_t t) {
        const MatrixXc r = trace_block(dim, static_cast<Index>(t), params);
        const Index w = r.cols();
        MatrixXc block(dim, 2 * w);
        block.leftCols(w) = r;
        block.rightCols(w) = v * r;
        const MatrixXc acc = apply_im_green_multi(op, coeffs, block);
        for (Index k = 0; k < npts; ++k) {
            Eigen::Map<const MatrixXc> res(acc.col(k).data(), dim, 2 * w);
            const MatrixXc vu = v * res.rightCols(w);
            estimates(static_cast<Index>(t), k) =
                (res.leftCols(w).array().conjugate() * vu.array()).sum().real();
        }
    });

    const Real norm = 1.0 / model.sites.n_cells();
    std::vector<KuboResult> out(static_cast<std::size_t>(npts));
    for (Index k = 0; k < npts; ++k) {
        auto& res = out[static_cast<std::size_t>(k)];
        res.moments = moments;
        if (params.exact_trace) {
            res.value = norm * estimates.col(k).sum();
            res.vectors = static_cast<int>(dim);
        } else {
            const VectorXr col = norm * estimates.col(k);
            res.value = col.mean();
            res.stderr = sample_stderr(col);
            res.stderr_available = tasks >= 2;
            res.vectors = static_cast<int>(tasks);
        }
    }
    return out;
}

KuboResult kubo_cpgf(const LatticeModel& model, const SparseOperator& v, Real energy,
                     const CPGFParams& params) {
    const ResolventPoint p{energy, params.eta};
    return kubo_cpgf(model, v, std::span<const ResolventPoint>(&p, 1), params).front();
}

namespace {

// Trapezoid of piecewise-linear y over [lo, hi] ⊆ [x0, x_{n−1}].
Real trapezoid(const ArrayXr& x, const Eigen::Ref<const VectorXr>& y, Real lo, Real hi) {
    auto at = [&](Index i, Real e) {
        const Real f = (e - x[i]) / (x[i + 1] - x[i]);
        return y[i] + f * (y[i + 1] - y[i]);
    };
    Real sum = 0.0;
    for (Index i = 0; i + 1 < x.size(); ++i) {
        const Real a = std::max(lo, x[i]);
        const Real b = std::min(hi, x[i + 1]);
        if (b <= a) continue;
        sum += 0.5 * (b - a) * (at(i, a) + at(i, b));
    }
    return sum;
}

}  // namespace

WindowWeight integrate_dos_window(const SpectrumSample& sample, Real lo, Real hi) {
    const ArrayXr& x = sample.energies;
    if (!(hi > lo)) throw DomainError("empty integration window");
    if (x.size() < 2 || lo < x[0] - 1e-12 || hi > x[x.size() - 1] + 1e-12)
        throw DomainError("integration window exceeds the energy grid");
    WindowWeight w;
    w.weight = trapezoid(x, sample.values.matrix(), lo, hi);
    if (sample.stderr_available && sample.per_vector.rows() >= 2) {
        VectorXr per(sample.per_vector.rows());
        for (Index r = 0; r < per.size(); ++r)
            per[r] = trapezoid(x, sample.per_vector.row(r).transpose(), lo, hi);
        w.stderr = sample_stderr(per);
    }
    return w;
}

Real lorentzian_window_fraction(Real k) {
    if (!(k > 0)) throw DomainError("window half-width must be positive");
    return 2.0 / kPi * std::atan(k);
}

WindowWeight flat_band_weight(const SpectrumSample& sample, Real energy, Real eta, Real k) {
    WindowWeight w = integrate_dos_window(sample, energy - k * eta, energy + k * eta);
    const Real f = lorentzian_window_fraction(k);
    w.weight /= f;
    w.stderr /= f;
    return w;
}

}  // namespace fbt
