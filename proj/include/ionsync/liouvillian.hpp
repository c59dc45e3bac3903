#pragma once

// Lindblad generator for the driven phonon laser
//
//   dρ/dt = -i[H, ρ] + γ D[σ-]ρ + Γ D[a]ρ,   D[C]ρ = CρC† - {C†C, ρ}/2
//
// in two equivalent forms: a matrix-form action on d x d density matrices and
// the d² x d² superoperator acting on column-stacked vec(ρ), where
// vec(ρ)[i + j d] = ρ(i, j) and vec(A X B) = (Bᵀ ⊗ A) vec(X).
//
// The superoperator is stored sparse (about ten entries per row). Spectra are
// computed either densely with LAPACK (small truncations, or when every mode
// is requested) or by shift-invert Arnoldi on a sparse LU factorization.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "ionsync/hilbert.hpp"
#include "ionsync/krylov.hpp"
#include "ionsync/linalg.hpp"
#include "ionsync/parallel.hpp"

namespace ionsync {

using SparseMatrix = Eigen::SparseMatrix<cplx>;

inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Vector& v, Eigen::Index d) {
    if (v.size() != d * d) throw invalid_parameter("unvec: size is not d^2");
    return Eigen::Map<const Matrix>(v.data(), d, d);
}

/// Sparse Kronecker product, `outer` as the slow index.
inline SparseMatrix kron(const SparseMatrix& outer, const SparseMatrix& inner) {
    std::vector<Eigen::Triplet<cplx>> t;
    t.reserve(static_cast<std::size_t>(outer.nonZeros() * inner.nonZeros()));
    for (Eigen::Index oc = 0; oc < outer.outerSize(); ++oc)
        for (SparseMatrix::InnerIterator o(outer, oc); o; ++o)
            for (Eigen::Index ic = 0; ic < inner.outerSize(); ++ic)
                for (SparseMatrix::InnerIterator in(inner, ic); in; ++in)
                    t.emplace_back(o.row() * inner.rows() + in.row(), o.col() * inner.cols() + in.col(),
                                   o.value() * in.value());
    SparseMatrix out(outer.rows() * inner.rows(), outer.cols() * inner.cols());
    out.setFromTriplets(t.begin(), t.end());
    return out;
}

/// Matrix-form Lindblad generator. apply(ρ) = Kρ + ρK† + Σ CρC† with
/// K = -iH - ½ Σ C†C.
struct LindbladGenerator {
    Matrix hamiltonian;
    std::vector<Matrix> jumps;
    Matrix effective;

    LindbladGenerator(Matrix h, std::vector<Matrix> c) : hamiltonian(std::move(h)), jumps(std::move(c)) {
        effective = -I * hamiltonian;
        for (const auto& j : jumps) effective -= 0.5 * (j.adjoint() * j);
    }

    Eigen::Index dim() const { return hamiltonian.rows(); }

    Matrix apply(const Matrix& rho) const {
        Matrix out = effective * rho;
        out.noalias() += rho * effective.adjoint();
        for (const auto& j : jumps) out.noalias() += j * rho * j.adjoint();
        return out;
    }
};

inline LindbladGenerator build_generator(const SystemParams& p) {
    const Operators ops = build_operators(p);
    return LindbladGenerator(build_hamiltonian(p, ops),
                             {std::sqrt(p.gamma) * ops.sigma_minus, std::sqrt(p.big_gamma) * ops.a});
}

/// Liouvillian acting on column-stacked density matrices.
struct SuperOperator {
    SparseMatrix matrix;
    Eigen::Index d = 0;

    Eigen::Index dim() const { return d; }

    Matrix apply(const Matrix& rho) const {
        const Vector out = matrix * vec(rho);
        return unvec(out, d);
    }

    Matrix dense() const { return Matrix(matrix); }
};

inline SuperOperator to_superoperator(const LindbladGenerator& g) {
    const Eigen::Index d = g.dim();
    SparseMatrix id(d, d);
    id.setIdentity();
    const SparseMatrix k = g.effective.sparseView();
    SuperOperator L;
    L.d = d;
    // ρ -> Kρ + ρK† + Σ CρC†
    L.matrix = kron(id, k) + kron(SparseMatrix(k.conjugate()), id);
    for (const auto& c : g.jumps) {
        const SparseMatrix cs = c.sparseView();
        L.matrix += kron(SparseMatrix(cs.conjugate()), cs);
    }
    L.matrix.makeCompressed();
    return L;
}

inline SuperOperator build_liouvillian(const SystemParams& p) {
    p.validate();
    return to_superoperator(build_generator(p));
}

/// vec(I); trace preservation means vec(I)† L = 0.
inline Vector trace_functional(Eigen::Index d) {
    Vector t = Vector::Zero(d * d);
    for (Eigen::Index i = 0; i < d; ++i) t(i + i * d) = 1.0;
    return t;
}

struct SteadyStateOptions {
    double residual_tol = 1e-8;  // relative to ||L||_F
    double rcond_floor = 1e-13;  // below this the null space is taken as degenerate
    double positivity_tol = 1e-8;
};

/// Steady state from the bordered system: the ρ(0,0) population row of L is
/// replaced by the trace constraint and the result solved by sparse LU.
inline QuantumState steady_state(const SuperOperator& L, const SteadyStateOptions& opt = {}) {
    const Eigen::Index d = L.dim();
    const Eigen::Index n = d * d;

    // Row 0 is a linear combination of the other population rows once trace
    // preservation holds, so replacing it loses nothing.
    Eigen::SparseMatrix<cplx, Eigen::RowMajor> rows = L.matrix;
    for (Eigen::SparseMatrix<cplx, Eigen::RowMajor>::InnerIterator it(rows, 0); it; ++it) it.valueRef() = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) rows.coeffRef(0, i + i * d) = 1.0;
    SparseMatrix a = rows;
    a.prune(cplx(0.0));
    a.makeCompressed();

    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success)
        throw multiple_steady_states("steady state is not unique (singular bordered system: " + lu.lastErrorMessage() + ")");

    // Inverse power iteration on (A^H A)^{-1} for the smallest singular value.
    Vector x = linalg::arnoldi_start(n, 7u);
    x.normalize();
    double inv_sigma_sq = 0.0;
    for (int it = 0; it < 6; ++it) {
        const Vector y = lu.solve(x);
        const Vector z = lu.adjoint().solve(y);
        inv_sigma_sq = z.norm();
        if (!std::isfinite(inv_sigma_sq)) break;
        x = z / inv_sigma_sq;
    }
    const double sigma_min = std::isfinite(inv_sigma_sq) && inv_sigma_sq > 0.0 ? 1.0 / std::sqrt(inv_sigma_sq) : 0.0;
    const double rcond = sigma_min / a.norm();
    if (rcond < opt.rcond_floor)
        throw multiple_steady_states("steady state is not unique (rcond ~ " + std::to_string(rcond) + ")");

    Vector b = Vector::Zero(n);
    b(0) = 1.0;
    Matrix rho = unvec(lu.solve(b), d);
    rho = 0.5 * (rho + rho.adjoint());
    rho /= rho.trace().real();

    const double residual = (L.matrix * vec(rho)).norm();
    const double scale = L.matrix.norm();
    if (!(residual <= opt.residual_tol * scale))
        throw convergence_error("steady-state residual " + std::to_string(residual) + " above tolerance");
    const StateCheck chk = check_state(rho);
    if (chk.min_eigenvalue < -opt.positivity_tol)
        throw convergence_error("steady state not positive: min eigenvalue " + std::to_string(chk.min_eigenvalue));
    return QuantumState{std::move(rho), 0.0};
}

inline QuantumState steady_state(const SystemParams& p) { return steady_state(build_liouvillian(p)); }

struct EigenMode {
    cplx lambda;
    double decay_rate = 0.0; // |Re λ|
    double frequency = 0.0;  // Im λ
    Matrix right;            // ρ_j; unit Frobenius norm (mode 0: unit trace)
    Matrix left;             // σ_j with Tr[σ_i ρ_j] = δ_ij
    double condition = 1.0;  // 1 / |u^H v| for unit left/right eigenvectors
    bool defective = false;
    int index = 0;
};

struct Spectrum {
    std::vector<EigenMode> modes;
    double spectral_radius = 0.0; // of the eigenvalues actually computed
    bool complete = false;        // every eigenmode of L is present
    bool any_defective() const {
        return std::any_of(modes.begin(), modes.end(), [](const EigenMode& m) { return m.defective; });
    }
};

/// Order by ascending decay rate; decay rates equal within tie_tol are ordered by
/// ascending Im λ so the conjugate pair (λ1, λ2) always has ν1 <= ν2.
inline std::vector<Eigen::Index> decay_order(const Eigen::VectorXcd& values, double tie_tol) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(values(a).real()) < std::abs(values(b).real());
    });
    std::size_t start = 0;
    while (start < idx.size()) {
        std::size_t stop = start + 1;
        while (stop < idx.size() &&
               std::abs(values(idx[stop]).real()) - std::abs(values(idx[stop - 1]).real()) <= tie_tol)
            ++stop;
        std::sort(idx.begin() + static_cast<std::ptrdiff_t>(start), idx.begin() + static_cast<std::ptrdiff_t>(stop),
                  [&](Eigen::Index a, Eigen::Index b) { return values(a).imag() < values(b).imag(); });
        start = stop;
    }
    return idx;
}

inline double tie_tolerance(const Eigen::VectorXcd& values) {
    const double radius = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
    return 1e-9 * std::max(1.0, radius);
}

enum class EigenMethod { automatic, dense, shift_invert };

struct SpectrumOptions {
    EigenMethod method = EigenMethod::automatic;
    Eigen::Index dense_limit = 1024; // automatic: dense LAPACK up to this d²
    cplx shift = 0.1;                // shift-invert target, right of the spectrum
    Eigen::Index extra = 16;         // additional Ritz pairs beyond the request
    double ritz_tol = 1e-10;
    double defective_condition = 1e6;
};

/// Raw (unsorted) eigenpairs: either the full dense problem or the ones
/// closest to the shift.
struct EigenPairs {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd left;
    Eigen::MatrixXcd right;
    bool complete = false;
};

namespace detail {

inline bool use_dense(const SuperOperator& L, std::size_t count, const SpectrumOptions& opt) {
    const Eigen::Index n = L.dim() * L.dim();
    switch (opt.method) {
    case EigenMethod::dense: return true;
    case EigenMethod::shift_invert: return false;
    case EigenMethod::automatic: break;
    }
    return n <= opt.dense_limit || static_cast<Eigen::Index>(count) + opt.extra >= n / 2;
}

inline EigenPairs shift_invert_pairs(const SuperOperator& L, std::size_t count, bool want_vectors,
                                     const SpectrumOptions& opt) {
    const Eigen::Index n = L.dim() * L.dim();
    SparseMatrix shifted = L.matrix;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= opt.shift;
    shifted.makeCompressed();
    Eigen::SparseLU<SparseMatrix> lu;
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) throw eigensolver_error("shift-invert factorization failed: " + lu.lastErrorMessage());

    const Eigen::Index nev = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(count) + opt.extra);
    auto solve = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return lu.solve(x); };
    const auto right = linalg::dominant_ritz_pairs(solve, n, nev, opt.ritz_tol);

    EigenPairs out;
    out.values.resize(right.values.size());
    for (Eigen::Index i = 0; i < right.values.size(); ++i) out.values(i) = opt.shift + 1.0 / right.values(i);
    if (!want_vectors) return out;
    out.right = right.vectors;

    // Left vectors: Arnoldi on (L - σ)^{-H}, whose eigenvalues are conj(1/(λ - σ)).
    auto solve_adj = [&](const Eigen::VectorXcd& x) -> Eigen::VectorXcd { return lu.adjoint().solve(x); };
    const auto left = linalg::dominant_ritz_pairs(solve_adj, n, std::min<Eigen::Index>(n, nev + 8), opt.ritz_tol);
    out.left.resize(n, out.values.size());
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        Eigen::Index best = 0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < left.values.size(); ++k) {
            const cplx lam = opt.shift + 1.0 / std::conj(left.values(k));
            const double dist = std::abs(lam - out.values(i));
            if (dist < best_dist) {
                best_dist = dist;
                best = k;
            }
        }
        out.left.col(i) = left.vectors.col(best);
    }
    return out;
}

} // namespace detail

inline EigenPairs eigen_pairs(const SuperOperator& L, std::size_t count, bool want_vectors,
                              const SpectrumOptions& opt = {}) {
    if (detail::use_dense(L, count, opt)) {
        auto dec = linalg::eig(L.dense(), want_vectors);
        return EigenPairs{std::move(dec.values), std::move(dec.left), std::move(dec.right), true};
    }
    return detail::shift_invert_pairs(L, count, want_vectors, opt);
}

/// The `count` slowest eigenvalues of L sorted by ascending decay rate.
inline std::vector<cplx> sorted_eigenvalues(const SuperOperator& L, std::size_t count,
                                            const SpectrumOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(L.dim() * L.dim());
    count = std::min(count, n);
    const auto pairs = eigen_pairs(L, count, false, opt);
    const auto order = decay_order(pairs.values, tie_tolerance(pairs.values));
    std::vector<cplx> out;
    for (std::size_t i = 0; i < std::min(count, order.size()); ++i) out.push_back(pairs.values(order[i]));
    return out;
}

/// The k slowest eigenmodes of L, biorthonormalized so that Tr[σ_i ρ_j] = δ_ij.
inline Spectrum eigenspectrum(const SuperOperator& L, std::size_t k, const SpectrumOptions& opt = {}) {
    const Eigen::Index d = L.dim();
    const auto n = static_cast<std::size_t>(d * d);
    if (k > n) throw invalid_parameter("eigenspectrum: k exceeds d^2");

    const auto pairs = eigen_pairs(L, k, true, opt);
    const auto order = decay_order(pairs.values, tie_tolerance(pairs.values));
    if (order.size() < k) throw eigensolver_error("eigenspectrum: fewer eigenpairs than requested");

    Spectrum s;
    s.spectral_radius = pairs.values.cwiseAbs().maxCoeff();
    s.complete = pairs.complete && k == n;
    s.modes.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        const Eigen::Index col = order[j];
        EigenMode m;
        m.index = static_cast<int>(j);
        m.lambda = pairs.values(col);
        m.decay_rate = std::abs(m.lambda.real());
        m.frequency = m.lambda.imag();

        const Vector v = pairs.right.col(col) / pairs.right.col(col).norm();
        const Vector u = pairs.left.col(col) / pairs.left.col(col).norm();
        m.condition = 1.0 / std::abs(u.dot(v)); // u^H v
        m.defective = !(m.condition <= opt.defective_condition);

        m.right = unvec(v, d);
        if (j == 0) {
            const cplx tr = m.right.trace();
            if (std::abs(tr) > 0.0) m.right /= tr;
        }
        // Tr[U† X] = u^H vec(X); σ = U† scaled so Tr[σ ρ] = 1.
        const Matrix u_adj = unvec(u, d).adjoint();
        const cplx norm = (u_adj * m.right).trace();
        m.left = m.defective ? u_adj : Matrix(u_adj / norm);
        s.modes.push_back(std::move(m));
    }
    return s;
}

inline Spectrum eigenspectrum(const SuperOperator& L) {
    return eigenspectrum(L, static_cast<std::size_t>(L.dim() * L.dim()));
}

/// Eigenmode expansion ρ(t) = Σ_j Tr[σ_j ρ(0)] ρ_j e^{λ_j t}; mode 0 carries ρ_ss.
inline Matrix reconstruct(const Spectrum& s, const Matrix& rho0, double t) {
    if (s.any_defective())
        throw defective_modes("eigen-expansion refused: spectrum contains defective modes");
    if (s.modes.empty()) throw invalid_parameter("reconstruct: empty spectrum");
    Matrix out = Matrix::Zero(rho0.rows(), rho0.cols());
    for (const auto& m : s.modes) {
        const cplx coeff = (m.left * rho0).trace() * std::exp(m.lambda * t);
        out += coeff * m.right;
    }
    return out;
}

enum class PairKind { real_pair, conjugate_pair };

inline const char* to_string(PairKind k) { return k == PairKind::real_pair ? "real-pair" : "conjugate-pair"; }

struct LepProbe {
    double detuning = 0.0;
    cplx lambda1;
    cplx lambda2;
    PairKind kind = PairKind::real_pair;
};

struct LepScanResult {
    std::vector<LepProbe> probes; // in evaluation order
    double delta_ep = 0.0;
    double tolerance = 0.0;
};

inline constexpr double kRealTolerance = 1e-6;

inline LepProbe probe_pair(const SystemParams& p, double real_tol = kRealTolerance,
                           const SpectrumOptions& opt = {}) {
    const auto vals = sorted_eigenvalues(build_liouvillian(p), 3, opt);
    if (vals.size() < 3) throw invalid_parameter("probe_pair: spectrum too small");
    LepProbe pr;
    pr.detuning = p.detuning;
    pr.lambda1 = vals[1];
    pr.lambda2 = vals[2];
    pr.kind = std::abs(pr.lambda1.imag()) < real_tol ? PairKind::real_pair : PairKind::conjugate_pair;
    return pr;
}

/// Classification of (λ1, λ2) over a detuning grid, evaluated in parallel.
inline std::vector<LepProbe> scan_pair(const SystemParams& p, const std::vector<double>& detunings,
                                       unsigned threads = default_threads(),
                                       double real_tol = kRealTolerance, const SpectrumOptions& opt = {}) {
    return parallel_map(detunings.size(), threads,
                        [&](std::size_t i) { return probe_pair(p.with_detuning(detunings[i]), real_tol, opt); });
}

/// Bisects the detuning at which (λ1, λ2) turns from a real pair into a
/// conjugate pair.
inline LepScanResult find_lep(const SystemParams& p, double lo, double hi, double tol,
                              double real_tol = kRealTolerance, const SpectrumOptions& opt = {}) {
    if (!(hi > lo) || !(tol > 0.0)) throw invalid_parameter("find_lep: need lo < hi and tol > 0");
    LepScanResult r;
    r.tolerance = tol;
    auto probe = [&](double delta) {
        r.probes.push_back(probe_pair(p.with_detuning(delta), real_tol, opt));
        return r.probes.back().kind;
    };
    const PairKind k_lo = probe(lo);
    const PairKind k_hi = probe(hi);
    if (k_lo == k_hi)
        throw not_found("find_lep: eigenvalue pair is " + std::string(to_string(k_lo)) +
                        " at both ends of the detuning range");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (probe(mid) == k_lo)
            lo = mid;
        else
            hi = mid;
    }
    r.delta_ep = 0.5 * (lo + hi);
    return r;
}

} // namespace ionsync
