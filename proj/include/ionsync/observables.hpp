#pragma once

// State functionals: logarithmic negativity across the qubit | phonon cut,
// Wigner function and phase distribution of the phonon mode, and the
// synchronization measure S = <a>/sqrt(<a†a>).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ionsync/hilbert.hpp"

namespace ionsync {

/// Transpose over the qubit factor: with qubit-slowest ordering this swaps
/// the two off-diagonal n x n blocks.
inline Matrix partial_transpose_qubit(const Matrix& rho) {
    const Eigen::Index n = rho.rows() / 2;
    Matrix out = rho;
    out.topRightCorner(n, n) = rho.bottomLeftCorner(n, n);
    out.bottomLeftCorner(n, n) = rho.topRightCorner(n, n);
    return out;
}

/// E_n = log2 ||ρ^{T_A}||_1 with A the qubit.
inline double log_negativity(const Matrix& rho, double herm_tol = 1e-8) {
    if (rho.rows() != rho.cols() || rho.rows() % 2 != 0)
        throw invalid_parameter("log_negativity: expected a 2N x 2N density matrix");
    const double asym = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    if (asym > herm_tol) throw invalid_parameter("log_negativity: input is not Hermitian (" + std::to_string(asym) + ")");
    Matrix pt = partial_transpose_qubit(rho);
    pt = 0.5 * (pt + pt.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(pt, Eigen::EigenvaluesOnly);
    const double trace_norm = es.eigenvalues().cwiseAbs().sum();
    const double en = std::log2(trace_norm);
    return (en < 0.0 && en >= -1e-10) ? 0.0 : en;
}

inline double log_negativity(const QuantumState& s) { return log_negativity(s.rho); }

inline double mean_phonons(const Matrix& rho) {
    const Matrix ph = phonon_reduced(rho);
    double n = 0.0;
    for (Eigen::Index k = 0; k < ph.rows(); ++k) n += static_cast<double>(k) * ph(k, k).real();
    return n;
}

/// <a> from the phonon reduced matrix: Σ_n sqrt(n) ρ(n, n-1).
inline cplx mean_amplitude(const Matrix& rho) {
    const Matrix ph = phonon_reduced(rho);
    cplx a = 0.0;
    for (Eigen::Index k = 1; k < ph.rows(); ++k) a += std::sqrt(static_cast<double>(k)) * ph(k, k - 1);
    return a;
}

/// S = |S| e^{iθ} = <a> / sqrt(<a†a>).
inline cplx sync_measure(const Matrix& rho) {
    const double n = mean_phonons(rho);
    if (!(n > 1e-14)) throw undefined_measure("sync measure undefined for zero mean phonon number");
    return mean_amplitude(rho) / std::sqrt(n);
}

inline cplx sync_measure(const QuantumState& s) { return sync_measure(s.rho); }

// ---------------------------------------------------------------------------
// Wigner function, x = (a + a†)/√2, p = (a - a†)/(√2 i).

struct WignerGrid {
    double x_min = -5.0;
    double x_max = 5.0;
    int nx = 201;
    double p_min = -5.0;
    double p_max = 5.0;
    int np = 201;

    double x(int i) const { return nx == 1 ? x_min : x_min + (x_max - x_min) * i / (nx - 1); }
    double p(int j) const { return np == 1 ? p_min : p_min + (p_max - p_min) * j / (np - 1); }
    double dx() const { return nx == 1 ? 1.0 : (x_max - x_min) / (nx - 1); }
    double dp() const { return np == 1 ? 1.0 : (p_max - p_min) / (np - 1); }
};

struct WignerField {
    std::vector<double> xs;
    std::vector<double> ps;
    Eigen::MatrixXd values; // values(i, j) = W(xs[i], ps[j])
    double normalization = 0.0;
    std::vector<std::string> warnings;
};

/// W(x, p) = Tr[ρ_ph Ŵ] with Ŵ = D(β) Π / π, β = √2 (x + i p), Π the parity.
/// Matrix elements of the displacement operator come from generalized
/// Laguerre polynomials, evaluated by their three-term recurrence.
inline double wigner_point(const Matrix& rho_ph, double x, double p) {
    const Eigen::Index n = rho_ph.rows();
    const cplx beta = std::sqrt(2.0) * cplx(x, p);
    const double b2 = std::norm(beta);
    std::vector<double> lag(static_cast<std::size_t>(n));

    double diag = 0.0;
    cplx off = 0.0;
    cplx beta_k = 1.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        // lag[m] = L_m^{(k)}(|β|²), m = 0 .. n-1-k
        const Eigen::Index count = n - k;
        lag[0] = 1.0;
        if (count > 1) lag[1] = 1.0 + static_cast<double>(k) - b2;
        for (Eigen::Index m = 1; m + 1 < count; ++m)
            lag[static_cast<std::size_t>(m + 1)] =
                ((2.0 * m + 1.0 + k - b2) * lag[static_cast<std::size_t>(m)] -
                 (m + static_cast<double>(k)) * lag[static_cast<std::size_t>(m - 1)]) / (m + 1.0);

        // sqrt(m!/(m+k)!) accumulated alongside m
        double ratio = 1.0;
        for (Eigen::Index j = 1; j <= k; ++j) ratio /= std::sqrt(static_cast<double>(j));
        for (Eigen::Index m = 0; m < count; ++m) {
            if (m > 0) ratio *= std::sqrt(static_cast<double>(m) / static_cast<double>(m + k));
            const double sign = (m % 2 == 0) ? 1.0 : -1.0;
            const double w = sign * ratio * lag[static_cast<std::size_t>(m)];
            if (k == 0)
                diag += rho_ph(m, m).real() * w;
            else
                off += rho_ph(m, m + k) * beta_k * w;
        }
        beta_k *= beta;
    }
    return std::exp(-0.5 * b2) * (diag + 2.0 * off.real()) / std::numbers::pi;
}

inline WignerField wigner(const Matrix& rho, const WignerGrid& grid) {
    if (grid.nx < 1 || grid.np < 1) throw invalid_parameter("wigner: empty grid");
    const Matrix ph = phonon_reduced(rho);
    WignerField f;
    f.xs.resize(static_cast<std::size_t>(grid.nx));
    f.ps.resize(static_cast<std::size_t>(grid.np));
    for (int i = 0; i < grid.nx; ++i) f.xs[static_cast<std::size_t>(i)] = grid.x(i);
    for (int j = 0; j < grid.np; ++j) f.ps[static_cast<std::size_t>(j)] = grid.p(j);
    f.values.resize(grid.nx, grid.np);
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.np; ++j) f.values(i, j) = wigner_point(ph, grid.x(i), grid.p(j));
    f.normalization = f.values.sum() * grid.dx() * grid.dp();
    if (grid.nx > 1 && grid.np > 1 && std::abs(f.normalization - 1.0) > 0.05)
        f.warnings.push_back("Wigner grid too coarse or too small: integral = " + std::to_string(f.normalization));
    return f;
}

inline WignerField wigner(const QuantumState& s, const WignerGrid& grid = {}) { return wigner(s.rho, grid); }

// ---------------------------------------------------------------------------
// Phase distribution P(φ) = Σ_{n,m} e^{i(m-n)φ} <n|ρ_ph|m> / 2π.

struct PhaseDistribution {
    std::vector<double> phis;
    std::vector<double> values;

    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s * 2.0 * std::numbers::pi / static_cast<double>(values.size());
    }
    double spread() const {
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        return *hi - *lo;
    }
};

inline PhaseDistribution phase_distribution(const Matrix& rho, int n_phi) {
    if (n_phi < 64) throw invalid_parameter("phase_distribution: n_phi must be >= 64");
    const Matrix ph = phonon_reduced(rho);
    const Eigen::Index n = ph.rows();
    double population = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) population += ph(k, k).real();
    std::vector<cplx> coherence(static_cast<std::size_t>(n), 0.0); // Σ_m ρ(m, m+k)
    for (Eigen::Index k = 1; k < n; ++k)
        for (Eigen::Index m = 0; m + k < n; ++m) coherence[static_cast<std::size_t>(k)] += ph(m, m + k);

    PhaseDistribution out;
    out.phis.resize(static_cast<std::size_t>(n_phi));
    out.values.resize(static_cast<std::size_t>(n_phi));
    for (int i = 0; i < n_phi; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / n_phi;
        double v = population;
        for (Eigen::Index k = 1; k < n; ++k)
            v += 2.0 * (coherence[static_cast<std::size_t>(k)] * std::polar(1.0, static_cast<double>(k) * phi)).real();
        out.phis[static_cast<std::size_t>(i)] = phi;
        out.values[static_cast<std::size_t>(i)] = v / (2.0 * std::numbers::pi);
    }
    return out;
}

inline PhaseDistribution phase_distribution(const QuantumState& s, int n_phi = 256) {
    return phase_distribution(s.rho, n_phi);
}

} // namespace ionsync
