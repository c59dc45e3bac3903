#pragma once

// Arnoldi iteration with full reorthogonalization. Used in shift-invert mode
// to extract the eigenvalues of a sparse Liouvillian closest to a shift.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ionsync/error.hpp"

namespace ionsync::linalg {

struct RitzPairs {
    Eigen::VectorXcd values;  // Ritz values of the operator
    Eigen::MatrixXcd vectors; // unit-norm Ritz vectors, one per column
    Eigen::VectorXd residuals; // |h_{m+1,m}| |e_m^T y|
};

/// m-step Arnoldi factorization of `op` started from `start`; returns all m
/// Ritz pairs. Stops early on an invariant subspace.
template <class Op>
RitzPairs arnoldi(Op&& op, const Eigen::VectorXcd& start, Eigen::Index m) {
    const Eigen::Index n = start.size();
    m = std::min(m, n);
    Eigen::MatrixXcd v(n, m + 1);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(m + 1, m);
    v.col(0) = start / start.norm();

    Eigen::Index steps = m;
    for (Eigen::Index j = 0; j < m; ++j) {
        Eigen::VectorXcd w = op(v.col(j));
        // Two passes of classical Gram-Schmidt.
        for (int pass = 0; pass < 2; ++pass) {
            const Eigen::VectorXcd c = v.leftCols(j + 1).adjoint() * w;
            w.noalias() -= v.leftCols(j + 1) * c;
            h.col(j).head(j + 1) += c;
        }
        const double beta = w.norm();
        h(j + 1, j) = beta;
        if (beta < 1e-14 * h.col(j).head(j + 1).norm()) {
            steps = j + 1;
            break;
        }
        v.col(j + 1) = w / beta;
    }

    const Eigen::MatrixXcd hm = h.topLeftCorner(steps, steps);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(hm, true);
    if (es.info() != Eigen::Success) throw eigensolver_error("Hessenberg eigensolve failed");

    RitzPairs out;
    out.values = es.eigenvalues();
    out.vectors.resize(n, steps);
    out.residuals.resize(steps);
    const double beta = std::abs(h(steps, steps - 1));
    for (Eigen::Index i = 0; i < steps; ++i) {
        Eigen::VectorXcd y = es.eigenvectors().col(i);
        y /= y.norm();
        out.vectors.col(i) = v.leftCols(steps) * y;
        out.residuals(i) = beta * std::abs(y(steps - 1));
    }
    return out;
}

/// Deterministic start vector so repeated runs return identical spectra.
inline Eigen::VectorXcd arnoldi_start(Eigen::Index n, unsigned seed = 12345u) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = {1.0 + 0.5 * u(gen), 0.5 * u(gen)};
    return s;
}

/// The `nev` Ritz pairs of largest modulus, restarting with a larger basis
/// until their residuals fall below tol * |θ|.
template <class Op>
RitzPairs dominant_ritz_pairs(Op&& op, Eigen::Index n, Eigen::Index nev, double tol = 1e-10,
                              Eigen::Index max_basis = 600) {
    if (nev > n) nev = n;
    Eigen::Index m = std::min<Eigen::Index>(n, std::max<Eigen::Index>(2 * nev + 30, 80));
    const Eigen::VectorXcd start = arnoldi_start(n);
    for (;;) {
        RitzPairs all = arnoldi(op, start, m);
        std::vector<Eigen::Index> order(static_cast<std::size_t>(all.values.size()));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
        std::sort(order.begin(), order.end(), [&](auto a, auto b) {
            return std::abs(all.values(a)) > std::abs(all.values(b));
        });
        const Eigen::Index take = std::min<Eigen::Index>(nev, static_cast<Eigen::Index>(order.size()));
        RitzPairs out;
        out.values.resize(take);
        out.vectors.resize(n, take);
        out.residuals.resize(take);
        bool converged = true;
        for (Eigen::Index i = 0; i < take; ++i) {
            const auto k = order[static_cast<std::size_t>(i)];
            out.values(i) = all.values(k);
            out.vectors.col(i) = all.vectors.col(k);
            out.residuals(i) = all.residuals(k);
            if (all.residuals(k) > tol * std::abs(all.values(k))) converged = false;
        }
        if (converged || m >= n) return out;
        if (m >= max_basis)
            throw convergence_error("Arnoldi: Ritz pairs not converged with basis size " + std::to_string(m));
        m = std::min<Eigen::Index>({n, 2 * m, max_basis});
    }
}

} // namespace ionsync::linalg
