#pragma once

// Operators on the truncated qubit (x) Fock space of a single trapped ion.
//
// Basis ordering is qubit ⊗ Fock with the qubit index slowest:
//   |g,0>, |g,1>, ..., |g,N-1>, |e,0>, ..., |e,N-1>
// so index(q, n) = q*N + n with q = 0 for |g> and q = 1 for |e>.
// All rates and times are in units of the mechanical damping rate Γ.

#include <complex>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ionsync/error.hpp"

namespace ionsync {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr cplx I{0.0, 1.0};

struct SystemParams {
    double eta = 0.1;       // Lamb-Dicke parameter
    double omega = 25.0;    // blue-sideband Rabi frequency
    double gamma = 10.0;    // effective spontaneous emission rate
    double big_gamma = 1.0; // mechanical damping rate (unit of all rates)
    double drive_f = 0.0;   // external drive strength
    double detuning = 0.0;  // drive detuning, omega_d - nu
    int n_fock = 30;        // retained phonon levels

    int dim() const { return 2 * n_fock; }

    void validate() const {
        if (!(eta > 0.0)) throw invalid_parameter("eta must be > 0");
        if (!(omega >= 0.0)) throw invalid_parameter("omega must be >= 0");
        if (!(gamma > 0.0)) throw invalid_parameter("gamma must be > 0");
        if (!(big_gamma > 0.0)) throw invalid_parameter("big_gamma must be > 0");
        if (!(drive_f >= 0.0)) throw invalid_parameter("drive_f must be >= 0");
        if (!std::isfinite(detuning)) throw invalid_parameter("detuning must be finite");
        if (n_fock < 2) throw invalid_parameter("n_fock must be >= 2");
    }

    SystemParams with_detuning(double d) const {
        SystemParams p = *this;
        p.detuning = d;
        return p;
    }
    SystemParams with_drive(double f) const {
        SystemParams p = *this;
        p.drive_f = f;
        return p;
    }
    SystemParams with_fock(int n) const {
        SystemParams p = *this;
        p.n_fock = n;
        return p;
    }
};

/// Lamb-Dicke advisory: eta^2 (2 n + 1) should stay well below one.
inline double lamb_dicke_factor(const SystemParams& p, double mean_phonons) {
    return p.eta * p.eta * (2.0 * mean_phonons + 1.0);
}

inline std::string lamb_dicke_warning(const SystemParams& p, double mean_phonons,
                                      double threshold = 0.1) {
    const double f = lamb_dicke_factor(p, mean_phonons);
    if (f < threshold) return {};
    return "Lamb-Dicke condition marginal: eta^2(2n+1) = " + std::to_string(f);
}

inline Eigen::Index basis_index(int qubit, int n, int n_fock) {
    return static_cast<Eigen::Index>(qubit) * n_fock + n;
}

struct Operators {
    Matrix a;
    Matrix a_dag;
    Matrix sigma_minus;
    Matrix sigma_plus;
    Matrix sigma_z;
};

inline Operators build_operators(const SystemParams& p) {
    p.validate();
    const int n = p.n_fock;

    Matrix fock_a = Matrix::Zero(n, n);
    for (int k = 1; k < n; ++k) fock_a(k - 1, k) = std::sqrt(static_cast<double>(k));
    const Matrix id_fock = Matrix::Identity(n, n);

    Matrix qubit_minus = Matrix::Zero(2, 2); // |g><e|
    qubit_minus(0, 1) = 1.0;
    Matrix qubit_z = Matrix::Zero(2, 2); // |e><e| - |g><g|
    qubit_z(0, 0) = -1.0;
    qubit_z(1, 1) = 1.0;
    const Matrix id_qubit = Matrix::Identity(2, 2);

    // Kronecker product with the qubit as the outer (slow) factor.
    auto kron = [](const Matrix& outer, const Matrix& inner) {
        Matrix out(outer.rows() * inner.rows(), outer.cols() * inner.cols());
        for (Eigen::Index i = 0; i < outer.rows(); ++i)
            for (Eigen::Index j = 0; j < outer.cols(); ++j)
                out.block(i * inner.rows(), j * inner.cols(), inner.rows(), inner.cols()) =
                    outer(i, j) * inner;
        return out;
    };

    Operators ops;
    ops.a = kron(id_qubit, fock_a);
    ops.a_dag = ops.a.adjoint();
    ops.sigma_minus = kron(qubit_minus, id_fock);
    ops.sigma_plus = ops.sigma_minus.adjoint();
    ops.sigma_z = kron(qubit_z, id_fock);
    return ops;
}

/// Rotating-frame Hamiltonian
///   H = -Δ a†a + Δ/2 σz + iηΩ (a†σ+ - aσ-) + iF (a† - a).
/// The off-diagonal part is assembled as X + X† so H is Hermitian bit-for-bit.
inline Matrix build_hamiltonian(const SystemParams& p, const Operators& ops) {
    if (ops.a.rows() != p.dim()) throw invalid_parameter("operator dimension mismatch");
    const Matrix number = ops.a_dag * ops.a;
    const Matrix diagonal = -p.detuning * number + 0.5 * p.detuning * ops.sigma_z;
    const Matrix x = I * (p.eta * p.omega) * (ops.a_dag * ops.sigma_plus) + I * p.drive_f * ops.a_dag;
    Matrix h = diagonal + x + x.adjoint();
    // number and sigma_z are real diagonal; make the diagonal exactly real.
    for (Eigen::Index k = 0; k < h.rows(); ++k) h(k, k) = h(k, k).real();
    return h;
}

inline Matrix build_hamiltonian(const SystemParams& p) {
    return build_hamiltonian(p, build_operators(p));
}

/// Density matrix with a timestamp (units of 1/Γ).
struct QuantumState {
    Matrix rho;
    double time = 0.0;

    Eigen::Index dim() const { return rho.rows(); }
    int n_fock() const { return static_cast<int>(rho.rows() / 2); }
};

struct StateCheck {
    double hermiticity = 0.0; // max |rho - rho†|
    double trace_error = 0.0; // |Tr rho - 1|
    double min_eigenvalue = 0.0;

    bool ok(double herm_tol = 1e-10, double trace_tol = 1e-8, double eig_tol = 1e-8) const {
        return hermiticity <= herm_tol && trace_error <= trace_tol && min_eigenvalue >= -eig_tol;
    }
};

inline StateCheck check_state(const Matrix& rho) {
    StateCheck c;
    c.hermiticity = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
    c.trace_error = std::abs(rho.trace() - 1.0);
    const Matrix herm = 0.5 * (rho + rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(herm, Eigen::EigenvaluesOnly);
    c.min_eigenvalue = es.eigenvalues().minCoeff();
    return c;
}

/// Pure product state |q, n><q, n|.
inline QuantumState basis_state(const SystemParams& p, int qubit, int n) {
    p.validate();
    if (qubit < 0 || qubit > 1 || n < 0 || n >= p.n_fock)
        throw invalid_parameter("basis state outside truncated space");
    QuantumState s;
    s.rho = Matrix::Zero(p.dim(), p.dim());
    const auto k = basis_index(qubit, n, p.n_fock);
    s.rho(k, k) = 1.0;
    return s;
}

/// |g>|0>, the initial state of every entanglement-dynamics run.
inline QuantumState ground_state(const SystemParams& p) { return basis_state(p, 0, 0); }

inline QuantumState pure_state(const Vector& psi) {
    const Vector v = psi / psi.norm();
    return QuantumState{v * v.adjoint(), 0.0};
}

/// Phonon reduced density matrix (qubit traced out).
inline Matrix phonon_reduced(const Matrix& rho) {
    const Eigen::Index n = rho.rows() / 2;
    return rho.topLeftCorner(n, n) + rho.bottomRightCorner(n, n);
}

/// Qubit reduced density matrix (phonon traced out).
inline Eigen::Matrix2cd qubit_reduced(const Matrix& rho) {
    const Eigen::Index n = rho.rows() / 2;
    Eigen::Matrix2cd q;
    q(0, 0) = rho.topLeftCorner(n, n).trace();
    q(0, 1) = rho.topRightCorner(n, n).trace();
    q(1, 0) = rho.bottomLeftCorner(n, n).trace();
    q(1, 1) = rho.bottomRightCorner(n, n).trace();
    return q;
}

/// Population of the highest retained Fock level; a truncation diagnostic.
inline double tail_population(const Matrix& rho) {
    const Matrix ph = phonon_reduced(rho);
    return ph(ph.rows() - 1, ph.cols() - 1).real();
}

inline double expectation_real(const Matrix& op, const Matrix& rho) { return (op * rho).trace().real(); }
inline cplx expectation(const Matrix& op, const Matrix& rho) { return (op * rho).trace(); }

} // namespace ionsync
