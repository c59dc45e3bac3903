#include <catch_amalgamated.hpp>

#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

#include "ionsync/power_spectrum.hpp"

using namespace ionsync;
using Catch::Approx;

namespace {

constexpr double pi = std::numbers::pi;

Vector coherent_phonon(int n_fock, cplx alpha) {
    Vector c(n_fock);
    c(0) = 1.0;
    for (int k = 1; k < n_fock; ++k) c(k) = c(k - 1) * alpha / std::sqrt(static_cast<double>(k));
    return c / c.norm();
}

// |q> ⊗ |φ> in the qubit-slowest basis.
Vector product(int q, const Vector& phonon) {
    const auto n = phonon.size();
    Vector v = Vector::Zero(2 * n);
    v.segment(q * n, n) = phonon;
    return v;
}

Matrix density(const Vector& psi) { return psi * psi.adjoint(); }

Matrix random_unitary(Eigen::Index n, std::mt19937& rng) {
    std::normal_distribution<double> g;
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
    Eigen::HouseholderQR<Matrix> qr(m);
    return qr.householderQ();
}

Matrix random_state(Eigen::Index d, std::mt19937& rng, Eigen::Index rank) {
    std::normal_distribution<double> g;
    Matrix m(d, rank);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < rank; ++j) m(i, j) = cplx(g(rng), g(rng));
    Matrix rho = m * m.adjoint();
    return rho / rho.trace();
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

// W(x, p) = Tr[ρ D(α) Π D(α)†] / π with α = (x + ip)/√2, D from a matrix
// exponential in an enlarged Fock space.
double wigner_by_parity(const Matrix& rho_ph, double x, double p) {
    const Eigen::Index n = rho_ph.rows();
    const Eigen::Index big = n + 50;
    Matrix a = Matrix::Zero(big, big);
    for (Eigen::Index k = 1; k < big; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    const cplx alpha = cplx(x, p) / std::sqrt(2.0);
    const Matrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    const Matrix d = gen.exp();
    Matrix parity = Matrix::Zero(big, big);
    for (Eigen::Index k = 0; k < big; ++k) parity(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
    const Matrix kernel = d * parity * d.adjoint();
    return (rho_ph * kernel.topLeftCorner(n, n)).trace().real() / pi;
}

// Harmonic-oscillator eigenfunctions ψ_k(x), k < n.
std::vector<double> hermite_functions(int n, double x) {
    std::vector<double> psi(static_cast<std::size_t>(n));
    psi[0] = std::pow(pi, -0.25) * std::exp(-0.5 * x * x);
    if (n > 1) psi[1] = std::sqrt(2.0) * x * psi[0];
    for (int k = 1; k + 1 < n; ++k)
        psi[static_cast<std::size_t>(k + 1)] = std::sqrt(2.0 / (k + 1)) * x * psi[static_cast<std::size_t>(k)] -
                                               std::sqrt(static_cast<double>(k) / (k + 1)) * psi[static_cast<std::size_t>(k - 1)];
    return psi;
}

SystemParams driven(int n_fock, double f, double delta) {
    SystemParams p;
    p.n_fock = n_fock;
    p.drive_f = f;
    p.detuning = delta;
    return p;
}

} // namespace

// ---------------------------------------------------------------------------

TEST_CASE("negativity of product and Bell states", "[observables][negativity]") {
    SystemParams p;
    p.n_fock = 4;
    CHECK(log_negativity(ground_state(p)) == 0.0);
    Vector bell = Vector::Zero(8);
    bell(basis_index(0, 0, 4)) = 1.0 / std::sqrt(2.0);
    bell(basis_index(1, 1, 4)) = 1.0 / std::sqrt(2.0);
    CHECK(log_negativity(density(bell)) == Approx(1.0).epsilon(1e-12));

    Matrix bad = ground_state(p).rho;
    bad(0, 1) = 0.1;
    CHECK_THROWS_AS(log_negativity(bad), invalid_parameter);
}

TEST_CASE("negativity is invariant under local unitaries", "[observables][negativity]") {
    std::mt19937 rng(5);
    const int n = 5;
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix rho = random_state(2 * n, rng, 3);
        const Matrix u = kron(random_unitary(2, rng), random_unitary(n, rng));
        Matrix rotated = u * rho * u.adjoint();
        rotated = 0.5 * (rotated + rotated.adjoint());
        CHECK(std::abs(log_negativity(rho) - log_negativity(rotated)) < 1e-8);
    }
}

TEST_CASE("undriven steady state is weakly entangled", "[observables][negativity]") {
    SystemParams p;
    const double e = log_negativity(steady_state(p));
    CHECK(e > 1e-3);
    CHECK(e < 5e-2);
}

// ---------------------------------------------------------------------------

TEST_CASE("Wigner function of vacuum and single phonon", "[observables][wigner]") {
    Matrix ph0 = Matrix::Zero(6, 6);
    ph0(0, 0) = 1.0;
    Matrix ph1 = Matrix::Zero(6, 6);
    ph1(1, 1) = 1.0;
    CHECK(wigner_point(ph0, 0.0, 0.0) == Approx(1.0 / pi));
    CHECK(wigner_point(ph1, 0.0, 0.0) == Approx(-1.0 / pi));
    for (double x : {-1.5, 0.3, 2.0})
        for (double q : {-0.7, 1.1}) CHECK(wigner_point(ph0, x, q) == Approx(std::exp(-x * x - q * q) / pi).margin(1e-14));

    SystemParams p;
    p.n_fock = 6;
    const auto f = wigner(ground_state(p));
    CHECK(f.normalization == Approx(1.0).epsilon(0.02));
    CHECK(f.warnings.empty());
}

TEST_CASE("Laguerre kernel agrees with displaced parity", "[observables][wigner]") {
    std::mt19937 rng(17);
    const Matrix rho = random_state(8, rng, 3);
    for (double x : {-1.2, 0.0, 0.8})
        for (double q : {-0.5, 0.4, 1.7}) CHECK(wigner_point(rho, x, q) == Approx(wigner_by_parity(rho, x, q)).margin(1e-10));

    const Vector coh = coherent_phonon(20, cplx(1.0, -0.6));
    const Matrix rc = density(coh);
    CHECK(wigner_point(rc, 1.2, -0.3) == Approx(wigner_by_parity(rc, 1.2, -0.3)).margin(1e-10));
}

TEST_CASE("Wigner marginal is the position distribution", "[observables][wigner]") {
    std::mt19937 rng(23);
    const int n = 6;
    const Matrix rho_ph = random_state(n, rng, 2);
    WignerGrid g;
    g.x_min = -3.0;
    g.x_max = 3.0;
    g.nx = 7;
    g.p_min = -7.0;
    g.p_max = 7.0;
    g.np = 561;
    const auto f = wigner(kron(Matrix::Identity(2, 2) * 0.5, rho_ph), g);
    for (int i = 0; i < g.nx; ++i) {
        const double marginal = f.values.row(i).sum() * g.dp();
        const auto psi = hermite_functions(n, g.x(i));
        cplx prob = 0.0;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) prob += rho_ph(a, b) * psi[static_cast<std::size_t>(a)] * psi[static_cast<std::size_t>(b)];
        CHECK(marginal == Approx(prob.real()).epsilon(0.01).margin(1e-6));
    }
}

TEST_CASE("coarse Wigner grid is reported", "[observables][wigner]") {
    SystemParams p;
    p.n_fock = 6;
    WignerGrid g;
    g.x_min = -0.5;
    g.x_max = 0.5;
    g.nx = 11;
    g.p_min = -0.5;
    g.p_max = 0.5;
    g.np = 11;
    CHECK_FALSE(wigner(ground_state(p), g).warnings.empty());
}

TEST_CASE("undriven steady Wigner function is a ring", "[observables][wigner]") {
    SystemParams p;
    const auto ss = steady_state(p);
    const Matrix ph = phonon_reduced(ss.rho);
    // Radial profile along several directions; α = (x + ip)/√2.
    for (double theta : {0.0, 1.0, 2.5}) {
        double best_r = 0.0, best_w = -1.0;
        for (double r = 0.0; r <= 5.0; r += 0.01) {
            const double w = wigner_point(ph, r * std::cos(theta), r * std::sin(theta));
            if (w > best_w) {
                best_w = w;
                best_r = r;
            }
        }
        CHECK(best_r / std::sqrt(2.0) == Approx(std::sqrt(3.0)).epsilon(0.1));
        CHECK(best_w > wigner_point(ph, 0.0, 0.0));
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("phase distribution of vacuum and coherent states", "[observables][phase]") {
    SystemParams p;
    p.n_fock = 20;
    const auto vac = phase_distribution(ground_state(p));
    for (double v : vac.values) CHECK(v == Approx(1.0 / (2.0 * pi)));
    CHECK(vac.integral() == Approx(1.0).epsilon(1e-6));

    const auto coh = phase_distribution(density(product(0, coherent_phonon(20, 3.0))), 256);
    const auto peak = std::max_element(coh.values.begin(), coh.values.end()) - coh.values.begin();
    CHECK(coh.phis[static_cast<std::size_t>(peak)] == 0.0);
    CHECK(coh.integral() == Approx(1.0).epsilon(1e-6));
    CHECK_THROWS_AS(phase_distribution(ground_state(p).rho, 32), invalid_parameter);
}

TEST_CASE("phase distribution is rotation covariant", "[observables][phase]") {
    std::mt19937 rng(31);
    const int n = 10, n_phi = 256, shift = 5;
    const Matrix rho = random_state(2 * n, rng, 3);
    const double theta = 2.0 * pi * shift / n_phi;
    Matrix r = Matrix::Zero(2 * n, 2 * n);
    for (int q = 0; q < 2; ++q)
        for (int k = 0; k < n; ++k) r(q * n + k, q * n + k) = std::polar(1.0, theta * k);
    const auto base = phase_distribution(rho, n_phi);
    const auto rotated = phase_distribution(Matrix(r * rho * r.adjoint()), n_phi);
    for (int i = 0; i < n_phi; ++i)
        CHECK(rotated.values[static_cast<std::size_t>(i)] ==
              Approx(base.values[static_cast<std::size_t>((i - shift + n_phi) % n_phi)]).margin(1e-6));
}

TEST_CASE("phase distribution flattens with detuning", "[observables][phase]") {
    const auto near = phase_distribution(steady_state(driven(30, 1.2, 0.1)));
    const auto far = phase_distribution(steady_state(driven(30, 1.2, 2.0)));
    CHECK(far.spread() < near.spread());
    CHECK(far.integral() == Approx(1.0).epsilon(1e-6));
}

// ---------------------------------------------------------------------------

TEST_CASE("sync measure limits", "[observables][sync]") {
    const auto coh = density(product(0, coherent_phonon(30, cplx(1.5, 0.4))));
    CHECK(std::abs(sync_measure(coh)) == Approx(1.0).epsilon(1e-8));
    CHECK(std::arg(sync_measure(coh)) == Approx(std::atan2(0.4, 1.5)));
    SystemParams p;
    p.n_fock = 4;
    CHECK(std::abs(sync_measure(basis_state(p, 1, 1))) == 0.0);
    CHECK_THROWS_AS(sync_measure(ground_state(p)), undefined_measure);

    std::mt19937 rng(41);
    for (int trial = 0; trial < 20; ++trial)
        CHECK(std::abs(sync_measure(random_state(12, rng, 1 + trial % 4))) <= 1.0 + 1e-8);
}

TEST_CASE("sync measure grows toward resonance", "[observables][sync]") {
    double previous = 0.0;
    for (double delta : {1.0, 0.75, 0.5, 0.25, 0.0}) {
        const double s = std::abs(sync_measure(steady_state(driven(30, 1.2, delta))));
        CHECK(s > previous);
        previous = s;
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("refine_peak on a sampled parabola", "[observables][spectrum]") {
    const auto x = linspace(-1.0, 1.0, 21);
    std::vector<double> y;
    for (double v : x) y.push_back(2.0 - (v - 0.234) * (v - 0.234));
    bool interior = false;
    CHECK(refine_peak(x, y, &interior) == Approx(0.234));
    CHECK(interior);
    std::vector<double> edge;
    for (double v : x) edge.push_back(v);
    CHECK(refine_peak(x, edge, &interior) == 1.0);
    CHECK_FALSE(interior);
}

TEST_CASE("damped oscillator spectrum is a Lorentzian", "[observables][spectrum]") {
    SystemParams p;
    p.n_fock = 2;
    p.omega = 0.0;
    p.detuning = 0.6;
    const auto spec = eigenspectrum(build_liouvillian(p));
    // Surrogate state with one thermal phonon population.
    const double p1 = 0.3;
    Matrix rho = Matrix::Zero(4, 4);
    rho(0, 0) = 1.0 - p1;
    rho(1, 1) = p1;
    const auto ops = build_operators(p);
    const auto s = power_spectrum(spec, QuantumState{rho, 0.0}, ops.a, linspace(-3.0, 3.0, 601));
    CHECK(s.omega_obs == Approx(-0.6).margin(1e-6));
    CHECK(s.peak_value == Approx(4.0 * p1).epsilon(1e-8));
    CHECK(s.sum_rule_error < 1e-10);
    for (std::size_t i = 0; i < s.omegas.size(); ++i) {
        const double u = s.omegas[i] + 0.6;
        CHECK(s.values[i] == Approx(p1 / (0.25 + u * u)).margin(1e-10));
    }
}

TEST_CASE("eigenmode and direct spectra agree", "[observables][spectrum]") {
    const auto p = driven(8, 1.2, 1.5);
    const auto gen = build_generator(p);
    const auto L = to_superoperator(gen);
    const auto ss = steady_state(L);
    const auto ops = build_operators(p);
    const auto grid = linspace(-3.0, 3.0, 1201);
    const auto eig = power_spectrum(eigenspectrum(L), ss, ops.a, grid);
    const auto direct = power_spectrum_direct(gen, ss, ops.a, grid);
    CHECK(eig.min_ratio >= -1e-3);
    CHECK(eig.sum_rule_error < 1e-3);
    CHECK(std::abs(eig.omega_obs - direct.omega_obs) <= 0.01 * std::abs(eig.omega_obs));
}

TEST_CASE("defective weight-carrying modes are refused", "[observables][spectrum]") {
    const auto p = driven(4, 0.5, 0.3);
    const auto L = build_liouvillian(p);
    auto spec = eigenspectrum(L);
    const auto ss = steady_state(L);
    const auto ops = build_operators(p);
    for (auto& m : spec.modes) m.defective = true;
    CHECK_THROWS_AS(power_spectrum(spec, ss, ops.a, linspace(-1.0, 1.0, 11)), defective_modes);
}
