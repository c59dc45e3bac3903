#pragma once

// Time integration of the master equation and the damped-oscillation fit used
// to compare entanglement dynamics with the slowest Liouvillian mode.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/NonLinearOptimization>

#include "ionsync/hilbert.hpp"
#include "ionsync/liouvillian.hpp"
#include "ionsync/observables.hpp"

namespace ionsync {

struct EvolveOptions {
    double rtol = 1e-8;
    double atol = 1e-10;
    double initial_step = 1e-3;
    std::size_t max_steps_per_output = 200000;
    double trace_tol = 1e-8;
    double positivity_tol = 1e-8;
    double hermiticity_tol = 1e-10; // after re-symmetrization
};

namespace detail {

using ode_state = std::vector<double>;

inline ode_state pack(const Matrix& m) {
    ode_state x(static_cast<std::size_t>(2 * m.size()));
    std::copy_n(reinterpret_cast<const double*>(m.data()), x.size(), x.data());
    return x;
}

inline Matrix unpack(const ode_state& x, Eigen::Index d) {
    return Eigen::Map<const Matrix>(reinterpret_cast<const cplx*>(x.data()), d, d);
}

} // namespace detail

/// Integrates dX/dt = L(X) from X(times[0]) = x0 and calls obs(t, X) at every
/// time in `times`. No physical-state checks: X need not be a density matrix.
/// Generator is anything with dim() and Matrix apply(const Matrix&).
template <class Generator, class Observer>
void propagate(const Generator& gen, const Matrix& x0, const std::vector<double>& times, Observer&& obs,
               const EvolveOptions& opt = {}) {
    namespace odeint = boost::numeric::odeint;
    if (times.empty()) return;
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw invalid_parameter("propagate: time grid must be strictly increasing");
    const Eigen::Index d = gen.dim();
    if (x0.rows() != d || x0.cols() != d) throw invalid_parameter("propagate: initial matrix has wrong dimension");

    auto rhs = [&](const detail::ode_state& x, detail::ode_state& dxdt, double) {
        const Eigen::Map<const Matrix> m(reinterpret_cast<const cplx*>(x.data()), d, d);
        const Matrix out = gen.apply(m);
        dxdt.resize(x.size());
        std::copy_n(reinterpret_cast<const double*>(out.data()), x.size(), dxdt.data());
    };
    auto observer = [&](const detail::ode_state& x, double t) { obs(t, detail::unpack(x, d)); };

    if (times.size() == 1) {
        obs(times.front(), x0);
        return;
    }
    detail::ode_state x = detail::pack(x0);
    auto stepper = odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<detail::ode_state>());
    const double dt = std::min(opt.initial_step, times[1] - times[0]);
    try {
        odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt, observer,
                                odeint::max_step_checker(static_cast<int>(opt.max_steps_per_output)));
    } catch (const odeint::odeint_error& e) {
        throw stiffness_error(std::string("step-size control failed: ") + e.what());
    }
}

/// Physical time evolution: re-symmetrizes at output times and enforces the
/// density-matrix invariants before handing each state to obs.
template <class Generator, class Observer>
void evolve(const Generator& gen, const QuantumState& rho0, const std::vector<double>& times, Observer&& obs,
            const EvolveOptions& opt = {}) {
    const StateCheck c0 = check_state(rho0.rho);
    if (std::abs(c0.trace_error) > opt.trace_tol || c0.min_eigenvalue < -opt.positivity_tol ||
        c0.hermiticity > opt.hermiticity_tol)
        throw invalid_parameter("evolve: initial state is not a valid density matrix");
    propagate(
        gen, rho0.rho, times,
        [&](double t, const Matrix& x) {
            QuantumState s{0.5 * (x + x.adjoint()), t};
            const StateCheck c = check_state(s.rho);
            if (!std::isfinite(c.trace_error) || std::abs(c.trace_error) > opt.trace_tol)
                throw integration_failure("trace drifted to " + std::to_string(1.0 + c.trace_error) +
                                          " at t = " + std::to_string(t));
            if (c.min_eigenvalue < -opt.positivity_tol)
                throw integration_failure("negative eigenvalue " + std::to_string(c.min_eigenvalue) +
                                          " at t = " + std::to_string(t));
            obs(s);
        },
        opt);
}

template <class Generator>
std::vector<QuantumState> evolve_states(const Generator& gen, const QuantumState& rho0,
                                        const std::vector<double>& times, const EvolveOptions& opt = {}) {
    std::vector<QuantumState> out;
    out.reserve(times.size());
    evolve(gen, rho0, times, [&](const QuantumState& s) { out.push_back(s); }, opt);
    return out;
}

inline std::vector<double> time_grid(double t_end, double dt, double t0 = 0.0) {
    if (!(dt > 0.0) || !(t_end > t0)) throw invalid_parameter("time_grid: need dt > 0 and t_end > t0");
    const auto n = static_cast<std::size_t>(std::llround((t_end - t0) / dt));
    std::vector<double> t(n + 1);
    for (std::size_t i = 0; i <= n; ++i) t[i] = t0 + dt * static_cast<double>(i);
    return t;
}

struct Trajectory {
    std::vector<double> times;
    std::vector<std::string> names;
    std::vector<std::vector<double>> columns; // columns[k][i] is observable k at times[i]

    const std::vector<double>& column(std::string_view name) const {
        for (std::size_t k = 0; k < names.size(); ++k)
            if (names[k] == name) return columns[k];
        throw invalid_parameter("trajectory has no observable '" + std::string(name) + "'");
    }
};

/// Entanglement, <a>, <a†a> and <σz> along the trajectory.
template <class Generator>
Trajectory evolve_observables(const Generator& gen, const Operators& ops, const QuantumState& rho0,
                              const std::vector<double>& times, const EvolveOptions& opt = {}) {
    const Matrix number = ops.a_dag * ops.a;
    Trajectory tr;
    tr.names = {"E_n", "re_a", "im_a", "n", "sz"};
    tr.columns.assign(tr.names.size(), {});
    for (auto& c : tr.columns) c.reserve(times.size());
    evolve(
        gen, rho0, times,
        [&](const QuantumState& s) {
            const cplx a = expectation(ops.a, s.rho);
            const double vals[] = {log_negativity(s.rho, 1e-8), a.real(), a.imag(),
                                   expectation_real(number, s.rho), expectation_real(ops.sigma_z, s.rho)};
            for (std::size_t k = 0; k < tr.names.size(); ++k) {
                if (!std::isfinite(vals[k])) throw integration_failure("non-finite observable " + tr.names[k]);
                tr.columns[k].push_back(vals[k]);
            }
            tr.times.push_back(s.time);
        },
        opt);
    return tr;
}

// ---------------------------------------------------------------------------
// A e^{-bt} sin(ωt + φ) + c

struct DecayFit {
    double amplitude = 0.0;
    double decay = 0.0;
    double omega = 0.0;
    double phase = 0.0;
    double offset = 0.0;
    double t_min = 0.0;
    double residual_norm = 0.0; // ||model - data||_2 over the window
    double rms = 0.0;
    std::size_t samples = 0;

    double operator()(double t) const {
        return amplitude * std::exp(-decay * t) * std::sin(omega * t + phase) + offset;
    }
};

struct FitOptions {
    double t_min = 0.0;
    std::optional<double> decay_guess; // typically Γ1
    std::optional<double> omega_guess; // typically ν1; its sign fixes the sign convention of ω
    std::size_t min_samples = 50;
    int max_evaluations = 4000;
};

namespace detail {

struct LinearFit {
    double p = 0.0, q = 0.0, c = 0.0; // p e^{-bτ} sin ωτ + q e^{-bτ} cos ωτ + c
    double sse = 0.0;
};

inline LinearFit linear_fit(const Eigen::VectorXd& tau, const Eigen::VectorXd& y, double b, double w) {
    Eigen::MatrixXd basis(tau.size(), 3);
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        const double e = std::exp(-b * tau(i));
        basis(i, 0) = e * std::sin(w * tau(i));
        basis(i, 1) = e * std::cos(w * tau(i));
        basis(i, 2) = 1.0;
    }
    const Eigen::Vector3d coef = basis.completeOrthogonalDecomposition().solve(y);
    LinearFit f{coef(0), coef(1), coef(2), (basis * coef - y).squaredNorm()};
    return f;
}

struct DampedSineResidual {
    using Scalar = double;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;

    const Eigen::VectorXd& tau;
    const Eigen::VectorXd& y;

    int inputs() const { return 5; }
    int values() const { return static_cast<int>(tau.size()); }

    // x = (A, b, ω, φ, c)
    int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& r) const {
        for (Eigen::Index i = 0; i < tau.size(); ++i)
            r(i) = x(0) * std::exp(-x(1) * tau(i)) * std::sin(x(2) * tau(i) + x(3)) + x(4) - y(i);
        return 0;
    }
    int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
        for (Eigen::Index i = 0; i < tau.size(); ++i) {
            const double t = tau(i);
            const double e = std::exp(-x(1) * t);
            const double s = std::sin(x(2) * t + x(3));
            const double c = std::cos(x(2) * t + x(3));
            j(i, 0) = e * s;
            j(i, 1) = -t * x(0) * e * s;
            j(i, 2) = t * x(0) * e * c;
            j(i, 3) = x(0) * e * c;
            j(i, 4) = 1.0;
        }
        return 0;
    }
};

inline double wrap_phase(double phi) {
    phi = std::remainder(phi, 2.0 * std::numbers::pi);
    return phi <= -std::numbers::pi ? phi + 2.0 * std::numbers::pi : phi;
}

} // namespace detail

/// Least-squares fit of A e^{-bt} sin(ωt + φ) + c to samples with t >= t_min.
/// Starts from the supplied (b, ω) guess or, failing that, from a coarse
/// (b, ω) grid with the linear parameters solved exactly, then refines all
/// five parameters by Levenberg-Marquardt.
inline DecayFit fit_decaying_oscillation(const std::vector<double>& t, const std::vector<double>& y,
                                         const FitOptions& opt = {}) {
    if (t.size() != y.size()) throw invalid_parameter("fit: time and value arrays differ in length");
    std::vector<double> tw, yw;
    for (std::size_t i = 0; i < t.size(); ++i)
        if (t[i] >= opt.t_min) {
            tw.push_back(t[i]);
            yw.push_back(y[i]);
        }
    if (tw.size() < opt.min_samples)
        throw invalid_parameter("fit: only " + std::to_string(tw.size()) + " samples with t >= t_min");

    // Work in τ = t - t0 for conditioning; convert back at the end.
    const double t0 = tw.front();
    Eigen::VectorXd tau(static_cast<Eigen::Index>(tw.size())), yv(tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        tau(i) = tw[static_cast<std::size_t>(i)] - t0;
        yv(i) = yw[static_cast<std::size_t>(i)];
    }
    const double span = tau(tau.size() - 1);
    const double scale = std::max(1.0, yv.cwiseAbs().maxCoeff());

    double b0 = 0.0, w0 = 0.0;
    detail::LinearFit lin;
    if (opt.decay_guess && opt.omega_guess) {
        b0 = std::max(0.0, *opt.decay_guess);
        w0 = std::abs(*opt.omega_guess);
        lin = detail::linear_fit(tau, yv, b0, w0);
    } else {
        double dt_min = span;
        for (Eigen::Index i = 1; i < tau.size(); ++i) dt_min = std::min(dt_min, tau(i) - tau(i - 1));
        const double w_max = 0.5 * std::numbers::pi / std::max(dt_min, 1e-12);
        const double dw = 0.25 * std::numbers::pi / span;
        lin.sse = std::numeric_limits<double>::infinity();
        for (double w = dw; w <= w_max; w += dw)
            for (int kb = 0; kb <= 40; ++kb) {
                const double b = kb == 0 ? 0.0 : (0.05 / span) * std::pow(1000.0, (kb - 1) / 39.0);
                const auto f = detail::linear_fit(tau, yv, b, w);
                if (f.sse < lin.sse) {
                    lin = f;
                    b0 = b;
                    w0 = w;
                }
            }
    }

    DecayFit out;
    out.t_min = opt.t_min;
    out.samples = tw.size();
    Eigen::VectorXd x(5);
    x << std::hypot(lin.p, lin.q), b0, w0, std::atan2(lin.q, lin.p), lin.c;

    if (x(0) <= 1e-12 * scale) {
        // Flat data: the oscillating part is absent and (b, ω, φ) are undetermined.
        x(0) = 0.0;
    } else {
        detail::DampedSineResidual fn{tau, yv};
        Eigen::LevenbergMarquardt<detail::DampedSineResidual> lm(fn);
        lm.parameters.maxfev = opt.max_evaluations;
        lm.parameters.xtol = 1e-14;
        lm.parameters.ftol = 1e-14;
        const auto status = lm.minimize(x);
        Eigen::VectorXd r(tau.size());
        fn(x, r);
        const double residual = r.norm();
        const bool failed = status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters ||
                            status == Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
        if (failed || !x.allFinite())
            throw fit_failure("damped-oscillation fit did not converge (status " + std::to_string(int(status)) + ")",
                              residual);
        if (x(1) < -1e-9) throw fit_failure("damped-oscillation fit returned a growing envelope", residual);
        x(1) = std::max(0.0, x(1));
    }

    Eigen::VectorXd r(tau.size());
    detail::DampedSineResidual{tau, yv}(x, r);
    out.residual_norm = r.norm();
    out.rms = out.residual_norm / std::sqrt(static_cast<double>(tau.size()));

    double amp = x(0), b = x(1), w = x(2), phi = x(3);
    if (amp < 0.0) {
        amp = -amp;
        phi += std::numbers::pi;
    }
    const double preferred = opt.omega_guess.value_or(1.0);
    if ((w < 0.0) != (preferred < 0.0)) {
        w = -w;
        phi = std::numbers::pi - phi;
    }
    // back to absolute time
    out.amplitude = amp * std::exp(b * t0);
    out.decay = b;
    out.omega = w;
    out.phase = detail::wrap_phase(phi - w * t0);
    out.offset = x(4);
    return out;
}

inline DecayFit fit_decaying_oscillation(const Trajectory& tr, std::string_view observable,
                                         const FitOptions& opt = {}) {
    return fit_decaying_oscillation(tr.times, tr.column(observable), opt);
}

} // namespace ionsync
