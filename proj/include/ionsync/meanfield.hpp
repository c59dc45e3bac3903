#pragma once

// Five-variable mean-field model: <a> = x1 + i y1, <σ-> = x2 + i y2, <σz> = z.
// With the Hamiltonian in hilbert.hpp the equations below hold for
// x2 + i y2 = <σ+> = <σ->*; the two labels differ only by y2 -> -y2.
// Fixed points, their stability, trajectories and the noiseless
// synchronization phase diagram over (Δ, F).

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>
#include <Eigen/Dense>

#include "ionsync/error.hpp"
#include "ionsync/hilbert.hpp"
#include "ionsync/parallel.hpp"

namespace ionsync {

using MfVector = Eigen::Matrix<double, 5, 1>;
using MfMatrix = Eigen::Matrix<double, 5, 5>;

struct MeanFieldState {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0, z = -1.0;

    MfVector vec() const { return (MfVector() << x1, y1, x2, y2, z).finished(); }
    static MeanFieldState from(const MfVector& v) { return {v(0), v(1), v(2), v(3), v(4)}; }
};

inline MfVector mf_rhs(const MfVector& s, const SystemParams& p) {
    const double g = p.eta * p.omega;
    const double x1 = s(0), y1 = s(1), x2 = s(2), y2 = s(3), z = s(4);
    MfVector d;
    d(0) = g * x2 - 0.5 * p.big_gamma * x1 - p.detuning * y1 + p.drive_f;
    d(1) = g * y2 - 0.5 * p.big_gamma * y1 + p.detuning * x1;
    d(2) = -g * x1 * z - 0.5 * p.gamma * x2 - p.detuning * y2;
    d(3) = -g * y1 * z - 0.5 * p.gamma * y2 + p.detuning * x2;
    d(4) = 4.0 * g * (x1 * x2 + y1 * y2) - p.gamma * (z + 1.0);
    return d;
}

inline MfMatrix jacobian(const MfVector& s, const SystemParams& p) {
    const double g = p.eta * p.omega;
    const double hG = 0.5 * p.big_gamma, hg = 0.5 * p.gamma, D = p.detuning;
    const double x1 = s(0), y1 = s(1), x2 = s(2), y2 = s(3), z = s(4);
    MfMatrix j;
    j << -hG, -D, g, 0, 0,
         D, -hG, 0, g, 0,
         -g * z, 0, -hg, -D, -g * x1,
         0, -g * z, D, -hg, -g * y1,
         4 * g * x2, 4 * g * y2, 4 * g * x1, 4 * g * y1, -p.gamma;
    return j;
}

/// Ω_th = sqrt(γΓ)/(2η) and the undriven limit-cycle amplitude
/// sqrt(γ/(2Γ) - γ²/(8η²Ω²)), zero below threshold.
struct ThresholdAmplitude {
    double omega_th = 0.0;
    double amplitude = 0.0;
};

inline ThresholdAmplitude threshold_and_amplitude(const SystemParams& p) {
    ThresholdAmplitude r;
    r.omega_th = std::sqrt(p.gamma * p.big_gamma) / (2.0 * p.eta);
    const double r2 = p.gamma / (2.0 * p.big_gamma) - p.gamma * p.gamma / (8.0 * p.eta * p.eta * p.omega * p.omega);
    r.amplitude = (p.omega > r.omega_th && r2 > 0.0) ? std::sqrt(r2) : 0.0;
    return r;
}

// ---------------------------------------------------------------------------
// Fixed points

inline constexpr double kStabilityMargin = 1e-8;

struct FixedPoint {
    MeanFieldState state;
    Eigen::Matrix<cplx, 5, 1> eigenvalues;
    bool stable = false;
    bool degenerate = false; // an eigenvalue within the stability margin of the imaginary axis
    double residual = 0.0;
};

struct FixedPointSet {
    std::vector<FixedPoint> points; // ordered by (x1, y1)
    std::vector<std::string> warnings;

    int stable_count() const {
        return static_cast<int>(std::count_if(points.begin(), points.end(), [](const auto& f) { return f.stable; }));
    }
    bool degenerate() const {
        return std::any_of(points.begin(), points.end(), [](const auto& f) { return f.degenerate; });
    }
};

struct NewtonOptions {
    int max_iterations = 200;
    double residual_tol = 1e-12;
    double merge_distance = 1e-6;
    double accept_residual = 1e-10;
};

inline FixedPoint classify(const MfVector& x, const SystemParams& p) {
    FixedPoint f;
    f.state = MeanFieldState::from(x);
    f.residual = mf_rhs(x, p).norm();
    Eigen::EigenSolver<MfMatrix> es(jacobian(x, p), false);
    f.eigenvalues = es.eigenvalues();
    const double max_re = f.eigenvalues.real().maxCoeff();
    f.stable = max_re < -kStabilityMargin;
    f.degenerate = (f.eigenvalues.real().cwiseAbs().array() <= kStabilityMargin).any();
    return f;
}

/// Deterministic Newton seeds: the trivial point, eight points on the undriven
/// limit-cycle ring and a 3x3x3 lattice in (x1, y1, z) with (x2, y2) taken from
/// the linear equations ẋ2 = ẏ2 = 0.
inline std::vector<MfVector> newton_seeds(const SystemParams& p) {
    const double g = p.eta * p.omega;
    std::vector<MfVector> seeds;
    seeds.push_back((MfVector() << 0, 0, 0, 0, -1).finished());

    const double ring = std::sqrt(std::max(p.gamma / (2.0 * p.big_gamma) - p.gamma * p.gamma / (8.0 * g * g), 1.0));
    const double z_ring = std::clamp(-p.gamma * p.big_gamma / (4.0 * g * g), -1.0, 1.0);
    for (int k = 0; k < 8; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 8.0;
        const double x1 = ring * std::cos(th), y1 = ring * std::sin(th);
        seeds.push_back((MfVector() << x1, y1, p.big_gamma * x1 / (2 * g), p.big_gamma * y1 / (2 * g), z_ring).finished());
    }

    const double reach = std::max({ring, 2.0 * p.drive_f / p.big_gamma, 1.0});
    const double hg = 0.5 * p.gamma, D = p.detuning;
    const double det = hg * hg + D * D;
    for (double x1 : {-reach, 0.0, reach})
        for (double y1 : {-reach, 0.0, reach})
            for (double z : {-1.0, -0.5, 0.0}) {
                // [-γ/2, -Δ; Δ, -γ/2] (x2, y2) = g z (x1, y1)
                const double bx = g * z * x1, by = g * z * y1;
                const double x2 = (-hg * bx + D * by) / det;
                const double y2 = (-D * bx - hg * by) / det;
                seeds.push_back((MfVector() << x1, y1, x2, y2, z).finished());
            }
    return seeds;
}

namespace detail {

/// Newton iteration on the deflated residual m(x) F(x) with
/// m(x) = Π_i (1/||x - r_i||² + 1), damped by backtracking on ||F||.
inline std::optional<MfVector> deflated_newton(MfVector x, const SystemParams& p, const std::vector<MfVector>& roots,
                                               const NewtonOptions& opt) {
    for (int it = 0; it < opt.max_iterations; ++it) {
        const MfVector f = mf_rhs(x, p);
        const double fn = f.norm();
        if (!std::isfinite(fn) || x.norm() > 1e8) return std::nullopt;
        if (fn <= opt.residual_tol) return x;
        Eigen::FullPivLU<MfMatrix> lu(jacobian(x, p));
        if (!lu.isInvertible()) return std::nullopt;
        MfVector step = -lu.solve(f);

        if (!roots.empty()) {
            // d ln m / dx · step
            double m = 1.0;
            MfVector grad_ln = MfVector::Zero();
            for (const auto& r : roots) {
                const MfVector dx = x - r;
                const double d2 = dx.squaredNorm();
                const double term = 1.0 / d2 + 1.0;
                m *= term;
                grad_ln += (-2.0 * dx / (d2 * d2)) / term;
            }
            const double denom = 1.0 - grad_ln.dot(step);
            if (std::abs(denom) < 1e-14 || !std::isfinite(m)) return std::nullopt;
            step /= denom;
        }

        double lambda = 1.0;
        MfVector trial = x + step;
        for (int k = 0; k < 30 && !(mf_rhs(trial, p).norm() < (1.0 - 1e-4 * lambda) * fn); ++k) {
            lambda *= 0.5;
            trial = x + lambda * step;
        }
        if (roots.empty() && !(mf_rhs(trial, p).norm() < fn)) trial = x + step; // let plain Newton escape plateaus
        if ((trial - x).norm() <= 1e-15 * (1.0 + x.norm()) && fn > opt.residual_tol) return std::nullopt;
        x = trial;
    }
    return mf_rhs(x, p).norm() <= opt.accept_residual ? std::optional<MfVector>(x) : std::nullopt;
}

/// Plain Newton polish to the residual floor.
inline MfVector polish(MfVector x, const SystemParams& p) {
    for (int it = 0; it < 20; ++it) {
        const MfVector f = mf_rhs(x, p);
        if (f.norm() <= 1e-14) break;
        Eigen::FullPivLU<MfMatrix> lu(jacobian(x, p));
        if (!lu.isInvertible()) break;
        const MfVector next = x - lu.solve(f);
        if (!(mf_rhs(next, p).norm() < f.norm())) break;
        x = next;
    }
    return x;
}

} // namespace detail

inline FixedPointSet find_fixed_points(const SystemParams& p, const NewtonOptions& opt = {}) {
    std::vector<MfVector> roots;
    auto known = [&](const MfVector& x) {
        return std::any_of(roots.begin(), roots.end(), [&](const MfVector& r) { return (r - x).norm() < opt.merge_distance; });
    };
    for (const auto& seed : newton_seeds(p)) {
        // Each seed first tries plain Newton, then repeatedly with deflation of
        // everything found so far.
        for (int pass = 0; pass < 4; ++pass) {
            const auto root = detail::deflated_newton(seed, p, pass == 0 ? std::vector<MfVector>{} : roots, opt);
            if (!root) break;
            const MfVector x = detail::polish(*root, p);
            if (mf_rhs(x, p).norm() > opt.accept_residual || known(x)) {
                if (pass > 0) break;
                continue;
            }
            roots.push_back(x);
        }
    }

    FixedPointSet out;
    std::sort(roots.begin(), roots.end(), [](const MfVector& a, const MfVector& b) {
        return a(0) != b(0) ? a(0) < b(0) : a(1) < b(1);
    });
    for (const auto& r : roots) out.points.push_back(classify(r, p));
    if (out.points.empty()) out.warnings.push_back("Newton failed to converge from every seed");
    return out;
}

enum class Region { A, B, C, flagged };

inline const char* to_string(Region r) {
    switch (r) {
    case Region::A: return "A";
    case Region::B: return "B";
    case Region::C: return "C";
    default: return "flagged";
    }
}

/// A: one stable point; B: three points, exactly one stable; C: one unstable
/// point. Anything else, or a boundary-degenerate point, is flagged.
inline Region region_of(const FixedPointSet& s) {
    if (s.degenerate()) return Region::flagged;
    const auto n = s.points.size();
    const int stable = s.stable_count();
    if (n == 1 && stable == 1) return Region::A;
    if (n == 3 && stable == 1) return Region::B;
    if (n == 1 && stable == 0) return Region::C;
    return Region::flagged;
}

inline Region region_of(const SystemParams& p) { return region_of(find_fixed_points(p)); }

// ---------------------------------------------------------------------------
// Trajectories

struct MfTrajectory {
    std::vector<double> times;
    std::vector<MfVector> states;
    std::vector<std::string> warnings;
};

struct MfIntegrateOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double initial_step = 1e-3;
    double blow_up_norm = 1e6;
    double bloch_tol = 1e-6;
};

inline MfTrajectory integrate_mf(const MeanFieldState& s0, const SystemParams& p, const std::vector<double>& times,
                                 const MfIntegrateOptions& opt = {}) {
    namespace odeint = boost::numeric::odeint;
    using state = std::array<double, 5>;
    if (times.size() < 2) throw invalid_parameter("integrate_mf: need at least two output times");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw invalid_parameter("integrate_mf: time grid must be strictly increasing");

    auto rhs = [&](const state& x, state& dxdt, double) {
        const MfVector d = mf_rhs(Eigen::Map<const MfVector>(x.data()), p);
        std::copy_n(d.data(), 5, dxdt.begin());
    };
    MfTrajectory tr;
    tr.times.reserve(times.size());
    tr.states.reserve(times.size());
    bool bloch_warned = false;
    auto observer = [&](const state& x, double t) {
        const MfVector v = Eigen::Map<const MfVector>(x.data());
        if (!v.allFinite() || v.norm() > opt.blow_up_norm)
            throw blow_up("mean-field trajectory diverged at t = " + std::to_string(t));
        if (!bloch_warned && (v(2) * v(2) + v(3) * v(3) > 0.25 + opt.bloch_tol || std::abs(v(4)) > 1.0 + opt.bloch_tol)) {
            tr.warnings.push_back("qubit variables left the Bloch ball at t = " + std::to_string(t));
            bloch_warned = true;
        }
        tr.times.push_back(t);
        tr.states.push_back(v);
    };
    state x{s0.x1, s0.y1, s0.x2, s0.y2, s0.z};
    auto stepper = odeint::make_dense_output(opt.atol, opt.rtol, odeint::runge_kutta_dopri5<state>());
    try {
        odeint::integrate_times(stepper, rhs, x, times.begin(), times.end(),
                                std::min(opt.initial_step, times[1] - times[0]), observer);
    } catch (const odeint::odeint_error& e) {
        throw integration_failure(std::string("mean-field integration failed: ") + e.what());
    }
    return tr;
}

enum class Attractor { fixed_point, limit_cycle, undetermined };

inline const char* to_string(Attractor a) {
    switch (a) {
    case Attractor::fixed_point: return "fixed-point";
    case Attractor::limit_cycle: return "limit-cycle";
    default: return "undetermined";
    }
}

struct AttractorCheck {
    Attractor kind = Attractor::undetermined;
    double drift = 0.0;        // max distance from the final state over the window
    double return_spread = 0.0; // spread of successive Poincaré returns
    int crossings = 0;
    double radius = 0.0;       // mean sqrt(x1² + y1²) over the window
};

/// Looks at the last quarter of a trajectory: converged if it stays within
/// tol of its final state, a limit cycle if it keeps moving but returns to
/// the section y1 = <y1> (upward crossings) at consistent points.
inline AttractorCheck classify_attractor(const MfTrajectory& tr, double tol = 1e-4) {
    AttractorCheck c;
    const std::size_t n = tr.states.size();
    if (n < 8) return c;
    const std::size_t start = n - n / 4;
    const MfVector last = tr.states.back();
    double mean_y = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        c.drift = std::max(c.drift, (tr.states[i] - last).norm());
        c.radius += std::hypot(tr.states[i](0), tr.states[i](1));
        mean_y += tr.states[i](1);
    }
    c.radius /= static_cast<double>(n - start);
    mean_y /= static_cast<double>(n - start);
    if (c.drift < tol) {
        c.kind = Attractor::fixed_point;
        return c;
    }
    std::vector<double> returns;
    for (std::size_t i = start + 1; i < n; ++i) {
        const double a = tr.states[i - 1](1) - mean_y, b = tr.states[i](1) - mean_y;
        if (a < 0.0 && b >= 0.0) {
            const double w = a / (a - b);
            returns.push_back(tr.states[i - 1](0) + w * (tr.states[i](0) - tr.states[i - 1](0)));
        }
    }
    c.crossings = static_cast<int>(returns.size());
    if (returns.size() >= 3) {
        const auto [lo, hi] = std::minmax_element(returns.begin() + 1, returns.end());
        c.return_spread = *hi - *lo;
        if (c.return_spread < std::max(1e-3, 1e-2 * c.radius)) c.kind = Attractor::limit_cycle;
    }
    return c;
}

// ---------------------------------------------------------------------------
// Phase diagram

enum class BoundaryType { hopf, saddle_node, other };

inline const char* to_string(BoundaryType b) {
    switch (b) {
    case BoundaryType::hopf: return "hopf";
    case BoundaryType::saddle_node: return "saddle_node";
    default: return "other";
    }
}

inline BoundaryType boundary_type(Region a, Region b) {
    auto is = [&](Region x, Region y) { return (a == x && b == y) || (a == y && b == x); };
    if (is(Region::A, Region::C)) return BoundaryType::hopf;
    if (is(Region::B, Region::C)) return BoundaryType::saddle_node;
    return BoundaryType::other;
}

struct BoundaryPoint {
    double drive_f = 0.0;
    double detuning = 0.0;
    BoundaryType type = BoundaryType::other;
    Region inner = Region::flagged; // label at the smaller detuning
    Region outer = Region::flagged;
};

/// Bisects the detuning interval [lo, hi] (labels differ at the ends) down to tol.
inline BoundaryPoint bisect_boundary(const SystemParams& p, double lo, double hi, Region r_lo, Region r_hi,
                                     double tol = 1e-3) {
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        Region r = region_of(p.with_detuning(mid));
        if (r == Region::flagged) {
            // nudge off a degenerate point
            r = region_of(p.with_detuning(mid + 0.25 * tol));
        }
        if (r == r_lo)
            lo = mid;
        else if (r == r_hi)
            hi = mid;
        else {
            // a third label inside the bracket; keep the half adjacent to lo
            hi = mid;
            r_hi = r;
        }
    }
    BoundaryPoint b;
    b.drive_f = p.drive_f;
    b.detuning = 0.5 * (lo + hi);
    b.inner = r_lo;
    b.outer = r_hi;
    b.type = boundary_type(r_lo, r_hi);
    return b;
}

/// First label change when scanning detuning upward from lo at fixed F.
inline std::optional<BoundaryPoint> boundary_detuning(const SystemParams& p, double lo, double hi, double step = 0.02,
                                                      double tol = 1e-3) {
    Region prev = region_of(p.with_detuning(lo));
    double prev_d = lo;
    for (double d = lo + step; d <= hi + 1e-12; d += step) {
        const Region r = region_of(p.with_detuning(d));
        if (r != prev && r != Region::flagged && prev != Region::flagged)
            return bisect_boundary(p, prev_d, d, prev, r, tol);
        prev = r;
        prev_d = d;
    }
    return std::nullopt;
}

struct PhaseDiagramCell {
    double detuning = 0.0;
    double drive_f = 0.0;
    Region region = Region::flagged;
    int fixed_points = 0;
    int stable = 0;
};

struct PhaseDiagram {
    std::vector<double> detunings;
    std::vector<double> drives;
    std::vector<PhaseDiagramCell> cells; // row-major: drive index slowest
    std::vector<BoundaryPoint> hopf;
    std::vector<BoundaryPoint> saddle_node;
    std::vector<BoundaryPoint> other;

    const PhaseDiagramCell& at(std::size_t i_delta, std::size_t i_f) const {
        return cells[i_f * detunings.size() + i_delta];
    }
    std::size_t flagged() const {
        return static_cast<std::size_t>(
            std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.region == Region::flagged; }));
    }
};

struct PhaseDiagramOptions {
    double bisection_tol = 1e-3;
    unsigned threads = default_threads();
};

inline PhaseDiagram phase_diagram(const SystemParams& base, double delta_lo, double delta_hi, std::size_t n_delta,
                                  double f_lo, double f_hi, std::size_t n_f, const PhaseDiagramOptions& opt = {}) {
    if (n_delta < 16 || n_f < 16) throw invalid_parameter("phase_diagram: resolution must be >= 16 per axis");
    if (!(delta_hi > delta_lo) || !(f_hi > f_lo)) throw invalid_parameter("phase_diagram: empty range");
    PhaseDiagram pd;
    for (std::size_t i = 0; i < n_delta; ++i)
        pd.detunings.push_back(delta_lo + (delta_hi - delta_lo) * static_cast<double>(i) / static_cast<double>(n_delta - 1));
    for (std::size_t j = 0; j < n_f; ++j)
        pd.drives.push_back(f_lo + (f_hi - f_lo) * static_cast<double>(j) / static_cast<double>(n_f - 1));

    pd.cells = parallel_map(n_delta * n_f, opt.threads, [&](std::size_t k) {
        PhaseDiagramCell c;
        c.detuning = pd.detunings[k % n_delta];
        c.drive_f = pd.drives[k / n_delta];
        const auto fps = find_fixed_points(base.with_detuning(c.detuning).with_drive(c.drive_f));
        c.region = region_of(fps);
        c.fixed_points = static_cast<int>(fps.points.size());
        c.stable = fps.stable_count();
        return c;
    });

    struct Bracket {
        std::size_t row, col;
    };
    std::vector<Bracket> brackets;
    for (std::size_t j = 0; j < n_f; ++j)
        for (std::size_t i = 0; i + 1 < n_delta; ++i) {
            const auto& a = pd.at(i, j);
            const auto& b = pd.at(i + 1, j);
            if (a.region != b.region && a.region != Region::flagged && b.region != Region::flagged)
                brackets.push_back({j, i});
        }
    const auto points = parallel_map(brackets.size(), opt.threads, [&](std::size_t k) {
        const auto& br = brackets[k];
        const auto& a = pd.at(br.col, br.row);
        const auto& b = pd.at(br.col + 1, br.row);
        return bisect_boundary(base.with_drive(pd.drives[br.row]), a.detuning, b.detuning, a.region, b.region,
                               opt.bisection_tol);
    });
    for (const auto& b : points) {
        if (b.type == BoundaryType::hopf)
            pd.hopf.push_back(b);
        else if (b.type == BoundaryType::saddle_node)
            pd.saddle_node.push_back(b);
        else
            pd.other.push_back(b);
    }
    return pd;
}

} // namespace ionsync
