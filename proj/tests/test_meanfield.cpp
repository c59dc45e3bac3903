#include <catch_amalgamated.hpp>

#include <complex>
#include <random>

#include "ionsync/dynamics.hpp"
#include "ionsync/meanfield.hpp"

using namespace ionsync;
using Catch::Approx;

namespace {

SystemParams at(double f, double delta) {
    SystemParams p;
    p.drive_f = f;
    p.detuning = delta;
    return p;
}

MfVector state(double x1, double y1, double x2, double y2, double z) {
    return (MfVector() << x1, y1, x2, y2, z).finished();
}

// Roots of s |K(s)|² = F² with s = |<a>|², obtained by eliminating the qubit
// variables from the stationary equations.
std::vector<double> amplitude_roots(const SystemParams& p) {
    const double g = p.eta * p.omega, hg = 0.5 * p.gamma, D = p.detuning;
    const std::complex<double> qd(hg, -D);
    auto f = [&](double s) {
        const double z = -1.0 / (1.0 + 2.0 * g * g * s / (hg * hg + D * D));
        const auto k = std::complex<double>(-0.5 * p.big_gamma, D) - g * g * z / qd;
        return s * std::norm(k) - p.drive_f * p.drive_f;
    };
    std::vector<double> roots;
    const int n = 200000;
    const double s_max = 4.0 * p.drive_f * p.drive_f / (p.big_gamma * p.big_gamma) + 10.0;
    double prev = f(0.0);
    for (int i = 1; i <= n; ++i) {
        const double lo = s_max * (i - 1) / n, hi = s_max * i / n;
        const double cur = f(hi);
        if ((prev < 0.0) != (cur < 0.0)) {
            double a = lo, b = hi;
            for (int k = 0; k < 80; ++k) {
                const double m = 0.5 * (a + b);
                if ((f(m) < 0.0) == (f(a) < 0.0))
                    a = m;
                else
                    b = m;
            }
            roots.push_back(0.5 * (a + b));
        }
        prev = cur;
    }
    return roots;
}

std::vector<double> sorted_real(const Eigen::VectorXcd& v) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i).real());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

TEST_CASE("right-hand side at simple states", "[meanfield]") {
    SystemParams p;
    CHECK(mf_rhs(state(0, 0, 0, 0, -1), p).norm() == 0.0);
    p.drive_f = 1.0;
    const MfVector d = mf_rhs(state(0, 0, 0, 0, -1), p);
    CHECK(d(0) == 1.0);
    CHECK(d.tail(4).norm() == 0.0);
}

TEST_CASE("right-hand side equals quantum expectation rates on product states", "[meanfield]") {
    // For ρ = |ψ_q><ψ_q| ⊗ |α><α| the factorization of <a σ> is exact, so the
    // mean-field rates must equal Tr[O L(ρ)]. x2 + i y2 is read off as <σ+>.
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 6; ++trial) {
        SystemParams p;
        p.n_fock = 45;
        p.drive_f = 1.5 * std::abs(u(rng));
        p.detuning = 2.0 * u(rng);
        const auto ops = build_operators(p);
        const auto gen = build_generator(p);

        const cplx alpha(1.2 * u(rng), 1.2 * u(rng));
        Vector coh(p.n_fock);
        coh(0) = 1.0;
        for (int k = 1; k < p.n_fock; ++k) coh(k) = coh(k - 1) * alpha / std::sqrt(double(k));
        coh /= coh.norm();
        const double th = 1.5 * std::abs(u(rng)), ph = 3.0 * u(rng);
        Vector psi(p.dim());
        psi << std::cos(th) * coh, std::polar(std::sin(th), ph) * coh;
        const Matrix rho = psi * psi.adjoint();

        const cplx a = expectation(ops.a, rho), sp = expectation(ops.sigma_plus, rho);
        const double z = expectation_real(ops.sigma_z, rho);
        const Matrix drho = gen.apply(rho);
        const cplx da = expectation(ops.a, drho), dsp = expectation(ops.sigma_plus, drho);
        const double dz = expectation_real(ops.sigma_z, drho);

        const MfVector d = mf_rhs(state(a.real(), a.imag(), sp.real(), sp.imag(), z), p);
        CHECK(d(0) == Approx(da.real()).margin(1e-9));
        CHECK(d(1) == Approx(da.imag()).margin(1e-9));
        CHECK(d(2) == Approx(dsp.real()).margin(1e-9));
        CHECK(d(3) == Approx(dsp.imag()).margin(1e-9));
        CHECK(d(4) == Approx(dz).margin(1e-9));
    }
}

TEST_CASE("Jacobian matches central differences", "[meanfield]") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto p = at(std::abs(u(rng)), u(rng));
        const MfVector x = state(u(rng), u(rng), 0.3 * u(rng), 0.3 * u(rng), 0.5 * u(rng));
        const MfMatrix j = jacobian(x, p);
        const double h = 1e-6;
        for (int k = 0; k < 5; ++k) {
            MfVector e = MfVector::Zero();
            e(k) = h;
            const MfVector col = (mf_rhs(x + e, p) - mf_rhs(x - e, p)) / (2 * h);
            CHECK((col - j.col(k)).norm() <= 1e-6 * std::max(1.0, j.col(k).norm()));
        }
    }
}

TEST_CASE("Jacobian spectrum at the undriven trivial point", "[meanfield]") {
    SystemParams p;
    const auto fp = classify(state(0, 0, 0, 0, -1), p);
    const double g = p.eta * p.omega;
    const double root = std::sqrt((p.gamma - 1.0) * (p.gamma - 1.0) + 16.0 * g * g);
    std::vector<double> expect{-p.gamma, 0.25 * (-p.gamma - 1.0 + root), 0.25 * (-p.gamma - 1.0 + root),
                               0.25 * (-p.gamma - 1.0 - root), 0.25 * (-p.gamma - 1.0 - root)};
    std::sort(expect.begin(), expect.end());
    const auto got = sorted_real(fp.eigenvalues);
    for (int k = 0; k < 5; ++k) CHECK(got[k] == Approx(expect[k]).margin(1e-10));
    CHECK(fp.eigenvalues.imag().cwiseAbs().maxCoeff() < 1e-10);
    CHECK_FALSE(fp.stable);
}

TEST_CASE("decoupled Jacobian spectrum", "[meanfield]") {
    SystemParams p;
    p.eta = 0.0;
    p.detuning = 0.7;
    Eigen::EigenSolver<MfMatrix> es(jacobian(state(0.3, -0.2, 0.1, 0.05, -0.4), p));
    std::vector<cplx> want{{-0.5, 0.7}, {-0.5, -0.7}, {-5.0, 0.7}, {-5.0, -0.7}, {-10.0, 0.0}};
    for (const auto& w : want) {
        double best = 1e300;
        for (int k = 0; k < 5; ++k) best = std::min(best, std::abs(es.eigenvalues()(k) - w));
        CHECK(best < 1e-10);
    }
}

TEST_CASE("threshold and undriven amplitude", "[meanfield]") {
    SystemParams p;
    const auto r = threshold_and_amplitude(p);
    CHECK(r.omega_th == Approx(std::sqrt(10.0) / 0.2).epsilon(1e-12));
    CHECK(r.amplitude == Approx(std::sqrt(3.0)).epsilon(1e-12));
    p.omega = 1e7;
    CHECK(threshold_and_amplitude(p).amplitude == Approx(std::sqrt(5.0)).epsilon(1e-9));
    p.omega = 10.0;
    CHECK(threshold_and_amplitude(p).amplitude == 0.0);
}

TEST_CASE("fixed points in the three regions", "[meanfield]") {
    const auto a = find_fixed_points(at(1.2, 0.1));
    REQUIRE(a.points.size() == 1);
    CHECK(a.points[0].stable);
    CHECK(region_of(a) == Region::A);

    const auto b = find_fixed_points(at(0.2, 0.01));
    REQUIRE(b.points.size() == 3);
    CHECK(b.stable_count() == 1);
    CHECK(region_of(b) == Region::B);

    const auto c = find_fixed_points(at(1.2, 2.0));
    REQUIRE(c.points.size() == 1);
    CHECK_FALSE(c.points[0].stable);
    CHECK(region_of(c) == Region::C);

    for (const auto* s : {&a, &b, &c})
        for (const auto& fp : s->points) CHECK(fp.residual <= 1e-10);
}

TEST_CASE("fixed-point count matches the amplitude equation", "[meanfield]") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> uf(0.02, 1.3), ud(0.0, 2.5);
    std::vector<std::pair<double, double>> cases{{1.2, 0.1}, {0.2, 0.01}, {1.2, 2.0}, {0.6, 0.3}};
    for (int k = 0; k < 12; ++k) cases.emplace_back(uf(rng), ud(rng));
    for (const auto& [f, d] : cases) {
        const auto p = at(f, d);
        const auto roots = amplitude_roots(p);
        const auto fps = find_fixed_points(p);
        INFO("F = " << f << ", delta = " << d);
        REQUIRE(fps.points.size() == roots.size());
        std::vector<double> s;
        for (const auto& fp : fps.points) s.push_back(fp.state.x1 * fp.state.x1 + fp.state.y1 * fp.state.y1);
        std::sort(s.begin(), s.end());
        for (std::size_t i = 0; i < s.size(); ++i) CHECK(s[i] == Approx(roots[i]).epsilon(1e-8).margin(1e-10));
    }
}

TEST_CASE("undriven ring of fixed points", "[meanfield]") {
    SystemParams p;
    const double g = p.eta * p.omega;
    const auto fps = find_fixed_points(p);
    int ring = 0;
    for (const auto& fp : fps.points) {
        const auto& s = fp.state;
        if (std::hypot(s.x1, s.y1) < 0.1) continue;
        ++ring;
        CHECK(s.x2 == Approx(p.big_gamma * s.x1 / (2 * g)).margin(1e-8));
        CHECK(s.y2 == Approx(p.big_gamma * s.y1 / (2 * g)).margin(1e-8));
        CHECK(s.z == Approx(-p.gamma * p.big_gamma / (4 * g * g)).margin(1e-8));
        CHECK(s.x1 * s.x1 + s.y1 * s.y1 == Approx(3.0).margin(1e-8));
    }
    CHECK(ring > 0);
    CHECK(fps.degenerate());
}

TEST_CASE("trajectories settle on the predicted attractors", "[meanfield]") {
    const auto times = time_grid(200.0, 0.05);

    SECTION("region A converges to the stable point") {
        const auto p = at(1.2, 0.1);
        const auto tr = integrate_mf({}, p, times);
        const auto fp = find_fixed_points(p).points.at(0);
        CHECK((tr.states.back() - fp.state.vec()).norm() < 1e-4);
        CHECK(classify_attractor(tr).kind == Attractor::fixed_point);
        CHECK(tr.warnings.empty());
    }
    SECTION("region B converges to the stable point") {
        const auto p = at(0.2, 0.01);
        const auto tr = integrate_mf({}, p, times);
        const auto fps = find_fixed_points(p);
        const auto stable = std::find_if(fps.points.begin(), fps.points.end(), [](const auto& f) { return f.stable; });
        REQUIRE(stable != fps.points.end());
        CHECK((tr.states.back() - stable->state.vec()).norm() < 1e-4);
    }
    SECTION("undriven oscillator reaches the closed-form radius") {
        SystemParams p;
        MeanFieldState s0;
        s0.x1 = 0.1;
        const auto tr = integrate_mf(s0, p, times);
        CHECK(std::hypot(tr.states.back()(0), tr.states.back()(1)) == Approx(std::sqrt(3.0)).epsilon(1e-6));
    }
    SECTION("below threshold the oscillation dies out") {
        SystemParams p;
        p.omega = 10.0;
        MeanFieldState s0;
        s0.x1 = 1.0;
        const auto tr = integrate_mf(s0, p, times);
        CHECK(std::hypot(tr.states.back()(0), tr.states.back()(1)) < 1e-4);
    }
    SECTION("region C settles on a limit cycle") {
        const auto tr = integrate_mf({}, at(1.2, 2.0), time_grid(400.0, 0.02));
        const auto c = classify_attractor(tr);
        CHECK(c.kind == Attractor::limit_cycle);
        CHECK(c.crossings >= 3);
        double peak = 0.0;
        for (const auto& v : tr.states) peak = std::max(peak, v.norm());
        CHECK(peak < 10.0);
    }
}

TEST_CASE("integration diagnostics", "[meanfield]") {
    SystemParams p;
    MeanFieldState outside;
    outside.z = -3.0;
    CHECK_FALSE(integrate_mf(outside, p, time_grid(1.0, 0.1)).warnings.empty());
    p.big_gamma = -20.0;
    MeanFieldState s0;
    s0.x1 = 1.0;
    CHECK_THROWS_AS(integrate_mf(s0, p, time_grid(50.0, 0.1)), blow_up);
    CHECK_THROWS_AS(integrate_mf(s0, SystemParams{}, {0.0}), invalid_parameter);
}

TEST_CASE("boundary types along the drive axis", "[meanfield]") {
    const auto hopf = boundary_detuning(at(1.2, 0.0), 0.0, 2.5);
    REQUIRE(hopf);
    CHECK(hopf->type == BoundaryType::hopf);
    CHECK(region_of(at(1.2, hopf->detuning - 1e-3)) == hopf->inner);
    CHECK(region_of(at(1.2, hopf->detuning + 1e-3)) == hopf->outer);

    const auto sn = boundary_detuning(at(0.2, 0.0), 0.0, 2.5);
    REQUIRE(sn);
    CHECK(sn->type == BoundaryType::saddle_node);
    CHECK(region_of(at(0.2, sn->detuning - 1e-3)) == sn->inner);
    CHECK(region_of(at(0.2, sn->detuning + 1e-3)) == sn->outer);
}

TEST_CASE("coarse phase diagram", "[meanfield]") {
    SystemParams base;
    PhaseDiagramOptions opt;
    opt.threads = 2;
    const auto pd = phase_diagram(base, 0.0, 2.52, 16, 0.02, 1.28, 16, opt);
    REQUIRE(pd.cells.size() == 256);
    CHECK(pd.flagged() == 0);
    for (const auto& c : pd.cells) {
        switch (c.region) {
        case Region::A: CHECK((c.fixed_points == 1 && c.stable == 1)); break;
        case Region::B: CHECK((c.fixed_points == 3 && c.stable == 1)); break;
        case Region::C: CHECK((c.fixed_points == 1 && c.stable == 0)); break;
        default: break;
        }
    }
    for (std::size_t j = 0; j < pd.drives.size(); ++j) CHECK(pd.at(0, j).stable >= 1);
    CHECK_FALSE(pd.hopf.empty());
    CHECK_FALSE(pd.saddle_node.empty());
    for (const auto& b : pd.hopf) {
        const auto p = base.with_drive(b.drive_f);
        CHECK(region_of(p.with_detuning(b.detuning - 1e-3)) != region_of(p.with_detuning(b.detuning + 1e-3)));
    }

    opt.threads = 1;
    const auto again = phase_diagram(base, 0.0, 2.52, 16, 0.02, 1.28, 16, opt);
    for (std::size_t k = 0; k < pd.cells.size(); ++k) CHECK(again.cells[k].region == pd.cells[k].region);
    REQUIRE(again.hopf.size() == pd.hopf.size());
    for (std::size_t k = 0; k < pd.hopf.size(); ++k) CHECK(again.hopf[k].detuning == pd.hopf[k].detuning);

    CHECK_THROWS_AS(phase_diagram(base, 0.0, 2.52, 8, 0.02, 1.28, 16), invalid_parameter);
}
