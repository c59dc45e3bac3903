#pragma once

// The four batch commands. Each evaluates its sweep points on a worker pool,
// collects the per-point results in sweep order and writes CSV tables plus
// JSON sidecars. A failing point is recorded in its row and turns the exit
// status into kPartial; the sweep itself always completes.

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "ionsync/cli/config.hpp"
#include "ionsync/cli/output.hpp"
#include "ionsync/dynamics.hpp"
#include "ionsync/liouvillian.hpp"
#include "ionsync/meanfield.hpp"
#include "ionsync/observables.hpp"
#include "ionsync/power_spectrum.hpp"

namespace ionsync::cli {

inline constexpr int kClean = 0;
inline constexpr int kFatal = 1;
inline constexpr int kPartial = 2;

class Log {
public:
    explicit Log(std::string command) : command_(std::move(command)) {}

    void operator()(const std::string& msg) const {
        std::lock_guard lock(mutex_);
        std::fprintf(stderr, "[%s] %s\n", command_.c_str(), msg.c_str());
    }

private:
    std::string command_;
    mutable std::mutex mutex_;
};

namespace detail {

inline std::vector<std::string> param_columns() { return parameter_names(); }

inline std::vector<Cell> param_cells(const SystemParams& p) {
    return {p.eta, p.omega, p.gamma, p.big_gamma, p.drive_f, p.detuning, static_cast<long long>(p.n_fock)};
}

inline std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline std::vector<Cell> concat(std::vector<Cell> a, const std::vector<Cell>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline std::string describe(const SystemParams& p) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "F=%.6g detuning=%.6g n_fock=%d", p.drive_f, p.detuning, p.n_fock);
    return buf;
}

inline std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : "; ") + s;
    return out;
}

inline json meta(const std::string& command, const RunConfig& c) {
    return {{"command", command}, {"config", to_json(c)}};
}

inline std::string indexed(const std::string& stem, std::size_t i, const std::string& ext = ".csv") {
    char buf[32];
    std::snprintf(buf, sizeof buf, "_%04zu", i);
    return stem + buf + ext;
}

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

inline EvolveOptions evolve_options(const RunConfig& c) {
    EvolveOptions o;
    o.rtol = c.tol;
    o.atol = c.tol * 1e-2;
    return o;
}

template <class Fn>
auto run_points(const RunConfig& c, const Log& log, Fn&& fn) {
    const auto pts = c.points();
    return parallel_map(pts.size(), c.threads, [&](std::size_t i) {
        auto r = fn(i, pts[i]);
        log("point " + std::to_string(i + 1) + "/" + std::to_string(pts.size()) + " " + describe(pts[i]) + " " +
            (r.ok ? "ok" : "FAILED: " + r.message));
        return r;
    });
}

} // namespace detail

// ---------------------------------------------------------------------------

inline int cmd_steady(const RunConfig& c, const Log& log) {
    struct Result {
        bool ok = false;
        std::string message;
        std::vector<Cell> row;
        std::optional<WignerField> wigner;
        std::optional<PhaseDistribution> phase;
    };
    const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
        Result r;
        std::vector<std::string> notes;
        try {
            SteadyStateOptions so;
            so.residual_tol = std::max(c.tol, 1e-12);
            const QuantumState rho = steady_state(build_liouvillian(p), so);
            const double en = log_negativity(rho);
            const double n = mean_phonons(rho.rho);
            double abs_s = detail::nan, arg_s = detail::nan;
            try {
                const cplx s = sync_measure(rho);
                abs_s = std::abs(s);
                arg_s = std::arg(s);
            } catch (const undefined_measure& e) {
                notes.emplace_back(e.what());
            }
            const double tail = tail_population(rho.rho);
            if (tail > 1e-6) notes.push_back("truncation: top Fock population " + std::to_string(tail));
            const std::string ld = lamb_dicke_warning(p, n);
            if (!ld.empty()) notes.push_back(ld);
            if (c.steady.wigner) {
                r.wigner = wigner(rho, c.steady.grid);
                for (const auto& w : r.wigner->warnings) notes.push_back(w);
            }
            if (c.steady.n_phi > 0) r.phase = phase_distribution(rho, c.steady.n_phi);
            r.ok = true;
            r.message = detail::join(notes);
            r.row = detail::concat(detail::param_cells(p),
                                   {en, abs_s, arg_s, n, tail, lamb_dicke_factor(p, n), std::string("ok"), r.message});
        } catch (const std::exception& e) {
            r.message = e.what();
            r.row = detail::concat(detail::param_cells(p), {detail::nan, detail::nan, detail::nan, detail::nan,
                                                            detail::nan, detail::nan, std::string("failed"), r.message});
        }
        return r;
    });

    Table t(detail::concat(detail::param_columns(),
                           {"E_n", "abs_S", "arg_S", "n_mean", "tail_population", "lamb_dicke", "status", "message"}));
    bool partial = false;
    const json m = detail::meta("steady", c);
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        t.add(r.row);
        partial |= !r.ok;
        if (r.wigner) {
            Table w({"x", "p", "W"});
            for (std::size_t a = 0; a < r.wigner->xs.size(); ++a)
                for (std::size_t b = 0; b < r.wigner->ps.size(); ++b)
                    w.add({r.wigner->xs[a], r.wigner->ps[b],
                           r.wigner->values(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b))});
            json wm = m;
            wm["point"] = i;
            wm["normalization"] = r.wigner->normalization;
            write_table(c.out_dir, detail::indexed("wigner", i), w, wm);
        }
        if (r.phase) {
            Table ph({"phi", "P"});
            for (std::size_t k = 0; k < r.phase->phis.size(); ++k) ph.add({r.phase->phis[k], r.phase->values[k]});
            json pm = m;
            pm["point"] = i;
            write_table(c.out_dir, detail::indexed("phase", i), ph, pm);
        }
    }
    write_table(c.out_dir, "steady.csv", t, m);
    return partial ? kPartial : kClean;
}

// ---------------------------------------------------------------------------

inline int cmd_dynamics(const RunConfig& c, const Log& log) {
    struct Result {
        bool ok = false;
        std::string message;
        std::optional<Trajectory> traj;
        std::vector<Cell> fit_row;
    };
    const std::vector<double> times = time_grid(c.dynamics.t_end, c.dynamics.dt);
    const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
        Result r;
        const double nan = detail::nan;
        std::vector<Cell> fit_tail{nan, nan, nan, nan, nan, nan, nan, nan, nan, nan, nan};
        try {
            const Operators ops = build_operators(p);
            const LindbladGenerator gen(build_hamiltonian(p, ops),
                                        {std::sqrt(p.gamma) * ops.sigma_minus, std::sqrt(p.big_gamma) * ops.a});
            r.traj = evolve_observables(gen, ops, ground_state(p), times, detail::evolve_options(c));
            r.ok = true;
            if (c.dynamics.fit) {
                const Spectrum s = eigenspectrum(to_superoperator(gen), 4);
                const double g1 = s.modes[1].decay_rate, nu1 = s.modes[1].frequency, g3 = s.modes[3].decay_rate;
                FitOptions fo;
                fo.t_min = c.dynamics.fit_t_min.value_or(8.0 / g3);
                fo.decay_guess = g1;
                fo.omega_guess = nu1;
                try {
                    const DecayFit f = fit_decaying_oscillation(*r.traj, c.dynamics.observable, fo);
                    fit_tail = {g1, nu1, g3, fo.t_min, f.amplitude, f.decay, f.omega, f.phase, f.offset,
                                f.residual_norm, f.rms};
                } catch (const fit_failure& e) {
                    r.ok = false;
                    r.message = std::string(e.what()) + " (residual " + std::to_string(e.residual()) + ")";
                    fit_tail = {g1, nu1, g3, fo.t_min, nan, nan, nan, nan, nan, e.residual(), nan};
                }
            }
        } catch (const std::exception& e) {
            r.ok = false;
            r.message = e.what();
        }
        r.fit_row = detail::concat(detail::concat(detail::param_cells(p), fit_tail),
                                   {std::string(r.ok ? "ok" : "failed"), r.message});
        return r;
    });

    const json m = detail::meta("dynamics", c);
    bool partial = false;
    Table fits(detail::concat(detail::param_columns(),
                              {"gamma1", "nu1", "gamma3", "t_min", "amplitude", "decay", "omega", "phase", "offset",
                               "residual_norm", "rms", "status", "message"}));
    Table summary(detail::concat(detail::param_columns(), {"file", "status", "message"}));
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        partial |= !r.ok;
        const SystemParams p = c.points()[i];
        std::string file;
        if (r.traj) {
            file = detail::indexed("trajectory", i);
            Table t(detail::concat({"t"}, r.traj->names));
            for (std::size_t k = 0; k < r.traj->times.size(); ++k) {
                std::vector<Cell> row{r.traj->times[k]};
                for (const auto& col : r.traj->columns) row.emplace_back(col[k]);
                t.add(std::move(row));
            }
            json tm = m;
            tm["point"] = i;
            tm["params"] = to_json(p);
            write_table(c.out_dir, file, t, tm);
        }
        summary.add(detail::concat(detail::param_cells(p), {file, std::string(r.ok ? "ok" : "failed"), r.message}));
        if (c.dynamics.fit) fits.add(r.fit_row);
    }
    write_table(c.out_dir, "dynamics.csv", summary, m);
    if (c.dynamics.fit) write_table(c.out_dir, "fit.csv", fits, m);
    return partial ? kPartial : kClean;
}

// ---------------------------------------------------------------------------

inline int cmd_spectrum(const RunConfig& c, const Log& log) {
    const json m = detail::meta("spectrum", c);
    const auto& sc = c.spectrum;
    bool partial = false;

    if (sc.task == "eigen") {
        struct Result {
            bool ok = false;
            std::string message;
            std::vector<std::vector<Cell>> rows;
        };
        const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
            Result r;
            try {
                const auto L = build_liouvillian(p);
                const auto k = std::min<std::size_t>(static_cast<std::size_t>(std::max(sc.modes, 2)),
                                                     static_cast<std::size_t>(L.dim() * L.dim()));
                const Spectrum s = eigenspectrum(L, k);
                const double g1 = s.modes[1].decay_rate;
                for (const auto& mode : s.modes)
                    r.rows.push_back(detail::concat(
                        detail::param_cells(p),
                        {static_cast<long long>(mode.index), mode.lambda.real(), mode.lambda.imag(), mode.decay_rate,
                         mode.frequency, g1 > 0 ? mode.decay_rate / g1 : detail::nan, mode.condition,
                         static_cast<long long>(mode.defective), std::string("ok"), std::string()}));
                r.ok = true;
            } catch (const std::exception& e) {
                r.message = e.what();
                const double nan = detail::nan;
                r.rows.push_back(detail::concat(detail::param_cells(p), {-1LL, nan, nan, nan, nan, nan, nan, 0LL,
                                                                         std::string("failed"), r.message}));
            }
            return r;
        });
        Table t(detail::concat(detail::param_columns(), {"j", "re_lambda", "im_lambda", "decay_rate", "frequency",
                                                         "ratio_to_gamma1", "condition", "defective", "status",
                                                         "message"}));
        for (const auto& r : results) {
            partial |= !r.ok;
            for (const auto& row : r.rows) t.add(row);
        }
        write_table(c.out_dir, "eigenspectrum.csv", t, m);
    } else if (sc.task == "lep") {
        struct Job {
            SystemParams p;
        };
        std::vector<Job> jobs;
        for (const auto& base : c.points())
            for (double f : sc.lep_drives) jobs.push_back({base.with_drive(f)});
        struct Result {
            bool ok = false;
            std::string message;
            LepScanResult scan;
        };
        const auto results = parallel_map(jobs.size(), c.threads, [&](std::size_t i) {
            Result r;
            try {
                r.scan = find_lep(jobs[i].p, sc.lep_lo, sc.lep_hi, sc.lep_tol);
                r.ok = true;
            } catch (const std::exception& e) {
                r.message = e.what();
            }
            log("LEP " + std::to_string(i + 1) + "/" + std::to_string(jobs.size()) + " " + detail::describe(jobs[i].p) +
                " " + (r.ok ? "delta_ep=" + format_double(r.scan.delta_ep) : "FAILED: " + r.message));
            return r;
        });
        Table t(detail::concat(detail::param_columns(), {"delta_ep", "tolerance", "probes", "status", "message"}));
        Table probes(detail::concat(detail::param_columns(),
                                    {"probe", "probe_detuning", "re_lambda1", "im_lambda1", "re_lambda2", "im_lambda2",
                                     "kind"}));
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            partial |= !r.ok;
            t.add(detail::concat(detail::param_cells(jobs[i].p),
                                 {r.ok ? r.scan.delta_ep : detail::nan, sc.lep_tol,
                                  static_cast<long long>(r.scan.probes.size()), std::string(r.ok ? "ok" : "failed"),
                                  r.message}));
            for (std::size_t k = 0; k < r.scan.probes.size(); ++k) {
                const auto& pr = r.scan.probes[k];
                probes.add(detail::concat(detail::param_cells(jobs[i].p),
                                          {static_cast<long long>(k), pr.detuning, pr.lambda1.real(), pr.lambda1.imag(),
                                           pr.lambda2.real(), pr.lambda2.imag(), std::string(to_string(pr.kind))}));
            }
        }
        write_table(c.out_dir, "lep.csv", t, m);
        write_table(c.out_dir, "lep_probes.csv", probes, m);
    } else if (sc.task == "power") {
        const std::vector<double> omegas = linspace(sc.omega.lo, sc.omega.hi, static_cast<std::size_t>(sc.omega.steps));
        struct Result {
            bool ok = false;
            std::string message;
            std::vector<Cell> summary;
            std::vector<double> values;
        };
        const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
            Result r;
            const double nan = detail::nan;
            try {
                const auto L = build_liouvillian(p);
                const QuantumState rho = steady_state(L);
                const Spectrum s = sc.power_modes > 0 ? eigenspectrum(L, static_cast<std::size_t>(sc.power_modes))
                                                      : eigenspectrum(L);
                const PowerSpectrum ps = power_spectrum(s, rho, build_operators(p).a, omegas);
                r.values = ps.values;
                r.ok = true;
                r.message = detail::join(ps.warnings);
                r.summary = detail::concat(detail::param_cells(p),
                                           {ps.omega_obs, s.modes[1].frequency, s.modes[2].frequency,
                                            s.modes[1].decay_rate, s.modes[2].decay_rate,
                                            static_cast<long long>(ps.modes_used), ps.sum_rule_error, ps.min_ratio,
                                            std::string("ok"), r.message});
            } catch (const std::exception& e) {
                r.message = e.what();
                r.summary = detail::concat(detail::param_cells(p), {nan, nan, nan, nan, nan, 0LL, nan, nan,
                                                                    std::string("failed"), r.message});
            }
            return r;
        });
        Table spectra(detail::concat(detail::param_columns(), {"omega", "S"}));
        Table obs(detail::concat(detail::param_columns(),
                                 {"omega_obs", "nu1", "nu2", "gamma1", "gamma2", "modes_used", "sum_rule_error",
                                  "min_ratio", "status", "message"}));
        const auto pts = c.points();
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            partial |= !r.ok;
            obs.add(r.summary);
            for (std::size_t k = 0; k < r.values.size(); ++k)
                spectra.add(detail::concat(detail::param_cells(pts[i]), {omegas[k], r.values[k]}));
        }
        write_table(c.out_dir, "power_spectrum.csv", spectra, m);
        write_table(c.out_dir, "omega_obs.csv", obs, m);
    } else {
        throw invalid_parameter("spectrum: unknown task '" + sc.task + "' (eigen | lep | power)");
    }
    return partial ? kPartial : kClean;
}

// ---------------------------------------------------------------------------

inline int cmd_meanfield(const RunConfig& c, const Log& log) {
    const json m = detail::meta("meanfield", c);
    const auto& mc = c.meanfield;
    bool partial = false;

    if (mc.task == "fixed-points") {
        struct Result {
            bool ok = false;
            std::string message;
            std::vector<std::vector<Cell>> rows;
        };
        const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
            Result r;
            const auto fps = find_fixed_points(p);
            const Region reg = region_of(fps);
            r.ok = !fps.points.empty();
            r.message = detail::join(fps.warnings);
            const auto count = static_cast<long long>(fps.points.size());
            for (std::size_t k = 0; k < fps.points.size(); ++k) {
                const auto& f = fps.points[k];
                r.rows.push_back(detail::concat(
                    detail::param_cells(p),
                    {std::string(to_string(reg)), count, static_cast<long long>(k), f.state.x1, f.state.y1, f.state.x2,
                     f.state.y2, f.state.z, static_cast<long long>(f.stable), f.eigenvalues.real().maxCoeff(),
                     f.residual, std::string("ok"), r.message}));
            }
            if (fps.points.empty()) {
                const double nan = detail::nan;
                r.rows.push_back(detail::concat(detail::param_cells(p),
                                                {std::string(to_string(reg)), 0LL, -1LL, nan, nan, nan, nan, nan, 0LL,
                                                 nan, nan, std::string("failed"), r.message}));
            }
            return r;
        });
        Table t(detail::concat(detail::param_columns(), {"region", "n_fixed_points", "index", "x1", "y1", "x2", "y2",
                                                         "z", "stable", "max_re_eigenvalue", "residual", "status",
                                                         "message"}));
        for (const auto& r : results) {
            partial |= !r.ok;
            for (const auto& row : r.rows) t.add(row);
        }
        write_table(c.out_dir, "fixed_points.csv", t, m);
    } else if (mc.task == "trajectory") {
        const std::vector<double> times = time_grid(mc.t_end, mc.dt);
        struct Result {
            bool ok = false;
            std::string message;
            MfTrajectory traj;
            AttractorCheck check;
        };
        const auto results = detail::run_points(c, log, [&](std::size_t, const SystemParams& p) {
            Result r;
            try {
                r.traj = integrate_mf(mc.initial, p, times);
                r.check = classify_attractor(r.traj);
                r.ok = true;
                r.message = detail::join(r.traj.warnings);
            } catch (const std::exception& e) {
                r.message = e.what();
            }
            return r;
        });
        Table summary(detail::concat(detail::param_columns(), {"file", "attractor", "drift", "return_spread",
                                                               "crossings", "radius", "status", "message"}));
        const auto pts = c.points();
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto& r = results[i];
            partial |= !r.ok;
            std::string file;
            if (r.ok) {
                file = detail::indexed("mf_trajectory", i);
                Table t({"t", "x1", "y1", "x2", "y2", "z"});
                for (std::size_t k = 0; k < r.traj.times.size(); ++k) {
                    const auto& s = r.traj.states[k];
                    t.add({r.traj.times[k], s(0), s(1), s(2), s(3), s(4)});
                }
                json tm = m;
                tm["point"] = i;
                tm["params"] = to_json(pts[i]);
                write_table(c.out_dir, file, t, tm);
            }
            summary.add(detail::concat(detail::param_cells(pts[i]),
                                       {file, std::string(to_string(r.check.kind)), r.check.drift,
                                        r.check.return_spread, static_cast<long long>(r.check.crossings),
                                        r.check.radius, std::string(r.ok ? "ok" : "failed"), r.message}));
        }
        write_table(c.out_dir, "mf_trajectories.csv", summary, m);
    } else if (mc.task == "phase-diagram") {
        PhaseDiagramOptions po;
        po.threads = c.threads;
        po.bisection_tol = mc.bisection_tol;
        log("raster " + std::to_string(mc.delta.steps) + " x " + std::to_string(mc.drive.steps));
        const PhaseDiagram pd = phase_diagram(c.params, mc.delta.lo, mc.delta.hi, static_cast<std::size_t>(mc.delta.steps),
                                              mc.drive.lo, mc.drive.hi, static_cast<std::size_t>(mc.drive.steps), po);
        Table raster({"delta", "f", "region", "n_fixed_points", "n_stable"});
        for (const auto& cell : pd.cells)
            raster.add({cell.detuning, cell.drive_f, std::string(to_string(cell.region)),
                        static_cast<long long>(cell.fixed_points), static_cast<long long>(cell.stable)});
        write_table(c.out_dir, "phase_diagram.csv", raster, m);

        Table bounds({"type", "f", "delta", "inner", "outer"});
        json poly = m;
        for (const auto* set : {&pd.hopf, &pd.saddle_node, &pd.other}) {
            json line = json::array();
            std::string name;
            for (const auto& b : *set) {
                name = to_string(b.type);
                bounds.add({name, b.drive_f, b.detuning, std::string(to_string(b.inner)), std::string(to_string(b.outer))});
                line.push_back({b.drive_f, b.detuning});
            }
            if (set == &pd.hopf) poly["hopf"] = line;
            else if (set == &pd.saddle_node) poly["saddle_node"] = line;
            else poly["other"] = line;
        }
        write_table(c.out_dir, "boundaries.csv", bounds, m);
        poly["polyline_order"] = "[f, delta] pairs in raster row order";
        write_json(c.out_dir / "boundaries.json", poly);
        if (pd.flagged() > 0) {
            log(std::to_string(pd.flagged()) + " raster cells flagged");
            partial = true;
        }
        if (pd.hopf.empty() && pd.saddle_node.empty()) log("no boundary found in the raster window");
    } else {
        throw invalid_parameter("meanfield: unknown task '" + mc.task + "' (fixed-points | trajectory | phase-diagram)");
    }
    return partial ? kPartial : kClean;
}

} // namespace ionsync::cli
