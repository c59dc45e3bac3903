#pragma once

// Run configuration: system parameters, sweep axes and per-command settings,
// read from a JSON document and overridden by command-line flags.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ionsync/hilbert.hpp"
#include "ionsync/meanfield.hpp"
#include "ionsync/observables.hpp"
#include "ionsync/parallel.hpp"

namespace ionsync::cli {

using nlohmann::json;

inline const std::vector<std::string>& parameter_names() {
    static const std::vector<std::string> names{"eta", "omega", "gamma", "big_gamma", "drive_f", "detuning", "n_fock"};
    return names;
}

inline double get_param(const SystemParams& p, const std::string& name) {
    if (name == "eta") return p.eta;
    if (name == "omega") return p.omega;
    if (name == "gamma") return p.gamma;
    if (name == "big_gamma") return p.big_gamma;
    if (name == "drive_f") return p.drive_f;
    if (name == "detuning") return p.detuning;
    if (name == "n_fock") return p.n_fock;
    throw invalid_parameter("unknown parameter '" + name + "'");
}

inline void set_param(SystemParams& p, const std::string& name, double v) {
    if (name == "eta") p.eta = v;
    else if (name == "omega") p.omega = v;
    else if (name == "gamma") p.gamma = v;
    else if (name == "big_gamma") p.big_gamma = v;
    else if (name == "drive_f") p.drive_f = v;
    else if (name == "detuning") p.detuning = v;
    else if (name == "n_fock") {
        if (v != std::round(v)) throw invalid_parameter("n_fock must be an integer");
        p.n_fock = static_cast<int>(v);
    } else
        throw invalid_parameter("unknown parameter '" + name + "'");
}

struct SweepAxis {
    std::string name;
    double lo = 0.0;
    double hi = 0.0;
    int steps = 1;

    std::vector<double> values() const {
        if (steps == 1) return {lo};
        std::vector<double> v(static_cast<std::size_t>(steps));
        for (int i = 0; i < steps; ++i) v[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (steps - 1);
        return v;
    }
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    int steps = 1;
};

struct SteadySettings {
    bool wigner = false;
    WignerGrid grid;
    int n_phi = 0; // > 0 also writes phase distributions
};

struct DynamicsSettings {
    double t_end = 40.0;
    double dt = 0.05;
    bool fit = false;
    std::optional<double> fit_t_min; // default: 8 / Γ3
    std::string observable = "E_n";
};

struct SpectrumSettings {
    std::string task = "eigen"; // eigen | lep | power
    int modes = 10;
    std::vector<double> lep_drives{0.4, 0.8, 1.15, 1.5};
    double lep_lo = 0.0;
    double lep_hi = 0.9;
    double lep_tol = 1e-3;
    Range omega{-3.0, 3.0, 1201};
    int power_modes = 0; // 0: full spectrum
};

struct MeanFieldSettings {
    std::string task = "fixed-points"; // fixed-points | trajectory | phase-diagram
    double t_end = 200.0;
    double dt = 0.05;
    MeanFieldState initial{0.0, 0.0, 0.0, 0.0, -1.0};
    Range delta{0.0, 2.52, 64};
    Range drive{0.02, 1.28, 64};
    double bisection_tol = 1e-3;
};

struct RunConfig {
    SystemParams params;
    std::vector<SweepAxis> sweeps;
    std::filesystem::path out_dir = "out";
    unsigned threads = default_threads();
    double tol = 1e-8;
    SteadySettings steady;
    DynamicsSettings dynamics;
    SpectrumSettings spectrum;
    MeanFieldSettings meanfield;

    /// Sweep points, lexicographic over the axes in declaration order (first axis slowest).
    std::vector<SystemParams> points() const {
        std::vector<SystemParams> out{params};
        for (const auto& axis : sweeps) {
            std::vector<SystemParams> next;
            for (const auto& base : out)
                for (double v : axis.values()) {
                    SystemParams p = base;
                    set_param(p, axis.name, v);
                    next.push_back(p);
                }
            out = std::move(next);
        }
        return out;
    }

    void validate() const {
        params.validate();
        std::set<std::string> seen;
        for (const auto& a : sweeps) {
            get_param(params, a.name);
            if (a.steps < 1) throw invalid_parameter("sweep '" + a.name + "': steps must be >= 1");
            if (!seen.insert(a.name).second) throw invalid_parameter("sweep axis '" + a.name + "' repeated");
        }
        for (const auto& p : points()) p.validate();
        if (!(tol > 0.0)) throw invalid_parameter("tol must be > 0");
        if (threads < 1) throw invalid_parameter("threads must be >= 1");
    }
};

// ---------------------------------------------------------------------------
// JSON round trip. Unknown keys are rejected so typos do not pass silently.

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw invalid_parameter(where + ": expected an object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw invalid_parameter(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline Range read_range(const json& j, const std::string& where) {
    check_keys(j, {"lo", "hi", "steps"}, where);
    Range r;
    read(j, "lo", r.lo);
    read(j, "hi", r.hi);
    read(j, "steps", r.steps);
    if (r.steps < 1) throw invalid_parameter(where + ": steps must be >= 1");
    return r;
}

inline json write_range(const Range& r) { return {{"lo", r.lo}, {"hi", r.hi}, {"steps", r.steps}}; }

} // namespace detail

inline void apply_json(RunConfig& c, const json& j) {
    using detail::read;
    detail::check_keys(j, {"params", "sweep", "out_dir", "threads", "tol", "steady", "dynamics", "spectrum", "meanfield"},
                       "config");
    if (j.contains("params")) {
        const auto& p = j.at("params");
        detail::check_keys(p, {parameter_names().begin(), parameter_names().end()}, "params");
        for (const auto& [k, v] : p.items()) set_param(c.params, k, v.get<double>());
    }
    if (j.contains("sweep")) {
        c.sweeps.clear();
        for (const auto& a : j.at("sweep")) {
            detail::check_keys(a, {"name", "lo", "hi", "steps"}, "sweep");
            SweepAxis ax;
            ax.name = a.at("name").get<std::string>();
            read(a, "lo", ax.lo);
            ax.hi = ax.lo;
            read(a, "hi", ax.hi);
            read(a, "steps", ax.steps);
            c.sweeps.push_back(ax);
        }
    }
    if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    read(j, "threads", c.threads);
    read(j, "tol", c.tol);
    if (j.contains("steady")) {
        const auto& s = j.at("steady");
        detail::check_keys(s, {"wigner", "wigner_grid", "n_phi"}, "steady");
        read(s, "wigner", c.steady.wigner);
        read(s, "n_phi", c.steady.n_phi);
        if (s.contains("wigner_grid")) {
            const auto& g = s.at("wigner_grid");
            detail::check_keys(g, {"x_min", "x_max", "nx", "p_min", "p_max", "np"}, "wigner_grid");
            read(g, "x_min", c.steady.grid.x_min);
            read(g, "x_max", c.steady.grid.x_max);
            read(g, "nx", c.steady.grid.nx);
            read(g, "p_min", c.steady.grid.p_min);
            read(g, "p_max", c.steady.grid.p_max);
            read(g, "np", c.steady.grid.np);
        }
    }
    if (j.contains("dynamics")) {
        const auto& s = j.at("dynamics");
        detail::check_keys(s, {"t_end", "dt", "fit", "fit_t_min", "observable"}, "dynamics");
        read(s, "t_end", c.dynamics.t_end);
        read(s, "dt", c.dynamics.dt);
        read(s, "fit", c.dynamics.fit);
        read(s, "observable", c.dynamics.observable);
        if (s.contains("fit_t_min") && !s.at("fit_t_min").is_null()) c.dynamics.fit_t_min = s.at("fit_t_min").get<double>();
    }
    if (j.contains("spectrum")) {
        const auto& s = j.at("spectrum");
        detail::check_keys(s, {"task", "modes", "lep_drives", "lep_lo", "lep_hi", "lep_tol", "omega", "power_modes"},
                           "spectrum");
        read(s, "task", c.spectrum.task);
        read(s, "modes", c.spectrum.modes);
        read(s, "lep_drives", c.spectrum.lep_drives);
        read(s, "lep_lo", c.spectrum.lep_lo);
        read(s, "lep_hi", c.spectrum.lep_hi);
        read(s, "lep_tol", c.spectrum.lep_tol);
        read(s, "power_modes", c.spectrum.power_modes);
        if (s.contains("omega")) c.spectrum.omega = detail::read_range(s.at("omega"), "spectrum.omega");
    }
    if (j.contains("meanfield")) {
        const auto& s = j.at("meanfield");
        detail::check_keys(s, {"task", "t_end", "dt", "initial", "delta", "drive", "bisection_tol"}, "meanfield");
        read(s, "task", c.meanfield.task);
        read(s, "t_end", c.meanfield.t_end);
        read(s, "dt", c.meanfield.dt);
        read(s, "bisection_tol", c.meanfield.bisection_tol);
        if (s.contains("initial")) {
            const auto v = s.at("initial").get<std::vector<double>>();
            if (v.size() != 5) throw invalid_parameter("meanfield.initial: expected [x1, y1, x2, y2, z]");
            c.meanfield.initial = {v[0], v[1], v[2], v[3], v[4]};
        }
        if (s.contains("delta")) c.meanfield.delta = detail::read_range(s.at("delta"), "meanfield.delta");
        if (s.contains("drive")) c.meanfield.drive = detail::read_range(s.at("drive"), "meanfield.drive");
    }
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw invalid_parameter("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw invalid_parameter("config file " + path.string() + ": " + e.what());
    }
    RunConfig c;
    apply_json(c, j);
    return c;
}

inline json to_json(const SystemParams& p) {
    return {{"eta", p.eta},       {"omega", p.omega},       {"gamma", p.gamma}, {"big_gamma", p.big_gamma},
            {"drive_f", p.drive_f}, {"detuning", p.detuning}, {"n_fock", p.n_fock}};
}

/// Fully resolved configuration, as stored in every sidecar.
inline json to_json(const RunConfig& c) {
    json sweeps = json::array();
    for (const auto& a : c.sweeps) sweeps.push_back({{"name", a.name}, {"lo", a.lo}, {"hi", a.hi}, {"steps", a.steps}});
    const auto& g = c.steady.grid;
    const auto& m = c.meanfield.initial;
    return {
        {"params", to_json(c.params)},
        {"sweep", sweeps},
        {"out_dir", c.out_dir.string()},
        {"threads", c.threads},
        {"tol", c.tol},
        {"steady",
         {{"wigner", c.steady.wigner},
          {"n_phi", c.steady.n_phi},
          {"wigner_grid",
           {{"x_min", g.x_min}, {"x_max", g.x_max}, {"nx", g.nx}, {"p_min", g.p_min}, {"p_max", g.p_max}, {"np", g.np}}}}},
        {"dynamics",
         {{"t_end", c.dynamics.t_end},
          {"dt", c.dynamics.dt},
          {"fit", c.dynamics.fit},
          {"fit_t_min", c.dynamics.fit_t_min ? json(*c.dynamics.fit_t_min) : json(nullptr)},
          {"observable", c.dynamics.observable}}},
        {"spectrum",
         {{"task", c.spectrum.task},
          {"modes", c.spectrum.modes},
          {"lep_drives", c.spectrum.lep_drives},
          {"lep_lo", c.spectrum.lep_lo},
          {"lep_hi", c.spectrum.lep_hi},
          {"lep_tol", c.spectrum.lep_tol},
          {"omega", detail::write_range(c.spectrum.omega)},
          {"power_modes", c.spectrum.power_modes}}},
        {"meanfield",
         {{"task", c.meanfield.task},
          {"t_end", c.meanfield.t_end},
          {"dt", c.meanfield.dt},
          {"initial", {m.x1, m.y1, m.x2, m.y2, m.z}},
          {"delta", detail::write_range(c.meanfield.delta)},
          {"drive", detail::write_range(c.meanfield.drive)},
          {"bisection_tol", c.meanfield.bisection_tol}}},
    };
}

} // namespace ionsync::cli
