// Batch front end: ionsync <steady|dynamics|spectrum|meanfield> [options]

#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ionsync/cli/commands.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<double> eta, omega, gamma, drive_f, detuning, tol;
    std::optional<int> n_fock;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--eta", o.eta, "Lamb-Dicke parameter");
    cmd->add_option("--omega", o.omega, "blue-sideband Rabi frequency (units of Gamma)");
    cmd->add_option("--gamma", o.gamma, "effective spontaneous emission rate (units of Gamma)");
    cmd->add_option("--drive-f", o.drive_f, "drive strength F (units of Gamma)");
    cmd->add_option("--detuning", o.detuning, "drive detuning (units of Gamma)");
    cmd->add_option("--n-fock", o.n_fock, "Fock-space truncation");
    cmd->add_option("--out-dir", o.out_dir, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads");
    cmd->add_option("--tol", o.tol, "relative tolerance (integrator rtol, steady-state residual)");
}

ionsync::cli::RunConfig resolve(const Overrides& o) {
    using namespace ionsync::cli;
    RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
    if (o.eta) c.params.eta = *o.eta;
    if (o.omega) c.params.omega = *o.omega;
    if (o.gamma) c.params.gamma = *o.gamma;
    if (o.drive_f) c.params.drive_f = *o.drive_f;
    if (o.detuning) c.params.detuning = *o.detuning;
    if (o.n_fock) c.params.n_fock = *o.n_fock;
    if (o.threads) c.threads = *o.threads;
    if (o.tol) c.tol = *o.tol;
    if (o.out_dir) c.out_dir = *o.out_dir;
    c.validate();
    std::filesystem::create_directories(c.out_dir);
    return c;
}

} // namespace

int main(int argc, char** argv) {
    using namespace ionsync::cli;
    CLI::App app{"Driven single-ion phonon laser: steady states, dynamics, Liouvillian spectra, mean field"};
    app.require_subcommand(1);
    Overrides o;
    std::string spectrum_task, meanfield_task;
    bool wigner = false, fit = false;

    auto* steady = app.add_subcommand("steady", "steady-state entanglement, sync measure, Wigner function");
    add_common(steady, o);
    steady->add_flag("--wigner", wigner, "also write the Wigner function of every point");
    auto* dynamics = app.add_subcommand("dynamics", "trajectories from |g>|0>, optional damped-oscillation fit");
    add_common(dynamics, o);
    dynamics->add_flag("--fit", fit, "fit A exp(-bt) sin(wt + phi) + c to the entanglement");
    auto* spectrum = app.add_subcommand("spectrum", "Liouvillian eigenspectrum, LEP scan, power spectrum");
    add_common(spectrum, o);
    spectrum->add_option("--task", spectrum_task, "eigen | lep | power");
    auto* meanfield = app.add_subcommand("meanfield", "fixed points, trajectories, phase diagram");
    add_common(meanfield, o);
    meanfield->add_option("--task", meanfield_task, "fixed-points | trajectory | phase-diagram");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kClean : kFatal;
    }

    try {
        RunConfig c = resolve(o);
        if (wigner) c.steady.wigner = true;
        if (fit) c.dynamics.fit = true;
        if (!spectrum_task.empty()) c.spectrum.task = spectrum_task;
        if (!meanfield_task.empty()) c.meanfield.task = meanfield_task;

        const std::string name = app.get_subcommands().front()->get_name();
        const Log log(name);
        log("writing to " + c.out_dir.string() + " with " + std::to_string(c.threads) + " thread(s)");
        int rc = kFatal;
        if (name == "steady") rc = cmd_steady(c, log);
        else if (name == "dynamics") rc = cmd_dynamics(c, log);
        else if (name == "spectrum") rc = cmd_spectrum(c, log);
        else if (name == "meanfield") rc = cmd_meanfield(c, log);
        log(rc == kClean ? "done" : "done with failed points");
        return rc;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fatal: %s\n", e.what());
        return kFatal;
    }
}
