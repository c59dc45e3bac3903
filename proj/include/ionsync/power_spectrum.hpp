#pragma once

// Phonon power spectrum S(ω) = ∫ <a†(t) a(0)>_ss e^{-iωt} dt, assembled from
// Liouvillian eigenmodes (quantum regression), plus a time-domain route used
// as a cross-check on small instances.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ionsync/dynamics.hpp"
#include "ionsync/liouvillian.hpp"

namespace ionsync {

struct PowerSpectrum {
    std::vector<double> omegas;
    std::vector<double> values;
    double omega_obs = 0.0;
    double peak_value = 0.0;
    double min_ratio = 0.0; // min S / max S; negative dips flag a truncated mode sum
    std::size_t modes_used = 0;
    double sum_rule_error = 0.0; // |Σ_used w_j - (<a†a> - |<a>|²)| relative to the latter
    std::vector<std::string> warnings;
};

struct PowerSpectrumOptions {
    double weight_fraction = 0.999; // keep the largest-|w_j| modes up to this share of Σ|w_j|
    double negative_dip_tol = 1e-3;
};

/// Grid argmax refined by a parabola through the three neighbouring samples.
inline double refine_peak(const std::vector<double>& x, const std::vector<double>& y, bool* interior = nullptr) {
    if (x.empty() || x.size() != y.size()) throw invalid_parameter("refine_peak: bad grid");
    const auto i = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
    if (interior) *interior = i > 0 && i + 1 < y.size();
    if (i == 0 || i + 1 >= y.size()) return x[i];
    const double x0 = x[i - 1], x1 = x[i], x2 = x[i + 1];
    const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
    const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    if (!(a < 0.0)) return x1;
    return std::clamp(-b / (2.0 * a), x0, x2);
}

namespace detail {

inline void finish_spectrum(PowerSpectrum& s, const PowerSpectrumOptions& opt) {
    bool interior = false;
    s.omega_obs = refine_peak(s.omegas, s.values, &interior);
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    s.peak_value = *hi;
    s.min_ratio = *hi != 0.0 ? *lo / *hi : 0.0;
    if (!interior) s.warnings.push_back("spectral peak sits on the edge of the frequency grid");
    if (s.min_ratio < -opt.negative_dip_tol)
        s.warnings.push_back("negative spectral dip " + std::to_string(s.min_ratio) + " of the peak");
}

} // namespace detail

/// S(ω) = 2 Re Σ_{j>=1} w_j / (iω - λ_j), w_j = Tr[σ_j a ρ_ss] Tr[a† ρ_j].
/// Mode 0 (the stationary part |<a>|², a delta at ω = 0) is excluded. Refuses
/// to run when a defective mode is among the weight-selected modes.
inline PowerSpectrum power_spectrum(const Spectrum& spec, const QuantumState& rho_ss, const Matrix& a,
                                    const std::vector<double>& omegas, const PowerSpectrumOptions& opt = {}) {
    if (spec.modes.size() < 2) throw invalid_parameter("power_spectrum: need at least one non-stationary mode");
    if (omegas.empty()) throw invalid_parameter("power_spectrum: empty frequency grid");
    const Matrix a_rho = a * rho_ss.rho;
    const Matrix a_dag = a.adjoint();
    std::vector<cplx> w(spec.modes.size(), 0.0);
    for (std::size_t j = 1; j < spec.modes.size(); ++j)
        w[j] = (spec.modes[j].left * a_rho).trace() * (a_dag * spec.modes[j].right).trace();

    std::vector<std::size_t> order(spec.modes.size() - 1);
    std::iota(order.begin(), order.end(), std::size_t{1});
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) { return std::abs(w[x]) > std::abs(w[y]); });
    double total = 0.0;
    for (auto j : order) total += std::abs(w[j]);
    std::vector<std::size_t> used;
    double acc = 0.0;
    for (auto j : order) {
        if (total > 0.0 && acc >= opt.weight_fraction * total) break;
        used.push_back(j);
        acc += std::abs(w[j]);
    }
    std::sort(used.begin(), used.end());
    std::string bad;
    for (auto j : used)
        if (spec.modes[j].defective) bad += (bad.empty() ? "" : ", ") + std::to_string(spec.modes[j].index);
    if (!bad.empty())
        throw defective_modes("power_spectrum: defective modes {" + bad + "} carry spectral weight; "
                              "biorthogonal expansion unavailable");

    PowerSpectrum s;
    s.omegas = omegas;
    s.values.resize(omegas.size());
    s.modes_used = used.size();
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        cplx sum = 0.0;
        for (auto j : used) sum += w[j] / (I * omegas[i] - spec.modes[j].lambda);
        s.values[i] = 2.0 * sum.real();
    }

    cplx used_sum = 0.0;
    for (auto j : used) used_sum += w[j];
    const double n = expectation_real(a_dag * a, rho_ss.rho);
    const double fluct = n - std::norm(expectation(a, rho_ss.rho));
    s.sum_rule_error = fluct > 0.0 ? std::abs(used_sum - fluct) / fluct : std::abs(used_sum);
    if (!spec.complete)
        s.warnings.push_back("partial eigenspectrum (" + std::to_string(spec.modes.size()) +
                             " modes); sum-rule error " + std::to_string(s.sum_rule_error));
    detail::finish_spectrum(s, opt);
    return s;
}

struct CorrelationOptions {
    double t_max = 60.0;
    double dt = 0.01;
    EvolveOptions evolve;
};

/// Time-domain route: C(t) = Tr[a† e^{Lt}(a ρ_ss)] - |<a>|² integrated by the
/// trapezoid rule, S(ω) = 2 Re ∫_0^T C(t) e^{-iωt} dt.
template <class Generator>
PowerSpectrum power_spectrum_direct(const Generator& gen, const QuantumState& rho_ss, const Matrix& a,
                                    const std::vector<double>& omegas, const CorrelationOptions& copt = {},
                                    const PowerSpectrumOptions& opt = {}) {
    if (omegas.empty()) throw invalid_parameter("power_spectrum_direct: empty frequency grid");
    const std::vector<double> times = time_grid(copt.t_max, copt.dt);
    const Matrix a_dag = a.adjoint();
    const cplx mean = expectation(a, rho_ss.rho);
    std::vector<cplx> corr;
    corr.reserve(times.size());
    propagate(
        gen, Matrix(a * rho_ss.rho), times,
        [&](double, const Matrix& x) { corr.push_back((a_dag * x).trace() - std::norm(mean)); }, copt.evolve);

    PowerSpectrum s;
    s.omegas = omegas;
    s.values.resize(omegas.size());
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        cplx sum = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double wgt = (k == 0 || k + 1 == times.size()) ? 0.5 : 1.0;
            sum += wgt * corr[k] * std::polar(1.0, -omegas[i] * times[k]);
        }
        s.values[i] = 2.0 * (sum * copt.dt).real();
    }
    if (std::abs(corr.back()) > 1e-4 * std::abs(corr.front()))
        s.warnings.push_back("correlation has not decayed by t_max");
    detail::finish_spectrum(s, opt);
    return s;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    if (n < 2) return {lo};
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
}

} // namespace ionsync
