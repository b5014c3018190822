// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Numeric anchors and tolerances are pinned in-line.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "qpic/budget.hpp"
#include "qpic/cavity_qed.hpp"
#include "qpic/fit/levmar.hpp"
#include "qpic/fit/models.hpp"
#include "qpic/io/config.hpp"
#include "qpic/protocol.hpp"
#include "qpic/units.hpp"

using namespace qpic;
using units::AngularRate;
using units::Frequency;
using units::LinewidthFwhm;
using units::two_pi;

namespace {

int failures = 0;

void report(int criterion, bool ok, const char* description) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, description);
    if (!ok) ++failures;
}

cavity::SpinCavitySystem star_system(double coupling_ratio, double gamma_star_mhz) {
    cavity::SpinCavitySystem sys;
    sys.cavity.nu_c = Frequency{484.13e12};
    sys.cavity.q = 2280.0;
    sys.cavity.coupling_ratio = coupling_ratio;
    sys.cavity.scatter_ratio = 1.0 - coupling_ratio;
    sys.cavity.v_norm = 0.8;
    sys.emitter.nu_e = sys.cavity.nu_c;
    sys.emitter.tau_on_ns = 1.12;
    sys.emitter.tau_off_ns = 5.725;
    sys.emitter.tau_bulk_ns = 5.10;
    sys.emitter.quantum_efficiency = 0.80;
    sys.emitter.debye_waller = 0.57;
    sys.emitter.gamma_star = LinewidthFwhm{gamma_star_mhz * 1e6};
    sys.g = cavity::coupling_g_from_enhanced_rate(units::inverse_lifetime(1.12),
                                                  sys.cavity.kappa());
    return sys;
}

SpectrumTrace synth(const fit::Model& model, const std::vector<double>& truth, double lo,
                    double hi, std::size_t n) {
    SpectrumTrace t;
    t.x.resize(n);
    t.y.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        t.x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    model.eval(t.x, truth, t.y);
    return t;
}

bool within_3sigma(const fit::FitOutcome& f, const std::vector<double>& truth) {
    if (!f.converged) return false;
    const std::size_t n = truth.size();
    for (std::size_t j = 0; j < n; ++j) {
        const double se = std::sqrt(std::max(f.covariance[j * n + j], 0.0));
        if (std::abs(f.params[j] - truth[j]) > 3.0 * se + 1e-9) return false;
    }
    return true;
}

}  // namespace

int main() {
    // 1. Purcell pipeline and Table-1 beta values
    {
        const double fp = cavity::purcell_from_lifetimes(5.10, 0.456, 1.12, 5.89);
        bool ok = fp >= 7.9 && fp <= 8.3;
        const double fp_tab[] = {4.13, 10.40, 5.32, 8.07};
        const double beta_tab[] = {0.81, 0.91, 0.84, 0.89};
        for (int i = 0; i < 4; ++i)
            ok = ok && std::abs(cavity::beta_factor(fp_tab[i]) - beta_tab[i]) <= 0.01;
        report(1, ok, "Purcell factor 8.07-class from lifetimes; four channel betas within 0.01");
    }

    // 2. Theoretical maximum and dipole projection
    {
        const double fmax = cavity::purcell_max(2280.0, 0.8);
        const double proj = cavity::dipole_projection(fmax, cavity::paper_111_100_factor);
        report(2, fmax >= 215.0 && fmax <= 218.0 && std::abs(proj - 124.9) <= 0.5,
               "purcell_max(2280, 0.8) in [215, 218]; projected value 124.9 +- 0.5");
    }

    // 3. g2 background correction
    {
        const auto c = fit::background_correct_g2(0.25, 4380.0, 290.0);
        report(3, c.g0 >= 0.13 && c.g0 <= 0.16 && !c.clamped,
               "background_correct_g2(0.25, 4380, 290) in [0.13, 0.16]");
    }

    // 4. Dephasing extraction
    {
        const double a = fit::dephasing_from_linewidth(LinewidthFwhm{204e6}, 5.89).gamma_star.hz / 1e6;
        const double b =
            fit::dephasing_from_linewidth(LinewidthFwhm{55.2e6}, 5.725).gamma_star.hz / 1e6;
        report(4, a >= 174.0 && a <= 180.0 && b >= 26.0 && b <= 29.0,
               "gamma* = 176-class and 27-class MHz from measured linewidths");
    }

    // 5. Coupling strength
    {
        const auto kappa = units::q_to_kappa(2280.0, Frequency{484.13e12});
        const double g_ghz =
            cavity::coupling_g_from_enhanced_rate(units::inverse_lifetime(1.12), kappa).rad_per_s /
            two_pi / 1e9;
        report(5, g_ghz >= 2.6 && g_ghz <= 3.0, "g/2pi in [2.6, 3.0] GHz from tau_on = 1.12 ns");
    }

    // 6. Fidelity/success anchors and the full sweep budget
    {
        protocol::ProtocolConfig cfg;
        const double f_blue = protocol::transfer_fidelity(star_system(5e-3, 176.0), cfg);
        const double f_red = protocol::transfer_fidelity(star_system(0.62, 27.0), cfg);
        protocol::EfficiencyPair eff{1.9e-2, 3.4e-2};
        const double p_red = protocol::success_probability(star_system(0.62, 27.0), cfg, eff);
        bool ok = std::abs(f_blue - 0.50) <= 0.05 && f_red >= 0.95 && p_red >= 3e-5 && p_red <= 3e-4;

        const auto t0 = std::chrono::steady_clock::now();
        auto grid = protocol::sweep_map(star_system(0.5, 1.0), cfg, eff,
                                        protocol::log_spaced(1e-3, 1.0, 60),
                                        protocol::log_spaced(1e-2, 1e3, 60));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ok = ok && secs < 60.0 && grid.fidelity.size() == 60;
        std::printf("       (blue F = %.4f, red F = %.4f, red p = %.3e, sweep %.1f s)\n", f_blue,
                    f_red, p_red, secs);
        report(6, ok, "map anchors: blue 0.50 +- 0.05, red >= 0.95, p in [3e-5, 3e-4]; sweep < 60 s");
    }

    // 7. Critical-coupling crossing of F = 0.9
    {
        protocol::ProtocolConfig cfg;
        double crossing = -1.0;
        double prev_f = protocol::transfer_fidelity(star_system(0.05, 0.1), cfg);
        for (double c = 0.06; c <= 0.99; c += 0.01) {
            const double f = protocol::transfer_fidelity(star_system(c, 0.1), cfg);
            if (prev_f < 0.9 && f >= 0.9) {
                crossing = c;
                break;
            }
            prev_f = f;
        }
        std::printf("       (F = 0.9 crossing at kappa_wg/kappa = %.2f)\n", crossing);
        report(7, crossing >= 0.4 && crossing <= 0.75,
               "F(kappa_wg/kappa) crosses 0.9 inside [0.4, 0.75] at gamma* = 0.1 MHz");
    }

    // 8. Efficiency budget
    {
        auto cfg = io::load_device_config("paper-budget");
        auto r = budget::chain_efficiency(*cfg.chain);
        const double eta_i = r.subtotals.at("i");
        const double eta_ii = r.subtotals.at("ii");
        const double overall = budget::overall_detection(*cfg.chain, cfg.detector_eff);
        auto improved = io::load_device_config("paper-budget-improved");
        const double improved_overall =
            budget::overall_detection(*improved.chain, improved.detector_eff, false);
        std::printf("       (eta_i = %.3e [doc'd model value 3.6e-4 vs quoted 3.2e-4], "
                    "eta_ii = %.3f, overall = %.3e, improved = %.3f)\n",
                    eta_i, eta_ii, overall, improved_overall);
        const bool ok = std::abs(eta_i / 3.2e-4 - 1.0) <= 0.15 &&
                        std::abs(eta_ii - 0.48) <= 0.01 &&
                        std::abs(overall / 9.6e-5 - 1.0) <= 0.20 &&
                        std::abs(improved_overall / 0.19 - 1.0) <= 0.25;
        report(8, ok, "budget subtotals, overall detection and improved scenario within tolerance");
    }

    // 9. Fit round trips, Monte Carlo
    {
        const auto t0 = std::chrono::steady_clock::now();
        std::mt19937 rng(2026);
        const int trials = 100;
        bool ok = true;

        {  // Fano-Lorentz, 1% Gaussian noise; the mixing weight eta is pinned
           // because (y0, A, eta, q) span only three observable combinations
            auto model = fit::model_fano_lorentz();
            const std::vector<double> truth{10.0, 120.0, 0.4, 1.3, 618.45, 0.97};
            std::normal_distribution<double> noise(0.0, 1.3);
            fit::FitOptions fano_opt;
            fano_opt.lower = {-1e30, -1e30, 0.4, -1e30, -1e30, 1e-9};
            fano_opt.upper = {1e30, 1e30, 0.4, 1e30, 1e30, 1e30};
            int good = 0;
            for (int k = 0; k < trials; ++k) {
                auto t = synth(model, truth, 616.0, 621.0, 400);
                t.sigma_y.assign(t.size(), 1.3);
                for (auto& y : t.y) y += noise(rng);
                good += within_3sigma(
                    fit::fit_curve(model, t, {9.0, 110.0, 0.4, 1.1, 618.5, 1.1}, fano_opt), truth);
            }
            std::printf("       (fano_lorentz %d/%d)\n", good, trials);
            ok = ok && good >= 95;
        }
        {  // three-peak Lorentzian at PLE-scale parameters (MHz axis)
            auto model = fit::model_lorentzian_multi(3);
            const std::vector<double> truth{5.0, 900.0, -200.0, 55.2,
                                            800.0, 0.0,   59.0,  300.0, 600.0, 173.5};
            std::normal_distribution<double> noise(0.0, 5.0);
            int good = 0;
            for (int k = 0; k < trials; ++k) {
                auto t = synth(model, truth, -800.0, 1400.0, 700);
                t.sigma_y.assign(t.size(), 5.0);
                for (auto& y : t.y) y += noise(rng);
                good += within_3sigma(
                    fit::fit_curve(model, t,
                                   {4.0, 850.0, -190.0, 60.0, 750.0, 10.0, 55.0, 280.0, 590.0, 160.0}),
                    truth);
            }
            std::printf("       (lorentzian_multi %d/%d)\n", good, trials);
            ok = ok && good >= 95;
        }
        {  // EMG lifetime, Poisson noise, plus the tau = 1.12 +- 0.04 anchor
            auto model = fit::model_lifetime_emg();
            const std::vector<double> truth{5.0, 1.176e4, 1.12, 0.234, 10.0};
            int good = 0, tau_good = 0;
            for (int k = 0; k < trials; ++k) {
                auto t = synth(model, truth, 0.0, 20.0, 500);
                // weights from the noiseless expectation: weighting by the
                // observed counts biases the baseline (Neyman chi-square)
                t.sigma_y.resize(t.size());
                for (std::size_t i = 0; i < t.size(); ++i)
                    t.sigma_y[i] = std::sqrt(std::max(t.y[i], 1.0));
                for (auto& y : t.y) {
                    std::poisson_distribution<long> pd(std::max(y, 0.0));
                    y = static_cast<double>(pd(rng));
                }
                auto f = fit::fit_curve(model, t, {4.8, 1.0e4, 1.0, 0.2, 8.0});
                good += within_3sigma(f, truth);
                tau_good += f.converged && std::abs(f.param("tau") - 1.12) <= 0.04;
            }
            std::printf("       (lifetime_emg %d/%d, tau within 0.04 ns: %d/%d)\n", good, trials,
                        tau_good, trials);
            ok = ok && good >= 95 && tau_good >= 95;
        }
        {  // g2 dip with detector jitter
            auto model = fit::model_g2_dip();
            const std::vector<double> truth{0.25, 2.74, 0.55};
            std::normal_distribution<double> noise(0.0, 0.02);
            fit::FitOptions opt;
            opt.lower = {0.0, 1e-3, 0.0};
            opt.upper = {1.0, 100.0, 10.0};
            int good = 0;
            for (int k = 0; k < trials; ++k) {
                auto t = synth(model, truth, -25.0, 25.0, 300);
                t.sigma_y.assign(t.size(), 0.02);
                for (auto& y : t.y) y += noise(rng);
                good += within_3sigma(fit::fit_curve(model, t, {0.35, 2.0, 0.3}, opt), truth);
            }
            std::printf("       (g2_dip %d/%d)\n", good, trials);
            ok = ok && good >= 95;
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("       (Monte Carlo total %.1f s)\n", secs);
        report(9, ok && secs < 30.0,
               ">= 95/100 Monte Carlo recoveries within 3 sigma for all four models, < 30 s");
    }

    // 10. Reflection invariants
    {
        bool ok = true;
        std::mt19937 rng(777);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < 10000 && ok; ++k) {
            cavity::SpinCavitySystem sys;
            sys.cavity.nu_c = Frequency{484e12 * (0.5 + u(rng))};
            sys.cavity.q = 100.0 + 1e5 * u(rng);
            sys.cavity.coupling_ratio = u(rng);
            sys.cavity.scatter_ratio = (1.0 - sys.cavity.coupling_ratio) * u(rng);
            sys.emitter.nu_e = Frequency{sys.cavity.nu_c.hz * (1.0 + 1e-4 * (u(rng) - 0.5))};
            sys.emitter.tau_on_ns = 0.1 + 5.0 * u(rng);
            sys.emitter.tau_off_ns = sys.emitter.tau_on_ns + 10.0 * u(rng);
            sys.emitter.tau_bulk_ns = 5.1;
            sys.emitter.gamma_star = LinewidthFwhm{1e9 * u(rng)};
            sys.g = AngularRate{two_pi * 5e9 * u(rng)};
            const Frequency probe{sys.cavity.nu_c.hz + (u(rng) - 0.5) * 2e12};
            cavity::ReflectionOptions opt;
            opt.fast_dephasing = u(rng) < 0.5;
            for (auto s : {cavity::Spin::Down, cavity::Spin::Up})
                ok = ok && std::abs(cavity::reflection(probe, sys, s, (u(rng) - 0.5) * 2e10, opt)) <=
                               1.0 + 1e-9;
        }

        auto sys = star_system(0.62, 0.0);
        auto bare = sys;
        bare.g = AngularRate{0.0};
        sys.emitter.nu_e = Frequency{sys.cavity.nu_c.hz + 5e18};
        for (double off : {-100e9, 0.0, 100e9}) {
            const Frequency probe{484.13e12 + off};
            ok = ok && std::abs(cavity::reflection(probe, sys, cavity::Spin::Down) -
                                cavity::reflection(probe, bare, cavity::Spin::Down)) <= 1e-6;
        }

        protocol::ProtocolConfig coarse, fine;
        fine.quadrature.n_points = 257;
        for (auto [c, gs] : {std::pair{5e-3, 176.0}, std::pair{0.62, 27.0}}) {
            ok = ok && std::abs(protocol::transfer_fidelity(star_system(c, gs), coarse) -
                                protocol::transfer_fidelity(star_system(c, gs), fine)) < 1e-4;
        }
        report(10, ok, "passivity over 1e4 draws; g = 0 far-detuning equivalence; quadrature stability");
    }

    std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
                failures);
    return failures == 0 ? 0 : 1;
}
