// qpic: batch front door for the spin-photon interface toolkit.
//
// Subcommands: purcell | fit | sweep | budget | reflection | report-table1.
// Every command emits a machine-readable JSON report; sweep additionally
// writes the fidelity and success-probability grids as CSV matrices.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure,
// 64 usage error.

#include <complex>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "qpic/budget.hpp"
#include "qpic/cavity_qed.hpp"
#include "qpic/fit/models.hpp"
#include "qpic/io/config.hpp"
#include "qpic/io/report.hpp"
#include "qpic/io/trace_io.hpp"
#include "qpic/protocol.hpp"
#include "qpic/units.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_validation = 2;
constexpr int exit_numerical = 3;
constexpr int exit_usage = 64;

using qpic::units::two_pi;

void emit(const qpic::io::Report& report, const std::string& out_path) {
    if (out_path.empty())
        std::cout << report.serialize();
    else
        report.write(out_path);
}

qpic::io::DeviceConfig require_system(const std::string& preset) {
    auto cfg = qpic::io::load_device_config(preset);
    if (!cfg.system)
        throw qpic::io::ConfigError("config " + preset + " does not define [cavity]/[emitter]");
    return cfg;
}

int cmd_purcell(const std::string& preset, double projection_factor, const std::string& out) {
    auto cfg = require_system(preset);
    const auto& sys = *cfg.system;
    const auto& em = sys.emitter;
    const auto& cav = sys.cavity;

    qpic::io::Report report("purcell");
    report.input("config", cfg.source);

    const double fp = qpic::cavity::purcell_from_lifetimes(em.tau_bulk_ns, em.xi(),
                                                           em.tau_on_ns, em.tau_off_ns);
    const double fp_max = qpic::cavity::purcell_max(cav.q, cav.v_norm);
    const double lambda_e = qpic::units::freq_to_wl(em.nu_e);
    const double lambda_c = qpic::units::freq_to_wl(cav.nu_c);
    const double fp_zero_detuning = qpic::cavity::detuning_correction(fp, cav.q, lambda_e, lambda_c);
    const double g_ghz = sys.g.rad_per_s / two_pi / 1e9;
    const double gamma_tot =
        qpic::units::fwhm_to_angular(qpic::units::LinewidthFwhm{
            em.radiative_fwhm().hz + em.gamma_star.hz}).rad_per_s;
    const double coop = qpic::cavity::cooperativity(sys.g, cav.kappa(),
                                                    qpic::units::AngularRate{gamma_tot});

    report.output("purcell_factor", fp);
    report.output("purcell_factor_zero_detuning", fp_zero_detuning);
    report.output("beta_factor", qpic::cavity::beta_factor(fp));
    report.output("purcell_max_theoretical", fp_max);
    report.output("purcell_max_projected", qpic::cavity::dipole_projection(fp_max, projection_factor));
    report.output("projection_factor", projection_factor);
    report.output("kappa_over_2pi_GHz", cav.kappa().rad_per_s / two_pi / 1e9);
    report.output("coupling_g_over_2pi_GHz", g_ghz);
    report.output("cooperativity", coop);
    report.output("transform_limit_MHz", em.radiative_fwhm().hz / 1e6);
    emit(report, out);
    return exit_ok;
}

int cmd_reflection(const std::string& preset, const std::string& spin_name,
                   double probe_detuning_ghz, double delta_e_mhz, const std::string& out) {
    auto cfg = require_system(preset);
    const auto& sys = *cfg.system;
    const auto spin =
        spin_name == "up" ? qpic::cavity::Spin::Up : qpic::cavity::Spin::Down;
    const qpic::units::Frequency probe{sys.cavity.nu_c.hz + probe_detuning_ghz * 1e9};
    const std::complex<double> r =
        qpic::cavity::reflection(probe, sys, spin, delta_e_mhz * 1e6);

    qpic::io::Report report("reflection");
    report.input("config", cfg.source);
    report.input("spin", spin_name);
    report.input("probe_detuning_GHz", probe_detuning_ghz);
    report.input("emitter_offset_MHz", delta_e_mhz);
    report.output("reflection_real", r.real());
    report.output("reflection_imag", r.imag());
    report.output("reflectance", std::norm(r));
    report.output("phase_rad", std::arg(r));
    emit(report, out);
    return exit_ok;
}

int cmd_sweep(const std::string& preset, const std::string& out_dir) {
    auto cfg = require_system(preset);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const auto& sw = cfg.sweep;
    auto grid = qpic::protocol::sweep_map(
        *cfg.system, cfg.protocol, cfg.efficiency,
        qpic::protocol::log_spaced(sw.coupling_min, sw.coupling_max, sw.coupling_points),
        qpic::protocol::log_spaced(sw.gamma_star_min_mhz, sw.gamma_star_max_mhz,
                                   sw.gamma_star_points));

    qpic::io::write_grid_csv((fs::path(out_dir) / "fidelity.csv").string(), grid, true);
    qpic::io::write_grid_csv((fs::path(out_dir) / "psucc.csv").string(), grid, false);

    qpic::io::Report report("sweep");
    report.input("config", cfg.source);
    report.input("coupling_points", sw.coupling_points);
    report.input("gamma_star_points", sw.gamma_star_points);
    nlohmann::json locus = nlohmann::json::array();
    for (std::size_t j = 0; j < grid.gamma_star_mhz.size(); ++j)
        locus.push_back({{"gamma_star_MHz", grid.gamma_star_mhz[j]},
                         {"optimal_coupling_ratio", grid.coupling_ratios[grid.optimal_locus[j]]},
                         {"fidelity", grid.fidelity[j][grid.optimal_locus[j]]}});
    report.output("optimal_locus", locus);
    report.output("fidelity_csv", (fs::path(out_dir) / "fidelity.csv").string());
    report.output("psucc_csv", (fs::path(out_dir) / "psucc.csv").string());
    report.write((fs::path(out_dir) / "report.json").string());
    std::cout << "wrote " << out_dir << "/{fidelity.csv,psucc.csv,report.json}\n";
    return exit_ok;
}

int cmd_budget(const std::string& preset, double detector_override, const std::string& out) {
    auto cfg = qpic::io::load_device_config(preset);
    if (!cfg.chain)
        throw qpic::io::ConfigError("config " + preset + " does not define a [budget] chain");
    const double det = detector_override >= 0.0 ? detector_override : cfg.detector_eff;

    auto result = qpic::budget::chain_efficiency(*cfg.chain);
    auto result_no_device = qpic::budget::chain_efficiency(*cfg.chain, false);

    qpic::io::Report report("budget");
    report.input("config", cfg.source);
    report.input("detector_efficiency", det);
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : cfg.chain->stages)
        stages.push_back({{"name", s.name},
                          {"subsystem", s.subsystem},
                          {"value", s.value},
                          {"count", s.count},
                          {"loss_dB", qpic::budget::efficiency_to_db(std::pow(s.value, s.count))},
                          {"device_coupling", s.device_coupling}});
    report.output("stages", stages);
    for (const auto& [marker, value] : result.subtotals)
        report.output("subtotal_" + marker, value);
    report.output("collection_total", result.total);
    report.output("overall_detection", result.total * det);
    report.output("collection_total_no_device_coupling", result_no_device.total);
    report.output("overall_detection_no_device_coupling", result_no_device.total * det);
    emit(report, out);
    return exit_ok;
}

int cmd_fit(const std::string& model_name, const std::string& trace_path, int n_peaks,
            const std::vector<std::string>& init_kv, const std::string& out) {
    auto trace = qpic::io::load_trace(trace_path);
    auto model = qpic::fit::model_by_name(model_name, n_peaks);

    // heuristic defaults, overridable by --init name=value
    std::vector<double> init(model.n_params(), 0.0);
    if (model_name == "fano_lorentz") {
        auto g = qpic::fit::guess_peak(trace);
        init = {g.baseline, g.amplitude, 0.5, 1.0, g.center, g.fwhm};
    } else if (model_name == "lorentzian_multi") {
        auto g = qpic::fit::guess_peak(trace);
        init[0] = g.baseline;
        for (int k = 0; k < n_peaks; ++k) {
            init[1 + 3 * k] = g.amplitude;
            init[2 + 3 * k] = g.center + (k - 0.5 * (n_peaks - 1)) * g.fwhm;
            init[3 + 3 * k] = g.fwhm;
        }
    } else if (model_name == "lifetime_emg") {
        auto g = qpic::fit::guess_peak(trace);
        const double dx = (trace.x.back() - trace.x.front()) / trace.size();
        double area = 0.0;
        for (double y : trace.y) area += (y - g.baseline) * dx;
        init = {g.center, std::max(area, dx), std::max(g.fwhm, dx), 0.234, std::max(g.baseline, 0.0)};
    } else if (model_name == "g2_dip") {
        auto g = qpic::fit::guess_peak(trace, false);  // dip
        init = {std::clamp(g.baseline + g.amplitude, 0.0, 1.0), std::max(g.fwhm, 1e-3), 0.0};
    }
    for (const auto& kv : init_kv) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw qpic::io::ConfigError("--init expects name=value, got: " + kv);
        const std::string name = kv.substr(0, eq);
        const double value = std::stod(kv.substr(eq + 1));
        bool found = false;
        for (std::size_t i = 0; i < model.param_names.size(); ++i)
            if (model.param_names[i] == name) {
                init[i] = value;
                found = true;
            }
        if (!found) throw qpic::io::ConfigError("model has no parameter named " + name);
    }

    qpic::fit::FitOptions fit_opt;
    if (model_name == "fano_lorentz") {
        // eta is not identifiable alongside y0/A/q; hold it at its initial
        // value (override with --init eta=...)
        fit_opt.lower.assign(model.n_params(), -1e300);
        fit_opt.upper.assign(model.n_params(), 1e300);
        fit_opt.lower[2] = fit_opt.upper[2] = init[2];
    }

    qpic::fit::FitOutcome fit;
    if (model_name == "lorentzian_multi")
        fit = qpic::fit::fit_ple_multipeak(trace, n_peaks, init, fit_opt);
    else
        fit = qpic::fit::fit_curve(model, trace, init, fit_opt);

    if (model_name == "fano_lorentz")
        fit.derived["Q"] = fit.param("center") / fit.param("fwhm");
    if (model_name == "g2_dip") fit.derived["g2_zero"] = fit.param("g0");
    if (model_name == "lifetime_emg") fit.derived["tau_ns"] = fit.param("tau");

    qpic::io::Report report("fit");
    report.input("model", model_name);
    report.input("trace", trace_path);
    report.input("axis", qpic::axis_kind_name(trace.axis));
    report.input("points", trace.size());
    report.add_fit_outcome("fit", fit);
    if (!fit.converged) report.warn("fit did not converge within the iteration budget");
    emit(report, out);
    return fit.converged ? exit_ok : exit_numerical;
}

int cmd_report_table1(const std::string& out) {
    qpic::io::Report report("report-table1");
    nlohmann::json rows = nlohmann::json::array();
    for (const std::string ch : {"2", "4", "5", "6"}) {
        auto cfg = require_system("table1-ch" + ch);
        const auto& em = cfg.system->emitter;
        const double fp = qpic::cavity::purcell_from_lifetimes(em.tau_bulk_ns, em.xi(),
                                                               em.tau_on_ns, em.tau_off_ns);
        rows.push_back({{"channel", ch},
                        {"zpl_nm", qpic::units::freq_to_wl(em.nu_e)},
                        {"tau_on_ns", em.tau_on_ns},
                        {"tau_off_ns", em.tau_off_ns},
                        {"lifetime_ratio", em.tau_off_ns / em.tau_on_ns},
                        {"purcell_factor", fp},
                        {"beta_factor", qpic::cavity::beta_factor(fp)}});
    }
    report.output("channels", rows);
    emit(report, out);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cavity-coupled spin-photon interface toolkit"};
    app.require_subcommand(1);

    std::string preset, out, spin = "down", model, trace_path;
    std::string sweep_out = "sweep-out";
    double projection = qpic::cavity::paper_111_100_factor;
    double probe_detuning_ghz = 0.0, delta_e_mhz = 0.0, detector = -1.0;
    int n_peaks = 1;
    std::vector<std::string> init_kv;

    auto* purcell = app.add_subcommand("purcell", "Purcell / beta / coupling figures of merit");
    purcell->add_option("--preset,--config", preset, "preset name or config path")->required();
    purcell->add_option("--projection", projection, "dipole projection factor");
    purcell->add_option("--out", out, "report path (default stdout)");

    auto* refl = app.add_subcommand("reflection", "complex cavity reflection coefficient");
    refl->add_option("--preset,--config", preset)->required();
    refl->add_option("--spin", spin, "down | up")->check(CLI::IsMember({"down", "up"}));
    refl->add_option("--probe-detuning-ghz", probe_detuning_ghz, "probe offset from cavity resonance");
    refl->add_option("--delta-e-mhz", delta_e_mhz, "emitter spectral-diffusion offset");
    refl->add_option("--out", out);

    auto* sweep = app.add_subcommand("sweep", "fidelity / success-probability map");
    sweep->add_option("--preset,--config", preset)->required();
    sweep->add_option("--out", sweep_out, "output directory");

    auto* bud = app.add_subcommand("budget", "efficiency chain report");
    bud->add_option("--preset,--config", preset)->required();
    bud->add_option("--detector", detector, "override detector efficiency");
    bud->add_option("--out", out);

    auto* fit = app.add_subcommand("fit", "fit a measurement model to a trace");
    fit->add_option("--model", model, "fano_lorentz | lorentzian_multi | lifetime_emg | g2_dip")
        ->required();
    fit->add_option("--trace", trace_path, "CSV trace file")->required();
    fit->add_option("--npeaks", n_peaks, "peak count for lorentzian_multi");
    fit->add_option("--init", init_kv, "initial parameter overrides, name=value");
    fit->add_option("--out", out);

    auto* table1 = app.add_subcommand("report-table1", "Purcell summary of the four QMC channels");
    table1->add_option("--out", out);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        if (purcell->parsed()) return cmd_purcell(preset, projection, out);
        if (refl->parsed()) return cmd_reflection(preset, spin, probe_detuning_ghz, delta_e_mhz, out);
        if (sweep->parsed()) return cmd_sweep(preset, sweep_out);
        if (bud->parsed()) return cmd_budget(preset, detector, out);
        if (fit->parsed()) return cmd_fit(model, trace_path, n_peaks, init_kv, out);
        if (table1->parsed()) return cmd_report_table1(out);
    } catch (const qpic::fit::RankDeficiencyError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const qpic::io::ConfigError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const qpic::io::TraceParseError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return exit_validation;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return exit_numerical;
    }
    return exit_usage;
}
