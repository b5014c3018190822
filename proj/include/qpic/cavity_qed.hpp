#ifndef QPIC_CAVITY_QED_HPP
#define QPIC_CAVITY_QED_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "qpic/units.hpp"

// Emitter-cavity physics core: decay-rate bookkeeping, Purcell calculus,
// coupling-strength extraction and the complex input-output reflection
// coefficient of a single-sided cavity with one coupled emitter.

namespace qpic::cavity {

using units::AngularRate;
using units::Frequency;
using units::LinewidthFwhm;

/// Dipole projection factor between the [111] defect axis and the [100]
/// cavity field axis, back-solved from the reported Purcell maxima
/// (216.2 -> 124.9). Supplied as a constant because the underlying
/// geometry is not stated.
inline constexpr double paper_111_100_factor = 0.5777;

struct CavityParams {
    Frequency nu_c;         // resonance
    double q = 0.0;         // quality factor
    double coupling_ratio = 0.0;  // kappa_wg / kappa
    double scatter_ratio = 0.0;   // kappa_s / kappa
    double v_norm = 1.0;          // mode volume in (lambda/n)^3 units

    // Remainder of the decay budget is the transmission port kappa_t,
    // fixed to exactly 0 in all computations.
    void validate() const {
        if (!(q > 0.0)) throw std::domain_error("CavityParams: Q must be positive");
        if (!(v_norm > 0.0)) throw std::domain_error("CavityParams: mode volume must be positive");
        if (coupling_ratio < 0.0 || coupling_ratio > 1.0)
            throw std::domain_error("CavityParams: coupling_ratio outside [0,1]");
        if (scatter_ratio < 0.0 || scatter_ratio > 1.0)
            throw std::domain_error("CavityParams: scatter_ratio outside [0,1]");
        if (coupling_ratio + scatter_ratio > 1.0 + 1e-12)
            throw std::domain_error("CavityParams: coupling_ratio + scatter_ratio exceeds 1");
        if (!(nu_c.hz > 0.0)) throw std::domain_error("CavityParams: resonance must be positive");
    }

    AngularRate kappa() const { return units::q_to_kappa(q, nu_c); }
    AngularRate kappa_wg() const { return AngularRate{coupling_ratio * kappa().rad_per_s}; }
};

struct EmitterParams {
    Frequency nu_e;          // ZPL, C transition
    double tau_on_ns = 0.0;  // (near-)resonant lifetime
    double tau_off_ns = 0.0; // detuned lifetime
    double tau_bulk_ns = 0.0;
    double quantum_efficiency = 1.0;
    double debye_waller = 1.0;
    LinewidthFwhm gamma_star;      // pure dephasing, FWHM
    Frequency zeeman_split;        // omega_up - omega_down offset, 0 at B=0

    double xi() const { return quantum_efficiency * debye_waller; }

    void validate() const {
        if (!(tau_on_ns > 0.0 && tau_off_ns > 0.0 && tau_bulk_ns > 0.0))
            throw std::domain_error("EmitterParams: lifetimes must be positive");
        if (tau_on_ns > tau_off_ns)
            throw std::domain_error("EmitterParams: tau_on must not exceed tau_off");
        double x = xi();
        if (!(x > 0.0) || x > 1.0)
            throw std::domain_error("EmitterParams: QE*DW must lie in (0,1]");
        if (gamma_star.hz < 0.0)
            throw std::domain_error("EmitterParams: gamma_star must be non-negative");
    }

    /// Radiative (transform-limit) FWHM set by the detuned lifetime.
    LinewidthFwhm radiative_fwhm() const {
        return units::lifetime_to_transform_limit(tau_off_ns);
    }
};

enum class SpinUpModel { Uncoupled, ZeemanDetuned };
enum class Spin { Down, Up };

struct SpinCavitySystem {
    CavityParams cavity;
    EmitterParams emitter;
    AngularRate g;  // emitter-cavity coupling
    SpinUpModel spin_up_model = SpinUpModel::Uncoupled;

    void validate() const {
        cavity.validate();
        emitter.validate();
        if (g.rad_per_s < 0.0)
            throw std::domain_error("SpinCavitySystem: g must be non-negative");
    }
};

/// Purcell factor from the lifetime pair, F_P = (tau_bulk/xi)(1/tau_on - 1/tau_off).
inline double purcell_from_lifetimes(double tau_bulk_ns, double xi,
                                     double tau_on_ns, double tau_off_ns) {
    if (!(tau_bulk_ns > 0.0 && tau_on_ns > 0.0 && tau_off_ns > 0.0))
        throw std::domain_error("purcell_from_lifetimes: lifetimes must be positive");
    if (!(xi > 0.0) || xi > 1.0)
        throw std::domain_error("purcell_from_lifetimes: xi must lie in (0,1]");
    if (tau_on_ns > tau_off_ns)
        throw std::domain_error("purcell_from_lifetimes: tau_on > tau_off (anti-enhancement not modeled)");
    return (tau_bulk_ns / xi) * (1.0 / tau_on_ns - 1.0 / tau_off_ns);
}

/// beta = F_P / (F_P + 1), emission probability into the cavity mode.
inline double beta_factor(double purcell) {
    if (purcell < 0.0) throw std::domain_error("beta_factor: negative Purcell factor");
    return purcell / (purcell + 1.0);
}

/// Theoretical maximum Purcell factor (3/4pi^2) Q / V with V in (lambda/n)^3.
inline double purcell_max(double q, double v_norm) {
    if (!(q > 0.0) || !(v_norm > 0.0))
        throw std::domain_error("purcell_max: Q and mode volume must be positive");
    return 3.0 / (4.0 * std::numbers::pi * std::numbers::pi) * q / v_norm;
}

/// Caller-supplied dipole projection, F = factor * F_max.
inline double dipole_projection(double purcell_max_value, double projection_factor) {
    if (projection_factor < 0.0 || projection_factor > 1.0)
        throw std::domain_error("dipole_projection: factor outside [0,1]");
    return projection_factor * purcell_max_value;
}

/// Corrects a Purcell factor measured at finite emitter-cavity detuning back
/// to zero detuning with the Lorentzian cavity falloff 1 + 4 Q^2 (le/lc - 1)^2.
inline double detuning_correction(double purcell_measured, double q,
                                  double lambda_e_nm, double lambda_c_nm) {
    if (!(q > 0.0) || !(lambda_e_nm > 0.0) || !(lambda_c_nm > 0.0))
        throw std::domain_error("detuning_correction: Q and wavelengths must be positive");
    double x = lambda_e_nm / lambda_c_nm - 1.0;
    return purcell_measured * (1.0 + 4.0 * q * q * x * x);
}

/// g = sqrt(Gamma_enh * kappa) / 2, with Gamma_enh the cavity-enhanced
/// emission rate 1/tau_on as an angular rate.
inline AngularRate coupling_g_from_enhanced_rate(AngularRate gamma_enhanced, AngularRate kappa) {
    if (gamma_enhanced.rad_per_s < 0.0)
        throw std::domain_error("coupling_g_from_enhanced_rate: negative rate");
    if (!(kappa.rad_per_s > 0.0))
        throw std::domain_error("coupling_g_from_enhanced_rate: kappa must be positive");
    return AngularRate{0.5 * std::sqrt(gamma_enhanced.rad_per_s * kappa.rad_per_s)};
}

/// C = 4 g^2 / (kappa gamma_tot).
inline double cooperativity(AngularRate g, AngularRate kappa, AngularRate gamma_tot) {
    if (!(kappa.rad_per_s > 0.0) || !(gamma_tot.rad_per_s > 0.0))
        throw std::domain_error("cooperativity: zero denominator");
    return 4.0 * g.rad_per_s * g.rad_per_s / (kappa.rad_per_s * gamma_tot.rad_per_s);
}

struct ReflectionOptions {
    // When true, pure dephasing is folded into gamma_perp as
    // pi * (dnu_rad + 2 gamma_star) and no spectral-diffusion averaging
    // should be applied by the caller.
    bool fast_dephasing = false;
};

/// Complex input-output reflection coefficient of the single-sided cavity,
///   r = 1 - kappa_wg / [ i(w_c - w) + kappa/2 + g_eff^2 / (i(w_e - w) + gamma_perp) ].
/// delta_e_hz is an emitter-frequency offset (one spectral-diffusion sample).
/// For Spin::Up the emitter either drops out (Uncoupled) or is shifted by
/// the Zeeman splitting (ZeemanDetuned).
inline std::complex<double> reflection(Frequency nu_probe, const SpinCavitySystem& sys,
                                       Spin spin, double delta_e_hz = 0.0,
                                       ReflectionOptions opt = {}) {
    using cplx = std::complex<double>;
    const double kappa = sys.cavity.kappa().rad_per_s;
    const double kappa_wg = sys.cavity.coupling_ratio * kappa;
    const double omega = units::two_pi * nu_probe.hz;
    const double omega_c = units::two_pi * sys.cavity.nu_c.hz;

    double g_eff = sys.g.rad_per_s;
    double omega_e = units::two_pi * (sys.emitter.nu_e.hz + delta_e_hz);
    if (spin == Spin::Up) {
        if (sys.spin_up_model == SpinUpModel::Uncoupled)
            g_eff = 0.0;
        else
            omega_e += units::two_pi * sys.emitter.zeeman_split.hz;
    }

    cplx denom(kappa / 2.0, omega_c - omega);
    if (g_eff > 0.0) {
        double dnu_rad = sys.emitter.radiative_fwhm().hz;
        double gamma_perp = std::numbers::pi * dnu_rad;
        if (opt.fast_dephasing)
            gamma_perp = std::numbers::pi * (dnu_rad + 2.0 * sys.emitter.gamma_star.hz);
        cplx emitter_denom(gamma_perp, omega_e - omega);
        if (std::abs(emitter_denom) == 0.0)
            return cplx(1.0, 0.0);  // infinitely stiff emitter: full reflection
        denom += g_eff * g_eff / emitter_denom;
    }
    return 1.0 - kappa_wg / denom;
}

}  // namespace qpic::cavity

#endif
