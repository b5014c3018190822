#ifndef QPIC_UNITS_HPP
#define QPIC_UNITS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>

// Unit conventions used throughout:
//   - user-facing spectral quantities are ordinary frequency (Hz) or vacuum
//     wavelength (nm),
//   - all internal rate arithmetic is angular (rad/s),
//   - linewidths are FWHM in ordinary Hz.
// Conversions between the two conventions happen here and nowhere else.

namespace qpic::units {

inline constexpr double speed_of_light_m_per_s = 299792458.0;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Ordinary frequency nu in Hz (not angular).
struct Frequency {
    double hz = 0.0;
};

/// Angular rate in rad/s. Houses kappa, g, inverse lifetimes.
struct AngularRate {
    double rad_per_s = 0.0;
};

/// Full width at half maximum in ordinary Hz.
struct LinewidthFwhm {
    double hz = 0.0;
};

inline Frequency wl_to_freq(double wavelength_nm) {
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("wl_to_freq: wavelength must be positive");
    return Frequency{speed_of_light_m_per_s / (wavelength_nm * 1e-9)};
}

inline double freq_to_wl(Frequency nu) {
    if (!(nu.hz > 0.0))
        throw std::domain_error("freq_to_wl: frequency must be positive");
    return speed_of_light_m_per_s / nu.hz * 1e9;
}

/// Total cavity energy decay rate kappa = omega_c / Q.
inline AngularRate q_to_kappa(double q, Frequency nu_c) {
    if (!(q > 0.0))
        throw std::domain_error("q_to_kappa: Q must be positive");
    return AngularRate{two_pi * nu_c.hz / q};
}

/// Transform-limited FWHM linewidth of a lifetime-broadened transition,
/// delta_nu = 1 / (2 pi tau).
inline LinewidthFwhm lifetime_to_transform_limit(double tau_ns) {
    if (!(tau_ns > 0.0))
        throw std::domain_error("lifetime_to_transform_limit: lifetime must be positive");
    return LinewidthFwhm{1.0 / (two_pi * tau_ns * 1e-9)};
}

/// Angular FWHM of an ordinary-frequency linewidth.
inline AngularRate fwhm_to_angular(LinewidthFwhm w) {
    return AngularRate{two_pi * w.hz};
}

inline AngularRate angular_from_ordinary(Frequency nu) {
    return AngularRate{two_pi * nu.hz};
}

inline Frequency ordinary_from_angular(AngularRate w) {
    return Frequency{w.rad_per_s / two_pi};
}

/// Inverse lifetime as an angular rate, 1/tau in rad/s.
inline AngularRate inverse_lifetime(double tau_ns) {
    if (!(tau_ns > 0.0))
        throw std::domain_error("inverse_lifetime: lifetime must be positive");
    return AngularRate{1.0 / (tau_ns * 1e-9)};
}

}  // namespace qpic::units

#endif
