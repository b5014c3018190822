#ifndef QPIC_FIT_MODELS_HPP
#define QPIC_FIT_MODELS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpic/fit/levmar.hpp"
#include "qpic/trace.hpp"
#include "qpic/units.hpp"

// The four spectroscopy measurement models, plus the small derived-quantity
// helpers that turn fit results into physical parameters.

namespace qpic::fit {

namespace detail {

/// Scaled complementary error function exp(x^2) erfc(x) for x >= 0,
/// overflow-safe. Direct evaluation below x = 4, Lentz continued fraction
/// above.
inline double erfcx_nonneg(double x) {
    if (x < 4.0) return std::exp(x * x) * std::erfc(x);
    // erfcx(x) = (1/sqrt(pi)) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    double cf = 0.0;
    for (int k = 30; k >= 1; --k) cf = (0.5 * k) / (x + cf);
    return 1.0 / (std::sqrt(std::numbers::pi) * (x + cf));
}

}  // namespace detail

/// exp(a) * erfc(b) evaluated without overflow for large |a|, |b|.
inline double exp_erfc(double a, double b) {
    if (b >= 0.0) {
        // exp(a) erfc(b) = erfcx(b) exp(a - b^2)
        return detail::erfcx_nonneg(b) * std::exp(a - b * b);
    }
    return std::exp(a) * std::erfc(b);
}

// ---------------------------------------------------------------------------
// Fano-Lorentz resonance: params {y0, A, eta, q, x0, width}
//   I = y0 + A [ eta (q+W)^2 / ((1+q^2)(1+W^2)) + (1-eta)/(1+W^2) ],
//   W = 2(x - x0)/width. eta = 0 is a pure Lorentzian of FWHM `width`;
//   derived Q = x0 / width.
// ---------------------------------------------------------------------------

inline double fano_lorentz_eval(double x, std::span<const double> p) {
    const double y0 = p[0], amp = p[1], eta = p[2], q = p[3], x0 = p[4], width = p[5];
    const double W = 2.0 * (x - x0) / width;
    const double lor = 1.0 / (1.0 + W * W);
    const double fano = (q + W) * (q + W) / ((1.0 + q * q) * (1.0 + W * W));
    return y0 + amp * (eta * fano + (1.0 - eta) * lor);
}

inline void fano_lorentz_jac(double x, std::span<const double> p, std::span<double> d) {
    const double amp = p[1], eta = p[2], q = p[3], x0 = p[4], width = p[5];
    const double W = 2.0 * (x - x0) / width;
    const double q2 = 1.0 + q * q;
    const double w2 = 1.0 + W * W;
    const double lor = 1.0 / w2;
    const double fano = (q + W) * (q + W) / (q2 * w2);
    d[0] = 1.0;
    d[1] = eta * fano + (1.0 - eta) * lor;
    d[2] = amp * (fano - lor);
    d[3] = amp * eta * 2.0 * (q + W) * (1.0 - q * W) / (q2 * q2 * w2);
    const double dIdW = amp * (eta * 2.0 * (q + W) * (1.0 - q * W) / (q2 * w2 * w2) +
                               (1.0 - eta) * (-2.0 * W / (w2 * w2)));
    d[4] = dIdW * (-2.0 / width);
    d[5] = dIdW * (-W / width);
}

inline Model model_fano_lorentz() {
    return make_pointwise_model(
        "fano_lorentz", {"y0", "amplitude", "eta", "q", "center", "fwhm"},
        fano_lorentz_eval, fano_lorentz_jac,
        [](std::span<const double> p) {
            if (!(p[5] > 0.0)) throw std::domain_error("fano_lorentz: width must be positive");
            if (p[2] < 0.0 || p[2] > 1.0) throw std::domain_error("fano_lorentz: eta outside [0,1]");
        });
}

// ---------------------------------------------------------------------------
// Sum of Lorentzian peaks: params {y0, (amp_k, center_k, fwhm_k) x n_peaks},
// amp_k is the peak height.
// ---------------------------------------------------------------------------

inline Model model_lorentzian_multi(int n_peaks) {
    if (n_peaks < 1) throw std::invalid_argument("model_lorentzian_multi: n_peaks < 1");
    std::vector<std::string> names{"y0"};
    for (int k = 0; k < n_peaks; ++k) {
        const std::string s = std::to_string(k);
        names.push_back("amplitude_" + s);
        names.push_back("center_" + s);
        names.push_back("fwhm_" + s);
    }
    auto eval = [n_peaks](double x, std::span<const double> p) {
        double y = p[0];
        for (int k = 0; k < n_peaks; ++k) {
            const double amp = p[1 + 3 * k], c = p[2 + 3 * k], h = 0.5 * p[3 + 3 * k];
            y += amp * h * h / ((x - c) * (x - c) + h * h);
        }
        return y;
    };
    auto jac = [n_peaks](double x, std::span<const double> p, std::span<double> d) {
        d[0] = 1.0;
        for (int k = 0; k < n_peaks; ++k) {
            const double amp = p[1 + 3 * k], c = p[2 + 3 * k], h = 0.5 * p[3 + 3 * k];
            const double u = x - c;
            const double den = u * u + h * h;
            d[1 + 3 * k] = h * h / den;
            d[2 + 3 * k] = amp * h * h * 2.0 * u / (den * den);
            d[3 + 3 * k] = 0.5 * amp * 2.0 * h * u * u / (den * den);
        }
    };
    auto check = [n_peaks](std::span<const double> p) {
        for (int k = 0; k < n_peaks; ++k)
            if (!(p[3 + 3 * k] > 0.0))
                throw std::domain_error("lorentzian_multi: fwhm must be positive");
    };
    return make_pointwise_model("lorentzian_multi", std::move(names), eval, jac, check);
}

// ---------------------------------------------------------------------------
// Lifetime decay convolved with a Gaussian IRF (exponentially modified
// Gaussian): params {t0, A, tau, sigma, y0}
//   f = A/(2 tau) exp(sigma^2/(2 tau^2) - u/tau) erfc((sigma/tau - u/sigma)/sqrt2) + y0
// sigma = 0 degrades to the step-gated exponential. Area over t of
// (f - y0) equals A for any sigma.
// ---------------------------------------------------------------------------

inline double lifetime_emg_eval(double t, std::span<const double> p) {
    const double t0 = p[0], amp = p[1], tau = p[2], sigma = p[3], y0 = p[4];
    const double u = t - t0;
    if (sigma <= 0.0)
        return y0 + (u >= 0.0 ? amp * std::exp(-u / tau) / tau : 0.0);
    const double a = sigma * sigma / (2.0 * tau * tau) - u / tau;
    const double b = (sigma / tau - u / sigma) / std::numbers::sqrt2;
    return y0 + amp / (2.0 * tau) * exp_erfc(a, b);
}

inline Model model_lifetime_emg() {
    return make_pointwise_model(
        "lifetime_emg", {"t0", "area", "tau", "sigma", "y0"}, lifetime_emg_eval, nullptr,
        [](std::span<const double> p) {
            if (!(p[2] > 0.0)) throw std::domain_error("lifetime_emg: tau must be positive");
            if (p[3] < 0.0) throw std::domain_error("lifetime_emg: sigma must be non-negative");
        });
}

// ---------------------------------------------------------------------------
// Antibunching dip: params {g0, tau0, sigma_jitter}
//   g2(t) = 1 - (1 - g0) exp(-|t|/tau0)
// optionally convolved with a Gaussian of width sigma_jitter, numerically
// on the sample grid. sigma_jitter = 0 leaves the model untouched.
// ---------------------------------------------------------------------------

inline double g2_dip_bare(double t, double g0, double tau0) {
    return 1.0 - (1.0 - g0) * std::exp(-std::abs(t) / tau0);
}

inline Model model_g2_dip() {
    Model m;
    m.name = "g2_dip";
    m.param_names = {"g0", "tau0", "sigma_jitter"};
    m.eval = [](std::span<const double> x, std::span<const double> p, std::span<double> y) {
        const double g0 = p[0], tau0 = p[1], sj = p[2];
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = g2_dip_bare(x[i], g0, tau0);
        if (sj <= 0.0) return;
        // discrete Gaussian convolution on the (possibly non-uniform) grid,
        // kernel renormalized per sample
        std::vector<double> conv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            double acc = 0.0, norm = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double d = (x[j] - x[i]) / sj;
                if (std::abs(d) > 8.0) continue;
                // trapezoid-style sample width
                const double dxj =
                    0.5 * ((j + 1 < x.size() ? x[j + 1] : x[j]) - (j > 0 ? x[j - 1] : x[j]));
                const double k = std::exp(-0.5 * d * d) * dxj;
                acc += k * y[j];
                norm += k;
            }
            conv[i] = norm > 0.0 ? acc / norm : y[i];
        }
        std::copy(conv.begin(), conv.end(), y.begin());
    };
    m.check = [](std::span<const double> p) {
        if (p[0] < 0.0 || p[0] > 1.0) throw std::domain_error("g2_dip: g0 outside [0,1]");
        if (!(p[1] > 0.0)) throw std::domain_error("g2_dip: tau0 must be positive");
        if (p[2] < 0.0) throw std::domain_error("g2_dip: sigma_jitter must be non-negative");
    };
    return m;
}

/// Model lookup by the stable string names used for CLI dispatch.
inline Model model_by_name(const std::string& name, int n_peaks = 1) {
    if (name == "fano_lorentz") return model_fano_lorentz();
    if (name == "lorentzian_multi") return model_lorentzian_multi(n_peaks);
    if (name == "lifetime_emg") return model_lifetime_emg();
    if (name == "g2_dip") return model_g2_dip();
    throw std::invalid_argument("unknown model: " + name);
}

// ---------------------------------------------------------------------------
// Derived-quantity helpers
// ---------------------------------------------------------------------------

struct CorrectedG2 {
    double g0 = 0.0;
    bool clamped = false;
};

/// Background correction of the zero-delay autocorrelation given signal and
/// background count rates: rho = S/(S+B), g0' = (g0 - (1 - rho^2)) / rho^2,
/// clamped below at zero.
inline CorrectedG2 background_correct_g2(double g0_meas, double signal_cps, double background_cps) {
    if (!(signal_cps > 0.0)) throw std::domain_error("background_correct_g2: signal must be positive");
    if (background_cps < 0.0)
        throw std::domain_error("background_correct_g2: background must be non-negative");
    if (g0_meas < 0.0) throw std::domain_error("background_correct_g2: g0 must be non-negative");
    const double rho = signal_cps / (signal_cps + background_cps);
    const double corrected = (g0_meas - (1.0 - rho * rho)) / (rho * rho);
    if (corrected < 0.0) return {0.0, true};
    return {corrected, false};
}

struct DephasingResult {
    units::LinewidthFwhm gamma_star;
    bool clamped = false;
};

/// gamma* = max(0, Gamma_measured - transform limit from tau_off).
inline DephasingResult dephasing_from_linewidth(units::LinewidthFwhm gamma_measured,
                                                double tau_off_ns) {
    if (gamma_measured.hz < 0.0)
        throw std::domain_error("dephasing_from_linewidth: negative linewidth");
    const double limit = units::lifetime_to_transform_limit(tau_off_ns).hz;
    const double excess = gamma_measured.hz - limit;
    if (excess < 0.0) return {units::LinewidthFwhm{0.0}, true};
    return {units::LinewidthFwhm{excess}, false};
}

// ---------------------------------------------------------------------------
// Initialization heuristics and the multipeak front end
// ---------------------------------------------------------------------------

struct PeakGuess {
    double baseline = 0.0;
    double amplitude = 0.0;
    double center = 0.0;
    double fwhm = 0.0;
};

/// Baseline from the trace edges, center from the extremum, width from the
/// half-max crossings.
inline PeakGuess guess_peak(const SpectrumTrace& trace, bool positive_peak = true) {
    trace.validate();
    const std::size_t n = trace.size();
    const std::size_t edge = std::max<std::size_t>(1, n / 20);
    double baseline = 0.0;
    for (std::size_t i = 0; i < edge; ++i) baseline += trace.y[i] + trace.y[n - 1 - i];
    baseline /= 2.0 * edge;

    std::size_t ipk = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const bool better = positive_peak ? trace.y[i] > trace.y[ipk] : trace.y[i] < trace.y[ipk];
        if (better) ipk = i;
    }
    PeakGuess g;
    g.baseline = baseline;
    g.center = trace.x[ipk];
    g.amplitude = trace.y[ipk] - baseline;
    const double half = baseline + 0.5 * g.amplitude;
    double lo = trace.x.front(), hi = trace.x.back();
    for (std::size_t i = ipk; i-- > 0;) {
        const bool crossed = positive_peak ? trace.y[i] < half : trace.y[i] > half;
        if (crossed) { lo = trace.x[i]; break; }
    }
    for (std::size_t i = ipk + 1; i < n; ++i) {
        const bool crossed = positive_peak ? trace.y[i] < half : trace.y[i] > half;
        if (crossed) { hi = trace.x[i]; break; }
    }
    g.fwhm = std::max(hi - lo, (trace.x.back() - trace.x.front()) / n);
    return g;
}

/// Sum-of-Lorentzians fit with peaks reported sorted by center. Init layout
/// matches model_lorentzian_multi: {y0, (amp, center, fwhm) x n_peaks}.
inline FitOutcome fit_ple_multipeak(const SpectrumTrace& trace, int n_peaks,
                                    std::vector<double> init, const FitOptions& options = {}) {
    if (n_peaks < 1) throw std::invalid_argument("fit_ple_multipeak: n_peaks < 1");
    auto model = model_lorentzian_multi(n_peaks);
    FitOutcome out = fit_curve(model, trace, std::move(init), options);

    // sort peaks by center; permutation of the init ordering must not leak
    // into the reported result
    std::vector<int> order(n_peaks);
    for (int k = 0; k < n_peaks; ++k) order[k] = k;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return out.params[2 + 3 * a] < out.params[2 + 3 * b];
    });
    FitOutcome sorted = out;
    for (int k = 0; k < n_peaks; ++k)
        for (int f = 0; f < 3; ++f)
            sorted.params[1 + 3 * k + f] = out.params[1 + 3 * order[k] + f];
    // permute covariance rows/cols alongside
    const std::size_t np = out.param_names.size();
    std::vector<std::size_t> perm(np);
    perm[0] = 0;
    for (int k = 0; k < n_peaks; ++k)
        for (int f = 0; f < 3; ++f) perm[1 + 3 * k + f] = 1 + 3 * order[k] + f;
    if (out.covariance.size() == np * np) {
        for (std::size_t i = 0; i < np; ++i)
            for (std::size_t j = 0; j < np; ++j)
                sorted.covariance[i * np + j] = out.covariance[perm[i] * np + perm[j]];
    }
    for (int k = 0; k < n_peaks; ++k) {
        const std::string s = std::to_string(k);
        sorted.derived["center_" + s] = sorted.params[2 + 3 * k];
        sorted.derived["fwhm_" + s] = sorted.params[3 + 3 * k];
        sorted.derived["amplitude_" + s] = sorted.params[1 + 3 * k];
    }
    return sorted;
}

}  // namespace qpic::fit

#endif
