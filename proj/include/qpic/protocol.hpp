#ifndef QPIC_PROTOCOL_HPP
#define QPIC_PROTOCOL_HPP

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpic/cavity_qed.hpp"
#include "qpic/units.hpp"

// Duan-Kimble cavity-reflection photon-to-spin state transfer.
//
// A polarization qubit alpha|H> + beta|V> reflects off the device: H sees
// the emitter-cavity system (spin-dependent coefficient r_down / r_up), V
// bounces off a lossless orthogonal-polarization mirror (r_V). Measuring
// the photon in the (|H> +- |V>)/sqrt(2) basis heralds transfer of the
// photonic state onto the spin, up to a feed-forward correction on the
// minus outcome.

namespace qpic::protocol {

using cplx = std::complex<double>;
using cavity::Spin;
using cavity::SpinCavitySystem;
using units::Frequency;

enum class InputStatePolicy { FixedEqualSuperposition, CardinalSixAverage };
enum class HeraldPolicy { PlusOnly, BothWithFeedForward };
enum class DephasingModel { SlowDiffusion, FastLinewidth };

// How reflection amplitudes enter the fidelity. PhaseContrast normalizes
// each reflection coefficient to unit modulus, booking |r| < 1 as heralded
// loss (it already enters the success probability); HeraldedAmplitudes
// keeps the raw complex amplitudes in the heralded state.
enum class AmplitudePolicy { PhaseContrast, HeraldedAmplitudes };

struct DiffusionQuadrature {
    int n_points = 129;
    double truncation_fwhm = 20.0;  // integrate over +- truncation * gamma_star

    void validate() const {
        if (n_points < 3) throw std::domain_error("DiffusionQuadrature: n_points < 3");
        if (!(truncation_fwhm > 0.0))
            throw std::domain_error("DiffusionQuadrature: truncation must be positive");
    }
};

struct ProtocolConfig {
    // Probe laser frequency; <= 0 means "use the cavity resonance"
    // (triple resonance nu_c = nu_e = nu_probe).
    Frequency probe_frequency{0.0};
    InputStatePolicy input_state_policy = InputStatePolicy::CardinalSixAverage;
    cplx r_v{1.0, 0.0};
    HeraldPolicy herald_policy = HeraldPolicy::BothWithFeedForward;
    DephasingModel dephasing_model = DephasingModel::SlowDiffusion;
    AmplitudePolicy amplitude_policy = AmplitudePolicy::PhaseContrast;
    DiffusionQuadrature quadrature;

    void validate() const {
        if (std::abs(r_v) > 1.0 + 1e-12)
            throw std::domain_error("ProtocolConfig: |r_V| must not exceed 1");
        quadrature.validate();
    }

    Frequency resolve_probe(const SpinCavitySystem& sys) const {
        return probe_frequency.hz > 0.0 ? probe_frequency : sys.cavity.nu_c;
    }
};

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
}

}  // namespace detail

/// Spectral-diffusion sample points (emitter-frequency offsets, Hz) and
/// normalized Lorentzian weights. Uses the substitution
/// delta = (gamma*/2) tan(theta), under which the Lorentzian weight is
/// uniform in theta, so Gauss-Legendre in theta resolves the peak and the
/// tails together. gamma_star = 0 collapses to a single sample at 0.
inline void diffusion_grid(double gamma_star_hz, const DiffusionQuadrature& quad,
                           std::vector<double>& deltas, std::vector<double>& weights) {
    if (gamma_star_hz <= 0.0) {
        deltas = {0.0};
        weights = {1.0};
        return;
    }
    std::vector<double> x, w;
    detail::gauss_legendre(quad.n_points, x, w);
    const double theta_max = std::atan(2.0 * quad.truncation_fwhm);
    deltas.resize(x.size());
    weights.resize(x.size());
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        deltas[i] = 0.5 * gamma_star_hz * std::tan(x[i] * theta_max);
        weights[i] = w[i];  // uniform density in theta
        total += weights[i];
    }
    for (auto& wi : weights) wi /= total;
}

/// Unnormalized heralded spin state for one herald outcome.
struct HeraldOutcome {
    std::array<cplx, 2> state{};   // amplitudes on {|down>, |up>}
    std::array<cplx, 4> rho{};     // outer product, row-major 2x2
    double weight = 0.0;           // squared norm
};

/// Herald algebra with the three reflection coefficients supplied directly.
inline std::vector<HeraldOutcome> heralded_spin_state_from_reflections(
    const ProtocolConfig& config, cplx alpha, cplx beta, cplx r_down, cplx r_up, cplx r_v) {
    // Joint state after reflection, spin prepared in (|dn>+|up>)/sqrt(2):
    //   (1/sqrt2) [ a r_dn |H dn> + a r_up |H up> + b r_V |V dn> + b r_V |V up> ]
    // X-basis photon projection <+-| gives a factor 1/sqrt2, so each spin
    // amplitude carries 1/2.
    std::array<cplx, 2> plus{0.5 * (alpha * r_down + beta * r_v),
                             0.5 * (alpha * r_up + beta * r_v)};
    std::array<cplx, 2> minus{0.5 * (alpha * r_down - beta * r_v),
                              0.5 * (alpha * r_up - beta * r_v)};
    // Feed-forward for the minus herald: sigma_x in the {down, up} basis
    // (a Z in the rotated +-_s frame), restoring the plus-outcome target.
    std::swap(minus[0], minus[1]);

    std::vector<HeraldOutcome> out;
    auto pack = [&out](const std::array<cplx, 2>& s) {
        HeraldOutcome h;
        h.state = s;
        h.rho = {s[0] * std::conj(s[0]), s[0] * std::conj(s[1]),
                 s[1] * std::conj(s[0]), s[1] * std::conj(s[1])};
        h.weight = std::norm(s[0]) + std::norm(s[1]);
        out.push_back(h);
    };
    pack(plus);
    if (config.herald_policy == HeraldPolicy::BothWithFeedForward) pack(minus);
    return out;
}

/// One spectral-diffusion sample of the protocol: photon (alpha, beta)
/// reflects, the spin starts in (|down> + |up>)/sqrt(2), the photon is
/// measured in the X basis. Returns the unnormalized spin contribution per
/// herald outcome (one or two entries depending on the herald policy); the
/// minus outcome carries the feed-forward correction.
inline std::vector<HeraldOutcome> heralded_spin_state(const SpinCavitySystem& sys,
                                                      const ProtocolConfig& config,
                                                      cplx alpha, cplx beta,
                                                      double delta_e_hz) {
    if (std::abs(std::norm(alpha) + std::norm(beta) - 1.0) > 1e-9)
        throw std::domain_error("heralded_spin_state: photon state must be normalized");
    sys.validate();
    config.validate();

    const Frequency probe = config.resolve_probe(sys);
    cavity::ReflectionOptions opt;
    opt.fast_dephasing = (config.dephasing_model == DephasingModel::FastLinewidth);
    const cplx r_down = cavity::reflection(probe, sys, Spin::Down, delta_e_hz, opt);
    const cplx r_up = cavity::reflection(probe, sys, Spin::Up, delta_e_hz, opt);

    return heralded_spin_state_from_reflections(config, alpha, beta, r_down, r_up, config.r_v);
}

namespace detail {

inline std::vector<std::array<cplx, 2>> input_states(InputStatePolicy policy) {
    const double s = 1.0 / std::numbers::sqrt2;
    if (policy == InputStatePolicy::FixedEqualSuperposition)
        return {{cplx(s), cplx(s)}};
    return {{cplx(1), cplx(0)},
            {cplx(0), cplx(1)},
            {cplx(s), cplx(s)},
            {cplx(s), cplx(-s)},
            {cplx(s), cplx(0, s)},
            {cplx(s), cplx(0, -s)}};
}

inline cplx unit_phase(cplx r) {
    double a = std::abs(r);
    return a > 1e-12 ? r / a : cplx(0.0);
}

struct ReflectionSamples {
    std::vector<double> weights;
    std::vector<cplx> r_down;
    std::vector<cplx> r_up;
};

inline ReflectionSamples sample_reflections(const SpinCavitySystem& sys,
                                            const ProtocolConfig& config) {
    const Frequency probe = config.resolve_probe(sys);
    cavity::ReflectionOptions opt;
    std::vector<double> deltas;
    ReflectionSamples s;
    if (config.dephasing_model == DephasingModel::FastLinewidth) {
        opt.fast_dephasing = true;
        deltas = {0.0};
        s.weights = {1.0};
    } else {
        diffusion_grid(sys.emitter.gamma_star.hz, config.quadrature, deltas, s.weights);
    }
    s.r_down.reserve(deltas.size());
    s.r_up.reserve(deltas.size());
    for (double d : deltas) {
        s.r_down.push_back(cavity::reflection(probe, sys, Spin::Down, d, opt));
        s.r_up.push_back(cavity::reflection(probe, sys, Spin::Up, d, opt));
    }
    return s;
}

}  // namespace detail

/// Average transfer fidelity F = <target| rho |target> / tr(rho) with rho
/// accumulated over herald outcomes, spectral-diffusion samples and the
/// configured input-state set. The target for photon (alpha, beta) is
/// alpha |->_s + beta |+>_s in the rotated spin basis.
inline double transfer_fidelity(const SpinCavitySystem& sys, const ProtocolConfig& config) {
    sys.validate();
    config.validate();
    const auto samples = detail::sample_reflections(sys, config);
    const auto states = detail::input_states(config.input_state_policy);
    const double s = 1.0 / std::numbers::sqrt2;

    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < samples.weights.size(); ++i) {
        cplx rd = samples.r_down[i];
        cplx ru = samples.r_up[i];
        cplx rv = config.r_v;
        if (config.amplitude_policy == AmplitudePolicy::PhaseContrast) {
            rd = detail::unit_phase(rd);
            ru = detail::unit_phase(ru);
            rv = detail::unit_phase(rv);
        }
        const double w = samples.weights[i];
        for (const auto& [alpha, beta] : states) {
            // target = alpha |->_s + beta |+>_s, components on {down, up}
            const std::array<cplx, 2> target{s * (alpha + beta), s * (beta - alpha)};
            const auto outcomes =
                heralded_spin_state_from_reflections(config, alpha, beta, rd, ru, rv);
            for (const auto& h : outcomes) {
                cplx ov = std::conj(target[0]) * h.state[0] + std::conj(target[1]) * h.state[1];
                num += w * std::norm(ov);
                den += w * h.weight;
            }
        }
    }
    if (!(den > 0.0) || !std::isfinite(num) || !std::isfinite(den))
        throw std::runtime_error("transfer_fidelity: degenerate herald statistics");
    return num / den;
}

struct EfficiencyPair {
    double eta_det = 0.0;
    double eta_exc = 0.0;

    void validate() const {
        if (eta_det < 0.0 || eta_det > 1.0 || eta_exc < 0.0 || eta_exc > 1.0)
            throw std::domain_error("EfficiencyPair: efficiencies must lie in [0,1]");
    }
};

/// p_succ = eta_det * eta_exc * <|r|^2>, with the reflectance of the
/// cavity-coupled (H) polarization averaged over the diffusion weight and
/// the two spin branches.
inline double success_probability(const SpinCavitySystem& sys, const ProtocolConfig& config,
                                  const EfficiencyPair& eff) {
    sys.validate();
    config.validate();
    eff.validate();
    const auto samples = detail::sample_reflections(sys, config);
    double r2 = 0.0;
    for (std::size_t i = 0; i < samples.weights.size(); ++i)
        r2 += samples.weights[i] *
              0.5 * (std::norm(samples.r_down[i]) + std::norm(samples.r_up[i]));
    return eff.eta_det * eff.eta_exc * r2;
}

struct SweepGrid {
    std::vector<double> coupling_ratios;   // axis 1, kappa_wg / kappa
    std::vector<double> gamma_star_mhz;    // axis 2
    // Row j (gamma*), column i (coupling ratio).
    std::vector<std::vector<double>> fidelity;
    std::vector<std::vector<double>> success_prob;
    // Per-gamma* argmax of fidelity over the coupling axis, ties broken
    // toward smaller coupling ratio.
    std::vector<std::size_t> optimal_locus;
};

inline std::vector<double> log_spaced(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 1)
        throw std::domain_error("log_spaced: need 0 < lo < hi and n >= 1");
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    const double step = (std::log(hi) - std::log(lo)) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::exp(std::log(lo) + step * i);
    return v;
}

/// Evaluates fidelity and success probability over the
/// (kappa_wg/kappa, gamma*) grid. Cells are independent; evaluation order
/// does not affect the result.
inline SweepGrid sweep_map(SpinCavitySystem sys, const ProtocolConfig& config,
                           const EfficiencyPair& eff,
                           std::vector<double> coupling_ratios,
                           std::vector<double> gamma_star_mhz) {
    if (coupling_ratios.empty() || gamma_star_mhz.empty())
        throw std::domain_error("sweep_map: empty axis");
    for (std::size_t i = 1; i < coupling_ratios.size(); ++i)
        if (!(coupling_ratios[i] > coupling_ratios[i - 1]))
            throw std::domain_error("sweep_map: coupling axis must be strictly increasing");
    for (std::size_t j = 1; j < gamma_star_mhz.size(); ++j)
        if (!(gamma_star_mhz[j] > gamma_star_mhz[j - 1]))
            throw std::domain_error("sweep_map: gamma* axis must be strictly increasing");

    SweepGrid grid;
    grid.coupling_ratios = std::move(coupling_ratios);
    grid.gamma_star_mhz = std::move(gamma_star_mhz);
    grid.fidelity.assign(grid.gamma_star_mhz.size(),
                         std::vector<double>(grid.coupling_ratios.size(), 0.0));
    grid.success_prob = grid.fidelity;
    grid.optimal_locus.assign(grid.gamma_star_mhz.size(), 0);

    for (std::size_t j = 0; j < grid.gamma_star_mhz.size(); ++j) {
        sys.emitter.gamma_star = units::LinewidthFwhm{grid.gamma_star_mhz[j] * 1e6};
        double best = -1.0;
        for (std::size_t i = 0; i < grid.coupling_ratios.size(); ++i) {
            sys.cavity.coupling_ratio = grid.coupling_ratios[i];
            sys.cavity.scatter_ratio = 1.0 - grid.coupling_ratios[i];
            double f, p;
            try {
                f = transfer_fidelity(sys, config);
                p = success_probability(sys, config, eff);
            } catch (const std::exception& e) {
                throw std::runtime_error("sweep_map: cell (coupling=" +
                                         std::to_string(grid.coupling_ratios[i]) +
                                         ", gamma*=" + std::to_string(grid.gamma_star_mhz[j]) +
                                         " MHz) failed: " + e.what());
            }
            grid.fidelity[j][i] = f;
            grid.success_prob[j][i] = p;
            if (f > best + 1e-15) {
                best = f;
                grid.optimal_locus[j] = i;
            }
        }
    }
    return grid;
}

}  // namespace qpic::protocol

#endif
