#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "qpic/protocol.hpp"

using namespace qpic::protocol;
using qpic::cavity::SpinCavitySystem;
using qpic::cavity::SpinUpModel;
using qpic::units::AngularRate;
using qpic::units::Frequency;
using qpic::units::LinewidthFwhm;
using qpic::units::two_pi;

namespace {

SpinCavitySystem base_system(double coupling_ratio, double gamma_star_mhz) {
    SpinCavitySystem sys;
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
    sys.g = qpic::cavity::coupling_g_from_enhanced_rate(qpic::units::inverse_lifetime(1.12),
                                                        sys.cavity.kappa());
    return sys;
}

const std::vector<std::array<cplx, 2>> cardinal_states{
    {cplx(1), cplx(0)},
    {cplx(0), cplx(1)},
    {cplx(std::numbers::sqrt2 / 2), cplx(std::numbers::sqrt2 / 2)},
    {cplx(std::numbers::sqrt2 / 2), cplx(-std::numbers::sqrt2 / 2)},
    {cplx(std::numbers::sqrt2 / 2), cplx(0, std::numbers::sqrt2 / 2)},
    {cplx(std::numbers::sqrt2 / 2), cplx(0, -std::numbers::sqrt2 / 2)}};

}  // namespace

TEST_CASE("ideal reflections transfer every cardinal state exactly") {
    // r_down = +1, r_up = -1, r_V = 1 is the textbook operating point
    ProtocolConfig cfg;
    const double s = 1.0 / std::numbers::sqrt2;
    for (const auto& [alpha, beta] : cardinal_states) {
        auto outcomes = heralded_spin_state_from_reflections(cfg, alpha, beta, {1, 0}, {-1, 0}, {1, 0});
        REQUIRE(outcomes.size() == 2);
        const std::array<cplx, 2> target{s * (alpha + beta), s * (beta - alpha)};
        for (const auto& h : outcomes) {
            const cplx ov = std::conj(target[0]) * h.state[0] + std::conj(target[1]) * h.state[1];
            CHECK(std::norm(ov) == Catch::Approx(h.weight).epsilon(1e-12));
            CHECK(h.weight == Catch::Approx(0.5).epsilon(1e-12));
        }
    }
}

TEST_CASE("herald outcomes conserve probability") {
    ProtocolConfig cfg;
    const cplx rd{0.66, 0.1}, ru{-0.24, 0.03}, rv{0.95, 0.0};
    for (const auto& [alpha, beta] : cardinal_states) {
        auto outcomes = heralded_spin_state_from_reflections(cfg, alpha, beta, rd, ru, rv);
        double total = 0.0;
        for (const auto& h : outcomes) total += h.weight;
        const double expected = 0.5 * std::norm(alpha) * (std::norm(rd) + std::norm(ru)) +
                                std::norm(beta) * std::norm(rv);
        CHECK(total == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("density matrices are Hermitian with unit-trace normalization") {
    ProtocolConfig cfg;
    auto outcomes = heralded_spin_state_from_reflections(cfg, cplx(0.6), cplx(0.8), {0.7, 0.2},
                                                         {-0.3, 0.1}, {1, 0});
    for (const auto& h : outcomes) {
        CHECK(std::abs(h.rho[1] - std::conj(h.rho[2])) < 1e-15);
        CHECK((h.rho[0] + h.rho[3]).real() == Catch::Approx(h.weight).epsilon(1e-12));
        CHECK(std::abs((h.rho[0] + h.rho[3]).imag()) < 1e-15);
        CHECK(h.rho[0].real() >= 0.0);
        CHECK(h.rho[3].real() >= 0.0);
    }
}

TEST_CASE("diffusion grid is a normalized Lorentzian sampler") {
    DiffusionQuadrature quad;
    std::vector<double> deltas, weights;
    diffusion_grid(0.0, quad, deltas, weights);
    REQUIRE(deltas.size() == 1);
    CHECK(weights[0] == 1.0);

    diffusion_grid(27e6, quad, deltas, weights);
    REQUIRE(static_cast<int>(deltas.size()) == quad.n_points);
    double total = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        total += weights[i];
        mean += weights[i] * deltas[i];
    }
    CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(mean) < 1.0);  // symmetric around zero (Hz scale)
    // half the weight lies inside the FWHM interval for a Lorentzian
    double inside = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i)
        if (std::abs(deltas[i]) <= 0.5 * 27e6) inside += weights[i];
    // truncation at +-20 FWHM removes ~3% of the tails, inflating the core
    CHECK(inside == Catch::Approx(0.5).margin(0.02));
}

TEST_CASE("fidelity and success probability stay within [0, 1]") {
    ProtocolConfig cfg;
    cfg.quadrature.n_points = 33;
    EfficiencyPair eff{1.0, 1.0};
    for (double c : {0.01, 0.3, 0.62, 0.99})
        for (double gs : {0.0, 5.0, 176.0}) {
            auto sys = base_system(c, gs);
            const double f = transfer_fidelity(sys, cfg);
            const double p = success_probability(sys, cfg, eff);
            CHECK(f >= 0.0);
            CHECK(f <= 1.0 + 1e-12);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0 + 1e-12);
        }
}

TEST_CASE("zero dephasing: slow-diffusion and fast-linewidth models agree") {
    ProtocolConfig slow;
    ProtocolConfig fast;
    fast.dephasing_model = DephasingModel::FastLinewidth;
    auto sys = base_system(0.62, 0.0);
    CHECK(transfer_fidelity(sys, slow) == Catch::Approx(transfer_fidelity(sys, fast)).epsilon(1e-12));
    EfficiencyPair eff{0.5, 0.5};
    CHECK(success_probability(sys, slow, eff) ==
          Catch::Approx(success_probability(sys, fast, eff)).epsilon(1e-12));
}

TEST_CASE("success probability matches the hand-computed reflectance average") {
    auto sys = base_system(0.62, 0.0);
    ProtocolConfig cfg;
    EfficiencyPair eff{1.9e-2, 3.4e-2};
    const auto rd = qpic::cavity::reflection(sys.cavity.nu_c, sys, qpic::cavity::Spin::Down);
    const auto ru = qpic::cavity::reflection(sys.cavity.nu_c, sys, qpic::cavity::Spin::Up);
    const double expected = 1.9e-2 * 3.4e-2 * 0.5 * (std::norm(rd) + std::norm(ru));
    CHECK(success_probability(sys, cfg, eff) == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weak coupling gives the flagged model value for success probability") {
    // kappa_wg/kappa = 5e-3: both spins reflect near |1 - 0.01|^2 = 0.98
    auto sys = base_system(5e-3, 0.0);
    ProtocolConfig cfg;
    EfficiencyPair eff{1.9e-2, 3.4e-2};
    CHECK(success_probability(sys, cfg, eff) == Catch::Approx(6.3e-4).epsilon(0.05));
}

TEST_CASE("quadrature doubling leaves the anchors unchanged to < 1e-4") {
    ProtocolConfig cfg;
    ProtocolConfig fine = cfg;
    fine.quadrature.n_points = 257;
    for (auto [c, gs] : {std::pair{5e-3, 176.0}, std::pair{0.62, 27.0}}) {
        auto sys = base_system(c, gs);
        CHECK(std::abs(transfer_fidelity(sys, cfg) - transfer_fidelity(sys, fine)) < 1e-4);
    }
}

TEST_CASE("fidelity rolls off monotonically with dephasing at strong coupling") {
    ProtocolConfig cfg;
    cfg.quadrature.n_points = 65;
    double prev = 2.0;
    for (double gs : {1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0}) {
        auto sys = base_system(0.9, gs);
        const double f = transfer_fidelity(sys, cfg);
        CHECK(f <= prev + 1e-9);
        prev = f;
    }
}

TEST_CASE("herald policy: plus-only matches both-with-feed-forward on symmetric states") {
    // the feed-forward exactly mirrors the plus outcome, so averaging both
    // outcomes equals the plus-only figure at any operating point
    auto sys = base_system(0.62, 27.0);
    ProtocolConfig both;
    both.quadrature.n_points = 33;
    ProtocolConfig plus = both;
    plus.herald_policy = HeraldPolicy::PlusOnly;
    CHECK(transfer_fidelity(sys, both) == Catch::Approx(transfer_fidelity(sys, plus)).epsilon(1e-12));
}

TEST_CASE("log spacing") {
    auto v = log_spaced(1e-3, 1.0, 4);
    REQUIRE(v.size() == 4);
    CHECK(v.front() == Catch::Approx(1e-3));
    CHECK(v.back() == Catch::Approx(1.0));
    CHECK(v[1] / v[0] == Catch::Approx(v[2] / v[1]).epsilon(1e-12));
    CHECK_THROWS_AS(log_spaced(0.0, 1.0, 3), std::domain_error);
    CHECK_THROWS_AS(log_spaced(2.0, 1.0, 3), std::domain_error);
}

TEST_CASE("sweep map fills the grid and its argmax is stable") {
    auto sys = base_system(0.5, 10.0);
    ProtocolConfig cfg;
    cfg.quadrature.n_points = 17;
    EfficiencyPair eff{1.9e-2, 3.4e-2};
    auto couplings = log_spaced(1e-3, 0.999, 8);
    auto gammas = log_spaced(0.1, 300.0, 6);
    auto grid = sweep_map(sys, cfg, eff, couplings, gammas);
    REQUIRE(grid.fidelity.size() == 6);
    REQUIRE(grid.fidelity[0].size() == 8);
    for (std::size_t j = 0; j < 6; ++j) {
        const std::size_t k = grid.optimal_locus[j];
        for (std::size_t i = 0; i < 8; ++i) {
            CHECK(grid.fidelity[j][i] <= grid.fidelity[j][k] + 1e-15);
            CHECK(grid.success_prob[j][i] >= 0.0);
        }
        // argmax ties break toward the smaller coupling ratio
        for (std::size_t i = 0; i < k; ++i)
            CHECK(grid.fidelity[j][i] < grid.fidelity[j][k]);
    }
    // cells are independent of evaluation context: spot-check one
    auto cell_sys = base_system(couplings[3], gammas[2]);
    CHECK(grid.fidelity[2][3] == Catch::Approx(transfer_fidelity(cell_sys, cfg)).epsilon(1e-12));
}

TEST_CASE("probe override shifts the operating point") {
    auto sys = base_system(0.62, 0.0);
    ProtocolConfig on_res;
    ProtocolConfig detuned;
    detuned.probe_frequency = Frequency{sys.cavity.nu_c.hz + 500e9};
    CHECK(transfer_fidelity(sys, on_res) != Catch::Approx(transfer_fidelity(sys, detuned)));
}

TEST_CASE("input validation") {
    auto sys = base_system(0.62, 27.0);
    ProtocolConfig cfg;
    CHECK_THROWS_AS(heralded_spin_state(sys, cfg, cplx(1.0), cplx(1.0), 0.0), std::domain_error);
    cfg.r_v = {2.0, 0.0};
    CHECK_THROWS_AS(transfer_fidelity(sys, cfg), std::domain_error);
    cfg = ProtocolConfig{};
    cfg.quadrature.n_points = 1;
    CHECK_THROWS_AS(transfer_fidelity(sys, cfg), std::domain_error);
    EfficiencyPair bad{1.5, 0.5};
    CHECK_THROWS_AS(success_probability(sys, ProtocolConfig{}, bad), std::domain_error);
}
