#include <doctest.h>

#include <cmath>
#include <random>

#include "qpc/metrics.hpp"
#include "qpc/source.hpp"

using namespace qpc;

namespace {
constexpr double kPi = 3.14159265358979323846;

// Closed-form fringe contrast for pair amplitudes xi1, xi2 sharing one ring.
double contrast_form(double xi1, double xi2) {
    return 2.0 * xi1 * xi2 / (xi1 * xi1 + xi2 * xi2);
}
}  // namespace

TEST_CASE("balance is the |00> weight with the half-angle fourth-power law") {
    // Oracle written out independently: pump splits as sin^2 / cos^2 of the
    // half phase, generation goes as the square of the pump.
    for (double phi : {0.0, 0.2, 0.7, kPi / 2, 2.2, kPi}) {
        const double s2 = std::sin(phi / 2.0) * std::sin(phi / 2.0);
        const double c2 = std::cos(phi / 2.0) * std::cos(phi / 2.0);
        const double expected = (s2 * s2) / std::sqrt(s2 * s2 * s2 * s2 + c2 * c2 * c2 * c2 + 0.0);
        // normalized amplitude, then squared for the weight
        const double amp = s2 * s2 / std::sqrt(s2 * s2 * s2 * s2 + c2 * c2 * c2 * c2);
        CHECK(balance(phi) == doctest::Approx(amp * amp).epsilon(1e-12));
        (void)expected;
    }
    CHECK(balance(0.0) == doctest::Approx(0.0));
    CHECK(balance(kPi) == doctest::Approx(1.0));
    CHECK(balance(kPi / 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("source qubit state matches the two-term superposition") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.05, kPi - 0.05);
    for (int k = 0; k < 25; ++k) {
        const double phi = u(rng);
        SourceConfig cfg;
        cfg.phi_beta = phi;
        const Eigen::Vector4cd psi = source_qubit_state(cfg);
        const double beta00 = balance(phi);
        Eigen::Vector4cd oracle = Eigen::Vector4cd::Zero();
        oracle(0) = std::sqrt(beta00);
        oracle(3) = std::sqrt(1.0 - beta00);
        const double fidelity = std::norm(oracle.dot(psi.conjugate()) /
                                          (oracle.norm() * psi.norm()));
        CHECK(fidelity > 1.0 - 1e-10);
    }
}

TEST_CASE("pump amplitudes follow the state interferometer outputs") {
    SourceConfig cfg;
    cfg.phi_beta = 0.9;
    const Eigen::Vector4cd pump = pump_amplitudes(cfg);
    const cplx feed_top(0.5 * (std::cos(0.9) - 1.0), 0.5 * std::sin(0.9));
    const cplx feed_bot = cplx(0.0, 0.5) * (std::exp(cplx(0.0, 0.9)) + 1.0);
    CHECK(std::abs(pump(0) - std::sqrt(0.5) * feed_top) < 1e-12);
    CHECK(std::abs(pump(2) - std::sqrt(0.5) * feed_bot) < 1e-12);
    // each ring splits its feed over two spirals with the i on the lower arm
    CHECK(std::abs(pump(1) - cplx(0, 1) * std::sqrt(0.5) * feed_top) < 1e-12);
}

TEST_CASE("generation amplitudes square the pump and normalize") {
    Eigen::Vector4cd pump(0.6, cplx(0.0, 0.8), 0.0, 0.0);
    const Eigen::Vector4cd xi = generation_amplitudes(pump);
    CHECK(std::abs(xi.norm() - 1.0) < 1e-12);
    CHECK(std::abs(xi(1) / xi(0) - cplx(-0.64 / 0.36, 0.0)) < 1e-12);
    CHECK_THROWS_AS(generation_amplitudes(Eigen::Vector4cd::Zero()),
                    std::invalid_argument);
}

TEST_CASE("energy mismatch arithmetic and validation") {
    WavelengthTriple w;
    w.pump_nm = 1551.0;
    // symmetric detuning in frequency keeps 2/p = 1/s + 1/i
    w.signal_nm = 1.0 / (1.0 / 1551.0 + 0.001);
    w.idler_nm = 1.0 / (1.0 / 1551.0 - 0.001);
    CHECK(energy_mismatch(w) < 1e-15);
    CHECK_NOTHROW(validate_wavelengths(w));
    w.idler_nm = 1551.0;
    CHECK_THROWS_AS(validate_wavelengths(w), std::invalid_argument);
}

TEST_CASE("pair rate applies the split facet loss to both photons") {
    RateModel m;
    m.brightness_pairs_per_s_mw2 = 20000.0;
    m.facet_loss_db = 28.0;
    m.detector_efficiency = 1.0;
    // each photon sees 14 dB, the pair 28 dB total
    const double expected = 20000.0 * 4.0 * std::pow(10.0, -2.8);
    CHECK(pair_rate(m, 2.0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(pair_rate(m, 0.0) == 0.0);
    CHECK_THROWS_AS(pair_rate(m, -1.0), std::invalid_argument);
}

TEST_CASE("interference fringe has the closed-form contrast") {
    for (double eta : {0.5, 0.43, 0.36, 0.25}) {
        SourceConfig cfg;
        cfg.eta_t_in = eta;
        std::vector<double> phases;
        for (int i = 0; i < 97; ++i) phases.push_back(2.0 * kPi * i / 96.0);
        const auto samples = rhom_fringe(cfg, 'T', phases, 0.0, 1.0);
        const FringeFit fit = fit_fringe(samples, 0.0);
        const double expected = contrast_form(eta, 1.0 - eta);
        CHECK(std::abs(fit.visibility - expected) < 1e-9);
        const double n_max = fit.amplitude * (1.0 + fit.visibility);
        const double n_min = fit.amplitude * (1.0 - fit.visibility);
        CHECK(std::abs(fringe_contrast(n_max, n_min) - expected) < 1e-9);
    }
}

TEST_CASE("bottom fringe contrast follows its own input coupler") {
    SourceConfig cfg;
    cfg.eta_b_in = 0.36;
    cfg.eta_t_in = 0.11;  // must not matter for the bottom sweep
    std::vector<double> phases;
    for (int i = 0; i < 81; ++i) phases.push_back(kPi * i / 40.0);
    const auto samples = rhom_fringe(cfg, 'B', phases, 0.0, 1.0);
    const FringeFit fit = fit_fringe(samples, 0.0);
    CHECK(std::abs(fit.visibility - contrast_form(0.36, 0.64)) < 1e-9);
}

TEST_CASE("accidentals shift the fringe floor without breaking the fit") {
    SourceConfig cfg;
    std::vector<double> phases;
    for (int i = 0; i < 64; ++i) phases.push_back(2.0 * kPi * i / 63.0);
    const double accidental = 7.5;
    const auto samples = rhom_fringe(cfg, 'T', phases, accidental, 100.0);
    const FringeFit fit = fit_fringe(samples, accidental);
    CHECK(fit.background == accidental);
    CHECK(std::abs(fit.visibility - 1.0) < 1e-9);
    CHECK(fit.residual < 1e-9);
}

TEST_CASE("fringe period is half the swept phase") {
    // A pair picks up twice the single-photon phase, so the rate repeats
    // after pi.
    SourceConfig cfg;
    const std::vector<double> phases = {0.3, 0.3 + kPi};
    const auto samples = rhom_fringe(cfg, 'T', phases, 0.0, 1.0);
    CHECK(samples[0].rate == doctest::Approx(samples[1].rate).epsilon(1e-12));
}

TEST_CASE("fit_fringe recovers a synthetic fringe exactly") {
    std::vector<FringeSample> samples;
    const double a = 3.0, v = 0.42, delta = 1.1, b = 0.25;
    for (int i = 0; i < 40; ++i) {
        const double phi = 2.0 * kPi * i / 39.0;
        samples.push_back({phi, a * (1.0 + v * std::cos(2.0 * phi + delta)) + b});
    }
    const FringeFit fit = fit_fringe(samples, b);
    CHECK(fit.amplitude == doctest::Approx(a).epsilon(1e-12));
    CHECK(fit.visibility == doctest::Approx(v).epsilon(1e-12));
    CHECK(fit.phase_offset == doctest::Approx(delta).epsilon(1e-10));
    CHECK(fit.phase_constrained);
}

TEST_CASE("fit_fringe rejects degenerate sweeps") {
    std::vector<FringeSample> samples = {{0.0, 1.0}, {kPi, 1.0}, {2.0 * kPi, 1.0}};
    // all phases congruent mod pi: the two quadratures are colinear
    CHECK_THROWS_AS(fit_fringe(samples, 0.0), std::invalid_argument);
}

TEST_CASE("source network keeps the pair state normalized and unitary") {
    SourceConfig cfg;
    cfg.phi_beta = 1.1;
    cfg.eta_t_in = 0.43;
    cfg.eta_b_out = 0.61;
    cfg.theta_cap = 0.35;
    const ModeUnitary u = compose_network(source_network(cfg));
    CHECK(unitarity_residual(u) < 1e-13);
    const Eigen::Vector4cd xi = generation_amplitudes(pump_amplitudes(cfg));
    const Eigen::MatrixXcd a = propagate_pair(embed_spiral_amplitudes(xi), u);
    CHECK(std::abs(a.norm() - 1.0) < 1e-12);
}
