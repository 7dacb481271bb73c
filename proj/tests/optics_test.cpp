#include <doctest.h>

#include <cmath>
#include <complex>

#include "qpc/optics.hpp"

using namespace qpc;

namespace {
constexpr double kPi = 3.14159265358979323846;
const cplx kI(0.0, 1.0);
}  // namespace

TEST_CASE("coupler matrix matches the stated convention") {
    const double eta = 0.3;
    const ModeUnitary u = element_unitary(coupler(eta, 0, 1), 2);
    CHECK(std::abs(u(0, 0) - std::sqrt(eta)) < 1e-15);
    CHECK(std::abs(u(1, 1) - std::sqrt(eta)) < 1e-15);
    CHECK(std::abs(u(0, 1) - kI * std::sqrt(1.0 - eta)) < 1e-15);
    CHECK(std::abs(u(1, 0) - kI * std::sqrt(1.0 - eta)) < 1e-15);
    CHECK(unitarity_residual(u) < 1e-15);
}

TEST_CASE("coupler rejects reflectivity outside (0, 1) but accepts endpoints") {
    CHECK_THROWS_AS(coupler(-0.1, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(coupler(1.1, 0, 1), std::invalid_argument);
    CHECK_NOTHROW(coupler(0.0, 0, 1));
    CHECK_NOTHROW(coupler(1.0, 0, 1));
    CHECK_THROWS_AS(coupler(0.5, 1, 1), std::invalid_argument);
}

TEST_CASE("phase shifter multiplies exactly one mode") {
    const ModeUnitary u = element_unitary(phase_shift(0.7, 1), 3);
    CHECK(std::abs(u(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(u(2, 2) - 1.0) < 1e-15);
    CHECK(std::abs(u(1, 1) - std::exp(kI * 0.7)) < 1e-15);
    CHECK(std::abs(u(0, 1)) == 0.0);
}

TEST_CASE("crossing is an exact swap with no phase") {
    const ModeUnitary u = element_unitary(crossing(0, 2), 3);
    CHECK(u(2, 0) == cplx(1.0, 0.0));
    CHECK(u(0, 2) == cplx(1.0, 0.0));
    CHECK(u(1, 1) == cplx(1.0, 0.0));
    CHECK(u(0, 0) == cplx(0.0, 0.0));
}

// Oracle: the MZI as an explicit product of its parts, written out
// independently of the composition code.
TEST_CASE("mzi equals coupler phase coupler product") {
    for (double theta : {0.0, 0.31, kPi / 2, 2.1, kPi, 5.9}) {
        const ModeUnitary direct = element_unitary(mzi(theta, 0, 1), 2);
        NetworkLayout net;
        net.n_modes = 2;
        net.elements = {coupler(0.5, 0, 1), phase_shift(theta, 0),
                        coupler(0.5, 0, 1)};
        const ModeUnitary product = compose_network(net);
        CHECK((direct - product).cwiseAbs().maxCoeff() < 1e-14);

        // Closed form i e^{i theta/2} [[sin, cos], [cos, -sin]](theta/2).
        const cplx pref = kI * std::exp(kI * (theta / 2.0));
        CHECK(std::abs(direct(0, 0) - pref * std::sin(theta / 2.0)) < 1e-14);
        CHECK(std::abs(direct(0, 1) - pref * std::cos(theta / 2.0)) < 1e-14);
        CHECK(std::abs(direct(1, 1) + pref * std::sin(theta / 2.0)) < 1e-14);
    }
}

TEST_CASE("mzi splitting powers follow half-angle law") {
    for (double theta : {0.0, 0.4, kPi / 2, kPi, 4.4}) {
        const auto [bar, cross] = mzi_splitting(theta);
        CHECK(bar == doctest::Approx(std::pow(std::sin(theta / 2.0), 2)).epsilon(1e-12));
        CHECK(cross == doctest::Approx(std::pow(std::cos(theta / 2.0), 2)).epsilon(1e-12));
        CHECK(bar + cross == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("mzi at zero crosses and at pi passes with a sign on one arm") {
    const ModeUnitary cross = element_unitary(mzi(0.0, 0, 1), 2);
    CHECK(std::abs(cross(0, 0)) < 1e-15);
    CHECK(std::abs(cross(1, 0) - kI) < 1e-15);
    const ModeUnitary bar = element_unitary(mzi(kPi, 0, 1), 2);
    CHECK(std::abs(bar(0, 0) + 1.0) < 1e-15);
    CHECK(std::abs(bar(1, 1) - 1.0) < 1e-15);
    CHECK(std::abs(bar(0, 1)) < 1e-15);
}

TEST_CASE("compose_network multiplies in traversal order") {
    NetworkLayout net;
    net.n_modes = 2;
    net.elements = {phase_shift(0.3, 0), coupler(0.5, 0, 1)};
    const ModeUnitary u = compose_network(net);
    const ModeUnitary expected =
        element_unitary(coupler(0.5, 0, 1), 2) *
        element_unitary(phase_shift(0.3, 0), 2);
    CHECK((u - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("compose_network rejects out-of-range modes") {
    NetworkLayout net;
    net.n_modes = 2;
    net.elements = {coupler(0.5, 1, 2)};
    CHECK_THROWS_AS(compose_network(net), std::invalid_argument);
}

TEST_CASE("random network stays unitary") {
    NetworkLayout net;
    net.n_modes = 4;
    net.elements = {coupler(0.21, 0, 1), phase_shift(1.1, 2),
                    crossing(1, 3),      mzi(0.77, 2, 3),
                    coupler(0.9, 1, 2),  phase_shift(4.0, 0)};
    CHECK(unitarity_residual(compose_network(net)) < 1e-13);
}
