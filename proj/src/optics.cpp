#include "qpc/optics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qpc {

namespace {

void check_mode(int m, int n_modes, const char* what) {
    if (m < 0 || m >= n_modes)
        throw std::invalid_argument(std::string(what) + ": mode index " + std::to_string(m) +
                                    " out of range for " + std::to_string(n_modes) + " modes");
}

void check_pair(const NetworkElement& e, int n_modes, bool adjacent, const char* what) {
    check_mode(e.mode_a, n_modes, what);
    check_mode(e.mode_b, n_modes, what);
    if (e.mode_a == e.mode_b)
        throw std::invalid_argument(std::string(what) + ": modes must differ");
    if (adjacent && std::abs(e.mode_a - e.mode_b) != 1)
        throw std::invalid_argument(std::string(what) + ": modes must be adjacent");
}

} // namespace

NetworkElement coupler(double eta, int mode_a, int mode_b) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument("coupler: eta must lie in [0, 1]");
    return {ElementKind::Coupler, mode_a, mode_b, eta};
}

NetworkElement phase_shift(double radians, int mode) {
    if (!std::isfinite(radians))
        throw std::invalid_argument("phase_shift: non-finite phase");
    return {ElementKind::Phase, mode, -1, radians};
}

NetworkElement crossing(int mode_a, int mode_b) {
    return {ElementKind::Crossing, mode_a, mode_b, 0.0};
}

NetworkElement mzi(double theta, int mode_a, int mode_b) {
    if (!std::isfinite(theta))
        throw std::invalid_argument("mzi: non-finite phase");
    return {ElementKind::Mzi, mode_a, mode_b, theta};
}

ModeUnitary element_unitary(const NetworkElement& e, int n_modes) {
    if (n_modes < 1)
        throw std::invalid_argument("element_unitary: need at least one mode");
    ModeUnitary u = ModeUnitary::Identity(n_modes, n_modes);
    const cplx i1(0.0, 1.0);
    switch (e.kind) {
    case ElementKind::Coupler: {
        check_pair(e, n_modes, true, "coupler");
        if (!(e.value >= 0.0 && e.value <= 1.0))
            throw std::invalid_argument("coupler: eta must lie in [0, 1]");
        const double t = std::sqrt(e.value);
        const double r = std::sqrt(1.0 - e.value);
        u(e.mode_a, e.mode_a) = t;
        u(e.mode_b, e.mode_b) = t;
        u(e.mode_a, e.mode_b) = i1 * r;
        u(e.mode_b, e.mode_a) = i1 * r;
        break;
    }
    case ElementKind::Phase:
        check_mode(e.mode_a, n_modes, "phase_shift");
        u(e.mode_a, e.mode_a) = std::exp(i1 * e.value);
        break;
    case ElementKind::Crossing:
        check_pair(e, n_modes, false, "crossing");
        u(e.mode_a, e.mode_a) = 0.0;
        u(e.mode_b, e.mode_b) = 0.0;
        u(e.mode_a, e.mode_b) = 1.0;
        u(e.mode_b, e.mode_a) = 1.0;
        break;
    case ElementKind::Mzi: {
        check_pair(e, n_modes, true, "mzi");
        const int upper = std::min(e.mode_a, e.mode_b);
        const int lower = std::max(e.mode_a, e.mode_b);
        ModeUnitary c = element_unitary(coupler(0.5, upper, lower), n_modes);
        ModeUnitary p = element_unitary(phase_shift(e.value, upper), n_modes);
        u = c * p * c;
        break;
    }
    }
    return u;
}

ModeUnitary compose_network(const NetworkLayout& net) {
    if (net.n_modes < 1)
        throw std::invalid_argument("compose_network: need at least one mode");
    ModeUnitary u = ModeUnitary::Identity(net.n_modes, net.n_modes);
    for (const NetworkElement& e : net.elements)
        u = element_unitary(e, net.n_modes) * u;
    return u;
}

std::pair<double, double> mzi_splitting(double theta) {
    ModeUnitary u = element_unitary(mzi(theta, 0, 1), 2);
    return {std::norm(u(0, 0)), std::norm(u(1, 0))};
}

double unitarity_residual(const ModeUnitary& u) {
    ModeUnitary d = u.adjoint() * u - ModeUnitary::Identity(u.rows(), u.cols());
    return d.cwiseAbs().maxCoeff();
}

} // namespace qpc
