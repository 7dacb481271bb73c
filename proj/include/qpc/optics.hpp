#pragma once

#include <Eigen/Dense>
#include <complex>
#include <utility>
#include <vector>

namespace qpc {

using cplx = std::complex<double>;
using ModeUnitary = Eigen::MatrixXcd;

// Planar element conventions, fixed once for the whole code base:
//   coupler(eta):  [[sqrt(eta), i*sqrt(1-eta)], [i*sqrt(1-eta), sqrt(eta)]]
//   phase(phi):    multiplies its mode by exp(i*phi)
//   crossing:      exact swap of two modes
//   mzi(theta):    coupler(1/2) * phase(theta on the lower-indexed mode) * coupler(1/2)
// With these, an MZI has bar power sin^2(theta/2) = (1 - cos theta)/2 and
// cross power cos^2(theta/2); theta = 0 is a full crossover, theta = pi a
// full pass-through.
enum class ElementKind { Coupler, Phase, Crossing, Mzi };

struct NetworkElement {
    ElementKind kind;
    int mode_a = 0;
    int mode_b = -1;     // unused for Phase
    double value = 0.0;  // eta for Coupler, radians for Phase and Mzi
};

NetworkElement coupler(double eta, int mode_a, int mode_b);
NetworkElement phase_shift(double radians, int mode);
NetworkElement crossing(int mode_a, int mode_b);
NetworkElement mzi(double theta, int mode_a, int mode_b);

// Elements listed in the order light traverses them.
struct NetworkLayout {
    int n_modes = 0;
    std::vector<NetworkElement> elements;
};

ModeUnitary element_unitary(const NetworkElement& e, int n_modes);

// Product of all element unitaries; appending layout B after layout A gives
// compose_network(B) * compose_network(A).
ModeUnitary compose_network(const NetworkLayout& net);

// (bar_power, cross_power) of a single MZI at internal phase theta.
std::pair<double, double> mzi_splitting(double theta);

// max-norm of U^dagger U - I
double unitarity_residual(const ModeUnitary& u);

} // namespace qpc
