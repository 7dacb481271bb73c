#pragma once

#include "qpc/optics.hpp"

#include <array>
#include <vector>

namespace qpc {

// Six-mode frame used everywhere: mode 0 is the top auxiliary rail, modes
// 1..4 carry the photons, mode 5 is the bottom auxiliary rail.  The four
// spiral sources sit on modes 1..4 in the order
//   1: top ring, upper arm   2: top ring, lower arm
//   3: bottom ring, upper arm   4: bottom ring, lower arm
// After the source section's waveguide crossing the rail order becomes
//   1: qubit T rail 0,  2: qubit T rail 1,  3: qubit B rail 0,  4: qubit B rail 1.
inline constexpr int kNumModes = 6;
inline constexpr std::array<int, 4> kSpiralModes = {1, 2, 3, 4};

struct SourceConfig {
    double phi_beta = 1.5707963267948966;  // state-control MZI internal phase
    double phi_t = 1.5707963267948966;     // top interferometer internal phase
    double phi_b = 1.5707963267948966;     // bottom interferometer internal phase
    double theta_cap = 0.0;                // intrinsic top/bottom path-mismatch phase
    double eta_state = 0.5;                // state-control MZI coupler reflectivity
    double eta_t_in = 0.5;
    double eta_t_out = 0.5;
    double eta_b_in = 0.5;
    double eta_b_out = 0.5;
};

void validate(const SourceConfig& cfg);

struct WavelengthTriple {
    double pump_nm = 1551.0;
    double signal_nm = 1547.0;
    double idler_nm = 1555.0;
};

// |2/pump - 1/signal - 1/idler| in 1/nm
double energy_mismatch(const WavelengthTriple& w);
void validate_wavelengths(const WavelengthTriple& w, double tol = 1e-6);

struct RateModel {
    double brightness_pairs_per_s_mw2 = 20000.0;
    double facet_loss_db = 28.0;  // full facet-to-facet budget; each photon sees half
    double detector_efficiency = 1.0;
};

// detected pairs/s at the given continuous-wave pump power
double pair_rate(const RateModel& m, double pump_mw);

// Pump field amplitude at each spiral, order (T up, T lo, B up, B lo), for
// one unit of pump power into the main input.
Eigen::Vector4cd pump_amplitudes(const SourceConfig& cfg);

// Pair generation amplitudes: xi_k proportional to pump_k^2, normalized to
// unit total pair probability.
Eigen::Vector4cd generation_amplitudes(const Eigen::Vector4cd& pump);

// |00> weight of the ideal source state as a function of phi_beta
double balance(double phi_beta);

// Source section from the spirals to the crossed rails: internal phases,
// output couplers, path-mismatch phase, waveguide crossing.
NetworkLayout source_network(const SourceConfig& cfg);

// Two-photon amplitude A = U diag(xi) U^T for a spatially shared unitary;
// A(m, n) is the amplitude for signal in mode m and idler in mode n.
// xi_modes has one entry per mode (zeros on non-source modes).  The result
// is normalized to unit total probability.
Eigen::MatrixXcd propagate_pair(const Eigen::VectorXcd& xi_modes, const ModeUnitary& u);

Eigen::VectorXcd embed_spiral_amplitudes(const Eigen::Vector4cd& xi);

// Post-selected two-qubit state straight out of the source (no gate, no
// rotations), as a pure state vector in the |00>,|01>,|10>,|11> basis.
Eigen::Vector4cd source_qubit_state(const SourceConfig& cfg);

struct FringeSample {
    double phase = 0.0;
    double rate = 0.0;
};

// Signal-idler cross-port coincidence rate at the auxiliary outputs while the
// chosen ring interferometer's internal phase is swept.  The top ring is fed
// through the state-control MZI locked to full transmission; the bottom ring
// is fed directly through the spare port of its input coupler.  Rates are in
// units of flux_scale (total generated pair flux) plus the flat accidental.
std::vector<FringeSample> rhom_fringe(const SourceConfig& cfg, char which,
                                      const std::vector<double>& phases,
                                      double accidental_rate, double flux_scale = 1.0);

struct FringeFit {
    double amplitude = 0.0;     // A in rate = A (1 + V cos(2 phi + delta)) + b
    double visibility = 0.0;    // V
    double phase_offset = 0.0;  // delta
    double background = 0.0;    // b, fixed to the supplied accidental level
    bool phase_constrained = true;
    double residual = 0.0;      // rms misfit
};

FringeFit fit_fringe(const std::vector<FringeSample>& samples, double known_background = 0.0);

// (n_max - n_min) / (n_max + n_min) on accidental-subtracted rates
double fringe_contrast(double n_max, double n_min);

} // namespace qpc
