#pragma once

#include "qpc/source.hpp"

#include <map>
#include <string>

namespace qpc {

// Roles of the six modes.  Rails are dual-rail qubit paths; the two auxiliary
// modes are vacuum ports used by the outer gate splitters.
struct ModeMap {
    int aux_t = 0;
    int t_rail0 = 1;
    int t_rail1 = 2;
    int b_rail0 = 3;
    int b_rail1 = 4;
    int aux_b = 5;
};

void validate(const ModeMap& map);

enum class GateMode { CZ, Identity, Bypass };

struct ChipConfig {
    SourceConfig source;
    // preparation stage, Rz then Ry per qubit
    double theta_tz1 = 0.0, theta_ty1 = 0.0;
    double theta_bz1 = 0.0, theta_by1 = 0.0;
    GateMode gate = GateMode::Bypass;
    // measurement stage, Rz(z3) then Ry(y2) then Rz(z2) per qubit
    double theta_tz2 = 0.0, theta_ty2 = 0.0, theta_tz3 = 0.0;
    double theta_bz2 = 0.0, theta_by2 = 0.0, theta_bz3 = 0.0;
    // fixed uncalibrated rotations sitting between gate and measurement
    double z_offset_t = 0.0, z_offset_b = 0.0;
    // optional additive phase perturbations by config key name, e.g. thermal
    // crosstalk expressed directly in radians
    std::map<std::string, double> phase_perturbations;
};

void validate(const ChipConfig& cfg);
ChipConfig apply_perturbations(const ChipConfig& cfg);

Eigen::Matrix2cd rz(double theta);
Eigen::Matrix2cd ry(double theta);
// Rz(theta_z_b) * Ry(theta_y) * Rz(theta_z_a): z_a is applied first
Eigen::Matrix2cd single_qubit_unitary(double theta_z_a, double theta_y, double theta_z_b);

// u acting on the (rail0, rail1) pair, identity elsewhere
ModeUnitary rail_embedding(const Eigen::Matrix2cd& u, int rail0, int rail1, int n_modes = kNumModes);

// Three-splitter post-selected gate (or pass-through), including the static
// phase trims that hardware folds into its per-setting calibration.  Bypass
// is a routing choice, not a layout, and is rejected here.
NetworkLayout gate_layout(GateMode mode, const ModeMap& map = {});

struct PostselectionResult {
    Eigen::Matrix4cd rho;
    double success_probability = 0.0;
    double p_signal_in_t = 0.0;  // signal photon in the T rails, idler in B
    double p_signal_in_b = 0.0;
};

// Keep the events with exactly one photon in the T rails and one in the B
// rails; the two wavelength assignments are summed incoherently.
PostselectionResult postselect_qubits(const Eigen::MatrixXcd& a, const ModeMap& map = {});

// Two-photon amplitude for a logical two-qubit state, symmetrized over the
// signal/idler assignment (the form the source emits).
Eigen::MatrixXcd embed_two_qubit(const Eigen::Vector4cd& psi, const ModeMap& map = {});

// Post-selected operator of the gate on the logical basis, extracted by
// propagating symmetrized basis states.
Eigen::Matrix4cd logical_gate_operator(GateMode mode, const ModeMap& map = {});

// Everything from the spirals to the detectors as one mode unitary.
ModeUnitary chip_unitary(const ChipConfig& cfg, const ModeMap& map = {});

PostselectionResult full_chip_state(const ChipConfig& cfg, const ModeMap& map = {});

} // namespace qpc
