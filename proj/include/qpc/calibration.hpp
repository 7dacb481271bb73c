#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpc/optics.hpp"

namespace qpc {

// Bright-light characterization of the chip's thermal phase shifters.
//
// Every heater maps electrical power to optical phase through
//     phase = phase_offset + efficiency * power,
// and a single-heater power sweep always produces a transmission fringe
//     T(P) = a + b * cos(phase_offset + efficiency * P + route_phase),
// because the swept phase enters the 6-mode transfer matrix exactly once.
// The route phase is fixed by the interferometer topology (couplers
// contribute factors of i, not magnitudes-dependent phases), so it can be
// computed from the circuit model and subtracted to expose the offset.

inline constexpr int kNumHeaters = 16;

// Learning order of the standard plan. The z3 shifters share their fringe
// path with the matching z2 shifter, so only the sum of the two offsets is
// visible to bright light; the convention here assigns the joint offset to
// z2 and takes the z3 offsets as zero.
enum class Heater : int {
    PhiB = 0,
    ThetaBy1,
    ThetaCzb,
    ThetaTy1,
    ThetaCzt,
    PhiBeta,
    PhiT,
    ThetaTz1,
    ThetaBz1,
    ThetaCzc,
    ThetaTy2,
    ThetaTz2,
    ThetaTz3,
    ThetaBy2,
    ThetaBz2,
    ThetaBz3,
};

int heater_index(Heater h);
Heater heater_from_index(int index);
const std::array<Heater, kNumHeaters>& all_heaters();

// Names match the corresponding ChipConfig / SourceConfig phase fields.
std::string heater_name(Heater h);
Heater heater_from_name(const std::string& name);

struct HeaterModel {
    double phase_offset = 0.0;   // radians, reported in [0, 2*pi)
    double efficiency = 0.15;    // radians per mW, must be positive

    double phase(double power_mw) const;
    void validate() const;
};

// Monitor ports. Bright light enters through the two source feed
// waveguides and is detected at the four output facets.
enum class Port : int {
    In = 0,        // top source feed
    InPrime,       // bottom source feed
    OutT,          // top qubit rail carrying |0>
    OutB,          // bottom qubit rail carrying |0>
    OutPrimeT,     // top auxiliary rail past the gate
    OutPrimeB,     // bottom auxiliary rail past the gate
};

int port_mode(Port p);
std::string port_name(Port p);

// Ground truth for a simulated device. The five coupler reflectivities
// mirror the pair-source configuration; heater crosstalk is a linear map
// from applied powers to parasitic phase on every other heater (radians
// per mW, zero diagonal). Measurement noise is multiplicative on detected
// power. efficiency_drift linearly rescales every heater efficiency over
// the course of one sweep and models slow contact-resistance drift.
struct HiddenChip {
    std::array<HeaterModel, kNumHeaters> heaters{};
    double eta_state = 0.5;
    double eta_t_in = 0.5;
    double eta_t_out = 0.5;
    double eta_b_in = 0.5;
    double eta_b_out = 0.5;
    Eigen::Matrix<double, kNumHeaters, kNumHeaters> crosstalk =
        Eigen::Matrix<double, kNumHeaters, kNumHeaters>::Zero();
    double noise_sigma = 0.0;
    double efficiency_drift = 0.0;
    std::uint64_t noise_seed = 0;

    void validate() const;
};

// Deterministic sample device: offsets uniform in [0, 2*pi) except the z3
// pair, efficiencies in [0.11, 0.22] rad/mW, reflectivities in [0.4, 0.6].
HiddenChip random_hidden_chip(std::uint64_t seed, double noise_sigma = 0.0,
                              double crosstalk_scale = 0.0);

// 6-mode transfer matrix of the chip under bright light for a given set of
// realized heater phases. Exposed for tests; calibration uses it both as
// the measurement forward model and as the route-phase probe.
Eigen::MatrixXcd bright_network(const std::array<double, kNumHeaters>& phases,
                                double eta_state, double eta_t_in,
                                double eta_t_out, double eta_b_in,
                                double eta_b_out);

struct SweepSample {
    double power = 0.0;         // mW applied to the swept heater
    double transmission = 0.0;  // detected power, normalized to the input
};

// Sweeps one heater while holding the others at fixed powers, and returns
// the detected fringe including noise, crosstalk and drift.
std::vector<SweepSample> bright_transmission(
    const HiddenChip& chip, Port input, Port output, Heater swept,
    const std::vector<double>& powers,
    const std::map<Heater, double>& fixed_powers = {});

struct SweepSpec {
    double max_power = 70.0;  // mW
    int n_points = 81;

    std::vector<double> powers() const;
    void validate() const;
};

struct FitResult {
    HeaterModel model;    // phase_offset holds the full cosine phase at P=0
    double mean = 0.0;                 // fitted a
    double amplitude = 0.0;            // fitted b, non-negative
    double residual_rms = 0.0;
    std::array<double, 4> covariance{};  // diag for (a, b, phase, efficiency)
};

// Least-squares fit of T(P) = a + b*cos(phi + eff*P). The frequency is
// found by a dense scan with a golden-section refinement; the remaining
// parameters are linear. Throws if fewer than 8 samples are given, if the
// fitted span covers less than half a fringe period, or if the response is
// flat.
FitResult fit_heater(const std::vector<SweepSample>& samples);

// One routing configuration of the calibration sequence: which feed is
// lit, which facets are monitored, and which heaters are learned, in
// order, while that routing is active.
struct CalibrationStage {
    Port input = Port::In;
    std::vector<Port> outputs;
    std::vector<Heater> heaters;
};

using CalibrationPlan = std::vector<CalibrationStage>;

// The four-pass sequence used on the real device: the auxiliary-feed pass
// learns the state-preparation interferometers and outer gate couplers,
// the main-feed pass the source phases and first z shifters, then one pass
// per analysis arm.
CalibrationPlan default_plan();

// When true, the plan's final z3 sweeps are skipped and the z3 models are
// reported with zero offset and nominal efficiency.
struct CalibrateOptions {
    SweepSpec sweep{};
    bool skip_z3 = false;
};

// Checks that every heater appears exactly once, that each heater is
// reachable on its stage's route, and that every heater the routing recipe
// must set has been learned earlier in the plan.
void validate_plan(const CalibrationPlan& plan);

struct HeaterReport {
    Heater heater = Heater::PhiB;
    HeaterModel model;
    double route_phase = 0.0;
    double fringe_mean = 0.0;
    double fringe_amplitude = 0.0;
    double residual_rms = 0.0;
    std::array<double, 4> covariance{};
};

struct CalibrationReport {
    std::array<HeaterReport, kNumHeaters> heaters{};
    std::vector<double> stage_residual_rms;
    // State-coupler reflectivity inferred from the phi_beta fringe contrast
    // and disambiguated during the first z1 sweep; the z1 offsets are only
    // defined relative to the feed phases this reflectivity fixes.
    double eta_state_estimate = 0.5;

    std::string to_text() const;
};

CalibrationReport calibrate_chip(const HiddenChip& chip,
                                 const CalibrationPlan& plan,
                                 const CalibrateOptions& options = {});

struct RecoveryErrors {
    double max_offset_error = 0.0;          // radians, angular distance
    double max_efficiency_rel_error = 0.0;
};

RecoveryErrors recovery_errors(const HiddenChip& chip,
                               const CalibrationReport& report);

std::string plan_to_text(const CalibrationPlan& plan);

}  // namespace qpc
