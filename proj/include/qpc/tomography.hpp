#pragma once

#include "qpc/optics.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qpc {

// Analysis settings per qubit.  Z0/Z1 are the computational projectors, X+
// and Y+ the equatorial ones.
enum class BasisSetting { Z0, Z1, XPlus, YPlus };

std::string to_string(BasisSetting s);
BasisSetting basis_setting_from_string(const std::string& token);

struct AnalysisAngles {
    double theta_y2 = 0.0;
    double theta_z3 = 0.0;
};

// Heater angles realizing the setting on the measurement stage (theta_z2
// stays at zero).
AnalysisAngles analysis_angles(BasisSetting s);

// The pure state the setting projects onto.
Eigen::Vector2cd analysis_state(BasisSetting s);

struct TomoSetting {
    BasisSetting t = BasisSetting::Z0;
    BasisSetting b = BasisSetting::Z0;
};

// All 16 settings, T-major.
std::vector<TomoSetting> tomography_settings();

double setting_probability(const Eigen::Matrix4cd& rho, const TomoSetting& s);

struct TomoExperiment {
    double integration_time = 1.0;  // seconds per setting
    double flux = 1.0;              // detected coincidence rate scale, Hz
    double accidental_rate = 0.0;   // uniform background rate, Hz
    std::uint64_t seed = 0;
};

void validate(const TomoExperiment& e);

struct CountRecord {
    TomoSetting setting;
    double expected = 0.0;  // model mean, filled by the simulator
    std::uint64_t counts = 0;
};

double expected_counts(const Eigen::Matrix4cd& rho, const TomoSetting& s,
                       const TomoExperiment& e);

std::vector<CountRecord> simulate_counts(const Eigen::Matrix4cd& rho, const TomoExperiment& e);

std::string serialize_counts(const std::vector<CountRecord>& records, const TomoExperiment& e);

struct ParsedCounts {
    std::vector<CountRecord> records;
    TomoExperiment experiment;
};
ParsedCounts parse_counts(std::istream& in);

struct LinearResult {
    Eigen::Matrix4cd rho;   // trace-normalized, possibly unphysical
    bool physical = false;  // eigenvalues nonnegative within tolerance
};

LinearResult linear_reconstruct(const std::vector<CountRecord>& records,
                                const TomoExperiment& e);

// Poisson log likelihood sum_s (n_s ln mu_s - mu_s) with
// mu_s = time (flux p_s(rho) + accidental).
double poisson_log_likelihood(const Eigen::Matrix4cd& rho,
                              const std::vector<CountRecord>& records,
                              const TomoExperiment& e);

// Density matrix from the 16 real parameters of a lower-triangular factor T,
// rho = T T^dag / Tr(T T^dag).
Eigen::Matrix4cd rho_from_params(const Eigen::VectorXd& params);
Eigen::VectorXd params_from_rho(const Eigen::Matrix4cd& rho);

double ml_objective(const Eigen::VectorXd& params, const std::vector<CountRecord>& records,
                    const TomoExperiment& e);
Eigen::VectorXd ml_gradient(const Eigen::VectorXd& params,
                            const std::vector<CountRecord>& records, const TomoExperiment& e);

struct MlOptions {
    int max_iterations = 10000;
    double min_improvement = 1e-10;
};

struct MlResult {
    Eigen::Matrix4cd rho;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Maximum-likelihood estimate via monotone gradient ascent with backtracking,
// started from the projected linear estimate.
MlResult ml_reconstruct(const std::vector<CountRecord>& records, const TomoExperiment& e,
                        const MlOptions& options = {});

struct MetricSamples {
    std::vector<double> purity;
    std::vector<double> schmidt_number;
    std::vector<double> chsh;
    std::vector<double> fidelity;
};

struct SampleSummary {
    double mean = 0.0;
    double std_dev = 0.0;  // n-1 divisor
    int n_samples = 0;
};

SampleSummary summarize(const std::vector<double>& values);

// Parametric bootstrap: redraw counts around the observed ones, refit by
// maximum likelihood, collect metrics.  Fidelity is taken against `target`
// when given, otherwise against the point estimate from the original counts.
// Results are independent of the thread count.
MetricSamples bootstrap_metrics(const std::vector<CountRecord>& records,
                                const TomoExperiment& e, int n_samples,
                                const std::optional<Eigen::Vector4cd>& target = std::nullopt,
                                int n_threads = 0);

} // namespace qpc
