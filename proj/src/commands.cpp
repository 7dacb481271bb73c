#include "qpc/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qpc/config.hpp"
#include "qpc/metrics.hpp"
#include "qpc/rng.hpp"
#include "qpc/tomography.hpp"

namespace qpc {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;
constexpr std::uint32_t kSaltSweepPoint = 0x73776565u;  // per-grid-point counts

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string hash_hex(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string output_path(const CommandArgs& args, const std::string& name) {
    std::filesystem::create_directories(args.out_dir);
    return (std::filesystem::path(args.out_dir) / name).string();
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write output file: " + path);
    }
    return out;
}

// First line: provenance comment with the config hash and effective seed.
// Second line: column names. Values carry 17 significant digits.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& command,
              const ConfigFile& file, std::uint64_t seed,
              const std::vector<std::string>& columns)
        : out_(open_output(path)) {
        out_ << "# command=" << command << " config=" << file.name()
             << " hash=" << hash_hex(file.hash()) << " seed=" << seed << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out_ << (i ? "," : "") << columns[i];
        }
        out_ << "\n";
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i) {
            out_ << (i ? "," : "") << format_full(values[i]);
        }
        out_ << "\n";
    }

    void footer(const std::string& text) { out_ << "# " << text << "\n"; }

  private:
    std::ofstream out_;
};

std::uint64_t effective_seed(const CommandArgs& args,
                             const ExperimentConfig& cfg, bool required) {
    if (args.seed_override) return *args.seed_override;
    if (cfg.seed) return *cfg.seed;
    if (required) {
        throw ConfigError(
            "a seed is required for a stochastic run: set experiment.seed or "
            "pass --seed");
    }
    return 0;
}

// The state the configured settings would produce on a blemish-free chip:
// balanced couplers, no path mismatch, no perturbations, no stray z
// rotations. Post-selection of a pure two-photon input is rank one, so the
// dominant eigenvector is the state itself.
Eigen::Vector4cd ideal_target_state(const ChipConfig& chip) {
    ChipConfig ideal = chip;
    ideal.source.eta_state = 0.5;
    ideal.source.eta_t_in = 0.5;
    ideal.source.eta_t_out = 0.5;
    ideal.source.eta_b_in = 0.5;
    ideal.source.eta_b_out = 0.5;
    ideal.source.theta_cap = 0.0;
    ideal.z_offset_t = 0.0;
    ideal.z_offset_b = 0.0;
    ideal.phase_perturbations.clear();
    const Eigen::Matrix4cd rho = full_chip_state(ideal).rho;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> eig(rho);
    Eigen::Vector4cd psi = eig.eigenvectors().col(3);
    // Fix the global phase so the target does not depend on solver details.
    int pivot = 0;
    for (int i = 1; i < 4; ++i) {
        if (std::abs(psi(i)) > std::abs(psi(pivot))) pivot = i;
    }
    psi *= std::polar(1.0, -std::arg(psi(pivot)));
    return psi;
}

ordered_json matrix_json(const Eigen::Matrix4cd& m) {
    ordered_json re = ordered_json::array();
    ordered_json im = ordered_json::array();
    for (int i = 0; i < 4; ++i) {
        ordered_json re_row = ordered_json::array();
        ordered_json im_row = ordered_json::array();
        for (int j = 0; j < 4; ++j) {
            re_row.push_back(m(i, j).real());
            im_row.push_back(m(i, j).imag());
        }
        re.push_back(re_row);
        im.push_back(im_row);
    }
    return ordered_json{{"re", re}, {"im", im}};
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out = open_output(path);
    out << j.dump(2) << "\n";
}

}  // namespace

std::vector<std::string> cmd_fringe(const CommandArgs& args) {
    const ConfigFile file = ConfigFile::parse_file(args.config_path);
    const ExperimentConfig cfg = load_experiment_config(file);

    std::string which = file.get_string("fringe.which", "T");
    if (which == "t") which = "T";
    if (which == "b") which = "B";
    if (which != "T" && which != "B") {
        throw ConfigError(file.name() + ": fringe.which must be T or B");
    }
    const double phase_min = file.get_double("fringe.phase_min", 0.0);
    const double phase_max = file.get_double("fringe.phase_max", 2.0 * kPi);
    const int n_points = static_cast<int>(file.get_int("fringe.n_points", 81));
    file.require_consumed();
    validate(cfg);
    if (n_points < 2) {
        throw ConfigError("fringe.n_points must be at least 2");
    }
    if (!(phase_max > phase_min)) {
        throw ConfigError("fringe.phase_max must exceed fringe.phase_min");
    }
    const std::uint64_t seed = effective_seed(args, cfg, false);

    std::vector<double> phases(n_points);
    for (int i = 0; i < n_points; ++i) {
        phases[i] = phase_min + (phase_max - phase_min) * double(i) / (n_points - 1);
    }
    const std::vector<FringeSample> samples = rhom_fringe(
        cfg.chip.source, which[0], phases, cfg.accidental_rate, cfg.flux);
    const FringeFit fit = fit_fringe(samples, cfg.accidental_rate);

    const std::string path = output_path(args, "fringe_" + which + ".csv");
    CsvWriter csv(path, "fringe", file, seed, {"phase", "rate", "fitted_rate"});
    for (int i = 0; i < n_points; ++i) {
        const double fitted =
            fit.amplitude *
                (1.0 + fit.visibility *
                           std::cos(2.0 * samples[i].phase + fit.phase_offset)) +
            fit.background;
        csv.row({samples[i].phase, samples[i].rate, fitted});
    }
    const double n_max = fit.amplitude * (1.0 + fit.visibility);
    const double n_min = fit.amplitude * (1.0 - fit.visibility);
    const double net = fringe_contrast(n_max, n_min);
    const double raw =
        fringe_contrast(n_max + fit.background, n_min + fit.background);
    std::ostringstream footer;
    footer << "fit amplitude=" << format_full(fit.amplitude)
           << " visibility=" << format_full(fit.visibility)
           << " phase_offset=" << format_full(fit.phase_offset)
           << " background=" << format_full(fit.background)
           << " residual_rms=" << format_full(fit.residual);
    csv.footer(footer.str());
    std::ostringstream contrast;
    contrast << "contrast net=" << format_full(net)
             << " raw=" << format_full(raw);
    csv.footer(contrast.str());
    return {path};
}

std::vector<std::string> cmd_state_sweep(const CommandArgs& args) {
    const ConfigFile file = ConfigFile::parse_file(args.config_path);
    ExperimentConfig cfg = load_experiment_config(file);

    const double phi_min = file.get_double("sweep.phi_min", 0.0);
    const double phi_max = file.get_double("sweep.phi_max", kPi);
    const int n_points = static_cast<int>(file.get_int("sweep.n_points", 41));
    const bool noisy = file.get_bool("sweep.noisy", false);
    file.require_consumed();
    validate(cfg);
    if (args.threads_override) cfg.threads = *args.threads_override;
    if (n_points < 2) {
        throw ConfigError("sweep.n_points must be at least 2");
    }
    if (!(phi_max > phi_min)) {
        throw ConfigError("sweep.phi_max must exceed sweep.phi_min");
    }
    const std::uint64_t seed = effective_seed(args, cfg, noisy);

    const std::string path = output_path(args, "state_sweep.csv");
    CsvWriter csv(path, "state-sweep", file, seed,
                  {"phi_beta", "balance", "schmidt_k", "chsh_s",
                   "balance_ideal", "schmidt_k_ideal", "chsh_s_ideal"});
    for (int i = 0; i < n_points; ++i) {
        const double phi =
            phi_min + (phi_max - phi_min) * double(i) / (n_points - 1);
        ChipConfig chip = cfg.chip;
        chip.source.phi_beta = phi;
        Eigen::Matrix4cd rho = full_chip_state(chip).rho;
        if (noisy) {
            TomoExperiment e;
            e.integration_time = cfg.integration_time;
            e.flux = cfg.flux;
            e.accidental_rate = cfg.accidental_rate;
            e.seed = derive_seed(derive_seed(seed, kSaltSweepPoint),
                                 static_cast<std::uint32_t>(i));
            const std::vector<CountRecord> records = simulate_counts(rho, e);
            rho = ml_reconstruct(records, e).rho;
        }
        const double beta = balance(phi);
        csv.row({phi, rho(0, 0).real(), schmidt_number(rho),
                 chsh_horodecki(rho), beta, ideal_schmidt_number(beta),
                 ideal_chsh(beta)});
    }
    return {path};
}

std::vector<std::string> cmd_tomo(const CommandArgs& args) {
    const ConfigFile file = ConfigFile::parse_file(args.config_path);
    ExperimentConfig cfg = load_experiment_config(file);
    file.require_consumed();
    validate(cfg);
    if (args.threads_override) cfg.threads = *args.threads_override;
    const std::uint64_t seed = effective_seed(args, cfg, true);

    TomoExperiment e;
    e.integration_time = cfg.integration_time;
    e.flux = cfg.flux;
    e.accidental_rate = cfg.accidental_rate;
    e.seed = seed;

    const PostselectionResult chip_state = full_chip_state(cfg.chip);
    const std::vector<CountRecord> records = simulate_counts(chip_state.rho, e);

    std::vector<std::string> written;
    const std::string counts_path = output_path(args, "counts.txt");
    {
        std::ofstream out = open_output(counts_path);
        out << "# command=tomo config=" << file.name()
            << " hash=" << hash_hex(file.hash()) << " seed=" << seed << "\n";
        out << serialize_counts(records, e);
    }
    written.push_back(counts_path);

    const LinearResult linear = linear_reconstruct(records, e);
    const MlResult ml = ml_reconstruct(records, e);
    if (!ml.converged) {
        throw std::runtime_error(
            "maximum-likelihood reconstruction did not converge");
    }

    const Eigen::Vector4cd target = ideal_target_state(cfg.chip);
    const LocalZFidelity fprime = fidelity_local_z(ml.rho, target);
    const MetricSamples boot = bootstrap_metrics(records, e, cfg.monte_carlo_n,
                                                 target, cfg.threads);
    const SampleSummary purity_s = summarize(boot.purity);
    const SampleSummary schmidt_s = summarize(boot.schmidt_number);
    const SampleSummary chsh_s = summarize(boot.chsh);
    const SampleSummary fid_s = summarize(boot.fidelity);

    ordered_json rho_json;
    rho_json["command"] = "tomo";
    rho_json["config_hash"] = hash_hex(file.hash());
    rho_json["seed"] = seed;
    rho_json["success_probability"] = chip_state.success_probability;
    rho_json["linear"] = matrix_json(linear.rho);
    rho_json["linear"]["physical"] = linear.physical;
    rho_json["ml"] = matrix_json(ml.rho);
    rho_json["ml"]["log_likelihood"] = ml.log_likelihood;
    rho_json["ml"]["iterations"] = ml.iterations;
    rho_json["ml"]["converged"] = ml.converged;
    const std::string rho_path = output_path(args, "density_matrix.json");
    write_json(rho_path, rho_json);
    written.push_back(rho_path);

    auto metric_entry = [](double value, const SampleSummary& s) {
        return ordered_json{
            {"value", value}, {"std", s.std_dev}, {"n_samples", s.n_samples}};
    };
    ordered_json metrics;
    metrics["command"] = "tomo";
    metrics["config_hash"] = hash_hex(file.hash());
    metrics["seed"] = seed;
    metrics["purity"] = metric_entry(purity(ml.rho), purity_s);
    metrics["schmidt_number"] =
        metric_entry(schmidt_number(ml.rho), schmidt_s);
    metrics["chsh"] = metric_entry(chsh_horodecki(ml.rho), chsh_s);
    metrics["fidelity_prime"] = metric_entry(fprime.fidelity, fid_s);
    metrics["fidelity_prime"]["zeta_t"] = fprime.zeta_t;
    metrics["fidelity_prime"]["zeta_b"] = fprime.zeta_b;
    const std::string metrics_path = output_path(args, "metrics.json");
    write_json(metrics_path, metrics);
    written.push_back(metrics_path);
    return written;
}

std::vector<std::string> cmd_calibrate(const CommandArgs& args) {
    const ConfigFile file = ConfigFile::parse_file(args.config_path);
    const std::string chip_ref = file.get_string("calibrate.hidden_chip");
    CalibrateOptions options;
    options.sweep.max_power =
        file.get_double("calibrate.max_power", options.sweep.max_power);
    options.sweep.n_points = static_cast<int>(
        file.get_int("calibrate.n_points", options.sweep.n_points));
    options.skip_z3 = file.get_bool("calibrate.skip_z3", false);
    std::optional<std::uint64_t> seed;
    if (args.seed_override) {
        seed = *args.seed_override;
    } else if (file.has("experiment.seed")) {
        seed = file.get_uint("experiment.seed");
    }
    file.require_consumed();

    std::filesystem::path chip_path(chip_ref);
    if (chip_path.is_relative()) {
        chip_path = std::filesystem::path(file.directory()) / chip_path;
    }
    const ConfigFile chip_file = ConfigFile::parse_file(chip_path.string());
    HiddenChip chip = load_hidden_chip(chip_file);
    chip_file.require_consumed();
    if (seed) {
        chip.noise_seed = derive_seed(*seed, 0x6e6f6973u);
    }

    const CalibrationPlan plan = default_plan();
    const CalibrationReport report = calibrate_chip(chip, plan, options);
    const RecoveryErrors recovery = recovery_errors(chip, report);

    std::vector<std::string> written;
    const std::string text_path = output_path(args, "calibration_report.txt");
    {
        std::ofstream out = open_output(text_path);
        out << "# command=calibrate config=" << file.name()
            << " hash=" << hash_hex(file.hash())
            << " seed=" << (seed ? *seed : 0) << "\n";
        out << plan_to_text(plan);
        out << report.to_text();
        out << "eta_state estimate " << format_full(report.eta_state_estimate)
            << "\n";
        out << "max offset error " << format_full(recovery.max_offset_error)
            << " rad\n";
        out << "max efficiency relative error "
            << format_full(recovery.max_efficiency_rel_error) << "\n";
    }
    written.push_back(text_path);

    ordered_json j;
    j["command"] = "calibrate";
    j["config_hash"] = hash_hex(file.hash());
    j["seed"] = seed ? *seed : 0;
    j["eta_state_estimate"] = report.eta_state_estimate;
    ordered_json heaters = ordered_json::array();
    for (const HeaterReport& entry : report.heaters) {
        heaters.push_back(ordered_json{
            {"heater", heater_name(entry.heater)},
            {"phase_offset", entry.model.phase_offset},
            {"efficiency", entry.model.efficiency},
            {"route_phase", entry.route_phase},
            {"fringe_mean", entry.fringe_mean},
            {"fringe_amplitude", entry.fringe_amplitude},
            {"residual_rms", entry.residual_rms},
        });
    }
    j["heaters"] = heaters;
    j["stage_residual_rms"] = report.stage_residual_rms;
    j["recovery"] = ordered_json{
        {"max_offset_error", recovery.max_offset_error},
        {"max_efficiency_rel_error", recovery.max_efficiency_rel_error}};
    const std::string json_path = output_path(args, "calibration.json");
    write_json(json_path, j);
    written.push_back(json_path);
    return written;
}

}  // namespace qpc
