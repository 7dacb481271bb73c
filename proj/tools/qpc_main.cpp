#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpc/commands.hpp"
#include "qpc/config.hpp"

namespace {

struct SubArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool threads_set = false;
};

void add_common_options(CLI::App* sub, SubArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config file")
        ->required();
    sub->add_option("--out", args.out_dir, "output directory")->required();
    sub->add_option("--seed", args.seed, "seed overriding experiment.seed")
        ->check(CLI::NonNegativeNumber)
        ->each([&args](const std::string&) { args.seed_set = true; });
    sub->add_option("--threads", args.threads,
                    "worker threads overriding experiment.threads "
                    "(results do not depend on it)")
        ->check(CLI::NonNegativeNumber)
        ->each([&args](const std::string&) { args.threads_set = true; });
}

qpc::CommandArgs to_command_args(const SubArgs& args) {
    qpc::CommandArgs out;
    out.config_path = args.config_path;
    out.out_dir = args.out_dir;
    if (args.seed_set) out.seed_override = args.seed;
    if (args.threads_set) out.threads_override = args.threads;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"digital twin of a reconfigurable two-qubit photonic processor"};
    app.require_subcommand(1);

    SubArgs fringe_args, sweep_args, tomo_args, cal_args;
    CLI::App* fringe = app.add_subcommand(
        "fringe", "pair-source interference fringe sweep (CSV)");
    add_common_options(fringe, fringe_args);
    CLI::App* sweep = app.add_subcommand(
        "state-sweep", "entanglement metrics against the state control phase (CSV)");
    add_common_options(sweep, sweep_args);
    CLI::App* tomo = app.add_subcommand(
        "tomo", "simulated tomography with reconstruction and error bars");
    add_common_options(tomo, tomo_args);
    CLI::App* calibrate = app.add_subcommand(
        "calibrate", "heater calibration of a hidden chip model");
    add_common_options(calibrate, cal_args);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::function<std::vector<std::string>(const qpc::CommandArgs&)> run;
    qpc::CommandArgs args;
    std::string name;
    if (fringe->parsed()) {
        run = qpc::cmd_fringe;
        args = to_command_args(fringe_args);
        name = "fringe";
    } else if (sweep->parsed()) {
        run = qpc::cmd_state_sweep;
        args = to_command_args(sweep_args);
        name = "state-sweep";
    } else if (tomo->parsed()) {
        run = qpc::cmd_tomo;
        args = to_command_args(tomo_args);
        name = "tomo";
    } else {
        run = qpc::cmd_calibrate;
        args = to_command_args(cal_args);
        name = "calibrate";
    }

    try {
        const std::vector<std::string> written = run(args);
        for (const std::string& path : written) {
            std::cout << path << "\n";
        }
        return 0;
    } catch (const qpc::ConfigError& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << name << ": " << e.what() << "\n";
        return 3;
    }
}
