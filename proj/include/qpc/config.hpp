#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpc/calibration.hpp"
#include "qpc/gate.hpp"

namespace qpc {

// Bad user input: malformed file, unknown key, out-of-range value.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flat line-oriented key=value text with [section] headers. '#' and ';'
// start comments, keys are addressed as "section.key", and every key must
// be consumed by the command that loads the file; leftovers are reported
// with their line numbers so a typo cannot silently fall back to a default.
class ConfigFile {
  public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text,
                                   const std::string& name = "<string>");

    bool has(const std::string& key) const;

    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;

    // Keys of one section, in file order; marks nothing consumed by itself.
    std::vector<std::string> section_keys(const std::string& section) const;

    // Throws listing every key that was never read.
    void require_consumed() const;

    // FNV-1a over the raw bytes of the file.
    std::uint64_t hash() const { return hash_; }
    const std::string& name() const { return name_; }
    // Directory part of the file path, for resolving relative references.
    std::string directory() const;

  private:
    struct Entry {
        std::string value;
        int line = 0;
        mutable bool consumed = false;
    };

    const Entry& lookup(const std::string& key) const;

    std::string name_;
    std::uint64_t hash_ = 0;
    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
};

std::uint64_t fnv1a64(const std::string& bytes);

struct ExperimentConfig {
    ChipConfig chip;
    double flux = 1000.0;             // detected coincidences/s at the peak
    double integration_time = 5.0;    // seconds per analysis setting
    double accidental_rate = 0.0;     // flat background, counts/s
    std::optional<std::uint64_t> seed;
    int monte_carlo_n = 200;
    int threads = 0;  // 0 lets the tomography module pick
};

void validate(const ExperimentConfig& cfg);

// Reads [source], [prep], [gate], [analysis], [perturbations], [experiment].
ExperimentConfig load_experiment_config(const ConfigFile& file);

// Reads a hidden-chip description: either a [generate] section naming a
// seed (plus optional noise_sigma and crosstalk_scale), or explicit
// [heaters], [couplers], [noise] and [crosstalk] sections.
HiddenChip load_hidden_chip(const ConfigFile& file);

}  // namespace qpc
