#include "qpc/config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace qpc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' &&
            c != '.' && c != '-') {
            return false;
        }
    }
    return true;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text,
                                    const std::string& name) {
    ConfigFile file;
    file.name_ = name;
    file.hash_ = fnv1a64(text);

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t comment = raw.find_first_of("#;");
        const std::string line =
            trim(comment == std::string::npos ? raw : raw.substr(0, comment));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (!valid_name(section)) {
                throw ConfigError(name + ":" + std::to_string(line_no) +
                                  ": bad section name '" + section + "'");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!valid_name(key)) {
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": bad key name '" + key + "'");
        }
        const std::string full = section.empty() ? key : section + "." + key;
        auto [it, inserted] = file.entries_.emplace(full, Entry{value, line_no});
        if (!inserted) {
            throw ConfigError(name + ":" + std::to_string(line_no) +
                              ": duplicate key '" + full + "' (first on line " +
                              std::to_string(it->second.line) + ")");
        }
        file.order_.push_back(full);
    }
    return file;
}

bool ConfigFile::has(const std::string& key) const {
    return entries_.count(key) != 0;
}

const ConfigFile::Entry& ConfigFile::lookup(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        throw ConfigError(name_ + ": missing required key '" + key + "'");
    }
    it->second.consumed = true;
    return it->second;
}

double ConfigFile::get_double(const std::string& key) const {
    const Entry& e = lookup(key);
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (end == e.value.c_str() || *end != '\0' || errno == ERANGE) {
        throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" +
                          key + "' is not a number: '" + e.value + "'");
    }
    return v;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& key) const {
    const Entry& e = lookup(key);
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0' || errno == ERANGE) {
        throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" +
                          key + "' is not an integer: '" + e.value + "'");
    }
    return v;
}

std::int64_t ConfigFile::get_int(const std::string& key,
                                 std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t ConfigFile::get_uint(const std::string& key) const {
    const Entry& e = lookup(key);
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
    if (end == e.value.c_str() || *end != '\0' || errno == ERANGE ||
        e.value.find('-') != std::string::npos) {
        throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" +
                          key + "' is not a non-negative integer: '" + e.value +
                          "'");
    }
    return v;
}

std::uint64_t ConfigFile::get_uint(const std::string& key,
                                   std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}

bool ConfigFile::get_bool(const std::string& key) const {
    const Entry& e = lookup(key);
    const std::string& v = e.value;
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw ConfigError(name_ + ":" + std::to_string(e.line) + ": key '" + key +
                      "' is not a boolean: '" + v + "'");
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

std::string ConfigFile::get_string(const std::string& key) const {
    return lookup(key).value;
}

std::string ConfigFile::get_string(const std::string& key,
                                   const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

std::vector<std::string> ConfigFile::section_keys(
    const std::string& section) const {
    std::vector<std::string> keys;
    const std::string prefix = section + ".";
    for (const std::string& full : order_) {
        if (full.rfind(prefix, 0) == 0) {
            keys.push_back(full.substr(prefix.size()));
        }
    }
    return keys;
}

void ConfigFile::require_consumed() const {
    std::string complaints;
    for (const std::string& full : order_) {
        const Entry& e = entries_.at(full);
        if (!e.consumed) {
            if (!complaints.empty()) complaints += "; ";
            complaints += "'" + full + "' (line " + std::to_string(e.line) + ")";
        }
    }
    if (!complaints.empty()) {
        throw ConfigError(name_ + ": unknown key " + complaints);
    }
}

std::string ConfigFile::directory() const {
    const std::size_t slash = name_.find_last_of('/');
    if (slash == std::string::npos) return ".";
    return name_.substr(0, slash);
}

void validate(const ExperimentConfig& cfg) {
    validate(cfg.chip);
    if (!(cfg.flux > 0.0)) {
        throw ConfigError("experiment.flux must be positive");
    }
    if (!(cfg.integration_time > 0.0)) {
        throw ConfigError("experiment.integration_time must be positive");
    }
    if (cfg.accidental_rate < 0.0) {
        throw ConfigError("experiment.accidental_rate must be non-negative");
    }
    if (cfg.monte_carlo_n < 2) {
        throw ConfigError("experiment.monte_carlo_n must be at least 2");
    }
    if (cfg.threads < 0) {
        throw ConfigError("experiment.threads must be non-negative");
    }
}

ExperimentConfig load_experiment_config(const ConfigFile& file) {
    ExperimentConfig cfg;
    SourceConfig& src = cfg.chip.source;
    src.phi_beta = file.get_double("source.phi_beta", src.phi_beta);
    src.phi_t = file.get_double("source.phi_t", src.phi_t);
    src.phi_b = file.get_double("source.phi_b", src.phi_b);
    src.theta_cap = file.get_double("source.theta_cap", src.theta_cap);
    src.eta_state = file.get_double("source.eta_state", src.eta_state);
    src.eta_t_in = file.get_double("source.eta_t_in", src.eta_t_in);
    src.eta_t_out = file.get_double("source.eta_t_out", src.eta_t_out);
    src.eta_b_in = file.get_double("source.eta_b_in", src.eta_b_in);
    src.eta_b_out = file.get_double("source.eta_b_out", src.eta_b_out);

    ChipConfig& chip = cfg.chip;
    chip.theta_tz1 = file.get_double("prep.theta_tz1", 0.0);
    chip.theta_ty1 = file.get_double("prep.theta_ty1", 0.0);
    chip.theta_bz1 = file.get_double("prep.theta_bz1", 0.0);
    chip.theta_by1 = file.get_double("prep.theta_by1", 0.0);

    const std::string mode = file.get_string("gate.mode", "bypass");
    if (mode == "cz") {
        chip.gate = GateMode::CZ;
    } else if (mode == "identity") {
        chip.gate = GateMode::Identity;
    } else if (mode == "bypass") {
        chip.gate = GateMode::Bypass;
    } else {
        throw ConfigError(file.name() +
                          ": gate.mode must be cz, identity or bypass, got '" +
                          mode + "'");
    }

    chip.theta_tz2 = file.get_double("analysis.theta_tz2", 0.0);
    chip.theta_ty2 = file.get_double("analysis.theta_ty2", 0.0);
    chip.theta_tz3 = file.get_double("analysis.theta_tz3", 0.0);
    chip.theta_bz2 = file.get_double("analysis.theta_bz2", 0.0);
    chip.theta_by2 = file.get_double("analysis.theta_by2", 0.0);
    chip.theta_bz3 = file.get_double("analysis.theta_bz3", 0.0);
    chip.z_offset_t = file.get_double("analysis.z_offset_t", 0.0);
    chip.z_offset_b = file.get_double("analysis.z_offset_b", 0.0);

    for (const std::string& key : file.section_keys("perturbations")) {
        chip.phase_perturbations[key] =
            file.get_double("perturbations." + key);
    }

    cfg.flux = file.get_double("experiment.flux", cfg.flux);
    cfg.integration_time =
        file.get_double("experiment.integration_time", cfg.integration_time);
    cfg.accidental_rate =
        file.get_double("experiment.accidental_rate", cfg.accidental_rate);
    if (file.has("experiment.seed")) {
        cfg.seed = file.get_uint("experiment.seed");
    }
    cfg.monte_carlo_n = static_cast<int>(
        file.get_int("experiment.monte_carlo_n", cfg.monte_carlo_n));
    cfg.threads = static_cast<int>(file.get_int("experiment.threads", 0));
    return cfg;
}

HiddenChip load_hidden_chip(const ConfigFile& file) {
    const bool generated = file.has("generate.seed");
    if (generated && !file.section_keys("heaters").empty()) {
        throw ConfigError(file.name() +
                          ": give either [generate] or [heaters], not both");
    }
    if (generated) {
        const std::uint64_t seed = file.get_uint("generate.seed");
        const double noise = file.get_double("generate.noise_sigma", 0.0);
        const double xtalk = file.get_double("generate.crosstalk_scale", 0.0);
        HiddenChip chip = random_hidden_chip(seed, noise, xtalk);
        chip.efficiency_drift =
            file.get_double("generate.efficiency_drift", 0.0);
        return chip;
    }

    HiddenChip chip;
    for (Heater h : all_heaters()) {
        const std::string base = "heaters." + heater_name(h);
        chip.heaters[heater_index(h)].phase_offset =
            file.get_double(base + "_offset");
        chip.heaters[heater_index(h)].efficiency =
            file.get_double(base + "_efficiency");
    }
    chip.eta_state = file.get_double("couplers.eta_state", 0.5);
    chip.eta_t_in = file.get_double("couplers.eta_t_in", 0.5);
    chip.eta_t_out = file.get_double("couplers.eta_t_out", 0.5);
    chip.eta_b_in = file.get_double("couplers.eta_b_in", 0.5);
    chip.eta_b_out = file.get_double("couplers.eta_b_out", 0.5);
    chip.noise_sigma = file.get_double("noise.sigma", 0.0);
    chip.noise_seed = file.get_uint("noise.seed", 0);
    chip.efficiency_drift = file.get_double("noise.efficiency_drift", 0.0);
    for (const std::string& key : file.section_keys("crosstalk")) {
        const std::size_t dot = key.find('.');
        if (dot == std::string::npos) {
            throw ConfigError(file.name() + ": crosstalk key '" + key +
                              "' must be <victim>.<aggressor>");
        }
        const Heater victim = heater_from_name(key.substr(0, dot));
        const Heater aggressor = heater_from_name(key.substr(dot + 1));
        if (victim == aggressor) {
            throw ConfigError(file.name() +
                              ": crosstalk diagonal must stay zero: " + key);
        }
        chip.crosstalk(heater_index(victim), heater_index(aggressor)) =
            file.get_double("crosstalk." + key);
    }
    return chip;
}

}  // namespace qpc
