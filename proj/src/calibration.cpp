#include "qpc/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "qpc/rng.hpp"

namespace qpc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;
constexpr double kHalfPi = 0.5 * kPi;

// Second state-interferometer setting used to pick between the two coupler
// reflectivities compatible with a measured fringe contrast. Any value that
// keeps both feeds lit and is not symmetric to the first sweep works.
constexpr double kDisambigPhiBeta = 2.2;

double wrap_2pi(double x) {
    double w = std::fmod(x, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

double angular_distance(double a, double b) {
    double d = wrap_2pi(a - b);
    return std::min(d, kTwoPi - d);
}

struct HeaterInfo {
    const char* name;
};

const std::array<HeaterInfo, kNumHeaters>& heater_table() {
    static const std::array<HeaterInfo, kNumHeaters> table = {{
        {"phi_b"},
        {"theta_by1"},
        {"theta_czb"},
        {"theta_ty1"},
        {"theta_czt"},
        {"phi_beta"},
        {"phi_t"},
        {"theta_tz1"},
        {"theta_bz1"},
        {"theta_czc"},
        {"theta_ty2"},
        {"theta_tz2"},
        {"theta_tz3"},
        {"theta_by2"},
        {"theta_bz2"},
        {"theta_bz3"},
    }};
    return table;
}

// Settings a heater sweep needs on the already-calibrated heaters, as
// realized phases. Every calibrated heater not listed is driven to phase
// zero; uncalibrated heaters are left unpowered. The values route all
// bright light onto exactly the interfering paths of the swept element, so
// unpowered heaters only rescale the fringe or contribute a phase common
// to both paths.
struct Recipe {
    Port input = Port::In;
    Port output = Port::OutT;
    std::vector<std::pair<Heater, double>> settings;
};

const std::array<Recipe, kNumHeaters>& recipe_table() {
    using H = Heater;
    static const std::array<Recipe, kNumHeaters> table = [] {
        std::array<Recipe, kNumHeaters> t{};
        auto set = [&t](H h, Port in, Port out,
                        std::vector<std::pair<H, double>> s) {
            t[static_cast<int>(h)] = Recipe{in, out, std::move(s)};
        };
        // Auxiliary feed: the bottom source interferometer fringes against
        // itself, then each outer gate coupler is driven from its qubit rail.
        set(H::PhiB, Port::InPrime, Port::OutPrimeB, {});
        set(H::ThetaBy1, Port::InPrime, Port::OutPrimeB, {{H::PhiB, kPi}});
        set(H::ThetaCzb, Port::InPrime, Port::OutPrimeB,
            {{H::PhiB, kPi}, {H::ThetaBy1, kPi}});
        set(H::ThetaTy1, Port::InPrime, Port::OutPrimeT, {{H::PhiB, 0.0}});
        set(H::ThetaCzt, Port::InPrime, Port::OutPrimeT,
            {{H::PhiB, 0.0}, {H::ThetaTy1, 0.0}});
        // Main feed: the state interferometer fringes first, then the top
        // source interferometer, then each first z shifter against the
        // opposite source arm.
        set(H::PhiBeta, Port::In, Port::OutPrimeT,
            {{H::ThetaTy1, kPi}, {H::ThetaCzt, 0.0}});
        set(H::PhiT, Port::In, Port::OutPrimeT,
            {{H::PhiBeta, kPi}, {H::ThetaTy1, kPi}, {H::ThetaCzt, 0.0}});
        set(H::ThetaTz1, Port::In, Port::OutPrimeT,
            {{H::PhiBeta, kHalfPi},
             {H::PhiT, kPi},
             {H::PhiB, kPi},
             {H::ThetaTy1, kHalfPi},
             {H::ThetaCzt, 0.0}});
        set(H::ThetaBz1, Port::In, Port::OutPrimeB,
            {{H::PhiBeta, kHalfPi},
             {H::PhiT, 0.0},
             {H::PhiB, 0.0},
             {H::ThetaBy1, kHalfPi},
             {H::ThetaCzb, 0.0}});
        // Top analysis arm. The central coupler and analysis interferometer
        // fringe on their own; the z shifters fringe in the loop formed by
        // the split preparation interferometer and the analysis recombiner.
        set(H::ThetaCzc, Port::In, Port::OutT,
            {{H::PhiBeta, kPi},
             {H::PhiT, kPi},
             {H::ThetaTy1, 0.0},
             {H::ThetaCzt, kPi}});
        set(H::ThetaTy2, Port::In, Port::OutT,
            {{H::PhiBeta, kPi},
             {H::PhiT, kPi},
             {H::ThetaTy1, 0.0},
             {H::ThetaCzt, kPi},
             {H::ThetaCzc, kPi}});
        set(H::ThetaTz2, Port::In, Port::OutT,
            {{H::PhiBeta, kPi},
             {H::PhiT, kPi},
             {H::ThetaTz1, 0.0},
             {H::ThetaTy1, kHalfPi},
             {H::ThetaCzt, kPi},
             {H::ThetaCzc, kPi},
             {H::ThetaTy2, kHalfPi}});
        set(H::ThetaTz3, Port::In, Port::OutT,
            {{H::PhiBeta, kPi},
             {H::PhiT, kPi},
             {H::ThetaTz1, 0.0},
             {H::ThetaTy1, kHalfPi},
             {H::ThetaCzt, kPi},
             {H::ThetaCzc, kPi},
             {H::ThetaTy2, kHalfPi},
             {H::ThetaTz2, 0.0}});
        // Bottom analysis arm, fed through the top source output. The state
        // interferometer at pi leaves the bottom source exactly dark no
        // matter its coupler reflectivity, and the central coupler at bar
        // keeps the top rails exactly isolated, so the monitored output sees
        // a single chain regardless of element imperfections.
        set(H::ThetaBy2, Port::In, Port::OutB,
            {{H::PhiBeta, kPi},
             {H::PhiT, 0.0},
             {H::ThetaBy1, kPi},
             {H::ThetaCzc, kPi}});
        set(H::ThetaBz2, Port::In, Port::OutB,
            {{H::PhiBeta, kPi},
             {H::PhiT, 0.0},
             {H::ThetaBy1, kHalfPi},
             {H::ThetaCzb, kPi},
             {H::ThetaCzc, kPi},
             {H::ThetaBy2, kHalfPi}});
        set(H::ThetaBz3, Port::In, Port::OutB,
            {{H::PhiBeta, kPi},
             {H::PhiT, 0.0},
             {H::ThetaBy1, kHalfPi},
             {H::ThetaCzb, kPi},
             {H::ThetaCzc, kPi},
             {H::ThetaBy2, kHalfPi},
             {H::ThetaBz2, 0.0}});
        return t;
    }();
    return table;
}

// Phase each heater sits at during a sweep, as far as the calibration
// controller can tell: listed settings for calibrated heaters, zero for
// calibrated heaters that are not listed, and a neutral quarter-fringe
// value for heaters that have not been calibrated yet (their true phase
// only rescales the fringe, but a blocked probe at an exact bar or cross
// point would make the reference amplitudes vanish). The exception is the
// third z shifters: only their sum with the second z shifter on the same
// rail is observable, the calibration reports them in the gauge where they
// are zero, and they sit inside the interfering loop of the second-z
// sweeps, so the probe must use the gauge value.
std::array<double, kNumHeaters> probe_phases(
    const Recipe& recipe, const std::array<bool, kNumHeaters>& learned) {
    std::array<double, kNumHeaters> phases{};
    for (int i = 0; i < kNumHeaters; ++i) {
        const Heater h = static_cast<Heater>(i);
        const bool gauge_fixed =
            (h == Heater::ThetaTz3 || h == Heater::ThetaBz3);
        phases[i] = (learned[i] || gauge_fixed) ? 0.0 : kHalfPi;
    }
    for (const auto& [heater, value] : recipe.settings) {
        phases[heater_index(heater)] = value;
    }
    return phases;
}

// Phase of the fringe contributed by the route, so that the detected power
// is a + b*cos(swept_phase + route_phase). The swept phase enters the
// transfer matrix entry linearly as c0 + c1*exp(i*phase). Every recipe
// routes light so that c0 and c1 are single coherent paths whose phases do
// not depend on the coupler reflectivities, except the first z shifters,
// which unavoidably interfere the two state-interferometer outputs; those
// sweeps pass the estimated state coupler reflectivity here.
double route_phase(const Recipe& recipe,
                   const std::array<double, kNumHeaters>& phases,
                   Heater swept, double eta_state = 0.5) {
    const int in = port_mode(recipe.input);
    const int out = port_mode(recipe.output);
    std::array<double, kNumHeaters> probe = phases;
    probe[heater_index(swept)] = 0.0;
    const cplx amp_zero =
        bright_network(probe, eta_state, 0.5, 0.5, 0.5, 0.5)(out, in);
    probe[heater_index(swept)] = kPi;
    const cplx amp_pi =
        bright_network(probe, eta_state, 0.5, 0.5, 0.5, 0.5)(out, in);
    const cplx c0 = 0.5 * (amp_zero + amp_pi);
    const cplx c1 = 0.5 * (amp_zero - amp_pi);
    if (std::abs(c0) < 1e-9 || std::abs(c1) < 1e-9) {
        throw std::runtime_error("no fringe on the listed route for " +
                                 heater_name(swept));
    }
    return std::arg(c1) - std::arg(c0);
}

// Copy of a recipe with one setting overridden, for the disambiguation
// resweep of the first z shifters.
Recipe with_setting(Recipe recipe, Heater h, double value) {
    for (auto& [heater, stored] : recipe.settings) {
        if (heater == h) {
            stored = value;
            return recipe;
        }
    }
    recipe.settings.emplace_back(h, value);
    return recipe;
}

double setting_for(const Recipe& recipe, Heater h) {
    for (const auto& [heater, value] : recipe.settings) {
        if (heater == h) return value;
    }
    return 0.0;
}

}  // namespace

int heater_index(Heater h) {
    const int i = static_cast<int>(h);
    if (i < 0 || i >= kNumHeaters) {
        throw std::invalid_argument("heater index out of range");
    }
    return i;
}

Heater heater_from_index(int index) {
    if (index < 0 || index >= kNumHeaters) {
        throw std::invalid_argument("heater index out of range");
    }
    return static_cast<Heater>(index);
}

const std::array<Heater, kNumHeaters>& all_heaters() {
    static const std::array<Heater, kNumHeaters> heaters = [] {
        std::array<Heater, kNumHeaters> h{};
        for (int i = 0; i < kNumHeaters; ++i) h[i] = static_cast<Heater>(i);
        return h;
    }();
    return heaters;
}

std::string heater_name(Heater h) { return heater_table()[heater_index(h)].name; }

Heater heater_from_name(const std::string& name) {
    for (int i = 0; i < kNumHeaters; ++i) {
        if (name == heater_table()[i].name) return static_cast<Heater>(i);
    }
    throw std::invalid_argument("unknown heater name: " + name);
}

double HeaterModel::phase(double power_mw) const {
    return phase_offset + efficiency * power_mw;
}

void HeaterModel::validate() const {
    if (!std::isfinite(phase_offset) || !std::isfinite(efficiency)) {
        throw std::invalid_argument("heater model parameters must be finite");
    }
    if (efficiency <= 0.0) {
        throw std::invalid_argument("heater efficiency must be positive");
    }
}

int port_mode(Port p) {
    switch (p) {
        case Port::In: return 2;
        case Port::InPrime: return 4;
        case Port::OutT: return 1;
        case Port::OutB: return 3;
        case Port::OutPrimeT: return 0;
        case Port::OutPrimeB: return 5;
    }
    throw std::invalid_argument("unknown port");
}

std::string port_name(Port p) {
    switch (p) {
        case Port::In: return "in";
        case Port::InPrime: return "in_prime";
        case Port::OutT: return "out_t";
        case Port::OutB: return "out_b";
        case Port::OutPrimeT: return "out_prime_t";
        case Port::OutPrimeB: return "out_prime_b";
    }
    throw std::invalid_argument("unknown port");
}

void HiddenChip::validate() const {
    for (const auto& h : heaters) h.validate();
    for (double eta : {eta_state, eta_t_in, eta_t_out, eta_b_in, eta_b_out}) {
        if (!(eta > 0.0) || !(eta < 1.0)) {
            throw std::invalid_argument("coupler reflectivity must be in (0, 1)");
        }
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw std::invalid_argument("noise sigma must be non-negative");
    }
    if (!std::isfinite(efficiency_drift) || std::abs(efficiency_drift) >= 1.0) {
        throw std::invalid_argument("efficiency drift must be small");
    }
    for (int i = 0; i < kNumHeaters; ++i) {
        for (int j = 0; j < kNumHeaters; ++j) {
            if (!std::isfinite(crosstalk(i, j))) {
                throw std::invalid_argument("crosstalk matrix must be finite");
            }
        }
        if (crosstalk(i, i) != 0.0) {
            throw std::invalid_argument(
                "crosstalk matrix must have a zero diagonal");
        }
    }
}

HiddenChip random_hidden_chip(std::uint64_t seed, double noise_sigma,
                              double crosstalk_scale) {
    Rng rng = make_rng(derive_seed(seed, 0x63616c69u));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    HiddenChip chip;
    for (int i = 0; i < kNumHeaters; ++i) {
        chip.heaters[i].phase_offset = kTwoPi * u01(rng);
        chip.heaters[i].efficiency = 0.11 + 0.11 * u01(rng);
    }
    // Only the sum of a z2 offset and the z3 offset behind the same gate
    // coupler is observable, so truth is generated in the gauge the
    // calibration reports.
    chip.heaters[heater_index(Heater::ThetaTz3)].phase_offset = 0.0;
    chip.heaters[heater_index(Heater::ThetaBz3)].phase_offset = 0.0;
    chip.eta_state = 0.4 + 0.2 * u01(rng);
    chip.eta_t_in = 0.4 + 0.2 * u01(rng);
    chip.eta_t_out = 0.4 + 0.2 * u01(rng);
    chip.eta_b_in = 0.4 + 0.2 * u01(rng);
    chip.eta_b_out = 0.4 + 0.2 * u01(rng);
    for (int i = 0; i < kNumHeaters; ++i) {
        for (int j = 0; j < kNumHeaters; ++j) {
            const double value = u01(rng);
            if (i != j) chip.crosstalk(i, j) = crosstalk_scale * value;
        }
    }
    chip.noise_sigma = noise_sigma;
    chip.noise_seed = derive_seed(seed, 0x6e6f6973u);
    return chip;
}

Eigen::MatrixXcd bright_network(const std::array<double, kNumHeaters>& phases,
                                double eta_state, double eta_t_in,
                                double eta_t_out, double eta_b_in,
                                double eta_b_out) {
    auto p = [&phases](Heater h) { return phases[heater_index(h)]; };
    NetworkLayout net;
    net.n_modes = 6;
    auto& e = net.elements;
    e.reserve(38);
    // State interferometer splitting the feed over the two sources.
    e.push_back(coupler(eta_state, 2, 3));
    e.push_back(phase_shift(p(Heater::PhiBeta), 2));
    e.push_back(coupler(eta_state, 2, 3));
    e.push_back(crossing(1, 2));
    // Source interferometers; under bright light the spiral arms are plain
    // waveguides between the two couplers.
    e.push_back(coupler(eta_t_in, 1, 2));
    e.push_back(coupler(eta_b_in, 3, 4));
    e.push_back(phase_shift(p(Heater::PhiT), 1));
    e.push_back(phase_shift(p(Heater::PhiB), 3));
    e.push_back(coupler(eta_t_out, 1, 2));
    e.push_back(coupler(eta_b_out, 3, 4));
    e.push_back(crossing(2, 3));
    // Preparation cascade, Rz then Ry then Rz per qubit.
    e.push_back(phase_shift(p(Heater::ThetaTz1), 1));
    e.push_back(phase_shift(p(Heater::ThetaBz1), 3));
    e.push_back(coupler(0.5, 1, 2));
    e.push_back(phase_shift(p(Heater::ThetaTy1), 1));
    e.push_back(coupler(0.5, 1, 2));
    e.push_back(coupler(0.5, 3, 4));
    e.push_back(phase_shift(p(Heater::ThetaBy1), 3));
    e.push_back(coupler(0.5, 3, 4));
    e.push_back(phase_shift(p(Heater::ThetaTz2), 1));
    e.push_back(phase_shift(p(Heater::ThetaBz2), 3));
    // Gate couplers.
    e.push_back(coupler(0.5, 0, 1));
    e.push_back(phase_shift(p(Heater::ThetaCzt), 0));
    e.push_back(coupler(0.5, 0, 1));
    e.push_back(coupler(0.5, 2, 3));
    e.push_back(phase_shift(p(Heater::ThetaCzc), 2));
    e.push_back(coupler(0.5, 2, 3));
    e.push_back(coupler(0.5, 4, 5));
    e.push_back(phase_shift(p(Heater::ThetaCzb), 4));
    e.push_back(coupler(0.5, 4, 5));
    // Analysis cascade.
    e.push_back(phase_shift(p(Heater::ThetaTz3), 1));
    e.push_back(phase_shift(p(Heater::ThetaBz3), 3));
    e.push_back(coupler(0.5, 1, 2));
    e.push_back(phase_shift(p(Heater::ThetaTy2), 1));
    e.push_back(coupler(0.5, 1, 2));
    e.push_back(coupler(0.5, 3, 4));
    e.push_back(phase_shift(p(Heater::ThetaBy2), 3));
    e.push_back(coupler(0.5, 3, 4));
    return compose_network(net);
}

std::vector<SweepSample> bright_transmission(
    const HiddenChip& chip, Port input, Port output, Heater swept,
    const std::vector<double>& powers,
    const std::map<Heater, double>& fixed_powers) {
    chip.validate();
    if (powers.empty()) {
        throw std::invalid_argument("power sweep must not be empty");
    }
    const int in_mode = port_mode(input);
    const int out_mode = port_mode(output);
    const int target = heater_index(swept);

    std::array<double, kNumHeaters> applied{};
    for (const auto& [heater, power] : fixed_powers) {
        if (!std::isfinite(power) || power < 0.0) {
            throw std::invalid_argument("heater power must be non-negative");
        }
        applied[heater_index(heater)] = power;
    }

    const int n = static_cast<int>(powers.size());
    std::vector<SweepSample> samples;
    samples.reserve(powers.size());
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(powers[i]) || powers[i] < 0.0) {
            throw std::invalid_argument("sweep power must be non-negative");
        }
        applied[target] = powers[i];
        const double drift =
            1.0 + chip.efficiency_drift * (n > 1 ? double(i) / (n - 1) : 0.0);
        std::array<double, kNumHeaters> phases{};
        for (int g = 0; g < kNumHeaters; ++g) {
            double phase = chip.heaters[g].phase_offset +
                           chip.heaters[g].efficiency * drift * applied[g];
            for (int j = 0; j < kNumHeaters; ++j) {
                phase += chip.crosstalk(g, j) * applied[j];
            }
            phases[g] = phase;
        }
        const Eigen::MatrixXcd u =
            bright_network(phases, chip.eta_state, chip.eta_t_in,
                           chip.eta_t_out, chip.eta_b_in, chip.eta_b_out);
        double transmission = std::norm(u(out_mode, in_mode));
        if (chip.noise_sigma > 0.0) {
            Rng rng = make_rng(derive_seed(
                derive_seed(chip.noise_seed, 0x68656174u + std::uint32_t(target)),
                std::uint32_t(i)));
            std::normal_distribution<double> gauss(0.0, 1.0);
            transmission =
                std::max(0.0, transmission * (1.0 + chip.noise_sigma * gauss(rng)));
        }
        samples.push_back({powers[i], transmission});
    }
    return samples;
}

std::vector<double> SweepSpec::powers() const {
    validate();
    std::vector<double> p(n_points);
    for (int i = 0; i < n_points; ++i) {
        p[i] = max_power * double(i) / (n_points - 1);
    }
    return p;
}

void SweepSpec::validate() const {
    if (!(max_power > 0.0) || !std::isfinite(max_power)) {
        throw std::invalid_argument("sweep maximum power must be positive");
    }
    if (n_points < 8) {
        throw std::invalid_argument("sweep needs at least 8 points");
    }
}

FitResult fit_heater(const std::vector<SweepSample>& samples) {
    const int n = static_cast<int>(samples.size());
    if (n < 8) {
        throw std::invalid_argument("heater fit needs at least 8 samples");
    }
    std::vector<double> power(n), trans(n);
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(samples[i].power) ||
            !std::isfinite(samples[i].transmission)) {
            throw std::invalid_argument("heater fit samples must be finite");
        }
        power[i] = samples[i].power;
        trans[i] = samples[i].transmission;
    }
    const double p_min = *std::min_element(power.begin(), power.end());
    const double p_max = *std::max_element(power.begin(), power.end());
    const double span = p_max - p_min;
    if (!(span > 0.0)) {
        throw std::invalid_argument("heater fit needs a nonzero power span");
    }

    double t_mean = 0.0;
    for (double t : trans) t_mean += t;
    t_mean /= n;
    double t_var = 0.0;
    for (double t : trans) t_var += (t - t_mean) * (t - t_mean);
    if (std::sqrt(t_var / n) <= 1e-12 * std::max(1.0, std::abs(t_mean))) {
        throw std::runtime_error("flat response: no fringe visible");
    }

    std::vector<double> sorted = power;
    std::sort(sorted.begin(), sorted.end());
    double gap_min = span;
    for (int i = 1; i < n; ++i) {
        const double gap = sorted[i] - sorted[i - 1];
        if (gap > 0.0) gap_min = std::min(gap_min, gap);
    }

    // Residual sum of squares after projecting out the mean and quadrature
    // amplitudes at angular frequency w.
    auto rss_at = [&](double w, double* a_out = nullptr, double* c_out = nullptr,
                      double* s_out = nullptr) {
        Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
        Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
        double stt = 0.0;
        for (int i = 0; i < n; ++i) {
            const double c = std::cos(w * power[i]);
            const double s = std::sin(w * power[i]);
            const Eigen::Vector3d row(1.0, c, s);
            m += row * row.transpose();
            rhs += trans[i] * row;
            stt += trans[i] * trans[i];
        }
        const Eigen::Vector3d sol = m.ldlt().solve(rhs);
        if (a_out) *a_out = sol(0);
        if (c_out) *c_out = sol(1);
        if (s_out) *s_out = sol(2);
        return std::max(0.0, stt - sol.dot(rhs));
    };

    // Frequencies below half a fringe over the span are kept in the scan so
    // an under-spanned sweep is detected rather than projected onto the
    // admissible band.
    const double w_lo = 0.3 * kPi / span;
    const double w_hi = std::max(kPi / gap_min, 2.0 * w_lo);
    const int n_grid = 3000;
    double best_w = w_lo;
    double best_rss = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= n_grid; ++k) {
        const double w = w_lo + (w_hi - w_lo) * double(k) / n_grid;
        const double r = rss_at(w);
        if (r < best_rss) {
            best_rss = r;
            best_w = w;
        }
    }
    const double step = (w_hi - w_lo) / n_grid;
    double lo = std::max(w_lo, best_w - 2.0 * step);
    double hi = std::min(w_hi, best_w + 2.0 * step);
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - golden * (hi - lo);
    double x2 = lo + golden * (hi - lo);
    double f1 = rss_at(x1);
    double f2 = rss_at(x2);
    while (hi - lo > 1e-12 * std::max(1.0, hi)) {
        if (f1 < f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - golden * (hi - lo);
            f1 = rss_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + golden * (hi - lo);
            f2 = rss_at(x2);
        }
    }
    const double w = 0.5 * (lo + hi);
    double a = 0.0, qc = 0.0, qs = 0.0;
    const double rss = rss_at(w, &a, &qc, &qs);
    const double b = std::hypot(qc, qs);
    const double phase = wrap_2pi(std::atan2(-qs, qc));

    if (b <= 1e-9 * std::max(1.0, std::abs(a))) {
        throw std::runtime_error("flat response: no fringe visible");
    }
    if (w * span < kPi) {
        throw std::runtime_error(
            "power sweep spans less than half a fringe period");
    }

    FitResult result;
    result.model.phase_offset = phase;
    result.model.efficiency = w;
    result.mean = a;
    result.amplitude = b;
    result.residual_rms = std::sqrt(rss / n);

    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    for (int i = 0; i < n; ++i) {
        const double arg = phase + w * power[i];
        const Eigen::Vector4d row(1.0, std::cos(arg), -b * std::sin(arg),
                                  -b * std::sin(arg) * power[i]);
        jtj += row * row.transpose();
    }
    const double dof = std::max(1, n - 4);
    const double sigma2 = rss / dof;
    const Eigen::Matrix4d cov =
        sigma2 * jtj.completeOrthogonalDecomposition().pseudoInverse();
    for (int k = 0; k < 4; ++k) result.covariance[k] = cov(k, k);
    return result;
}

CalibrationPlan default_plan() {
    using H = Heater;
    CalibrationPlan plan;
    plan.push_back({Port::InPrime,
                    {Port::OutPrimeT, Port::OutPrimeB},
                    {H::PhiB, H::ThetaBy1, H::ThetaCzb, H::ThetaTy1, H::ThetaCzt}});
    plan.push_back({Port::In,
                    {Port::OutPrimeT, Port::OutPrimeB},
                    {H::PhiBeta, H::PhiT, H::ThetaTz1, H::ThetaBz1}});
    plan.push_back({Port::In,
                    {Port::OutT},
                    {H::ThetaCzc, H::ThetaTy2, H::ThetaTz2, H::ThetaTz3}});
    plan.push_back({Port::In,
                    {Port::OutB},
                    {H::ThetaBy2, H::ThetaBz2, H::ThetaBz3}});
    return plan;
}

void validate_plan(const CalibrationPlan& plan) {
    if (plan.empty()) {
        throw std::invalid_argument("calibration plan is empty");
    }
    std::array<bool, kNumHeaters> learned{};
    int count = 0;
    for (const auto& stage : plan) {
        if (stage.outputs.empty()) {
            throw std::invalid_argument("calibration stage monitors no outputs");
        }
        if (stage.heaters.empty()) {
            throw std::invalid_argument("calibration stage lists no heaters");
        }
        for (Heater h : stage.heaters) {
            const int idx = heater_index(h);
            if (learned[idx]) {
                throw std::invalid_argument("heater listed twice in plan: " +
                                            heater_name(h));
            }
            const Recipe& recipe = recipe_table()[idx];
            if (recipe.input != stage.input) {
                throw std::invalid_argument(
                    heater_name(h) + " is not reachable from input " +
                    port_name(stage.input));
            }
            if (std::find(stage.outputs.begin(), stage.outputs.end(),
                          recipe.output) == stage.outputs.end()) {
                throw std::invalid_argument(
                    heater_name(h) + " fringes on " + port_name(recipe.output) +
                    " which the stage does not monitor");
            }
            for (const auto& [needed, value] : recipe.settings) {
                (void)value;
                if (!learned[heater_index(needed)]) {
                    throw std::invalid_argument(
                        heater_name(h) + " must be calibrated after " +
                        heater_name(needed));
                }
            }
            learned[idx] = true;
            ++count;
        }
    }
    if (count != kNumHeaters) {
        throw std::invalid_argument("calibration plan does not cover all heaters");
    }
}

CalibrationReport calibrate_chip(const HiddenChip& chip,
                                 const CalibrationPlan& plan,
                                 const CalibrateOptions& options) {
    chip.validate();
    validate_plan(plan);
    const std::vector<double> powers = options.sweep.powers();

    std::array<bool, kNumHeaters> learned{};
    std::array<HeaterModel, kNumHeaters> models{};
    CalibrationReport report;
    report.stage_residual_rms.reserve(plan.size());

    // The two coupler reflectivities compatible with the state
    // interferometer fringe contrast, and the one selected by resweeping a
    // first z shifter at a second state phase.
    double eta_candidate = 0.5;
    bool eta_resolved = false;
    double eta_hat = 0.5;

    for (const auto& stage : plan) {
        double residual_sq = 0.0;
        int n_fitted = 0;
        for (Heater h : stage.heaters) {
            const int idx = heater_index(h);
            if (options.skip_z3 &&
                (h == Heater::ThetaTz3 || h == Heater::ThetaBz3)) {
                // The shortcut of trusting the gauge: the offset is taken as
                // zero and the efficiency at its design value.
                models[idx] = HeaterModel{};
                models[idx].phase_offset = 0.0;
                learned[idx] = true;
                HeaterReport& entry = report.heaters[idx];
                entry.heater = h;
                entry.model = models[idx];
                continue;
            }
            const Recipe& recipe = recipe_table()[idx];
            auto sweep_and_fit = [&](const Recipe& r) {
                std::map<Heater, double> fixed;
                for (int g = 0; g < kNumHeaters; ++g) {
                    if (!learned[g] || g == idx) continue;
                    const double intended =
                        setting_for(r, heater_from_index(g));
                    const double phase_drive =
                        wrap_2pi(intended - models[g].phase_offset);
                    fixed[heater_from_index(g)] =
                        phase_drive / models[g].efficiency;
                }
                const std::vector<SweepSample> samples = bright_transmission(
                    chip, r.input, r.output, h, powers, fixed);
                try {
                    return fit_heater(samples);
                } catch (const std::runtime_error& err) {
                    throw std::runtime_error("calibration of " +
                                             heater_name(h) +
                                             " failed: " + err.what());
                }
            };
            const FitResult fit = sweep_and_fit(recipe);

            const bool first_z =
                (h == Heater::ThetaTz1 || h == Heater::ThetaBz1);
            double delta;
            if (first_z && !eta_resolved) {
                // The fringe compares light from the two outputs of the
                // state interferometer, so its phase shifts with the coupler
                // reflectivity. The contrast pins the reflectivity down to
                // two roots; a resweep at a second state phase moves the
                // measured fringe phase by a root-dependent amount.
                const Recipe shifted =
                    with_setting(recipe, Heater::PhiBeta, kDisambigPhiBeta);
                const FitResult refit = sweep_and_fit(shifted);
                const double measured = wrap_2pi(refit.model.phase_offset -
                                                 fit.model.phase_offset);
                double best_err = std::numeric_limits<double>::infinity();
                for (double candidate : {eta_candidate, 1.0 - eta_candidate}) {
                    const double d_base = route_phase(
                        recipe, probe_phases(recipe, learned), h, candidate);
                    const double d_shift = route_phase(
                        shifted, probe_phases(shifted, learned), h, candidate);
                    const double err =
                        angular_distance(measured, d_shift - d_base);
                    if (err < best_err) {
                        best_err = err;
                        eta_hat = candidate;
                    }
                }
                eta_resolved = true;
                delta = route_phase(recipe, probe_phases(recipe, learned), h,
                                    eta_hat);
            } else if (first_z) {
                delta = route_phase(recipe, probe_phases(recipe, learned), h,
                                    eta_hat);
            } else {
                delta = route_phase(recipe, probe_phases(recipe, learned), h);
            }
            models[idx].phase_offset = wrap_2pi(fit.model.phase_offset - delta);
            models[idx].efficiency = fit.model.efficiency;
            learned[idx] = true;

            if (h == Heater::PhiBeta) {
                // Fringe contrast of the state interferometer itself. With
                // reflectivity eta the monitored output carries
                // eta^2 + (1-eta)^2 + 2 eta (1-eta) cos(phase), so the
                // contrast fixes eta (1-eta).
                const double contrast =
                    fit.amplitude / std::max(fit.mean, 1e-300);
                const double q = std::clamp(
                    contrast / (2.0 * (1.0 + contrast)), 0.0, 0.25);
                eta_candidate = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * q));
            }

            HeaterReport& entry = report.heaters[idx];
            entry.heater = h;
            entry.model = models[idx];
            entry.route_phase = delta;
            entry.fringe_mean = fit.mean;
            entry.fringe_amplitude = fit.amplitude;
            entry.residual_rms = fit.residual_rms;
            entry.covariance = fit.covariance;
            residual_sq += fit.residual_rms * fit.residual_rms;
            ++n_fitted;
        }
        report.stage_residual_rms.push_back(
            n_fitted > 0 ? std::sqrt(residual_sq / n_fitted) : 0.0);
    }
    report.eta_state_estimate = eta_hat;
    return report;
}

RecoveryErrors recovery_errors(const HiddenChip& chip,
                               const CalibrationReport& report) {
    RecoveryErrors errors;
    for (int i = 0; i < kNumHeaters; ++i) {
        const HeaterModel& truth = chip.heaters[i];
        const HeaterModel& found = report.heaters[i].model;
        errors.max_offset_error =
            std::max(errors.max_offset_error,
                     angular_distance(truth.phase_offset, found.phase_offset));
        errors.max_efficiency_rel_error =
            std::max(errors.max_efficiency_rel_error,
                     std::abs(found.efficiency - truth.efficiency) /
                         truth.efficiency);
    }
    return errors;
}

std::string CalibrationReport::to_text() const {
    std::ostringstream out;
    out << "heater        offset        efficiency    amplitude     residual\n";
    char line[160];
    for (const auto& entry : heaters) {
        std::snprintf(line, sizeof(line), "%-12s  %12.9f  %12.9f  %12.9f  %12.3e\n",
                      heater_name(entry.heater).c_str(),
                      entry.model.phase_offset, entry.model.efficiency,
                      entry.fringe_amplitude, entry.residual_rms);
        out << line;
    }
    for (std::size_t i = 0; i < stage_residual_rms.size(); ++i) {
        std::snprintf(line, sizeof(line), "stage %zu residual rms %.3e\n", i + 1,
                      stage_residual_rms[i]);
        out << line;
    }
    return out.str();
}

std::string plan_to_text(const CalibrationPlan& plan) {
    std::ostringstream out;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto& stage = plan[i];
        out << "stage " << (i + 1) << ": " << port_name(stage.input) << " ->";
        for (Port p : stage.outputs) out << " " << port_name(p);
        out << ":";
        for (Heater h : stage.heaters) out << " " << heater_name(h);
        out << "\n";
    }
    return out.str();
}

}  // namespace qpc
