#include "qpc/tomography.hpp"

#include "qpc/metrics.hpp"
#include "qpc/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qpc {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kSaltSimulate = 0x73696d75ULL;
constexpr std::uint64_t kSaltBootstrap = 0x626f6f74ULL;

int setting_index(const TomoSetting& s) {
    return 4 * static_cast<int>(s.t) + static_cast<int>(s.b);
}

void require_complete(const std::vector<CountRecord>& records) {
    std::array<int, 16> seen{};
    for (const auto& r : records) ++seen[static_cast<size_t>(setting_index(r.setting))];
    for (int k = 0; k < 16; ++k) {
        if (seen[static_cast<size_t>(k)] != 1) {
            throw std::invalid_argument("reconstruction needs exactly one record per setting");
        }
    }
}

Eigen::Vector4cd setting_state(const TomoSetting& s) {
    const Eigen::Vector2cd t = analysis_state(s.t);
    const Eigen::Vector2cd b = analysis_state(s.b);
    Eigen::Vector4cd chi;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) chi(2 * i + j) = t(i) * b(j);
    return chi;
}

// parameter index -> (row, col, direction) of the lower-triangular factor
struct ParamSlot {
    int row;
    int col;
    cplx dir;
};

const std::array<ParamSlot, 16>& param_slots() {
    static const std::array<ParamSlot, 16> slots = [] {
        std::array<ParamSlot, 16> s{};
        int k = 0;
        for (int d = 0; d < 4; ++d) s[static_cast<size_t>(k++)] = {d, d, cplx(1.0, 0.0)};
        for (int r = 1; r < 4; ++r) {
            for (int c = 0; c < r; ++c) {
                s[static_cast<size_t>(k++)] = {r, c, cplx(1.0, 0.0)};
                s[static_cast<size_t>(k++)] = {r, c, cplx(0.0, 1.0)};
            }
        }
        return s;
    }();
    return slots;
}

Eigen::Matrix4cd factor_from_params(const Eigen::VectorXd& params) {
    if (params.size() != 16) {
        throw std::invalid_argument("expected 16 parameters");
    }
    Eigen::Matrix4cd t = Eigen::Matrix4cd::Zero();
    const auto& slots = param_slots();
    for (int k = 0; k < 16; ++k) {
        const auto& s = slots[static_cast<size_t>(k)];
        t(s.row, s.col) += params(k) * s.dir;
    }
    return t;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

bool all_digits(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

} // namespace

std::string to_string(BasisSetting s) {
    switch (s) {
        case BasisSetting::Z0: return "Z0";
        case BasisSetting::Z1: return "Z1";
        case BasisSetting::XPlus: return "X+";
        case BasisSetting::YPlus: return "Y+";
    }
    throw std::logic_error("unreachable");
}

BasisSetting basis_setting_from_string(const std::string& token) {
    if (token == "Z0") return BasisSetting::Z0;
    if (token == "Z1") return BasisSetting::Z1;
    if (token == "X+") return BasisSetting::XPlus;
    if (token == "Y+") return BasisSetting::YPlus;
    throw std::invalid_argument("unknown basis setting: " + token);
}

AnalysisAngles analysis_angles(BasisSetting s) {
    switch (s) {
        case BasisSetting::Z0: return {0.0, 0.0};
        case BasisSetting::Z1: return {kPi, 0.0};
        case BasisSetting::XPlus: return {kPi / 2.0, kPi};
        case BasisSetting::YPlus: return {kPi / 2.0, kPi / 2.0};
    }
    throw std::logic_error("unreachable");
}

Eigen::Vector2cd analysis_state(BasisSetting s) {
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    Eigen::Vector2cd v;
    switch (s) {
        case BasisSetting::Z0: v << 1.0, 0.0; break;
        case BasisSetting::Z1: v << 0.0, 1.0; break;
        case BasisSetting::XPlus: v << inv_sqrt2, inv_sqrt2; break;
        case BasisSetting::YPlus: v << inv_sqrt2, cplx(0.0, inv_sqrt2); break;
    }
    return v;
}

std::vector<TomoSetting> tomography_settings() {
    const std::array<BasisSetting, 4> all{BasisSetting::Z0, BasisSetting::Z1,
                                          BasisSetting::XPlus, BasisSetting::YPlus};
    std::vector<TomoSetting> out;
    out.reserve(16);
    for (BasisSetting t : all)
        for (BasisSetting b : all) out.push_back({t, b});
    return out;
}

double setting_probability(const Eigen::Matrix4cd& rho, const TomoSetting& s) {
    const Eigen::Vector4cd chi = setting_state(s);
    return (chi.adjoint() * rho * chi)(0).real();
}

void validate(const TomoExperiment& e) {
    if (!(std::isfinite(e.integration_time) && e.integration_time > 0.0)) {
        throw std::invalid_argument("integration_time must be positive");
    }
    if (!(std::isfinite(e.flux) && e.flux > 0.0)) {
        throw std::invalid_argument("flux must be positive");
    }
    if (!(std::isfinite(e.accidental_rate) && e.accidental_rate >= 0.0)) {
        throw std::invalid_argument("accidental_rate must be nonnegative");
    }
}

double expected_counts(const Eigen::Matrix4cd& rho, const TomoSetting& s,
                       const TomoExperiment& e) {
    validate(e);
    const double p = std::max(0.0, setting_probability(rho, s));
    return e.integration_time * (e.flux * p + e.accidental_rate);
}

std::vector<CountRecord> simulate_counts(const Eigen::Matrix4cd& rho, const TomoExperiment& e) {
    validate(e);
    const std::uint64_t base = derive_seed(e.seed, kSaltSimulate);
    const auto settings = tomography_settings();
    std::vector<CountRecord> out;
    out.reserve(settings.size());
    for (size_t k = 0; k < settings.size(); ++k) {
        CountRecord rec;
        rec.setting = settings[k];
        rec.expected = expected_counts(rho, settings[k], e);
        if (rec.expected > 0.0) {
            Rng rng = make_rng(derive_seed(base, static_cast<std::uint64_t>(k)));
            std::poisson_distribution<std::uint64_t> poisson(rec.expected);
            rec.counts = poisson(rng);
        }
        out.push_back(rec);
    }
    return out;
}

std::string serialize_counts(const std::vector<CountRecord>& records, const TomoExperiment& e) {
    std::ostringstream out;
    out << "# integration_time " << format_double(e.integration_time) << "\n";
    out << "# flux " << format_double(e.flux) << "\n";
    out << "# accidental_rate " << format_double(e.accidental_rate) << "\n";
    out << "# seed " << e.seed << "\n";
    for (const auto& r : records) {
        out << to_string(r.setting.t) << " " << to_string(r.setting.b) << " " << r.counts << "\n";
    }
    return out.str();
}

ParsedCounts parse_counts(std::istream& in) {
    ParsedCounts parsed;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream iss(line);
        std::string first;
        if (!(iss >> first)) continue;  // blank line
        if (first == "#" || first.front() == '#') {
            std::string key;
            if (first == "#") {
                if (!(iss >> key)) continue;
            } else {
                key = first.substr(1);
            }
            std::string value;
            if (!(iss >> value)) continue;
            try {
                if (key == "integration_time") parsed.experiment.integration_time = std::stod(value);
                else if (key == "flux") parsed.experiment.flux = std::stod(value);
                else if (key == "accidental_rate") parsed.experiment.accidental_rate = std::stod(value);
                else if (key == "seed") parsed.experiment.seed = std::stoull(value);
                // other comment lines pass through silently
            } catch (const std::exception&) {
                throw std::invalid_argument("line " + std::to_string(line_no) +
                                            ": bad header value for " + key);
            }
            continue;
        }
        std::string tok_b, tok_counts, extra;
        if (!(iss >> tok_b >> tok_counts) || (iss >> extra)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": expected 'T B counts'");
        }
        if (!all_digits(tok_counts)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": counts must be a nonnegative integer");
        }
        CountRecord rec;
        try {
            rec.setting.t = basis_setting_from_string(first);
            rec.setting.b = basis_setting_from_string(tok_b);
        } catch (const std::invalid_argument& err) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": " + err.what());
        }
        rec.counts = std::stoull(tok_counts);
        parsed.records.push_back(rec);
    }
    validate(parsed.experiment);
    return parsed;
}

LinearResult linear_reconstruct(const std::vector<CountRecord>& records,
                                const TomoExperiment& e) {
    validate(e);
    require_complete(records);

    const std::array<Eigen::Matrix2cd, 4> sigma{Eigen::Matrix2cd::Identity(), pauli_x(),
                                                pauli_y(), pauli_z()};
    std::array<Eigen::Matrix4cd, 16> basis;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            basis[static_cast<size_t>(4 * i + j)] =
                0.5 * kron2(sigma[static_cast<size_t>(i)], sigma[static_cast<size_t>(j)]);

    Eigen::Matrix<double, 16, 16> m;
    Eigen::Matrix<double, 16, 1> p_hat;
    for (const auto& r : records) {
        const int row = setting_index(r.setting);
        const Eigen::Vector4cd chi = setting_state(r.setting);
        for (int col = 0; col < 16; ++col) {
            m(row, col) = (chi.adjoint() * basis[static_cast<size_t>(col)] * chi)(0).real();
        }
        const double rate = static_cast<double>(r.counts) / e.integration_time;
        p_hat(row) = (rate - e.accidental_rate) / e.flux;
    }

    const Eigen::Matrix<double, 16, 1> c = m.colPivHouseholderQr().solve(p_hat);
    Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
    for (int k = 0; k < 16; ++k) rho += c(k) * basis[static_cast<size_t>(k)];

    const double tr = rho.trace().real();
    if (!(std::isfinite(tr)) || std::abs(tr) < 1e-12) {
        throw std::runtime_error("linear reconstruction produced a traceless estimate");
    }
    rho /= tr;

    LinearResult out;
    out.rho = rho;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()));
    out.physical = es.eigenvalues().minCoeff() >= -1e-9;
    return out;
}

double poisson_log_likelihood(const Eigen::Matrix4cd& rho,
                              const std::vector<CountRecord>& records,
                              const TomoExperiment& e) {
    validate(e);
    double ll = 0.0;
    for (const auto& r : records) {
        const double p = setting_probability(rho, r.setting);
        double mu = e.integration_time * (e.flux * p + e.accidental_rate);
        mu = std::max(mu, 1e-300);
        const double n = static_cast<double>(r.counts);
        if (n > 0.0) ll += n * std::log(mu);
        ll -= mu;
    }
    return ll;
}

Eigen::Matrix4cd rho_from_params(const Eigen::VectorXd& params) {
    const Eigen::Matrix4cd t = factor_from_params(params);
    const double z = params.squaredNorm();
    if (!(z > 0.0)) {
        throw std::invalid_argument("parameter vector must be nonzero");
    }
    return (t * t.adjoint()) / z;
}

Eigen::VectorXd params_from_rho(const Eigen::Matrix4cd& rho) {
    const Eigen::Matrix4cd herm = 0.5 * (rho + rho.adjoint());
    Eigen::Matrix4cd shifted;
    Eigen::LLT<Eigen::Matrix4cd> llt;
    double eps = 1e-12;
    for (;; eps *= 100.0) {
        shifted = herm + eps * Eigen::Matrix4cd::Identity();
        llt.compute(shifted);
        if (llt.info() == Eigen::Success) break;
        if (eps > 1e-4) {
            throw std::invalid_argument("matrix is too far from positive semidefinite");
        }
    }
    const Eigen::Matrix4cd l = llt.matrixL();
    Eigen::VectorXd params(16);
    const auto& slots = param_slots();
    for (int k = 0; k < 16; ++k) {
        const auto& s = slots[static_cast<size_t>(k)];
        const cplx v = l(s.row, s.col);
        params(k) = (s.dir.real() != 0.0) ? v.real() : v.imag();
    }
    return params;
}

double ml_objective(const Eigen::VectorXd& params, const std::vector<CountRecord>& records,
                    const TomoExperiment& e) {
    return poisson_log_likelihood(rho_from_params(params), records, e);
}

Eigen::VectorXd ml_gradient(const Eigen::VectorXd& params,
                            const std::vector<CountRecord>& records, const TomoExperiment& e) {
    validate(e);
    const Eigen::Matrix4cd t = factor_from_params(params);
    const double z = params.squaredNorm();
    if (!(z > 0.0)) {
        throw std::invalid_argument("parameter vector must be nonzero");
    }

    const size_t n_rec = records.size();
    std::vector<Eigen::Vector4cd> chi(n_rec), w(n_rec);
    std::vector<double> q(n_rec), coeff(n_rec);
    for (size_t s = 0; s < n_rec; ++s) {
        chi[s] = setting_state(records[s].setting);
        w[s] = t.adjoint() * chi[s];
        q[s] = w[s].squaredNorm();
        double mu = e.integration_time * (e.flux * q[s] / z + e.accidental_rate);
        mu = std::max(mu, 1e-300);
        coeff[s] = (static_cast<double>(records[s].counts) / mu - 1.0) * e.integration_time *
                   e.flux;
    }

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(16);
    const auto& slots = param_slots();
    for (int k = 0; k < 16; ++k) {
        const auto& slot = slots[static_cast<size_t>(k)];
        const double dz = 2.0 * (std::conj(t(slot.row, slot.col)) * slot.dir).real();
        double g = 0.0;
        for (size_t s = 0; s < n_rec; ++s) {
            const double dq = 2.0 * (slot.dir * std::conj(chi[s](slot.row)) * w[s](slot.col)).real();
            const double dp = (dq - (q[s] / z) * dz) / z;
            g += coeff[s] * dp;
        }
        grad(k) = g;
    }
    return grad;
}

MlResult ml_reconstruct(const std::vector<CountRecord>& records, const TomoExperiment& e,
                        const MlOptions& options) {
    validate(e);
    require_complete(records);
    if (options.max_iterations < 1 || !(options.min_improvement >= 0.0)) {
        throw std::invalid_argument("bad optimizer options");
    }

    const LinearResult lin = linear_reconstruct(records, e);
    const Eigen::Matrix4cd start = 0.999999 * project_physical(lin.rho) +
                                   0.000001 * Eigen::Matrix4cd::Identity() / 4.0;
    Eigen::VectorXd params = params_from_rho(start);

    MlResult result;
    double ll = ml_objective(params, records, e);
    double alpha = 0.0;
    bool converged = false;
    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const Eigen::VectorXd g = ml_gradient(params, records, e);
        const double gnorm = g.norm();
        if (gnorm == 0.0) {
            converged = true;
            break;
        }
        if (alpha <= 0.0) alpha = 0.1 / gnorm;

        double step = alpha;
        double improvement = 0.0;
        for (int bt = 0; bt < 80; ++bt) {
            const Eigen::VectorXd cand = params + step * g;
            const double cand_ll = ml_objective(cand, records, e);
            if (cand_ll > ll) {
                params = cand;
                improvement = cand_ll - ll;
                ll = cand_ll;
                alpha = step * 2.0;
                break;
            }
            step *= 0.5;
        }
        if (improvement < options.min_improvement) {
            converged = true;
            ++iter;
            break;
        }
    }

    result.rho = rho_from_params(params);
    result.log_likelihood = ll;
    result.iterations = iter;
    result.converged = converged;
    return result;
}

SampleSummary summarize(const std::vector<double>& values) {
    SampleSummary s;
    s.n_samples = static_cast<int>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std_dev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

MetricSamples bootstrap_metrics(const std::vector<CountRecord>& records,
                                const TomoExperiment& e, int n_samples,
                                const std::optional<Eigen::Vector4cd>& target, int n_threads) {
    validate(e);
    require_complete(records);
    if (n_samples < 1) {
        throw std::invalid_argument("need at least one bootstrap sample");
    }

    const Eigen::Matrix4cd point = ml_reconstruct(records, e).rho;
    const std::uint64_t base = derive_seed(e.seed, kSaltBootstrap);

    MetricSamples samples;
    samples.purity.resize(static_cast<size_t>(n_samples));
    samples.schmidt_number.resize(static_cast<size_t>(n_samples));
    samples.chsh.resize(static_cast<size_t>(n_samples));
    samples.fidelity.resize(static_cast<size_t>(n_samples));

    const auto run_one = [&](int r) {
        const std::uint64_t rep_seed = derive_seed(base, static_cast<std::uint64_t>(r));
        std::vector<CountRecord> resampled = records;
        for (size_t k = 0; k < resampled.size(); ++k) {
            if (resampled[k].counts == 0) continue;
            Rng rng = make_rng(derive_seed(rep_seed, static_cast<std::uint64_t>(k)));
            std::poisson_distribution<std::uint64_t> poisson(
                static_cast<double>(resampled[k].counts));
            resampled[k].counts = poisson(rng);
        }
        const Eigen::Matrix4cd rho = ml_reconstruct(resampled, e).rho;
        const auto idx = static_cast<size_t>(r);
        samples.purity[idx] = purity(rho);
        samples.schmidt_number[idx] = schmidt_number(rho);
        samples.chsh[idx] = chsh_horodecki(rho);
        samples.fidelity[idx] = target ? fidelity_to_pure(rho, *target) : fidelity(rho, point);
    };

    int workers = n_threads;
    if (workers <= 0) {
        workers = static_cast<int>(std::thread::hardware_concurrency());
        if (workers < 1) workers = 1;
        if (workers > 32) workers = 32;
    }
    workers = std::min(workers, n_samples);

    if (workers == 1) {
        for (int r = 0; r < n_samples; ++r) run_one(r);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&] {
                for (int r = next.fetch_add(1); r < n_samples; r = next.fetch_add(1)) {
                    run_one(r);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return samples;
}

} // namespace qpc
