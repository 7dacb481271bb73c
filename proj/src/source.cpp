#include "qpc/source.hpp"

#include "qpc/gate.hpp"

#include <cmath>
#include <stdexcept>

namespace qpc {

namespace {

void check_eta(double eta, const char* name) {
    if (!(eta >= 0.0 && eta <= 1.0))
        throw std::invalid_argument(std::string("SourceConfig: ") + name + " must lie in [0, 1]");
}

void check_finite(double v, const char* name) {
    if (!std::isfinite(v))
        throw std::invalid_argument(std::string("SourceConfig: ") + name + " must be finite");
}

} // namespace

void validate(const SourceConfig& cfg) {
    check_finite(cfg.phi_beta, "phi_beta");
    check_finite(cfg.phi_t, "phi_t");
    check_finite(cfg.phi_b, "phi_b");
    check_finite(cfg.theta_cap, "theta_cap");
    check_eta(cfg.eta_state, "eta_state");
    check_eta(cfg.eta_t_in, "eta_t_in");
    check_eta(cfg.eta_t_out, "eta_t_out");
    check_eta(cfg.eta_b_in, "eta_b_in");
    check_eta(cfg.eta_b_out, "eta_b_out");
}

double energy_mismatch(const WavelengthTriple& w) {
    if (!(w.pump_nm > 0.0 && w.signal_nm > 0.0 && w.idler_nm > 0.0))
        throw std::invalid_argument("WavelengthTriple: wavelengths must be positive");
    return std::abs(2.0 / w.pump_nm - 1.0 / w.signal_nm - 1.0 / w.idler_nm);
}

void validate_wavelengths(const WavelengthTriple& w, double tol) {
    if (energy_mismatch(w) > tol)
        throw std::invalid_argument("WavelengthTriple: pump/signal/idler violate energy conservation");
}

double pair_rate(const RateModel& m, double pump_mw) {
    if (pump_mw < 0.0)
        throw std::invalid_argument("pair_rate: negative pump power");
    if (m.brightness_pairs_per_s_mw2 < 0.0 || m.facet_loss_db < 0.0)
        throw std::invalid_argument("pair_rate: negative brightness or loss");
    if (!(m.detector_efficiency >= 0.0 && m.detector_efficiency <= 1.0))
        throw std::invalid_argument("pair_rate: detector efficiency must lie in [0, 1]");
    const double per_photon = std::pow(10.0, -(m.facet_loss_db / 2.0) / 10.0);
    return m.brightness_pairs_per_s_mw2 * pump_mw * pump_mw * per_photon * per_photon *
           m.detector_efficiency * m.detector_efficiency;
}

Eigen::Vector4cd pump_amplitudes(const SourceConfig& cfg) {
    validate(cfg);
    // state-control MZI, pump into its upper port; upper output feeds the top ring
    NetworkLayout state_mzi;
    state_mzi.n_modes = 2;
    state_mzi.elements = {coupler(cfg.eta_state, 0, 1), phase_shift(cfg.phi_beta, 0),
                          coupler(cfg.eta_state, 0, 1)};
    ModeUnitary u = compose_network(state_mzi);
    const cplx feed_top = u(0, 0);
    const cplx feed_bottom = u(1, 0);

    const cplx i1(0.0, 1.0);
    Eigen::Vector4cd pump;
    pump(0) = std::sqrt(cfg.eta_t_in) * feed_top;
    pump(1) = i1 * std::sqrt(1.0 - cfg.eta_t_in) * feed_top;
    pump(2) = std::sqrt(cfg.eta_b_in) * feed_bottom;
    pump(3) = i1 * std::sqrt(1.0 - cfg.eta_b_in) * feed_bottom;
    return pump;
}

Eigen::Vector4cd generation_amplitudes(const Eigen::Vector4cd& pump) {
    Eigen::Vector4cd xi;
    for (int k = 0; k < 4; ++k)
        xi(k) = pump(k) * pump(k);
    const double norm = xi.norm();
    if (norm <= 0.0)
        throw std::invalid_argument("generation_amplitudes: no pump reaches any source");
    return xi / norm;
}

double balance(double phi_beta) {
    const double s2 = std::pow(std::sin(phi_beta / 2.0), 2);
    const double c2 = std::pow(std::cos(phi_beta / 2.0), 2);
    const double denom = std::sqrt(s2 * s2 + c2 * c2);
    if (denom <= 0.0)
        throw std::invalid_argument("balance: degenerate splitting");
    return std::pow(s2 / denom, 2);
}

NetworkLayout source_network(const SourceConfig& cfg) {
    validate(cfg);
    NetworkLayout net;
    net.n_modes = kNumModes;
    net.elements = {
        phase_shift(cfg.phi_t, 1),
        phase_shift(cfg.phi_b, 3),
        coupler(cfg.eta_t_out, 1, 2),
        coupler(cfg.eta_b_out, 3, 4),
        phase_shift(cfg.theta_cap / 2.0, 3),
        phase_shift(cfg.theta_cap / 2.0, 4),
        crossing(2, 3),
    };
    return net;
}

Eigen::MatrixXcd propagate_pair(const Eigen::VectorXcd& xi_modes, const ModeUnitary& u) {
    if (u.rows() != u.cols() || u.rows() != xi_modes.size())
        throw std::invalid_argument("propagate_pair: dimension mismatch");
    Eigen::MatrixXcd a = u * xi_modes.asDiagonal() * u.transpose();
    const double norm = a.norm();
    if (norm <= 0.0)
        throw std::invalid_argument("propagate_pair: vanishing pair amplitude");
    return a / norm;
}

Eigen::VectorXcd embed_spiral_amplitudes(const Eigen::Vector4cd& xi) {
    Eigen::VectorXcd full = Eigen::VectorXcd::Zero(kNumModes);
    for (int k = 0; k < 4; ++k)
        full(kSpiralModes[k]) = xi(k);
    return full;
}

Eigen::Vector4cd source_qubit_state(const SourceConfig& cfg) {
    const Eigen::Vector4cd xi = generation_amplitudes(pump_amplitudes(cfg));
    const ModeUnitary u = compose_network(source_network(cfg));
    const Eigen::MatrixXcd a = propagate_pair(embed_spiral_amplitudes(xi), u);
    const PostselectionResult post = postselect_qubits(a, ModeMap{});
    if (post.success_probability < 1e-12)
        throw std::runtime_error("source_qubit_state: post-selection never succeeds");

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(post.rho);
    Eigen::Vector4d ev = es.eigenvalues();
    if (ev(3) < 1.0 - 1e-9)
        throw std::runtime_error("source_qubit_state: source state is not pure");
    Eigen::Vector4cd psi = es.eigenvectors().col(3);
    // fix the overall phase: largest component real positive
    int imax = 0;
    for (int k = 1; k < 4; ++k)
        if (std::abs(psi(k)) > std::abs(psi(imax))) imax = k;
    psi *= std::polar(1.0, -std::arg(psi(imax)));
    return psi;
}

std::vector<FringeSample> rhom_fringe(const SourceConfig& cfg, char which,
                                      const std::vector<double>& phases,
                                      double accidental_rate, double flux_scale) {
    if (which != 'T' && which != 'B')
        throw std::invalid_argument("rhom_fringe: which must be 'T' or 'B'");
    if (accidental_rate < 0.0 || flux_scale < 0.0)
        throw std::invalid_argument("rhom_fringe: negative rate");
    validate(cfg);

    const cplx i1(0.0, 1.0);
    Eigen::Vector4cd pump = Eigen::Vector4cd::Zero();
    if (which == 'T') {
        // state-control MZI locked to send everything to the top ring
        pump(0) = std::sqrt(cfg.eta_t_in);
        pump(1) = i1 * std::sqrt(1.0 - cfg.eta_t_in);
    } else {
        // direct feed through the spare port of the bottom input coupler
        pump(2) = i1 * std::sqrt(1.0 - cfg.eta_b_in);
        pump(3) = std::sqrt(cfg.eta_b_in);
    }
    const Eigen::Vector4cd xi = generation_amplitudes(pump);

    // route the swept ring's outputs to the two auxiliary ports
    const double kBar = M_PI, kCross = 0.0;
    const double prep_t = (which == 'T') ? kBar : kCross;
    const double prep_b = (which == 'T') ? kCross : kBar;

    std::vector<FringeSample> out;
    out.reserve(phases.size());
    for (double phi : phases) {
        SourceConfig swept = cfg;
        (which == 'T' ? swept.phi_t : swept.phi_b) = phi;
        NetworkLayout net = source_network(swept);
        net.elements.push_back(mzi(prep_t, 1, 2));
        net.elements.push_back(mzi(prep_b, 3, 4));
        net.elements.push_back(mzi(kCross, 0, 1));
        net.elements.push_back(mzi(kBar, 2, 3));
        net.elements.push_back(mzi(kCross, 4, 5));
        const ModeUnitary u = compose_network(net);
        const Eigen::MatrixXcd a = propagate_pair(embed_spiral_amplitudes(xi), u);
        const double coinc = std::norm(a(0, 5)) + std::norm(a(5, 0));
        out.push_back({phi, flux_scale * coinc + accidental_rate});
    }
    return out;
}

FringeFit fit_fringe(const std::vector<FringeSample>& samples, double known_background) {
    if (samples.size() < 3)
        throw std::invalid_argument("fit_fringe: need at least three samples");

    const int n = static_cast<int>(samples.size());
    Eigen::MatrixXd design(n, 3);
    Eigen::VectorXd y(n);
    for (int k = 0; k < n; ++k) {
        design(k, 0) = 1.0;
        design(k, 1) = std::cos(2.0 * samples[k].phase);
        design(k, 2) = std::sin(2.0 * samples[k].phase);
        y(k) = samples[k].rate - known_background;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (svd.rank() < 3)
        throw std::invalid_argument("fit_fringe: sweep does not constrain the fringe (degenerate phases)");
    const Eigen::Vector3d beta = svd.solve(y);

    FringeFit fit;
    fit.background = known_background;
    fit.amplitude = beta(0);
    const double mod = std::hypot(beta(1), beta(2));
    if (std::abs(beta(0)) < 1e-15 || mod < 1e-12 * std::max(std::abs(beta(0)), 1.0)) {
        fit.visibility = (std::abs(beta(0)) < 1e-15) ? 0.0 : mod / beta(0);
        fit.phase_offset = 0.0;
        fit.phase_constrained = false;
    } else {
        fit.visibility = mod / beta(0);
        fit.phase_offset = std::atan2(-beta(2), beta(1));
        fit.phase_constrained = true;
    }
    fit.residual = std::sqrt((design * beta - y).squaredNorm() / n);
    return fit;
}

double fringe_contrast(double n_max, double n_min) {
    if (n_max < n_min)
        throw std::invalid_argument("fringe_contrast: maximum below minimum");
    if (n_min < 0.0)
        throw std::invalid_argument("fringe_contrast: negative rate");
    const double sum = n_max + n_min;
    if (sum <= 0.0)
        throw std::invalid_argument("fringe_contrast: zero total rate");
    return (n_max - n_min) / sum;
}

} // namespace qpc
