#include "qpc/gate.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qpc {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(name) + " must be finite");
    }
}

std::array<int, 6> role_modes(const ModeMap& map) {
    return {map.aux_t, map.t_rail0, map.t_rail1, map.b_rail0, map.b_rail1, map.aux_b};
}

// Internal phase detunings for the three gate splitters, in role order
// (aux_t|t0), (t1|b0), (b1|aux_b).
NetworkLayout gate_layout_detuned(GateMode mode, const ModeMap& map,
                                  const std::array<double, 3>& detune) {
    validate(map);
    if (mode == GateMode::Bypass) {
        throw std::invalid_argument("bypass has no gate layout; it is a routing choice");
    }

    NetworkLayout net;
    net.n_modes = kNumModes;

    // Route the physical modes onto the canonical order 0..5, apply the gate
    // there, then route back.  For the default map both routing blocks are
    // empty.
    const auto roles = role_modes(map);
    std::array<int, 6> target{};  // target[mode] = canonical position
    for (int r = 0; r < 6; ++r) target[static_cast<size_t>(roles[static_cast<size_t>(r)])] = r;

    std::vector<NetworkElement> route;
    auto q = target;
    for (int i = 0; i < 6; ++i) {
        while (q[static_cast<size_t>(i)] != i) {
            const int j = q[static_cast<size_t>(i)];
            route.push_back(crossing(i, j));
            std::swap(q[static_cast<size_t>(i)], q[static_cast<size_t>(j)]);
        }
    }
    for (const auto& e : route) net.elements.push_back(e);

    if (mode == GateMode::CZ) {
        const double theta = std::acos(1.0 / 3.0);
        net.elements.push_back(mzi(theta + detune[0], 0, 1));
        net.elements.push_back(mzi(theta + detune[1], 2, 3));
        net.elements.push_back(mzi(theta + detune[2], 4, 5));
        // static trims making the post-selected operator diag(1,1,1,-1)/3
        net.elements.push_back(phase_shift(-theta / 2.0, 1));
        net.elements.push_back(phase_shift(-theta / 2.0, 2));
        net.elements.push_back(phase_shift(kPi - theta / 2.0, 3));
        net.elements.push_back(phase_shift(-theta / 2.0, 4));
    } else {
        net.elements.push_back(mzi(kPi + detune[0], 0, 1));
        net.elements.push_back(mzi(kPi + detune[1], 2, 3));
        net.elements.push_back(mzi(kPi + detune[2], 4, 5));
        // static trims making the mode unitary exactly the identity
        net.elements.push_back(phase_shift(kPi, 0));
        net.elements.push_back(phase_shift(kPi, 2));
        net.elements.push_back(phase_shift(kPi, 4));
    }

    for (auto it = route.rbegin(); it != route.rend(); ++it) net.elements.push_back(*it);
    return net;
}

} // namespace

void validate(const ModeMap& map) {
    const auto roles = role_modes(map);
    std::array<bool, 6> seen{};
    for (int m : roles) {
        if (m < 0 || m >= kNumModes) {
            throw std::invalid_argument("mode map entry out of range");
        }
        if (seen[static_cast<size_t>(m)]) {
            throw std::invalid_argument("mode map entries must be distinct");
        }
        seen[static_cast<size_t>(m)] = true;
    }
    if (std::abs(map.t_rail0 - map.t_rail1) != 1 || std::abs(map.b_rail0 - map.b_rail1) != 1) {
        throw std::invalid_argument("qubit rails must be adjacent modes");
    }
}

void validate(const ChipConfig& cfg) {
    validate(cfg.source);
    require_finite(cfg.theta_tz1, "theta_tz1");
    require_finite(cfg.theta_ty1, "theta_ty1");
    require_finite(cfg.theta_bz1, "theta_bz1");
    require_finite(cfg.theta_by1, "theta_by1");
    require_finite(cfg.theta_tz2, "theta_tz2");
    require_finite(cfg.theta_ty2, "theta_ty2");
    require_finite(cfg.theta_tz3, "theta_tz3");
    require_finite(cfg.theta_bz2, "theta_bz2");
    require_finite(cfg.theta_by2, "theta_by2");
    require_finite(cfg.theta_bz3, "theta_bz3");
    require_finite(cfg.z_offset_t, "z_offset_t");
    require_finite(cfg.z_offset_b, "z_offset_b");
    for (const auto& [key, delta] : cfg.phase_perturbations) {
        require_finite(delta, key.c_str());
    }
}

ChipConfig apply_perturbations(const ChipConfig& cfg) {
    ChipConfig out = cfg;
    out.phase_perturbations.clear();
    for (const auto& [key, delta] : cfg.phase_perturbations) {
        if (key == "phi_beta") out.source.phi_beta += delta;
        else if (key == "phi_t") out.source.phi_t += delta;
        else if (key == "phi_b") out.source.phi_b += delta;
        else if (key == "theta_cap") out.source.theta_cap += delta;
        else if (key == "theta_tz1") out.theta_tz1 += delta;
        else if (key == "theta_ty1") out.theta_ty1 += delta;
        else if (key == "theta_bz1") out.theta_bz1 += delta;
        else if (key == "theta_by1") out.theta_by1 += delta;
        else if (key == "theta_tz2") out.theta_tz2 += delta;
        else if (key == "theta_ty2") out.theta_ty2 += delta;
        else if (key == "theta_tz3") out.theta_tz3 += delta;
        else if (key == "theta_bz2") out.theta_bz2 += delta;
        else if (key == "theta_by2") out.theta_by2 += delta;
        else if (key == "theta_bz3") out.theta_bz3 += delta;
        else if (key == "z_offset_t") out.z_offset_t += delta;
        else if (key == "z_offset_b") out.z_offset_b += delta;
        else if (key == "theta_czt" || key == "theta_czc" || key == "theta_czb") {
            // splitter detunings have no config field; carried through to the
            // gate layout
            out.phase_perturbations.emplace(key, delta);
        } else {
            throw std::invalid_argument("unknown phase perturbation key: " + key);
        }
    }
    return out;
}

Eigen::Matrix2cd rz(double theta) {
    Eigen::Matrix2cd u = Eigen::Matrix2cd::Zero();
    u(0, 0) = std::exp(cplx(0.0, -theta / 2.0));
    u(1, 1) = std::exp(cplx(0.0, theta / 2.0));
    return u;
}

Eigen::Matrix2cd ry(double theta) {
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    Eigen::Matrix2cd u;
    u << c, -s, s, c;
    return u;
}

Eigen::Matrix2cd single_qubit_unitary(double theta_z_a, double theta_y, double theta_z_b) {
    return rz(theta_z_b) * ry(theta_y) * rz(theta_z_a);
}

ModeUnitary rail_embedding(const Eigen::Matrix2cd& u, int rail0, int rail1, int n_modes) {
    if (rail0 < 0 || rail1 < 0 || rail0 >= n_modes || rail1 >= n_modes || rail0 == rail1) {
        throw std::invalid_argument("invalid rail pair for embedding");
    }
    ModeUnitary m = ModeUnitary::Identity(n_modes, n_modes);
    m(rail0, rail0) = u(0, 0);
    m(rail0, rail1) = u(0, 1);
    m(rail1, rail0) = u(1, 0);
    m(rail1, rail1) = u(1, 1);
    return m;
}

NetworkLayout gate_layout(GateMode mode, const ModeMap& map) {
    return gate_layout_detuned(mode, map, {0.0, 0.0, 0.0});
}

PostselectionResult postselect_qubits(const Eigen::MatrixXcd& a, const ModeMap& map) {
    validate(map);
    if (a.rows() != kNumModes || a.cols() != kNumModes) {
        throw std::invalid_argument("pair amplitude matrix must be 6x6");
    }
    const std::array<int, 2> t{map.t_rail0, map.t_rail1};
    const std::array<int, 2> b{map.b_rail0, map.b_rail1};

    Eigen::Vector4cd psi_tb;  // photon 1 in T, photon 2 in B
    Eigen::Vector4cd psi_bt;  // photon 1 in B, photon 2 in T
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            psi_tb(2 * i + j) = a(t[static_cast<size_t>(i)], b[static_cast<size_t>(j)]);
            psi_bt(2 * i + j) = a(b[static_cast<size_t>(j)], t[static_cast<size_t>(i)]);
        }
    }

    const double w_tb = psi_tb.squaredNorm();
    const double w_bt = psi_bt.squaredNorm();
    const double success = w_tb + w_bt;
    if (success <= 0.0) {
        throw std::runtime_error("post-selection on one photon per qubit never succeeds");
    }

    PostselectionResult r;
    r.rho = (psi_tb * psi_tb.adjoint() + psi_bt * psi_bt.adjoint()) / success;
    r.success_probability = success;
    r.p_signal_in_t = w_tb / success;
    r.p_signal_in_b = w_bt / success;
    return r;
}

Eigen::MatrixXcd embed_two_qubit(const Eigen::Vector4cd& psi, const ModeMap& map) {
    validate(map);
    const double norm = psi.norm();
    if (norm <= 0.0) {
        throw std::invalid_argument("cannot embed a zero state");
    }
    const std::array<int, 2> t{map.t_rail0, map.t_rail1};
    const std::array<int, 2> b{map.b_rail0, map.b_rail1};
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(kNumModes, kNumModes);
    const double inv = 1.0 / (norm * std::sqrt(2.0));
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const cplx amp = psi(2 * i + j) * inv;
            a(t[static_cast<size_t>(i)], b[static_cast<size_t>(j)]) += amp;
            a(b[static_cast<size_t>(j)], t[static_cast<size_t>(i)]) += amp;
        }
    }
    return a;
}

Eigen::Matrix4cd logical_gate_operator(GateMode mode, const ModeMap& map) {
    const ModeUnitary u = compose_network(gate_layout(mode, map));
    const std::array<int, 2> t{map.t_rail0, map.t_rail1};
    const std::array<int, 2> b{map.b_rail0, map.b_rail1};
    Eigen::Matrix4cd g;
    for (int col = 0; col < 4; ++col) {
        Eigen::Vector4cd basis = Eigen::Vector4cd::Zero();
        basis(col) = 1.0;
        const Eigen::MatrixXcd a_out = u * embed_two_qubit(basis, map) * u.transpose();
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                g(2 * i + j, col) =
                    std::sqrt(2.0) * a_out(t[static_cast<size_t>(i)], b[static_cast<size_t>(j)]);
            }
        }
    }
    return g;
}

ModeUnitary chip_unitary(const ChipConfig& raw_cfg, const ModeMap& map) {
    validate(map);
    const ChipConfig cfg = apply_perturbations(raw_cfg);
    validate(cfg);

    const ModeUnitary u_src = compose_network(source_network(cfg.source));

    ModeUnitary u = u_src;
    const auto embed_t = [&](const Eigen::Matrix2cd& m) {
        return rail_embedding(m, map.t_rail0, map.t_rail1);
    };
    const auto embed_b = [&](const Eigen::Matrix2cd& m) {
        return rail_embedding(m, map.b_rail0, map.b_rail1);
    };

    u = embed_t(single_qubit_unitary(cfg.theta_tz1, cfg.theta_ty1, 0.0)) * u;
    u = embed_b(single_qubit_unitary(cfg.theta_bz1, cfg.theta_by1, 0.0)) * u;

    if (cfg.gate != GateMode::Bypass) {
        std::array<double, 3> detune{0.0, 0.0, 0.0};
        for (const auto& [key, delta] : cfg.phase_perturbations) {
            if (key == "theta_czt") detune[0] += delta;
            else if (key == "theta_czc") detune[1] += delta;
            else if (key == "theta_czb") detune[2] += delta;
        }
        u = compose_network(gate_layout_detuned(cfg.gate, map, detune)) * u;
    }

    u = embed_t(rz(cfg.z_offset_t)) * u;
    u = embed_b(rz(cfg.z_offset_b)) * u;

    u = embed_t(single_qubit_unitary(cfg.theta_tz3, cfg.theta_ty2, cfg.theta_tz2)) * u;
    u = embed_b(single_qubit_unitary(cfg.theta_bz3, cfg.theta_by2, cfg.theta_bz2)) * u;
    return u;
}

PostselectionResult full_chip_state(const ChipConfig& raw_cfg, const ModeMap& map) {
    const ChipConfig cfg = apply_perturbations(raw_cfg);
    validate(cfg);
    const Eigen::Vector4cd xi = generation_amplitudes(pump_amplitudes(cfg.source));
    const ModeUnitary u = chip_unitary(cfg, map);
    const Eigen::MatrixXcd a = propagate_pair(embed_spiral_amplitudes(xi), u);
    return postselect_qubits(a, map);
}

} // namespace qpc
