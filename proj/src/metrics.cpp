#include "qpc/metrics.hpp"

#include "qpc/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace qpc {

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::Vector3d safe_normalized(const Eigen::Vector3d& v, const Eigen::Vector3d& fallback) {
    const double n = v.norm();
    if (n < 1e-15) return fallback;
    return v / n;
}

double chsh_value(const Eigen::Matrix3d& t, const Eigen::Vector3d& a, const Eigen::Vector3d& ap,
                  const Eigen::Vector3d& b, const Eigen::Vector3d& bp) {
    return a.dot(t * (b + bp)) + ap.dot(t * (b - bp));
}

} // namespace

Eigen::Matrix2cd pauli_x() {
    Eigen::Matrix2cd m;
    m << 0, 1, 1, 0;
    return m;
}

Eigen::Matrix2cd pauli_y() {
    Eigen::Matrix2cd m;
    m << cplx(0, 0), cplx(0, -1), cplx(0, 1), cplx(0, 0);
    return m;
}

Eigen::Matrix2cd pauli_z() {
    Eigen::Matrix2cd m;
    m << 1, 0, 0, -1;
    return m;
}

Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
    Eigen::Matrix4cd out;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return out;
}

Eigen::Vector4cd pair_superposition(double beta, double theta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1]");
    }
    Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
    psi(0) = std::sqrt(1.0 - beta);
    psi(3) = std::exp(cplx(0.0, theta)) * std::sqrt(beta);
    return psi;
}

double purity(const Eigen::Matrix4cd& rho) { return (rho * rho).trace().real(); }

Eigen::Matrix2cd reduced_state_t(const Eigen::Matrix4cd& rho) {
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i)
        for (int ip = 0; ip < 2; ++ip)
            for (int j = 0; j < 2; ++j)
                r(i, ip) += rho(2 * i + j, 2 * ip + j);
    return r;
}

Eigen::Matrix2cd reduced_state_b(const Eigen::Matrix4cd& rho) {
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    for (int j = 0; j < 2; ++j)
        for (int jp = 0; jp < 2; ++jp)
            for (int i = 0; i < 2; ++i)
                r(j, jp) += rho(2 * i + j, 2 * i + jp);
    return r;
}

double schmidt_number(const Eigen::Matrix4cd& rho) {
    const Eigen::Matrix2cd rt = reduced_state_t(rho);
    const double p = (rt * rt).trace().real();
    if (p <= 0.0) {
        throw std::invalid_argument("reduced state has non-positive purity");
    }
    return 1.0 / p;
}

Eigen::Matrix3d correlation_matrix(const Eigen::Matrix4cd& rho) {
    const std::array<Eigen::Matrix2cd, 3> sigma{pauli_x(), pauli_y(), pauli_z()};
    Eigen::Matrix3d t;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            t(i, j) = (rho * kron2(sigma[static_cast<size_t>(i)], sigma[static_cast<size_t>(j)]))
                          .trace()
                          .real();
    return t;
}

double chsh_horodecki(const Eigen::Matrix4cd& rho) {
    const Eigen::Matrix3d t = correlation_matrix(rho);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(t.transpose() * t);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    return 2.0 * std::sqrt(std::max(0.0, ev(2) + ev(1)));
}

ChshResult chsh_optimize(const Eigen::Matrix4cd& rho, std::uint64_t seed, int n_starts) {
    if (n_starts < 1) {
        throw std::invalid_argument("need at least one start");
    }
    const Eigen::Matrix3d t = correlation_matrix(rho);

    ChshResult best;
    best.value = -std::numeric_limits<double>::infinity();

    for (int start = 0; start < n_starts; ++start) {
        Rng rng = make_rng(derive_seed(seed, 0xc5a1u + static_cast<std::uint64_t>(start)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        const auto random_unit = [&]() {
            Eigen::Vector3d v;
            do {
                v << gauss(rng), gauss(rng), gauss(rng);
            } while (v.norm() < 1e-12);
            return Eigen::Vector3d(v.normalized());
        };

        Eigen::Vector3d a = random_unit(), ap = random_unit();
        Eigen::Vector3d b = random_unit(), bp = random_unit();

        double value = chsh_value(t, a, ap, b, bp);
        for (int iter = 0; iter < 500; ++iter) {
            a = safe_normalized(t * (b + bp), a);
            ap = safe_normalized(t * (b - bp), ap);
            b = safe_normalized(t.transpose() * (a + ap), b);
            bp = safe_normalized(t.transpose() * (a - ap), bp);
            const double next = chsh_value(t, a, ap, b, bp);
            if (next - value < 1e-13) {
                value = std::max(value, next);
                break;
            }
            value = next;
        }
        if (value > best.value) {
            best.value = value;
            best.a = a;
            best.a_prime = ap;
            best.b = b;
            best.b_prime = bp;
        }
    }
    return best;
}

double fidelity_to_pure(const Eigen::Matrix4cd& rho, const Eigen::Vector4cd& psi) {
    const double n2 = psi.squaredNorm();
    if (n2 <= 0.0) {
        throw std::invalid_argument("target state must be nonzero");
    }
    return (psi.adjoint() * rho * psi)(0).real() / n2;
}

double fidelity(const Eigen::Matrix4cd& rho, const Eigen::Matrix4cd& sigma) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()));
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    const Eigen::Matrix4cd sqrt_rho =
        es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> inner(sqrt_rho * sigma * sqrt_rho);
    const double tr = inner.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return tr * tr;
}

LocalZFidelity fidelity_local_z(const Eigen::Matrix4cd& rho, const Eigen::Vector4cd& psi) {
    const double n2 = psi.squaredNorm();
    if (n2 <= 0.0) {
        throw std::invalid_argument("target state must be nonzero");
    }
    const auto value_at = [&](double zt, double zb) {
        // phases of Rz(zt) (x) Rz(zb) on |00>,|01>,|10>,|11>, global phase dropped
        Eigen::Vector4cd u;
        u(0) = 1.0;
        u(1) = std::exp(cplx(0.0, zb));
        u(2) = std::exp(cplx(0.0, zt));
        u(3) = std::exp(cplx(0.0, zt + zb));
        Eigen::Vector4cd rotated;  // U^dag psi
        for (int k = 0; k < 4; ++k) rotated(k) = std::conj(u(k)) * psi(k);
        return (rotated.adjoint() * rho * rotated)(0).real() / n2;
    };

    const int n_grid = 64;
    LocalZFidelity best;
    best.fidelity = -1.0;
    for (int i = 0; i < n_grid; ++i) {
        for (int j = 0; j < n_grid; ++j) {
            const double zt = 2.0 * kPi * i / n_grid;
            const double zb = 2.0 * kPi * j / n_grid;
            const double f = value_at(zt, zb);
            if (f > best.fidelity) {
                best = {f, zt, zb};
            }
        }
    }

    double step = 2.0 * kPi / n_grid;
    while (step > 1e-9) {
        bool moved = false;
        const std::array<std::array<double, 2>, 4> dirs{
            {{step, 0.0}, {-step, 0.0}, {0.0, step}, {0.0, -step}}};
        for (const auto& d : dirs) {
            const double zt = best.zeta_t + d[0];
            const double zb = best.zeta_b + d[1];
            const double f = value_at(zt, zb);
            if (f > best.fidelity) {
                best = {f, zt, zb};
                moved = true;
            }
        }
        if (!moved) step *= 0.5;
    }
    best.zeta_t = std::remainder(best.zeta_t, 2.0 * kPi);
    best.zeta_b = std::remainder(best.zeta_b, 2.0 * kPi);
    return best;
}

bool is_physical(const Eigen::Matrix4cd& rho, double tol) {
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
    if (std::abs(rho.trace().real() - 1.0) > tol || std::abs(rho.trace().imag()) > tol)
        return false;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()));
    return es.eigenvalues().minCoeff() >= -tol;
}

Eigen::Matrix4cd project_physical(const Eigen::Matrix4cd& rho) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(0.5 * (rho + rho.adjoint()));
    Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
    const double total = ev.sum();
    if (total <= 0.0) {
        return Eigen::Matrix4cd::Identity() / 4.0;
    }
    ev /= total;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

double ideal_schmidt_number(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1]");
    }
    return 1.0 / (beta * beta + (1.0 - beta) * (1.0 - beta));
}

double ideal_chsh(double beta) {
    if (!(beta >= 0.0 && beta <= 1.0)) {
        throw std::invalid_argument("beta must lie in [0, 1]");
    }
    return 2.0 * std::sqrt(1.0 + 4.0 * beta * (1.0 - beta));
}

} // namespace qpc
