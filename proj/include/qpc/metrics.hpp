#pragma once

#include "qpc/optics.hpp"

#include <cstdint>

namespace qpc {

Eigen::Matrix2cd pauli_x();
Eigen::Matrix2cd pauli_y();
Eigen::Matrix2cd pauli_z();
Eigen::Matrix4cd kron2(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b);

// sqrt(1-beta)|00> + e^{i theta} sqrt(beta)|11>
Eigen::Vector4cd pair_superposition(double beta, double theta = 0.0);

double purity(const Eigen::Matrix4cd& rho);
Eigen::Matrix2cd reduced_state_t(const Eigen::Matrix4cd& rho);
Eigen::Matrix2cd reduced_state_b(const Eigen::Matrix4cd& rho);

// Effective number of amplitudes in the superposition, 1/Tr(rho_T^2).
double schmidt_number(const Eigen::Matrix4cd& rho);

// T_ij = Tr(rho sigma_i (x) sigma_j)
Eigen::Matrix3d correlation_matrix(const Eigen::Matrix4cd& rho);

// Largest attainable CHSH value 2 sqrt(t1 + t2) from the two leading
// eigenvalues of T^T T.
double chsh_horodecki(const Eigen::Matrix4cd& rho);

struct ChshResult {
    double value = 0.0;
    Eigen::Vector3d a, a_prime, b, b_prime;
};

// Direct maximization over measurement directions by alternating closed-form
// updates from multiple seeded starts.
ChshResult chsh_optimize(const Eigen::Matrix4cd& rho, std::uint64_t seed = 0, int n_starts = 16);

double fidelity_to_pure(const Eigen::Matrix4cd& rho, const Eigen::Vector4cd& psi);
// Uhlmann fidelity, (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2
double fidelity(const Eigen::Matrix4cd& rho, const Eigen::Matrix4cd& sigma);

struct LocalZFidelity {
    double fidelity = 0.0;
    double zeta_t = 0.0;
    double zeta_b = 0.0;
};

// max over local Rz(zeta_t) (x) Rz(zeta_b) of the fidelity to psi; absorbs
// fixed photon-path phase offsets that a local frame choice removes.
LocalZFidelity fidelity_local_z(const Eigen::Matrix4cd& rho, const Eigen::Vector4cd& psi);

bool is_physical(const Eigen::Matrix4cd& rho, double tol = 1e-9);
// Hermitize, clip negative eigenvalues, renormalize the trace.
Eigen::Matrix4cd project_physical(const Eigen::Matrix4cd& rho);

// Closed forms for pair_superposition(beta): effective amplitude count and
// attainable CHSH value.
double ideal_schmidt_number(double beta);
double ideal_chsh(double beta);

} // namespace qpc
