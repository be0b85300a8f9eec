#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "granular/collision.hpp"

namespace granular {

/// Dense matrix of h -> Q(G, h) + Q(h, G) - kappa div_v(v h) on node values.
struct LinearOperatorMatrix {
  Eigen::MatrixXd A;
  std::shared_ptr<const VelocityLattice> lat;
  double alpha = 1.0;
  double kappa = 0.0;
};

/// Flux-form divergence matrix for div_v(v h); columns sum to zero up to
/// rounding (zero flux through the hull).
Eigen::MatrixXd drift_matrix(const VelocityLattice& lat);

/// Column-by-column assembly from the bilinear collision operator;
/// alpha must match the tableau. Parallel over columns.
LinearOperatorMatrix assemble_linearized(const Distribution& G, double alpha, double kappa,
                                         const CollisionTableau& tab, int threads = 0,
                                         double support_cut = 1e-14);

struct EigenMode {
  std::complex<double> lambda;
  Eigen::VectorXcd vec;
  double residual = 0.0;  // ||A v - lambda v|| / ||v||
};

struct SpectralReport {
  double radius = 0.0;
  double alpha = 1.0;
  double kappa = 0.0;
  std::vector<EigenMode> modes;  // eigenvalues inside the disk, by descending real part
  int n_zero = 0;                // |lambda| <= cluster tolerance
  int n_kappa = 0;               // |lambda - kappa| <= tolerance (kappa > 0 only)
  bool energy_found = false;
  double mu = 0.0;               // -Re(lambda) of the energy mode
  int energy_index = -1;
  double kappa_rel_err = 0.0;    // worst relative offset of the kappa cluster
  double zero_cluster_width = 0.0;
  bool counts_expected = false;  // exactly d+2 modes in the disk, classified
  std::string flags;             // diagnostics for anything unexpected
};

/// All eigenvalues of the dense operator inside |lambda| <= radius, with
/// residual certificates and the zero / +kappa / -mu classification.
SpectralReport spectrum_near_zero(const LinearOperatorMatrix& L, double radius,
                                  double residual_tol = 1e-6);

struct EnergyEigenfunction {
  Distribution phi;             // normalized in L1(<v>^2), phi(0) < 0
  double angle_to_limit = 0.0;  // radians, against (|v|^2 - d theta1) M
  bool sign_fixed = true;
};

EnergyEigenfunction energy_eigenfunction(const SpectralReport& rep,
                                         std::shared_ptr<const VelocityLattice> lat,
                                         double theta1);

/// Projection onto span{M, v_i M, (|v|^2 - d theta1) M} with the
/// orthonormal collision-invariant basis.
Distribution kernel_projection_pi0(const Distribution& h, double theta1);

}  // namespace granular
