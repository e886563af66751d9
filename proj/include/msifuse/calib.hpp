#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "msifuse/image.hpp"

namespace msi {

class CalibError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PointBehindCamera : public CalibError {
 public:
  PointBehindCamera() : CalibError("point behind camera (Z_c <= 0)") {}
};

/// Pinhole intrinsics + pose. D holds optional radial distortion
/// coefficients (d1, d2); empty D means the plain pinhole model.
struct CameraParams {
  double f = 1.0;
  double cu = 0.0;
  double cv = 0.0;
  std::vector<double> dist;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  void validate() const;
};

struct Observation {
  Eigen::Vector3d X;    // scene point
  PixelPoint measured;  // (u_i, v_i)
};

/// Rodrigues exponential: axis-angle -> rotation matrix.
Eigen::Matrix3d axis_angle_to_rotation(const Eigen::Vector3d& r);
/// Rodrigues logarithm: rotation matrix -> axis-angle.
Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d& R);

/// Projects a scene point through the camera model:
/// (u, v) = (f*Xc/Zc + cu, f*Yc/Zc + cv) with (Xc,Yc,Zc) = R*X + t.
PixelPoint project(const CameraParams& params, const Eigen::Vector3d& X);

/// Euclidean reprojection residual magnitude.
double reproj_error(const PixelPoint& measured, const PixelPoint& projected);

/// Sum of per-observation reprojection errors.
double total_error(const CameraParams& params,
                   const std::vector<Observation>& obs);

/// Parameter vector layout used throughout the solver:
/// [f, cu, cv, D..., axis_angle(3), t(3)].
Eigen::VectorXd pack_params(const CameraParams& params);
CameraParams unpack_params(const Eigen::VectorXd& theta, size_t n_dist);

/// Forward-difference Jacobian of the scalar per-observation errors:
/// entry (i, j) = (e_i(theta_j + step_j) - e_i(theta)) / step_j.
Eigen::MatrixXd numeric_jacobian(const CameraParams& params,
                                 const std::vector<Observation>& obs,
                                 const Eigen::VectorXd& steps);

/// Raw-element derivative diagnostics: perturb a single entry of R (or t)
/// without re-orthonormalization and difference the scalar error.
double element_derivative_R(const CameraParams& params,
                            const std::vector<Observation>& obs,
                            size_t obs_index, int j, int k, double delta);
double element_derivative_t(const CameraParams& params,
                            const std::vector<Observation>& obs,
                            size_t obs_index, int k, double delta);

struct SolverConfig {
  double lambda_init = 1e-3;
  double lambda_factor = 10.0;
  double lambda_max = 1e12;
  double de_tol = 1e-10;
  double dtheta_tol = 1e-12;
  int max_iterations = 100;
  bool central_differences = false;
};

struct LmState {
  Eigen::VectorXd theta;
  size_t n_dist = 0;
  double lambda = 1e-3;
  double error = 0.0;  // total error E at theta
  int iteration = 0;
  bool last_step_accepted = false;
  double last_step_norm = 0.0;

  CameraParams params() const { return unpack_params(theta, n_dist); }
};

LmState make_lm_state(const CameraParams& params, const SolverConfig& config);

/// One damped least-squares update on the stacked (u, v) residual vector.
/// Accepted steps divide lambda by the schedule factor, rejected steps
/// multiply it and leave theta untouched.
LmState lm_step(const LmState& state, const std::vector<Observation>& obs,
                const SolverConfig& config = {});

struct ConvergenceReport {
  double initial_error = 0.0;
  double final_error = 0.0;
  int iterations = 0;
  double final_lambda = 0.0;
  std::string termination;              // converged_dE | converged_dtheta |
                                        // max_iterations | lambda_overflow
  std::vector<double> accepted_errors;  // E after each accepted step
  bool distortion_enabled = false;
};

/// Iterates lm_step until convergence. Throws CalibError when the system is
/// under-determined (fewer residuals than parameters or fewer than 4 points).
std::pair<CameraParams, ConvergenceReport> calibrate(
    const CameraParams& initial, const std::vector<Observation>& obs,
    const SolverConfig& config = {});

/// Observation CSV rows: `X,Y,Z,u,v`.
std::vector<Observation> parse_observations(const std::filesystem::path& path);

}  // namespace msi
