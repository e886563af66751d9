#include "msifuse/calib.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace msi {
namespace {

constexpr double kMinDepth = 1e-12;

double diff_step(double value) {
  return std::max(1e-6, 1e-6 * std::abs(value));
}

/// Stacked signed residual vector: (u' - u, v' - v) per observation.
Eigen::VectorXd residual_vector(const CameraParams& params,
                                const std::vector<Observation>& obs) {
  Eigen::VectorXd r(2 * obs.size());
  for (size_t i = 0; i < obs.size(); ++i) {
    const PixelPoint p = project(params, obs[i].X);
    r[2 * i] = p.x - obs[i].measured.x;
    r[2 * i + 1] = p.y - obs[i].measured.y;
  }
  return r;
}

Eigen::MatrixXd residual_jacobian(const Eigen::VectorXd& theta, size_t n_dist,
                                  const std::vector<Observation>& obs,
                                  bool central) {
  const Eigen::Index m = theta.size();
  const Eigen::VectorXd r0 =
      central ? Eigen::VectorXd()
              : residual_vector(unpack_params(theta, n_dist), obs);
  Eigen::MatrixXd J(2 * obs.size(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double h = diff_step(theta[j]);
    Eigen::VectorXd tp = theta;
    tp[j] += h;
    const Eigen::VectorXd rp = residual_vector(unpack_params(tp, n_dist), obs);
    if (central) {
      Eigen::VectorXd tm = theta;
      tm[j] -= h;
      J.col(j) =
          (rp - residual_vector(unpack_params(tm, n_dist), obs)) / (2 * h);
    } else {
      J.col(j) = (rp - r0) / h;
    }
  }
  return J;
}

double scalar_error_at(const CameraParams& params, const Observation& ob) {
  return reproj_error(ob.measured, project(params, ob.X));
}

}  // namespace

void CameraParams::validate() const {
  if (!(f > 0)) throw CalibError("focal length must be positive");
  if (((R.transpose() * R) - Eigen::Matrix3d::Identity())
              .cwiseAbs()
              .maxCoeff() > 1e-9 ||
      R.determinant() < 0)
    throw CalibError("R is not a proper rotation");
}

Eigen::Matrix3d axis_angle_to_rotation(const Eigen::Vector3d& r) {
  const double angle = r.norm();
  if (angle < 1e-12) {
    // second-order expansion keeps small steps smooth
    Eigen::Matrix3d K;
    K << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
    return Eigen::Matrix3d::Identity() + K + 0.5 * K * K;
  }
  return Eigen::AngleAxisd(angle, r / angle).toRotationMatrix();
}

Eigen::Vector3d rotation_to_axis_angle(const Eigen::Matrix3d& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.angle() * aa.axis();
}

PixelPoint project(const CameraParams& params, const Eigen::Vector3d& X) {
  const Eigen::Vector3d Xc = params.R * X + params.t;
  if (Xc.z() <= kMinDepth) throw PointBehindCamera();
  double xn = Xc.x() / Xc.z();
  double yn = Xc.y() / Xc.z();
  if (!params.dist.empty()) {
    const double r2 = xn * xn + yn * yn;
    const double d1 = params.dist[0];
    const double d2 = params.dist.size() > 1 ? params.dist[1] : 0.0;
    const double factor = 1.0 + d1 * r2 + d2 * r2 * r2;
    xn *= factor;
    yn *= factor;
  }
  return {params.f * xn + params.cu, params.f * yn + params.cv};
}

double reproj_error(const PixelPoint& measured, const PixelPoint& projected) {
  return std::hypot(measured.x - projected.x, measured.y - projected.y);
}

double total_error(const CameraParams& params,
                   const std::vector<Observation>& obs) {
  double e = 0.0;
  for (const auto& ob : obs) e += scalar_error_at(params, ob);
  return e;
}

Eigen::VectorXd pack_params(const CameraParams& params) {
  const size_t nd = params.dist.size();
  Eigen::VectorXd theta(9 + nd);
  theta[0] = params.f;
  theta[1] = params.cu;
  theta[2] = params.cv;
  for (size_t i = 0; i < nd; ++i) theta[3 + i] = params.dist[i];
  theta.segment<3>(3 + nd) = rotation_to_axis_angle(params.R);
  theta.segment<3>(6 + nd) = params.t;
  return theta;
}

CameraParams unpack_params(const Eigen::VectorXd& theta, size_t n_dist) {
  CameraParams p;
  p.f = theta[0];
  p.cu = theta[1];
  p.cv = theta[2];
  p.dist.assign(theta.data() + 3, theta.data() + 3 + n_dist);
  p.R = axis_angle_to_rotation(theta.segment<3>(3 + n_dist));
  p.t = theta.segment<3>(6 + n_dist);
  return p;
}

Eigen::MatrixXd numeric_jacobian(const CameraParams& params,
                                 const std::vector<Observation>& obs,
                                 const Eigen::VectorXd& steps) {
  const Eigen::VectorXd theta = pack_params(params);
  if (steps.size() != theta.size())
    throw CalibError("step count does not match parameter count");
  if (steps.minCoeff() <= 0) throw CalibError("steps must be positive");

  Eigen::MatrixXd J(obs.size(), theta.size());
  std::vector<double> e0(obs.size());
  for (size_t i = 0; i < obs.size(); ++i) e0[i] = scalar_error_at(params, obs[i]);
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    Eigen::VectorXd tp = theta;
    tp[j] += steps[j];
    const CameraParams pp = unpack_params(tp, params.dist.size());
    for (size_t i = 0; i < obs.size(); ++i)
      J(i, j) = (scalar_error_at(pp, obs[i]) - e0[i]) / steps[j];
  }
  return J;
}

double element_derivative_R(const CameraParams& params,
                            const std::vector<Observation>& obs,
                            size_t obs_index, int j, int k, double delta) {
  if (delta <= 0) throw CalibError("delta must be positive");
  const double e0 = scalar_error_at(params, obs.at(obs_index));
  CameraParams p = params;
  p.R(j, k) += delta;  // raw element, no re-orthonormalization
  return (scalar_error_at(p, obs[obs_index]) - e0) / delta;
}

double element_derivative_t(const CameraParams& params,
                            const std::vector<Observation>& obs,
                            size_t obs_index, int k, double delta) {
  if (delta <= 0) throw CalibError("delta must be positive");
  const double e0 = scalar_error_at(params, obs.at(obs_index));
  CameraParams p = params;
  p.t[k] += delta;
  return (scalar_error_at(p, obs[obs_index]) - e0) / delta;
}

LmState make_lm_state(const CameraParams& params, const SolverConfig& config) {
  LmState s;
  s.theta = pack_params(params);
  s.n_dist = params.dist.size();
  s.lambda = config.lambda_init;
  s.error = 0.0;
  return s;
}

LmState lm_step(const LmState& state, const std::vector<Observation>& obs,
                const SolverConfig& config) {
  if (!(state.lambda > 0)) throw CalibError("lambda must be positive");
  const CameraParams current = state.params();
  const double e_current = total_error(current, obs);

  const Eigen::VectorXd r = residual_vector(current, obs);
  const Eigen::MatrixXd J = residual_jacobian(state.theta, state.n_dist, obs,
                                              config.central_differences);
  const Eigen::MatrixXd normal =
      J.transpose() * J +
      state.lambda *
          Eigen::MatrixXd::Identity(state.theta.size(), state.theta.size());
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(normal);
  if (ldlt.info() != Eigen::Success)
    throw CalibError("singular normal matrix");
  const Eigen::VectorXd delta = ldlt.solve(J.transpose() * r);
  if (!delta.allFinite()) throw CalibError("singular normal matrix");

  LmState next = state;
  next.iteration = state.iteration + 1;
  next.last_step_norm = delta.lpNorm<Eigen::Infinity>();

  const Eigen::VectorXd candidate = state.theta - delta;
  double e_candidate;
  try {
    e_candidate = total_error(unpack_params(candidate, state.n_dist), obs);
  } catch (const PointBehindCamera&) {
    e_candidate = std::numeric_limits<double>::infinity();
  }

  if (e_candidate < e_current) {
    next.theta = candidate;
    next.error = e_candidate;
    next.lambda = state.lambda / config.lambda_factor;
    next.last_step_accepted = true;
  } else {
    next.error = e_current;
    next.lambda = state.lambda * config.lambda_factor;
    next.last_step_accepted = false;
  }
  return next;
}

std::pair<CameraParams, ConvergenceReport> calibrate(
    const CameraParams& initial, const std::vector<Observation>& obs,
    const SolverConfig& config) {
  initial.validate();
  const size_t m = 9 + initial.dist.size();
  if (obs.size() < 4 || 2 * obs.size() < m)
    throw CalibError("under-determined: " + std::to_string(obs.size()) +
                     " observations for " + std::to_string(m) + " parameters");

  ConvergenceReport report;
  report.distortion_enabled = !initial.dist.empty();
  report.initial_error = total_error(initial, obs);

  LmState state = make_lm_state(initial, config);
  state.error = report.initial_error;
  report.termination = "max_iterations";
  for (int it = 0; it < config.max_iterations; ++it) {
    const double e_before = state.error;
    LmState next;
    try {
      next = lm_step(state, obs, config);
    } catch (const CalibError&) {
      state.lambda *= config.lambda_factor;
      if (state.lambda > config.lambda_max) {
        report.termination = "lambda_overflow";
        break;
      }
      continue;
    }
    state = next;
    if (state.lambda > config.lambda_max) {
      report.termination = "lambda_overflow";
      break;
    }
    if (state.last_step_accepted) {
      report.accepted_errors.push_back(state.error);
      if (std::abs(e_before - state.error) < config.de_tol) {
        report.termination = "converged_dE";
        break;
      }
    }
    // a vanishing proposed step cannot improve further, accepted or not
    if (state.last_step_norm < config.dtheta_tol) {
      report.termination = "converged_dtheta";
      break;
    }
  }
  report.final_error = state.error;
  report.final_lambda = state.lambda;
  report.iterations = state.iteration;
  return {state.params(), report};
}

std::vector<Observation> parse_observations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CalibError("cannot open observations: " + path.string());
  std::vector<Observation> obs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double vals[5];
    size_t pos = 0;
    for (int i = 0; i < 5; ++i) {
      size_t next = i < 4 ? line.find(',', pos) : line.size();
      if (next == std::string::npos)
        throw CalibError("bad observation row at line " +
                         std::to_string(lineno));
      const char* first = line.data() + pos;
      const char* last = line.data() + next;
      auto [p, ec] = std::from_chars(first, last, vals[i]);
      if (ec != std::errc{} || p != last)
        throw CalibError("bad number in observation row at line " +
                         std::to_string(lineno));
      pos = next + 1;
    }
    obs.push_back({{vals[0], vals[1], vals[2]}, {vals[3], vals[4]}});
  }
  return obs;
}

}  // namespace msi
