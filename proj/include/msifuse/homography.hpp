#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "msifuse/image.hpp"

namespace msi {

class RegisterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 3x3 projective transform normalized to h33 = 1.
struct Homography {
  Eigen::Matrix3d h = Eigen::Matrix3d::Identity();

  static Homography from_matrix(const Eigen::Matrix3d& m);
  Homography inverse() const;
};

struct Correspondence {
  PixelPoint p;  // image 1 (thermal)
  PixelPoint q;  // image 2 (RGB)
};

struct RegistrationReport {
  Homography H;
  std::vector<bool> inlier_flags;
  double total_error = 0.0;  // sum of unsquared distances over inliers
  int ransac_iterations = 0;
  int refine_iterations = 0;
  int inlier_count = 0;
};

struct RansacConfig {
  double inlier_threshold = 3.0;  // px
  int max_iterations = 2000;
  uint32_t seed = 1;
  double refine_tol = 1e-9;
  int refine_max_rounds = 50;
};

/// Applies the projective map and dehomogenizes. Throws on |w| <= 1e-12.
PixelPoint apply_h(const Homography& H, const PixelPoint& p);

/// Euclidean distance between q and the dehomogenized H*p.
double transform_error(const Homography& H, const Correspondence& c);

/// Sum of transform_error over all correspondences.
double total_transform_error(const Homography& H,
                             const std::vector<Correspondence>& cs);

/// Direct linear transform with Hartley normalization; exact on noiseless
/// inputs. Throws RegisterError on degenerate configurations.
Homography estimate_dlt(const std::vector<Correspondence>& cs);

/// Seeded RANSAC over minimal 4-point samples followed by IRLS refinement
/// of the sum-of-unsquared-norms objective over the inliers.
RegistrationReport estimate_robust(const std::vector<Correspondence>& cs,
                                   const RansacConfig& config = {});

/// Inverse-mapping warp with bilinear interpolation. Output pixels whose
/// source falls outside the input get 0 and a false mask bit.
std::pair<ImageBuffer, ValidityMask> warp(const ImageBuffer& thermal,
                                          const Homography& H, int out_width,
                                          int out_height);

}  // namespace msi
