#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "msifuse/image.hpp"

namespace msi {

class FuseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class GammaMode { Literal, Zero, Recenter };

struct FusionParams {
  double alpha = 0.5;
  double beta = 0.5;  // alpha + beta = 1
  double gamma = 0.0;
  GammaMode gamma_mode = GammaMode::Recenter;

  void validate() const {
    if (alpha < 0 || alpha > 1 || beta < 0 || beta > 1 ||
        std::abs(alpha + beta - 1.0) > 1e-12)
      throw FuseError("weights must lie in [0,1] and sum to 1");
  }
};

struct CompositeImage {
  ImageBuffer image;
  FusionParams params;
  ValidityMask mask;
};

/// Mean of all samples of a single-channel image, full real precision.
double mean_intensity(const ImageBuffer& image);

/// Offset constant: the average of the two mean intensities.
double offset_gamma(double mean_w, double mean_2);

/// Closed-form least-squares blend weight against an explicit target T:
/// alpha* = sum((I_w - I_2)(T - I_2)) / sum((I_w - I_2)^2) over the mask,
/// clamped to [0, 1]; near-identical sources give alpha = 0.5.
FusionParams optimize_weights(const ImageBuffer& I_w, const ImageBuffer& I_2,
                              const ImageBuffer& target,
                              const ValidityMask& mask);

/// Weighted overlay R = clamp(round(alpha*I_w + beta*I_2 + gamma)) on the
/// valid mask; off-mask pixels pass I_2 through unchanged. gamma_mode
/// selects the applied offset: the literal average-of-means, zero, or a
/// recentered variant that keeps the output mean near gamma.
CompositeImage overlay(const ImageBuffer& I_w, const ImageBuffer& I_2,
                       const FusionParams& params, const ValidityMask& mask);

}  // namespace msi
