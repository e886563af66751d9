#pragma once

#include <cstdint>
#include <string>

#include "msifuse/homography.hpp"
#include "msifuse/image.hpp"

namespace msi {

enum class SynthPattern { Checker, Blobs, Gradient };

struct SynthSpec {
  int width = 640;
  int height = 480;
  SynthPattern pattern = SynthPattern::Blobs;
  Homography ground_truth;  // maps thermal coordinates to RGB coordinates
  double noise_sigma = 0.0;
  bool invert_thermal = false;  // mimic the thermal modality
  uint32_t seed = 1;
};

struct SynthResult {
  ImageBuffer rgb;      // 3-channel 8-bit
  ImageBuffer thermal;  // 1-channel 8-bit
  Homography ground_truth;
};

/// Renders the pattern as the RGB frame and resamples it through the
/// inverse ground-truth map (plus optional inversion and seeded noise) as
/// the thermal frame. Fully deterministic per spec.
SynthResult make_synthetic(const SynthSpec& spec);

/// Convenience: rotation by `degrees` about the canvas center composed with
/// a translation, as a thermal->RGB homography.
Homography rotation_translation_h(double degrees, double tx, double ty,
                                  double cx, double cy);

SynthPattern synth_pattern_from_string(const std::string& s);

}  // namespace msi
