#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "msifuse/calib.hpp"
#include "msifuse/features.hpp"
#include "msifuse/fuse.hpp"
#include "msifuse/homography.hpp"
#include "msifuse/sync.hpp"
#include "msifuse/synth.hpp"

namespace msi {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AlphaMode { Fixed, Optimized };

struct PipelineConfig {
  SyncConfig sync;
  double tau = 20.0;
  int descriptor_bits = 256;
  uint32_t descriptor_seed = 42;
  MatchConfig matcher;
  RansacConfig ransac;
  GammaMode gamma_mode = GammaMode::Recenter;
  AlphaMode alpha_mode = AlphaMode::Fixed;
  double fixed_alpha = 0.5;
  bool colormap = false;      // LUT-colored thermal before blending
  bool edge_domain = true;    // detect on gradient magnitude (cross-modal)
  int max_keypoints = 1500;   // strongest keypoints kept per image

  void validate() const;
};

/// Parses the JSON config document. Unknown keys are rejected.
PipelineConfig parse_pipeline_config(const std::filesystem::path& path);

struct PairReport {
  std::string id = "pair";
  double t = 0.0;
  int keypoints_ir = 0;
  int keypoints_rgb = 0;
  int match_count = 0;
  Homography H;
  int inlier_count = 0;
  double registration_error = 0.0;  // E_H over inliers
  double alpha = 0.5, beta = 0.5, gamma = 0.0;
  std::string failure_stage;  // empty on success
  std::string output_path;
  double detect_ms = 0, describe_ms = 0, match_ms = 0, register_ms = 0,
         fuse_ms = 0;

  std::string to_json(bool include_timings = true) const;
};

struct SessionSummary {
  int pair_count = 0;
  int failures = 0;
  std::vector<std::string> pair_ids;
  double total_ms = 0;
};

/// Full Block-2 chain on one synchronized frame pair. Registration
/// failures downgrade to an RGB pass-through composite with the failing
/// stage recorded; only invalid inputs throw.
std::pair<CompositeImage, PairReport> run_pair(const ImageBuffer& thermal,
                                               const ImageBuffer& rgb,
                                               const PipelineConfig& config);

/// Synchronizes the manifests and runs every pair, writing one composite
/// (PNG) and one JSON report per pair plus a session summary.
SessionSummary run_batch(const std::filesystem::path& ir_manifest,
                         const std::filesystem::path& rgb_manifest,
                         const PipelineConfig& config,
                         const std::filesystem::path& out_dir);

/// Fixed lookup-table colormap (iron-style) for thermal presentation.
ImageBuffer apply_colormap(const ImageBuffer& gray);

SynthSpec parse_synth_spec(const std::filesystem::path& path);

std::string calibration_report_json(const CameraParams& params,
                                    const ConvergenceReport& report);

}  // namespace msi
