#pragma once

#include <string>
#include <vector>

#include "msifuse/manifest.hpp"

namespace msi {

struct SyncedPair {
  std::string id;  // "pair-000001", assigned in reference-time order
  double t = 0.0;  // reference time = RGB timestamp
  FrameRecord thermal;
  FrameRecord rgb;
  double dt = 0.0;  // |corrected thermal t - rgb t|
};

struct SyncConfig {
  double tolerance = 0.05;  // seconds
  double offset = 0.0;      // constant clock correction added to thermal t
};

struct SyncResult {
  std::vector<SyncedPair> pairs;
  std::vector<FrameRecord> unmatched_ir;
  std::vector<FrameRecord> unmatched_rgb;
};

/// Greedy nearest-timestamp pairing of the two streams. Each frame is used
/// at most once; candidate pairs beyond the tolerance go to the unmatched
/// lists. Deterministic: ties break toward the earlier RGB frame.
SyncResult synchronize(std::vector<FrameRecord> ir,
                       std::vector<FrameRecord> rgb,
                       const SyncConfig& config = {});

/// Median of per-thermal-frame nearest RGB time deltas (rgb_t - ir_t);
/// usable as SyncConfig.offset. Throws ManifestError on empty streams.
double estimate_offset(const std::vector<FrameRecord>& ir,
                       const std::vector<FrameRecord>& rgb);

}  // namespace msi
