#include "msifuse/sync.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace msi {
namespace {

void sort_by_time(std::vector<FrameRecord>& v) {
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
    return a.t < b.t;
  });
}

}  // namespace

SyncResult synchronize(std::vector<FrameRecord> ir,
                       std::vector<FrameRecord> rgb,
                       const SyncConfig& config) {
  if (!(config.tolerance > 0))
    throw ManifestError("sync tolerance must be positive");
  sort_by_time(ir);
  sort_by_time(rgb);

  // Greedy over candidate pairs in ascending dt, ties toward earlier RGB.
  struct Candidate {
    double dt;
    size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (size_t i = 0; i < ir.size(); ++i) {
    const double ti = ir[i].t + config.offset;
    for (size_t j = 0; j < rgb.size(); ++j) {
      const double dt = std::abs(ti - rgb[j].t);
      if (dt <= config.tolerance) candidates.push_back({dt, i, j});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const Candidate& a, const Candidate& b) {
                     if (a.dt != b.dt) return a.dt < b.dt;
                     if (rgb[a.j].t != rgb[b.j].t)
                       return rgb[a.j].t < rgb[b.j].t;
                     return ir[a.i].t < ir[b.i].t;
                   });

  std::vector<bool> ir_used(ir.size(), false), rgb_used(rgb.size(), false);
  SyncResult result;
  for (const auto& c : candidates) {
    if (ir_used[c.i] || rgb_used[c.j]) continue;
    ir_used[c.i] = true;
    rgb_used[c.j] = true;
    result.pairs.push_back({"", rgb[c.j].t, ir[c.i], rgb[c.j], c.dt});
  }
  std::stable_sort(result.pairs.begin(), result.pairs.end(),
                   [](const SyncedPair& a, const SyncedPair& b) {
                     return a.t < b.t;
                   });
  for (size_t k = 0; k < result.pairs.size(); ++k) {
    char id[16];
    std::snprintf(id, sizeof(id), "pair-%06zu", k + 1);
    result.pairs[k].id = id;
  }
  for (size_t i = 0; i < ir.size(); ++i)
    if (!ir_used[i]) result.unmatched_ir.push_back(ir[i]);
  for (size_t j = 0; j < rgb.size(); ++j)
    if (!rgb_used[j]) result.unmatched_rgb.push_back(rgb[j]);
  return result;
}

double estimate_offset(const std::vector<FrameRecord>& ir,
                       const std::vector<FrameRecord>& rgb) {
  if (ir.empty() || rgb.empty())
    throw ManifestError("estimate_offset requires non-empty streams");
  std::vector<double> deltas;
  deltas.reserve(ir.size());
  for (const auto& f : ir) {
    double best = rgb.front().t - f.t;
    for (const auto& g : rgb)
      if (std::abs(g.t - f.t) < std::abs(best)) best = g.t - f.t;
    deltas.push_back(best);
  }
  std::sort(deltas.begin(), deltas.end());
  const size_t n = deltas.size();
  return n % 2 ? deltas[n / 2] : 0.5 * (deltas[n / 2 - 1] + deltas[n / 2]);
}

}  // namespace msi
