#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace msi {

struct FrameRecord {
  std::string frame_id;
  double t = 0.0;  // seconds
  std::filesystem::path path;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parses a header-less CSV manifest: `frame_id,t_seconds,relative_path`.
/// Relative paths are resolved against the manifest's directory.
std::vector<FrameRecord> parse_manifest(const std::filesystem::path& path);

}  // namespace msi
