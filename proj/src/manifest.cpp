#include "msifuse/manifest.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

namespace msi {

std::vector<FrameRecord> parse_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest: " + path.string());

  const auto base = path.parent_path();
  std::vector<FrameRecord> records;
  std::unordered_set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto where = path.string() + ":" + std::to_string(lineno);

    const size_t c1 = line.find(',');
    const size_t c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ManifestError("missing column at " + where);

    FrameRecord rec;
    rec.frame_id = line.substr(0, c1);
    const std::string t_str = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string rel = line.substr(c2 + 1);
    if (rec.frame_id.empty() || rel.empty())
      throw ManifestError("missing column at " + where);

    const char* first = t_str.data();
    const char* last = first + t_str.size();
    auto [ptr, ec] = std::from_chars(first, last, rec.t);
    if (ec != std::errc{} || ptr != last)
      throw ManifestError("non-numeric timestamp '" + t_str + "' at " + where);
    if (rec.t < 0)
      throw ManifestError("negative timestamp at " + where);
    if (!seen.insert(rec.frame_id).second)
      throw ManifestError("duplicate frame_id '" + rec.frame_id + "' at " +
                          where);

    const std::filesystem::path rel_path(rel);
    rec.path = rel_path.is_absolute() ? rel_path : base / rel_path;
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace msi
