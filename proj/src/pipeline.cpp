#include "msifuse/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "msifuse/image_io.hpp"

namespace msi {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& keys,
                         const std::string& where) {
  for (const auto& [k, v] : obj.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

GammaMode gamma_mode_from_string(const std::string& s) {
  if (s == "literal") return GammaMode::Literal;
  if (s == "zero") return GammaMode::Zero;
  if (s == "recenter") return GammaMode::Recenter;
  throw ConfigError("unknown gamma_mode: " + s);
}

/// 8-bit gray working copy of whatever arrives (16-bit thermal included).
ImageBuffer working_gray(const ImageBuffer& img) {
  ImageBuffer g = to_grayscale(img);
  if (g.depth() == 16) g = normalize_16_to_8(g);
  return g;
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(sync.tolerance > 0)) throw ConfigError("sync.tolerance must be > 0");
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  if (descriptor_bits < 8) throw ConfigError("descriptor bits must be >= 8");
  if (fixed_alpha < 0 || fixed_alpha > 1)
    throw ConfigError("fixed_alpha must lie in [0, 1]");
  if (ransac.max_iterations < 1 || !(ransac.inlier_threshold > 0))
    throw ConfigError("invalid ransac settings");
  if (max_keypoints < 8) throw ConfigError("max_keypoints too small");
}

PipelineConfig parse_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error: " + std::string(e.what()));
  }

  PipelineConfig c;
  reject_unknown_keys(j,
                      {"sync", "tau", "descriptor", "matcher", "ransac",
                       "fusion", "edge_domain", "max_keypoints"},
                      "config root");
  if (j.contains("sync")) {
    const auto& s = j["sync"];
    reject_unknown_keys(s, {"tolerance", "offset"}, "sync");
    c.sync.tolerance = s.value("tolerance", c.sync.tolerance);
    c.sync.offset = s.value("offset", c.sync.offset);
  }
  c.tau = j.value("tau", c.tau);
  if (j.contains("descriptor")) {
    const auto& d = j["descriptor"];
    reject_unknown_keys(d, {"bits", "seed"}, "descriptor");
    c.descriptor_bits = d.value("bits", c.descriptor_bits);
    c.descriptor_seed = d.value("seed", c.descriptor_seed);
  }
  if (j.contains("matcher")) {
    const auto& m = j["matcher"];
    reject_unknown_keys(m, {"max_distance", "cross_check", "ratio"}, "matcher");
    c.matcher.max_distance = m.value("max_distance", c.matcher.max_distance);
    c.matcher.cross_check = m.value("cross_check", c.matcher.cross_check);
    c.matcher.ratio = m.value("ratio", c.matcher.ratio);
  }
  if (j.contains("ransac")) {
    const auto& r = j["ransac"];
    reject_unknown_keys(r, {"threshold", "iterations", "seed"}, "ransac");
    c.ransac.inlier_threshold = r.value("threshold", c.ransac.inlier_threshold);
    c.ransac.max_iterations = r.value("iterations", c.ransac.max_iterations);
    c.ransac.seed = r.value("seed", c.ransac.seed);
  }
  if (j.contains("fusion")) {
    const auto& f = j["fusion"];
    reject_unknown_keys(f, {"gamma_mode", "alpha_mode", "alpha", "colormap"},
                        "fusion");
    if (f.contains("gamma_mode"))
      c.gamma_mode = gamma_mode_from_string(f["gamma_mode"]);
    if (f.contains("alpha_mode")) {
      const std::string m = f["alpha_mode"];
      if (m == "fixed")
        c.alpha_mode = AlphaMode::Fixed;
      else if (m == "optimized")
        c.alpha_mode = AlphaMode::Optimized;
      else
        throw ConfigError("unknown alpha_mode: " + m);
    }
    c.fixed_alpha = f.value("alpha", c.fixed_alpha);
    c.colormap = f.value("colormap", c.colormap);
  }
  c.edge_domain = j.value("edge_domain", c.edge_domain);
  c.max_keypoints = j.value("max_keypoints", c.max_keypoints);
  c.validate();
  return c;
}

std::string PairReport::to_json(bool include_timings) const {
  json j;
  j["id"] = id;
  j["t"] = t;
  j["keypoints_ir"] = keypoints_ir;
  j["keypoints_rgb"] = keypoints_rgb;
  j["match_count"] = match_count;
  std::vector<double> hv;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) hv.push_back(H.h(r, col));
  j["H"] = hv;
  j["inlier_count"] = inlier_count;
  j["registration_error"] = registration_error;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["gamma"] = gamma;
  j["failure_stage"] = failure_stage;
  j["output_path"] = output_path;
  if (include_timings) {
    j["timings_ms"] = {{"detect", detect_ms},   {"describe", describe_ms},
                       {"match", match_ms},     {"register", register_ms},
                       {"fuse", fuse_ms}};
  }
  return j.dump(2) + "\n";
}

ImageBuffer apply_colormap(const ImageBuffer& gray) {
  const ImageBuffer g = working_gray(gray);
  ImageBuffer out(g.width(), g.height(), 3, 8);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double v = g.at(x, y) / 255.0;
      // iron-style ramp: black -> purple -> red -> yellow -> white
      const double r = std::clamp(3.0 * v, 0.0, 1.0);
      const double gg = std::clamp(3.0 * v - 1.0, 0.0, 1.0);
      const double b =
          std::clamp(v < 1.0 / 3 ? 1.5 * v : 3.0 * v - 2.0, 0.0, 1.0);
      out.set(x, y, 0, static_cast<uint16_t>(round_clamp(255 * r, 0, 255)));
      out.set(x, y, 1, static_cast<uint16_t>(round_clamp(255 * gg, 0, 255)));
      out.set(x, y, 2, static_cast<uint16_t>(round_clamp(255 * b, 0, 255)));
    }
  }
  return out;
}

std::pair<CompositeImage, PairReport> run_pair(const ImageBuffer& thermal,
                                               const ImageBuffer& rgb,
                                               const PipelineConfig& config) {
  config.validate();
  PairReport report;

  const ImageBuffer thermal_gray = working_gray(thermal);
  const ImageBuffer rgb_for_output =
      rgb.depth() == 16 ? normalize_16_to_8(to_grayscale(rgb)) : rgb;
  const ImageBuffer rgb_gray = working_gray(rgb);

  auto pass_through = [&](const std::string& stage) {
    report.failure_stage = stage;
    ValidityMask empty(rgb_gray.width(), rgb_gray.height(), false);
    FusionParams params;
    params.gamma_mode = GammaMode::Zero;
    CompositeImage composite = overlay(
        ImageBuffer(rgb_gray.width(), rgb_gray.height(), 1, 8), rgb_for_output,
        params, empty);
    return std::pair{std::move(composite), report};
  };

  // Detection domain: raw intensity, or gradient magnitude across the
  // modality gap.
  const ImageBuffer det_ir =
      config.edge_domain ? gradient_magnitude(thermal_gray) : thermal_gray;
  const ImageBuffer det_rgb =
      config.edge_domain ? gradient_magnitude(rgb_gray) : rgb_gray;

  auto t0 = Clock::now();
  std::vector<Keypoint> kps_ir, kps_rgb;
  try {
    kps_ir = detect(det_ir, config.tau);
    kps_rgb = detect(det_rgb, config.tau);
  } catch (const FeatureError&) {
    return pass_through("detect");
  }
  if (kps_ir.size() > static_cast<size_t>(config.max_keypoints))
    kps_ir.resize(config.max_keypoints);
  if (kps_rgb.size() > static_cast<size_t>(config.max_keypoints))
    kps_rgb.resize(config.max_keypoints);
  report.keypoints_ir = static_cast<int>(kps_ir.size());
  report.keypoints_rgb = static_cast<int>(kps_rgb.size());
  report.detect_ms = ms_since(t0);
  if (kps_ir.size() < 4 || kps_rgb.size() < 4) return pass_through("detect");

  t0 = Clock::now();
  const SamplingPattern pattern =
      make_pattern(config.descriptor_bits, config.descriptor_seed);
  std::vector<Descriptor> desc_ir, desc_rgb;
  for (auto& kp : kps_ir) {
    kp.theta = orientation(det_ir, kp.p);
    desc_ir.push_back(describe(det_ir, kp, pattern));
  }
  for (auto& kp : kps_rgb) {
    kp.theta = orientation(det_rgb, kp.p);
    desc_rgb.push_back(describe(det_rgb, kp, pattern));
  }
  report.describe_ms = ms_since(t0);

  t0 = Clock::now();
  const std::vector<Match> matches = match(desc_ir, desc_rgb, config.matcher);
  report.match_count = static_cast<int>(matches.size());
  report.match_ms = ms_since(t0);
  if (matches.size() < 4) return pass_through("match");

  t0 = Clock::now();
  std::vector<Correspondence> cs;
  for (const auto& m : matches)
    cs.push_back({kps_ir[m.index_1].p, kps_rgb[m.index_2].p});
  RegistrationReport reg;
  try {
    reg = estimate_robust(cs, config.ransac);
  } catch (const RegisterError&) {
    return pass_through("register");
  }
  report.H = reg.H;
  report.inlier_count = reg.inlier_count;
  report.registration_error = reg.total_error;
  report.register_ms = ms_since(t0);

  t0 = Clock::now();
  auto [warped, mask] =
      warp(thermal_gray, reg.H, rgb_gray.width(), rgb_gray.height());

  FusionParams params;
  params.gamma_mode = config.gamma_mode;
  if (config.alpha_mode == AlphaMode::Optimized && mask.any()) {
    // default target: per-pixel mean of the two working copies
    ImageBuffer target(rgb_gray.width(), rgb_gray.height(), 1, 8);
    for (int y = 0; y < target.height(); ++y)
      for (int x = 0; x < target.width(); ++x)
        target.set(x, y, 0,
                   static_cast<uint16_t>(round_clamp(
                       0.5 * (warped.at(x, y) + rgb_gray.at(x, y)), 0, 255)));
    const FusionParams opt = optimize_weights(warped, rgb_gray, target, mask);
    params.alpha = opt.alpha;
    params.beta = opt.beta;
  } else {
    params.alpha = config.fixed_alpha;
    params.beta = 1.0 - config.fixed_alpha;
  }
  params.gamma =
      offset_gamma(mean_intensity(warped), mean_intensity(rgb_gray));

  const ImageBuffer thermal_vis =
      config.colormap ? apply_colormap(warped) : warped;
  CompositeImage composite =
      overlay(thermal_vis, rgb_for_output, params, mask);
  report.alpha = params.alpha;
  report.beta = params.beta;
  report.gamma = params.gamma;
  report.fuse_ms = ms_since(t0);
  return {std::move(composite), report};
}

SessionSummary run_batch(const std::filesystem::path& ir_manifest,
                         const std::filesystem::path& rgb_manifest,
                         const PipelineConfig& config,
                         const std::filesystem::path& out_dir) {
  const auto t0 = Clock::now();
  const auto ir = parse_manifest(ir_manifest);
  const auto rgb = parse_manifest(rgb_manifest);
  const SyncResult sync = synchronize(ir, rgb, config.sync);

  std::filesystem::create_directories(out_dir);
  SessionSummary summary;
  json unmatched_ir = json::array(), unmatched_rgb = json::array();
  for (const auto& f : sync.unmatched_ir) unmatched_ir.push_back(f.frame_id);
  for (const auto& f : sync.unmatched_rgb) unmatched_rgb.push_back(f.frame_id);

  for (const auto& pair : sync.pairs) {
    const ImageBuffer thermal = load_image(pair.thermal.path);
    const ImageBuffer rgb_img = load_image(pair.rgb.path);
    auto [composite, report] = run_pair(thermal, rgb_img, config);
    report.id = pair.id;
    report.t = pair.t;
    const auto png_path = out_dir / (pair.id + ".png");
    report.output_path = png_path.string();
    save_image(composite.image, png_path);
    std::ofstream rep(out_dir / (pair.id + ".json"));
    rep << report.to_json();
    summary.pair_ids.push_back(pair.id);
    if (!report.failure_stage.empty()) ++summary.failures;
    ++summary.pair_count;
  }
  summary.total_ms = ms_since(t0);

  json s;
  s["pair_count"] = summary.pair_count;
  s["failures"] = summary.failures;
  s["pairs"] = summary.pair_ids;
  s["unmatched_ir"] = unmatched_ir;
  s["unmatched_rgb"] = unmatched_rgb;
  s["total_ms"] = summary.total_ms;
  std::ofstream out(out_dir / "session.json");
  out << s.dump(2) << "\n";
  return summary;
}

SynthSpec parse_synth_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open synth spec: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("synth spec parse error: " + std::string(e.what()));
  }
  reject_unknown_keys(j,
                      {"width", "height", "pattern", "rotation_deg",
                       "translation", "H", "noise_sigma", "invert", "seed"},
                      "synth spec");
  SynthSpec spec;
  spec.width = j.value("width", spec.width);
  spec.height = j.value("height", spec.height);
  if (j.contains("pattern"))
    spec.pattern = synth_pattern_from_string(j["pattern"]);
  spec.noise_sigma = j.value("noise_sigma", spec.noise_sigma);
  spec.invert_thermal = j.value("invert", spec.invert_thermal);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("H")) {
    const std::vector<double> hv = j["H"];
    if (hv.size() != 9) throw ConfigError("H must have 9 entries");
    Eigen::Matrix3d m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = hv[3 * r + c];
    spec.ground_truth = Homography::from_matrix(m);
  } else {
    const double deg = j.value("rotation_deg", 0.0);
    double tx = 0, ty = 0;
    if (j.contains("translation")) {
      const std::vector<double> tv = j["translation"];
      if (tv.size() != 2) throw ConfigError("translation must have 2 entries");
      tx = tv[0];
      ty = tv[1];
    }
    spec.ground_truth = rotation_translation_h(deg, tx, ty, spec.width / 2.0,
                                               spec.height / 2.0);
  }
  return spec;
}

std::string calibration_report_json(const CameraParams& params,
                                    const ConvergenceReport& report) {
  json j;
  j["initial_E"] = report.initial_error;
  j["final_E"] = report.final_error;
  j["iterations"] = report.iterations;
  j["termination"] = report.termination;
  j["accepted_E"] = report.accepted_errors;
  j["final_lambda"] = report.final_lambda;
  j["distortion_enabled"] = report.distortion_enabled;
  const Eigen::Vector3d aa = rotation_to_axis_angle(params.R);
  j["params"] = {{"f", params.f},
                 {"c_u", params.cu},
                 {"c_v", params.cv},
                 {"D", params.dist},
                 {"axis_angle", {aa.x(), aa.y(), aa.z()}},
                 {"t", {params.t.x(), params.t.y(), params.t.z()}}};
  return j.dump(2) + "\n";
}

}  // namespace msi
