#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "msifuse/image_io.hpp"
#include "msifuse/pipeline.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

msi::CameraParams load_camera_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw msi::ConfigError("cannot open camera params: " + path.string());
  json j;
  in >> j;
  msi::CameraParams p;
  p.f = j.at("f");
  p.cu = j.at("c_u");
  p.cv = j.at("c_v");
  if (j.contains("D")) p.dist = j["D"].get<std::vector<double>>();
  if (j.contains("axis_angle")) {
    const std::vector<double> aa = j["axis_angle"];
    p.R = msi::axis_angle_to_rotation({aa.at(0), aa.at(1), aa.at(2)});
  }
  if (j.contains("t")) {
    const std::vector<double> t = j["t"];
    p.t = {t.at(0), t.at(1), t.at(2)};
  }
  return p;
}

int cmd_calibrate(const std::string& obs_path, const std::string& init_path,
                  int max_iters, const std::string& out_path) {
  const auto obs = msi::parse_observations(obs_path);
  const auto initial = load_camera_params(init_path);
  msi::SolverConfig config;
  if (max_iters > 0) config.max_iterations = max_iters;
  const auto [params, report] = msi::calibrate(initial, obs, config);
  const std::string doc = msi::calibration_report_json(params, report);
  if (out_path.empty()) {
    std::cout << doc;
  } else {
    std::ofstream out(out_path);
    if (!out) throw msi::ImageError(msi::ImageError::Kind::UnwritablePath,
                                    "cannot write report: " + out_path);
    out << doc;
  }
  return kExitOk;
}

int cmd_fuse(const std::string& ir_manifest, const std::string& rgb_manifest,
             const std::string& config_path, const std::string& out_dir) {
  const msi::PipelineConfig config =
      config_path.empty() ? msi::PipelineConfig{}
                          : msi::parse_pipeline_config(config_path);
  const auto summary =
      msi::run_batch(ir_manifest, rgb_manifest, config, out_dir);
  std::cout << "pairs: " << summary.pair_count
            << "  failures: " << summary.failures << "\n";
  return kExitOk;
}

int cmd_match(const std::string& img1_path, const std::string& img2_path,
              double tau, const std::string& out_path) {
  const auto img1 = msi::load_image(img1_path);
  const auto img2 = msi::load_image(img2_path);
  msi::PipelineConfig config;

  auto prep = [&](const msi::ImageBuffer& img) {
    msi::ImageBuffer g = msi::to_grayscale(img);
    if (g.depth() == 16) g = msi::normalize_16_to_8(g);
    return config.edge_domain ? msi::gradient_magnitude(g) : g;
  };
  const auto d1 = prep(img1), d2 = prep(img2);
  auto kps1 = msi::detect(d1, tau);
  auto kps2 = msi::detect(d2, tau);
  if (kps1.size() > static_cast<size_t>(config.max_keypoints))
    kps1.resize(config.max_keypoints);
  if (kps2.size() > static_cast<size_t>(config.max_keypoints))
    kps2.resize(config.max_keypoints);

  const auto pattern =
      msi::make_pattern(config.descriptor_bits, config.descriptor_seed);
  std::vector<msi::Descriptor> desc1, desc2;
  for (auto& kp : kps1) {
    kp.theta = msi::orientation(d1, kp.p);
    desc1.push_back(msi::describe(d1, kp, pattern));
  }
  for (auto& kp : kps2) {
    kp.theta = msi::orientation(d2, kp.p);
    desc2.push_back(msi::describe(d2, kp, pattern));
  }
  const auto matches = msi::match(desc1, desc2, config.matcher);
  msi::save_image(msi::render_matches(img1, img2, kps1, kps2, matches),
                  out_path);
  std::cout << "keypoints: " << kps1.size() << " / " << kps2.size()
            << "  matches: " << matches.size() << "\n";
  return kExitOk;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const msi::SynthSpec spec = msi::parse_synth_spec(spec_path);
  const msi::SynthResult result = msi::make_synthetic(spec);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  msi::save_image(result.rgb, dir / "rgb.png");
  msi::save_image(result.thermal, dir / "thermal.png");
  std::ofstream h(dir / "H.txt");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      h << result.ground_truth.h(r, c) << (c == 2 ? '\n' : ' ');
  std::cout << "wrote rgb.png, thermal.png, H.txt to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multispectral thermal/RGB registration and fusion toolkit"};
  app.require_subcommand(1);

  std::string obs_path, init_path, report_out;
  int max_iters = 0;
  auto* calibrate = app.add_subcommand(
      "calibrate", "Refine camera parameters from 3-D observations");
  calibrate->add_option("--observations", obs_path, "CSV rows X,Y,Z,u,v")
      ->required();
  calibrate->add_option("--init", init_path, "initial camera params (JSON)")
      ->required();
  calibrate->add_option("--max-iters", max_iters, "iteration cap");
  calibrate->add_option("--out", report_out, "report path (default stdout)");

  std::string ir_manifest, rgb_manifest, config_path, out_dir;
  auto* fuse = app.add_subcommand(
      "fuse", "Register and fuse synchronized thermal/RGB frame streams");
  fuse->add_option("--ir-manifest", ir_manifest, "thermal manifest CSV")
      ->required();
  fuse->add_option("--rgb-manifest", rgb_manifest, "RGB manifest CSV")
      ->required();
  fuse->add_option("--config", config_path, "pipeline config (JSON)");
  fuse->add_option("--out", out_dir, "output directory")->required();

  std::string img1, img2, match_out;
  double tau = 20.0;
  auto* match = app.add_subcommand(
      "match", "Visualize keypoint matches between two images");
  match->add_option("--img1", img1)->required();
  match->add_option("--img2", img2)->required();
  match->add_option("--tau", tau, "detector threshold");
  match->add_option("--out", match_out, "output image")->required();

  std::string spec_path, synth_out;
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic thermal/RGB pair with known homography");
  synth->add_option("--spec", spec_path, "synth spec (JSON)")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (calibrate->parsed())
      return cmd_calibrate(obs_path, init_path, max_iters, report_out);
    if (fuse->parsed())
      return cmd_fuse(ir_manifest, rgb_manifest, config_path, out_dir);
    if (match->parsed()) return cmd_match(img1, img2, tau, match_out);
    if (synth->parsed()) return cmd_synth(spec_path, synth_out);
  } catch (const msi::ImageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const msi::ManifestError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const msi::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
