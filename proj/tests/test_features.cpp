#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "msifuse/features.hpp"

using namespace msi;

namespace {

ImageBuffer constant_image(int w, int h, uint16_t v) {
  ImageBuffer img(w, h, 1, 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set(x, y, 0, v);
  return img;
}

ImageBuffer random_image(int w, int h, uint32_t seed) {
  std::mt19937 rng(seed);
  ImageBuffer img(w, h, 1, 8);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set(x, y, 0, static_cast<uint16_t>(rng() % 256));
  return img;
}

/// Independent re-statement of the detection predicate: count circle
/// neighbors differing by more than tau, candidate iff count >= 7.
bool oracle_candidate(const ImageBuffer& img, int x, int y, double tau) {
  const double ip = img.at(x, y);
  int count = 0;
  for (const auto& [dx, dy] : circle16()) {
    const double in = img.at(x + dx, y + dy);
    if (in > ip + tau || in < ip - tau) ++count;
  }
  return count >= 7;
}

std::set<std::pair<int, int>> candidate_set(const std::vector<Keypoint>& kps) {
  std::set<std::pair<int, int>> s;
  for (const auto& kp : kps)
    s.insert({static_cast<int>(kp.p.x), static_cast<int>(kp.p.y)});
  return s;
}

}  // namespace

TEST_CASE("constant image has no keypoints") {
  CHECK(detect(constant_image(64, 64, 100), 10.0).empty());
}

TEST_CASE("circle count threshold is exactly 7") {
  // center 100; set k circle neighbors to a contrasting value
  auto build = [](int k, uint16_t bright) {
    ImageBuffer img = constant_image(64, 64, 100);
    for (int i = 0; i < k; ++i) {
      const auto [dx, dy] = circle16()[i];
      img.set(32 + dx, 32 + dy, 0, bright);
    }
    return img;
  };
  SUBCASE("8 of 16 at +20 qualifies") {
    const auto kps = detect(build(8, 120), 10.0, /*nms=*/false);
    CHECK(candidate_set(kps).count({32, 32}) == 1);
  }
  SUBCASE("6 of 16 at +50 does not qualify") {
    const auto kps = detect(build(6, 150), 10.0, /*nms=*/false);
    CHECK(candidate_set(kps).count({32, 32}) == 0);
  }
  SUBCASE("7 exactly qualifies") {
    const auto kps = detect(build(7, 150), 10.0, /*nms=*/false);
    CHECK(candidate_set(kps).count({32, 32}) == 1);
  }
}

TEST_CASE("pre-NMS candidates equal the brute-force predicate everywhere") {
  for (uint32_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const ImageBuffer img = random_image(64, 64, seed);
    for (double tau : {10.0, 20.0, 40.0}) {
      std::set<std::pair<int, int>> expected;
      for (int y = kBorderMargin; y < 64 - kBorderMargin; ++y)
        for (int x = kBorderMargin; x < 64 - kBorderMargin; ++x)
          if (oracle_candidate(img, x, y, tau)) expected.insert({x, y});
      CHECK(candidate_set(detect(img, tau, /*nms=*/false)) == expected);
    }
  }
}

TEST_CASE("detection is invariant under constant intensity shift") {
  ImageBuffer img = random_image(64, 64, 9);
  // keep samples in [30, 225] so a +-20 shift cannot clip
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      img.set(x, y, 0, static_cast<uint16_t>(30 + img.at(x, y) % 196));
  ImageBuffer shifted = img;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      shifted.set(x, y, 0, static_cast<uint16_t>(img.at(x, y) + 20));
  CHECK(candidate_set(detect(img, 15.0)) ==
        candidate_set(detect(shifted, 15.0)));
}

TEST_CASE("detect output ordering and small-image rejection") {
  CHECK_THROWS_AS(detect(constant_image(32, 32, 0), 10.0), FeatureError);
  const auto kps = detect(random_image(80, 80, 12), 20.0);
  for (size_t i = 1; i < kps.size(); ++i) {
    CHECK(kps[i - 1].score >= kps[i].score);
    if (kps[i - 1].score == kps[i].score)
      CHECK((kps[i - 1].p.y < kps[i].p.y ||
             (kps[i - 1].p.y == kps[i].p.y && kps[i - 1].p.x < kps[i].p.x)));
  }
  for (const auto& kp : kps) {
    CHECK(kp.p.x >= kBorderMargin);
    CHECK(kp.p.y >= kBorderMargin);
    CHECK(kp.p.x < 80 - kBorderMargin);
    CHECK(kp.p.y < 80 - kBorderMargin);
    CHECK(kp.score > 0);
  }
}

TEST_CASE("orientation from intensity moments") {
  SUBCASE("mass on the +x axis gives theta = 0") {
    ImageBuffer img = constant_image(64, 64, 0);
    // symmetric about the horizontal axis, all mass to the right
    for (int dy = -3; dy <= 3; ++dy)
      for (int dx = 5; dx <= 10; ++dx) img.set(32 + dx, 32 + dy, 0, 200);
    CHECK(orientation(img, {32, 32}) == doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("m01 = m10 > 0 gives pi/4") {
    ImageBuffer img = constant_image(64, 64, 0);
    img.set(32 + 7, 32 + 7, 0, 255);  // single diagonal mass point
    CHECK(orientation(img, {32, 32}) == doctest::Approx(M_PI / 4));
  }
  SUBCASE("90-degree rotation adds pi/2") {
    ImageBuffer img = constant_image(64, 64, 50);
    std::mt19937 rng(5);
    for (int dy = -15; dy <= 15; ++dy)
      for (int dx = 0; dx <= 15; ++dx)
        if (dx * dx + dy * dy <= 225)
          img.set(32 + dx, 32 + dy, 0, 50 + rng() % 150);
    // rotate the patch by 90 degrees CCW in image coordinates: (x,y)->(-y,x)
    ImageBuffer rot = constant_image(64, 64, 50);
    for (int dy = -15; dy <= 15; ++dy)
      for (int dx = -15; dx <= 15; ++dx)
        if (dx * dx + dy * dy <= 225)
          rot.set(32 - dy, 32 + dx, 0, img.at(32 + dx, 32 + dy));
    const double t0 = orientation(img, {32, 32});
    const double t1 = orientation(rot, {32, 32});
    double diff = t1 - t0 - M_PI / 2;
    while (diff > M_PI) diff -= 2 * M_PI;
    while (diff < -M_PI) diff += 2 * M_PI;
    CHECK(std::abs(diff) < 0.05);
  }
  SUBCASE("patch outside image throws") {
    CHECK_THROWS_AS(orientation(constant_image(64, 64, 0), {5, 32}),
                    FeatureError);
  }
}

TEST_CASE("make_pattern determinism and clipping") {
  const SamplingPattern a = make_pattern(256, 42);
  const SamplingPattern b = make_pattern(256, 42);
  REQUIRE(a.pairs.size() == 256);
  for (size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(a.pairs[i].first.x == b.pairs[i].first.x);
    CHECK(a.pairs[i].second.y == b.pairs[i].second.y);
    CHECK(a.pairs[i].first.x * a.pairs[i].first.x +
              a.pairs[i].first.y * a.pairs[i].first.y <=
          15 * 15);
    CHECK(a.pairs[i].second.x * a.pairs[i].second.x +
              a.pairs[i].second.y * a.pairs[i].second.y <=
          15 * 15);
  }
  CHECK(make_pattern(8, 7).pairs.size() == 8);
  CHECK_THROWS_AS(make_pattern(4, 1), FeatureError);
}

TEST_CASE("describe") {
  const SamplingPattern pattern = make_pattern(256, 42);
  const Keypoint kp{{32, 32}, 1.0, 0.0};

  SUBCASE("constant image gives the all-zeros descriptor (tie rule)") {
    const Descriptor d = describe(constant_image(64, 64, 77), kp, pattern);
    for (int i = 0; i < d.size(); ++i) CHECK_FALSE(d.bit(i));
  }
  SUBCASE("deterministic") {
    const ImageBuffer img = random_image(64, 64, 31);
    const Descriptor d1 = describe(img, kp, pattern);
    const Descriptor d2 = describe(img, kp, pattern);
    CHECK(hamming_distance(d1, d2) == 0);
  }
  SUBCASE("monotone gradient sets bits exactly where pa is left of pb") {
    ImageBuffer img(64, 64, 1, 8);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) img.set(x, y, 0, static_cast<uint16_t>(x));
    const Descriptor d = describe(img, kp, pattern);
    for (size_t i = 0; i < pattern.pairs.size(); ++i)
      CHECK(d.bit(static_cast<int>(i)) ==
            (pattern.pairs[i].first.x < pattern.pairs[i].second.x));
  }
  SUBCASE("bits invariant under positive affine intensity change") {
    ImageBuffer img = random_image(64, 64, 33);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        img.set(x, y, 0, static_cast<uint16_t>(img.at(x, y) % 100));
    ImageBuffer affine = img;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        affine.set(x, y, 0, static_cast<uint16_t>(2 * img.at(x, y) + 30));
    CHECK(hamming_distance(describe(img, kp, pattern),
                           describe(affine, kp, pattern)) == 0);
  }
  SUBCASE("patch outside image throws") {
    CHECK_THROWS_AS(
        describe(constant_image(64, 64, 0), {{5, 5}, 1.0, 0.0}, pattern),
        FeatureError);
  }
}

TEST_CASE("hamming distance and matching") {
  const SamplingPattern pattern = make_pattern(256, 42);
  std::mt19937 rng(55);
  auto random_desc = [&](int flips, const Descriptor* base) {
    Descriptor d(256);
    if (base) {
      d = *base;
      std::set<int> flipped;
      while (static_cast<int>(flipped.size()) < flips) {
        const int b = rng() % 256;
        if (flipped.insert(b).second) {
          // flip via XOR on a fresh descriptor
          Descriptor tmp(256);
          for (int i = 0; i < 256; ++i)
            if (d.bit(i) != (i == b)) tmp.set_bit(i);
          d = tmp;
        }
      }
    } else {
      for (int i = 0; i < 256; ++i)
        if (rng() % 2) d.set_bit(i);
    }
    return d;
  };

  SUBCASE("identical lists match with distance zero") {
    std::vector<Descriptor> set;
    for (int i = 0; i < 10; ++i) set.push_back(random_desc(0, nullptr));
    const auto matches = match(set, set);
    // distinct random vectors: everything self-matches at distance 0
    REQUIRE(matches.size() == 10);
    for (const auto& m : matches) {
      CHECK(m.index_1 == m.index_2);
      CHECK(m.distance == 0);
    }
  }
  SUBCASE("single pair differing in 3 bits") {
    const Descriptor a = random_desc(0, nullptr);
    const Descriptor b = random_desc(3, &a);
    CHECK(hamming_distance(a, b) == 3);
    const auto matches = match({a}, {b});
    REQUIRE(matches.size() == 1);
    CHECK(matches[0].distance == 3);
  }
  SUBCASE("distance beyond the default threshold is rejected") {
    Descriptor a(256), b(256);
    for (int i = 0; i < 200; ++i) b.set_bit(i);
    CHECK(hamming_distance(a, b) == 200);
    CHECK(match({a}, {b}).empty());  // 200 > 256/4 = 64
  }
  SUBCASE("cross-check symmetry") {
    std::vector<Descriptor> s1, s2;
    for (int i = 0; i < 20; ++i) s1.push_back(random_desc(0, nullptr));
    for (int i = 0; i < 20; ++i) s2.push_back(random_desc(0, nullptr));
    const auto fwd = match(s1, s2);
    const auto rev = match(s2, s1);
    std::set<std::pair<int, int>> f, r;
    for (const auto& m : fwd) f.insert({m.index_1, m.index_2});
    for (const auto& m : rev) r.insert({m.index_2, m.index_1});
    CHECK(f == r);
  }
  SUBCASE("empty inputs give empty output") {
    CHECK(match({}, {}).empty());
    CHECK(match({random_desc(0, nullptr)}, {}).empty());
  }
}

TEST_CASE("render_matches layout") {
  const ImageBuffer img1 = random_image(64, 48, 71);
  const ImageBuffer img2 = random_image(80, 64, 72);
  const std::vector<Keypoint> kps1{{{32, 24}, 1.0, 0.0}};
  const std::vector<Keypoint> kps2{{{40, 30}, 1.0, 0.0}};

  SUBCASE("canvas dimensions") {
    const ImageBuffer canvas = render_matches(img1, img2, kps1, kps2, {});
    CHECK(canvas.width() == 64 + 80);
    CHECK(canvas.height() == 64);
    CHECK(canvas.channels() == 3);
  }
  SUBCASE("a match draws line pixels, zero matches draws none") {
    const ImageBuffer plain = render_matches(img1, img2, kps1, kps2, {});
    const ImageBuffer lined =
        render_matches(img1, img2, kps1, kps2, {{0, 0, 5}});
    auto count_red = [](const ImageBuffer& img) {
      int n = 0;
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
          if (img.at(x, y, 0) == 255 && img.at(x, y, 1) == 0 &&
              img.at(x, y, 2) == 0)
            ++n;
      return n;
    };
    CHECK(count_red(plain) == 0);
    CHECK(count_red(lined) > 50);  // a long diagonal line
  }
  SUBCASE("deterministic output") {
    const ImageBuffer a = render_matches(img1, img2, kps1, kps2, {{0, 0, 5}});
    const ImageBuffer b = render_matches(img1, img2, kps1, kps2, {{0, 0, 5}});
    CHECK(a.data() == b.data());
  }
}

TEST_CASE("steering: descriptors track a 30-degree rotation") {
  // rotationally structured synthetic pattern: bright blobs on mid-gray
  const int w = 200, h = 200;
  ImageBuffer img = constant_image(w, h, 128);
  std::mt19937 rng(91);
  std::vector<std::pair<double, double>> centers;
  for (int b = 0; b < 40; ++b) {
    const double bx = 40 + rng() % (w - 80);
    const double by = 40 + rng() % (h - 80);
    const double amp = (rng() % 2 ? 1 : -1) * (60 + rng() % 60);
    centers.push_back({bx, by});
    for (int y = -12; y <= 12; ++y)
      for (int x = -12; x <= 12; ++x) {
        const double v = img.at(static_cast<int>(bx) + x,
                                static_cast<int>(by) + y) +
                         amp * std::exp(-(x * x + y * y) / 18.0);
        img.set(static_cast<int>(bx) + x, static_cast<int>(by) + y, 0,
                static_cast<uint16_t>(std::clamp(v, 0.0, 255.0)));
      }
  }

  const double angle = 30.0 * M_PI / 180.0;
  const double c = std::cos(angle), s = std::sin(angle);
  const double cx = w / 2.0, cy = h / 2.0;
  // rotated copy via inverse nearest-neighbor-free bilinear sampling
  ImageBuffer rot = constant_image(w, h, 128);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double sx = c * (x - cx) + s * (y - cy) + cx;
      const double sy = -s * (x - cx) + c * (y - cy) + cy;
      if (sx < 0 || sy < 0 || sx > w - 2 || sy > h - 2) continue;
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const double fx = sx - x0, fy = sy - y0;
      const double v = (1 - fx) * (1 - fy) * img.at(x0, y0) +
                       fx * (1 - fy) * img.at(x0 + 1, y0) +
                       (1 - fx) * fy * img.at(x0, y0 + 1) +
                       fx * fy * img.at(x0 + 1, y0 + 1);
      rot.set(x, y, 0, static_cast<uint16_t>(std::lround(v)));
    }

  const SamplingPattern pattern = make_pattern(256, 42);
  int total = 0, close = 0;
  const auto kps = detect(img, 15.0);
  for (const auto& kp : kps) {
    // ground-truth corresponding location in the rotated image
    const double qx = c * (kp.p.x - cx) - s * (kp.p.y - cy) + cx;
    const double qy = s * (kp.p.x - cx) + c * (kp.p.y - cy) + cy;
    if (qx < kBorderMargin + 1 || qy < kBorderMargin + 1 ||
        qx > w - kBorderMargin - 2 || qy > h - kBorderMargin - 2)
      continue;
    Keypoint a = kp;
    a.theta = orientation(img, a.p);
    Keypoint b{{std::round(qx), std::round(qy)}, 0.0, 0.0};
    b.theta = orientation(rot, b.p);
    const Descriptor da = describe(img, a, pattern);
    const Descriptor db = describe(rot, b, pattern);
    ++total;
    if (hamming_distance(da, db) <= 0.2 * 256) ++close;
  }
  REQUIRE(total >= 10);
  CHECK(close >= 0.8 * total);
}
