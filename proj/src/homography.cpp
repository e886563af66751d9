#include "msifuse/homography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace msi {
namespace {

constexpr double kWMin = 1e-12;

bool collinear(const PixelPoint& a, const PixelPoint& b, const PixelPoint& c,
               double tol = 1e-9) {
  const double cross =
      (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return std::abs(cross) <= tol;
}

struct Normalization {
  Eigen::Matrix3d T;
};

/// Isotropic scaling to mean distance sqrt(2) from the centroid.
Normalization hartley(const std::vector<Correspondence>& cs, bool source) {
  double mx = 0, my = 0;
  for (const auto& c : cs) {
    const PixelPoint& p = source ? c.p : c.q;
    mx += p.x;
    my += p.y;
  }
  mx /= cs.size();
  my /= cs.size();
  double mean_dist = 0;
  for (const auto& c : cs) {
    const PixelPoint& p = source ? c.p : c.q;
    mean_dist += std::hypot(p.x - mx, p.y - my);
  }
  mean_dist /= cs.size();
  const double s = mean_dist > kWMin ? std::sqrt(2.0) / mean_dist : 1.0;
  Normalization n;
  n.T << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return n;
}

Homography weighted_dlt(const std::vector<Correspondence>& cs,
                        const std::vector<double>& weights) {
  if (cs.size() < 4)
    throw RegisterError("at least 4 correspondences required");
  if (cs.size() <= 8) {
    for (size_t a = 0; a < cs.size(); ++a)
      for (size_t b = a + 1; b < cs.size(); ++b)
        for (size_t c = b + 1; c < cs.size(); ++c)
          if (collinear(cs[a].p, cs[b].p, cs[c].p))
            throw RegisterError("degenerate configuration: collinear points");
  }

  const Normalization Tp = hartley(cs, true), Tq = hartley(cs, false);
  Eigen::MatrixXd A(2 * cs.size(), 9);
  for (size_t i = 0; i < cs.size(); ++i) {
    const Eigen::Vector3d p =
        Tp.T * Eigen::Vector3d(cs[i].p.x, cs[i].p.y, 1.0);
    const Eigen::Vector3d q =
        Tq.T * Eigen::Vector3d(cs[i].q.x, cs[i].q.y, 1.0);
    const double w = weights.empty() ? 1.0 : std::sqrt(weights[i]);
    A.row(2 * i) << 0, 0, 0, -p.x(), -p.y(), -1, q.y() * p.x(),
        q.y() * p.y(), q.y();
    A.row(2 * i + 1) << p.x(), p.y(), 1, 0, 0, 0, -q.x() * p.x(),
        -q.x() * p.y(), -q.x();
    A.row(2 * i) *= w;
    A.row(2 * i + 1) *= w;
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  const Eigen::Matrix3d H = Tq.T.inverse() * Hn * Tp.T;
  return Homography::from_matrix(H);
}

}  // namespace

Homography Homography::from_matrix(const Eigen::Matrix3d& m) {
  if (std::abs(m(2, 2)) <= kWMin)
    throw RegisterError("h33 is zero, cannot normalize");
  Homography H;
  H.h = m / m(2, 2);
  H.h(2, 2) = 1.0;
  if (std::abs(H.h.determinant()) <= kWMin)
    throw RegisterError("homography is singular");
  return H;
}

Homography Homography::inverse() const {
  return from_matrix(h.inverse());
}

PixelPoint apply_h(const Homography& H, const PixelPoint& p) {
  const double w = H.h(2, 0) * p.x + H.h(2, 1) * p.y + H.h(2, 2);
  if (std::abs(w) <= kWMin)
    throw RegisterError("point maps to infinity");
  return {(H.h(0, 0) * p.x + H.h(0, 1) * p.y + H.h(0, 2)) / w,
          (H.h(1, 0) * p.x + H.h(1, 1) * p.y + H.h(1, 2)) / w};
}

double transform_error(const Homography& H, const Correspondence& c) {
  const PixelPoint m = apply_h(H, c.p);
  return std::hypot(c.q.x - m.x, c.q.y - m.y);
}

double total_transform_error(const Homography& H,
                             const std::vector<Correspondence>& cs) {
  double e = 0;
  for (const auto& c : cs) e += transform_error(H, c);
  return e;
}

Homography estimate_dlt(const std::vector<Correspondence>& cs) {
  return weighted_dlt(cs, {});
}

RegistrationReport estimate_robust(const std::vector<Correspondence>& cs,
                                   const RansacConfig& config) {
  if (cs.size() < 4)
    throw RegisterError("too few correspondences for robust estimation");

  std::mt19937 rng(config.seed);
  auto pick4 = [&]() {
    std::array<size_t, 4> idx{};
    for (int k = 0; k < 4; ++k) {
      for (;;) {
        const size_t c = rng() % cs.size();
        if (std::none_of(idx.begin(), idx.begin() + k,
                         [c](size_t v) { return v == c; })) {
          idx[k] = c;
          break;
        }
      }
    }
    return idx;
  };

  RegistrationReport best;
  int best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 0; it < config.max_iterations; ++it) {
    const auto idx = pick4();
    std::vector<Correspondence> sample;
    for (size_t i : idx) sample.push_back(cs[i]);
    Homography H;
    try {
      H = estimate_dlt(sample);
    } catch (const RegisterError&) {
      continue;  // degenerate sample
    }
    int count = 0;
    double err = 0;
    for (const auto& c : cs) {
      double e;
      try {
        e = transform_error(H, c);
      } catch (const RegisterError&) {
        continue;
      }
      if (e <= config.inlier_threshold) {
        ++count;
        err += e;
      }
    }
    if (count > best_count || (count == best_count && err < best_err)) {
      best_count = count;
      best_err = err;
      best.H = H;
    }
  }
  best.ransac_iterations = config.max_iterations;
  if (best_count < 8)
    throw RegisterError("no consensus: best inlier count " +
                        std::to_string(best_count));

  // Refit on the consensus set, then IRLS toward the sum-of-norms objective.
  auto inliers_of = [&](const Homography& H) {
    std::vector<Correspondence> in;
    std::vector<bool> flags(cs.size(), false);
    for (size_t i = 0; i < cs.size(); ++i) {
      try {
        if (transform_error(H, cs[i]) <= config.inlier_threshold) {
          flags[i] = true;
          in.push_back(cs[i]);
        }
      } catch (const RegisterError&) {
      }
    }
    return std::pair{in, flags};
  };

  auto [inliers, flags] = inliers_of(best.H);
  Homography H = best.H;
  try {
    H = estimate_dlt(inliers);
  } catch (const RegisterError&) {
  }
  double E = total_transform_error(H, inliers);
  {
    const double E0 = total_transform_error(best.H, inliers);
    if (E0 < E) {
      H = best.H;
      E = E0;
    }
  }

  int rounds = 0;
  std::vector<double> weights(inliers.size());
  for (; rounds < config.refine_max_rounds; ++rounds) {
    for (size_t i = 0; i < inliers.size(); ++i)
      weights[i] = 1.0 / std::max(transform_error(H, inliers[i]), 0.5);
    Homography Hn;
    try {
      Hn = weighted_dlt(inliers, weights);
    } catch (const RegisterError&) {
      break;
    }
    const double En = total_transform_error(Hn, inliers);
    if (En >= E - config.refine_tol) {
      if (En < E) {
        H = Hn;
        E = En;
      }
      break;
    }
    H = Hn;
    E = En;
  }

  std::tie(inliers, flags) = inliers_of(H);
  best.H = H;
  best.inlier_flags = flags;
  best.inlier_count = static_cast<int>(inliers.size());
  best.total_error = total_transform_error(H, inliers);
  best.refine_iterations = rounds;
  return best;
}

std::pair<ImageBuffer, ValidityMask> warp(const ImageBuffer& thermal,
                                          const Homography& H, int out_width,
                                          int out_height) {
  const Homography Hinv = H.inverse();
  ImageBuffer out(out_width, out_height, thermal.channels(), thermal.depth());
  ValidityMask mask(out_width, out_height, false);
  const int w = thermal.width(), h = thermal.height();
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      PixelPoint s;
      try {
        s = apply_h(Hinv, {static_cast<double>(x), static_cast<double>(y)});
      } catch (const RegisterError&) {
        continue;
      }
      if (s.x < 0 || s.y < 0 || s.x > w - 1 || s.y > h - 1) continue;
      const int x0 = std::min(static_cast<int>(s.x), w - 2 >= 0 ? w - 2 : 0);
      const int y0 = std::min(static_cast<int>(s.y), h - 2 >= 0 ? h - 2 : 0);
      const double fx = s.x - x0, fy = s.y - y0;
      for (int c = 0; c < thermal.channels(); ++c) {
        const double v00 = thermal.at(x0, y0, c);
        const double v10 = thermal.at(std::min(x0 + 1, w - 1), y0, c);
        const double v01 = thermal.at(x0, std::min(y0 + 1, h - 1), c);
        const double v11 =
            thermal.at(std::min(x0 + 1, w - 1), std::min(y0 + 1, h - 1), c);
        const double v = (1 - fx) * (1 - fy) * v00 + fx * (1 - fy) * v10 +
                         (1 - fx) * fy * v01 + fx * fy * v11;
        out.set(x, y, c,
                static_cast<uint16_t>(round_clamp(v, 0, thermal.max_value())));
      }
      mask.set(x, y, true);
    }
  }
  return {std::move(out), mask};
}

}  // namespace msi
