#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "drtrack/geometry.hpp"
#include "drtrack/metrics.hpp"
#include "drtrack/tracker.hpp"

namespace drtrack {

struct TargetSpec {
  explicit TargetSpec(const BBox& start) : start_box(start) {}

  BBox start_box;                 // box at frame 1
  double vx = 0.0, vy = 0.0;      // pixels per frame
  std::optional<int> turn_frame;  // from this frame on, the target moves with (turn_vx, turn_vy)
  double turn_vx = 0.0, turn_vy = 0.0;
  double depth_start = 2.0;       // meters at frame 1
  double depth_rate = 0.0;        // meters per frame
  std::vector<std::pair<int, int>> visible;  // inclusive frame intervals; empty means always visible

  bool visible_at(int frame) const {
    if (visible.empty()) return true;
    return std::any_of(visible.begin(), visible.end(),
                       [&](const auto& iv) { return frame >= iv.first && frame <= iv.second; });
  }

  double depth_at(int frame) const { return depth_start + depth_rate * (frame - 1); }

  /// Unclipped, unrounded box at `frame`.
  BBox box_at(int frame) const {
    double dx = 0.0, dy = 0.0;
    for (int f = 2; f <= frame; ++f) {
      const bool turned = turn_frame && f >= *turn_frame;
      dx += turned ? turn_vx : vx;
      dy += turned ? turn_vy : vy;
    }
    return start_box.translated(dx, dy);
  }
};

struct NoiseModel {
  double jitter_std = 0.0;  // Gaussian std on each box corner, pixels
  double fp_rate = 0.0;     // probability of one spurious box per frame
  double fn_rate = 0.0;     // probability of dropping each true detection
};

struct ScenarioSpec {
  std::string name;
  std::uint64_t seed = 1;
  int num_frames = 30;
  int width = 640;
  int height = 360;
  double background_depth = 10.0;
  std::vector<TargetSpec> targets;
  NoiseModel noise;

  void validate() const {
    if (num_frames < 0) throw std::invalid_argument("scenario '" + name + "': negative frame count");
    if (width < 1 || height < 1) throw std::invalid_argument("scenario '" + name + "': empty image");
    if (!(background_depth > 0.0)) throw std::invalid_argument("scenario '" + name + "': background depth must be > 0");
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(noise.fp_rate) || !rate_ok(noise.fn_rate)) {
      throw std::invalid_argument("scenario '" + name + "': rates must lie in [0, 1]");
    }
    if (!(noise.jitter_std >= 0.0)) throw std::invalid_argument("scenario '" + name + "': jitter must be >= 0");
    for (const auto& t : targets) {
      for (int f = 1; f <= num_frames; ++f) {
        if (!(t.depth_at(f) > 0.0)) throw std::invalid_argument("scenario '" + name + "': target depth must stay > 0");
      }
    }
  }
};

struct Scenario {
  ScenarioSpec spec;
  Sequence gt;                               // identities are target indices + 1
  std::vector<FrameDetections> detections;   // frames 1..num_frames
  std::vector<std::optional<DepthMap>> depth;
};

namespace detail {

// Rounded, image-clipped box; nullopt when less than 2 px remains on either axis.
inline std::optional<BBox> visible_box(const BBox& b, int width, int height) {
  const double x1 = std::clamp(std::round(b.x1()), 0.0, static_cast<double>(width));
  const double y1 = std::clamp(std::round(b.y1()), 0.0, static_cast<double>(height));
  const double x2 = std::clamp(std::round(b.x2()), 0.0, static_cast<double>(width));
  const double y2 = std::clamp(std::round(b.y2()), 0.0, static_cast<double>(height));
  if (x2 - x1 < 2.0 || y2 - y1 < 2.0) return std::nullopt;
  return BBox(x1, y1, x2, y2);
}

inline void fill_box(DepthMap& d, const BBox& b, double meters) {
  const PixelSpan s = pixel_span(b, d.width(), d.height());
  for (std::size_t v = s.v0; v < s.v1; ++v)
    for (std::size_t u = s.u0; u < s.u1; ++u) d.set(u, v, meters);
}

}  // namespace detail

/**
 * Renders a scenario: ground truth, noisy detections and per-frame depth.
 * Depth maps paint targets far-to-near over a constant background, so the
 * nearer target owns overlapping pixels. Deterministic for a fixed seed.
 */
inline Scenario generate(const ScenarioSpec& spec) {
  spec.validate();
  Scenario sc;
  sc.spec = spec;
  sc.gt = Sequence(spec.num_frames);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = spec.width, h = spec.height;

  for (int f = 1; f <= spec.num_frames; ++f) {
    DepthMap depth(static_cast<std::size_t>(spec.width), static_cast<std::size_t>(spec.height), spec.background_depth);
    FrameDetections fd;
    fd.frame = f;

    std::vector<std::pair<double, BBox>> painted;
    for (std::size_t k = 0; k < spec.targets.size(); ++k) {
      const TargetSpec& t = spec.targets[k];
      if (!t.visible_at(f)) continue;
      const auto box = detail::visible_box(t.box_at(f), spec.width, spec.height);
      if (!box) continue;
      sc.gt.add(f, static_cast<int>(k) + 1, *box);
      painted.emplace_back(t.depth_at(f), *box);

      // Draws are consumed unconditionally so one target's noise does not shift another's.
      const double drop = unit(rng);
      double c[4];
      for (double& e : c) e = jitter(rng) * spec.noise.jitter_std;
      const double score = 0.6 + 0.4 * unit(rng);
      if (drop < spec.noise.fn_rate) continue;
      double x1 = std::clamp(box->x1() + c[0], 0.0, w - 1.0);
      double y1 = std::clamp(box->y1() + c[1], 0.0, h - 1.0);
      double x2 = std::clamp(box->x2() + c[2], x1 + 1.0, w);
      double y2 = std::clamp(box->y2() + c[3], y1 + 1.0, h);
      if (x2 <= x1) x2 = x1 + 1.0;
      if (y2 <= y1) y2 = y1 + 1.0;
      fd.detections.push_back({x1, y1, x2, y2, score, std::nullopt});
    }

    const double fp_draw = unit(rng);
    const double bw = 30.0 + 70.0 * unit(rng), bh = 60.0 + 140.0 * unit(rng);
    const double bx = unit(rng) * std::max(1.0, w - bw), by = unit(rng) * std::max(1.0, h - bh);
    const double fp_score = 0.15 + 0.45 * unit(rng);
    if (fp_draw < spec.noise.fp_rate) {
      const double x2 = std::min(bx + bw, w), y2 = std::min(by + bh, h);
      if (x2 > bx && y2 > by) fd.detections.push_back({bx, by, x2, y2, fp_score, std::nullopt});
    }
    for (std::size_t i = fd.detections.size(); i > 1; --i) {
      std::swap(fd.detections[i - 1], fd.detections[static_cast<std::size_t>(unit(rng) * i) % i]);
    }

    std::stable_sort(painted.begin(), painted.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [meters, box] : painted) detail::fill_box(depth, box, meters);

    sc.detections.push_back(std::move(fd));
    sc.depth.emplace_back(std::move(depth));
  }
  return sc;
}

/// Crossing geometry of a two-target scenario, measured on its ground truth.
struct CrossingInfo {
  int frame = 0;            // frame where the two ground-truth boxes overlap most
  double overlap = 0.0;     // IoU between the two boxes at that frame
  double ambiguity = 1.0;   // mean per-track IoU gap between the correct and swapped pairing
  double depth_gap = 0.0;   // |depth difference| at that frame, meters
};

/**
 * The pairing gap compares the previous-frame boxes against the current ones:
 * |(IoU(A',A) + IoU(B',B)) - (IoU(A',B) + IoU(B',A))| / 2. Returns nullopt
 * unless the scenario has exactly two targets that are both present at the
 * crossing frame and the frame before it.
 */
inline std::optional<CrossingInfo> crossing_info(const Scenario& sc) {
  if (sc.spec.targets.size() != 2) return std::nullopt;
  auto find = [&](int f, int id) -> std::optional<BBox> {
    for (const auto& lb : sc.gt.frame(f))
      if (lb.id == id) return lb.box;
    return std::nullopt;
  };
  CrossingInfo best;
  bool found = false;
  for (int f = 2; f <= sc.gt.num_frames(); ++f) {
    const auto a = find(f, 1), b = find(f, 2), pa = find(f - 1, 1), pb = find(f - 1, 2);
    if (!a || !b || !pa || !pb) continue;
    const double ov = iou(*a, *b);
    if (!found || ov > best.overlap) {
      found = true;
      best.frame = f;
      best.overlap = ov;
      const double correct = iou(*pa, *a) + iou(*pb, *b);
      const double swapped = iou(*pa, *b) + iou(*pb, *a);
      best.ambiguity = std::abs(correct - swapped) / 2.0;
      best.depth_gap = std::abs(sc.spec.targets[0].depth_at(f) - sc.spec.targets[1].depth_at(f));
    }
  }
  if (!found) return std::nullopt;
  return best;
}

namespace detail {

// Two targets that swap image positions over 20 frames at distinct depths.
// Boxes coincide horizontally at the meeting frame.
inline ScenarioSpec crossing_spec(std::uint64_t seed, int index) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  ScenarioSpec s;
  s.name = "crossing_" + std::to_string(index);
  s.seed = seed;
  s.num_frames = 30;
  s.width = 640;
  s.height = 360;
  s.background_depth = 12.0;
  const double bw = std::round(range(40, 70)), bh = std::round(range(110, 160));
  const double speed = range(3.0, 6.0);
  const double cy = 180.0, dy = std::round(range(-6, 6));
  const int meet = 16;
  const double x_meet = 320.0;

  const double near = range(1.5, 3.0);
  const double gap = range(0.5, 3.5);
  const bool a_near = u(rng) < 0.5;

  TargetSpec a{BBox::from_center(x_meet - speed * (meet - 1), cy, bw, bh)};
  a.vx = speed;
  TargetSpec b{BBox::from_center(x_meet + speed * (meet - 1), cy + dy, bw, bh)};
  b.vx = -speed;
  a.depth_start = a_near ? near : near + gap;
  b.depth_start = a_near ? near + gap : near;
  s.targets = {a, b};
  s.noise.jitter_std = range(1.0, 3.0);
  return s;
}

inline TargetSpec random_target(std::mt19937_64& rng, int width, int height, int num_frames) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  const double bw = std::round(range(30, 70)), bh = std::round(range(70, 160));
  const double vx = range(-4, 4), vy = range(-1.5, 1.5);
  // Keep the mid-sequence position inside the image.
  const double mx = range(bw, width - bw), my = range(bh / 2 + 5, height - bh / 2 - 5);
  const double half = (num_frames - 1) / 2.0;
  TargetSpec t{BBox::from_center(mx - vx * half, my - vy * half, bw, bh)};
  t.vx = vx;
  t.vy = vy;
  t.depth_start = range(1.0, 8.0);
  t.depth_rate = range(-0.01, 0.01);
  return t;
}

}  // namespace detail

/**
 * Named scenario suites:
 *   crossing   100 two-target crossings at distinct depths
 *   occlusion  30 scenarios with targets hidden for 5-15 frames
 *   lifecycle  30 scenarios with short-lived targets and dense false positives
 *   scale      20 scenarios with 1..20 targets
 */
inline std::vector<ScenarioSpec> scenario_suite(std::string_view name, std::uint64_t base_seed = 1) {
  std::vector<ScenarioSpec> out;
  auto sub_seed = [&](int i) { return base_seed * 1000003ULL + static_cast<std::uint64_t>(i) * 7919ULL + 17ULL; };

  if (name == "crossing") {
    for (int i = 0; i < 100; ++i) out.push_back(detail::crossing_spec(sub_seed(i), i));
  } else if (name == "occlusion") {
    for (int i = 0; i < 30; ++i) {
      std::mt19937_64 rng(sub_seed(i));
      std::uniform_int_distribution<int> ntargets(1, 3), gap_len(5, 15), gap_start(10, 25);
      ScenarioSpec s;
      s.name = "occlusion_" + std::to_string(i);
      s.seed = sub_seed(i);
      s.num_frames = 60;
      const int n = ntargets(rng);
      for (int k = 0; k < n; ++k) {
        TargetSpec t = detail::random_target(rng, s.width, s.height, s.num_frames);
        const int start = gap_start(rng);
        t.visible = {{1, start - 1}, {start + gap_len(rng), s.num_frames}};
        s.targets.push_back(t);
      }
      s.noise.jitter_std = 1.0;
      out.push_back(s);
    }
  } else if (name == "lifecycle") {
    for (int i = 0; i < 30; ++i) {
      std::mt19937_64 rng(sub_seed(i));
      std::uniform_int_distribution<int> ntargets(2, 6), life(3, 10), begin(1, 30);
      ScenarioSpec s;
      s.name = "lifecycle_" + std::to_string(i);
      s.seed = sub_seed(i);
      s.num_frames = 40;
      const int n = ntargets(rng);
      for (int k = 0; k < n; ++k) {
        TargetSpec t = detail::random_target(rng, s.width, s.height, s.num_frames);
        const int b = begin(rng);
        t.visible = {{b, b + life(rng) - 1}};
        s.targets.push_back(t);
      }
      s.noise = {1.0, 0.8, 0.05};
      out.push_back(s);
    }
  } else if (name == "scale") {
    for (int i = 0; i < 20; ++i) {
      std::mt19937_64 rng(sub_seed(i));
      ScenarioSpec s;
      s.name = "scale_" + std::to_string(i);
      s.seed = sub_seed(i);
      s.num_frames = 40;
      for (int k = 0; k <= i; ++k) s.targets.push_back(detail::random_target(rng, s.width, s.height, s.num_frames));
      s.noise = {1.5, 0.1, 0.05};
      out.push_back(s);
    }
  } else {
    throw std::invalid_argument("unknown scenario suite '" + std::string(name) +
                                "' (expected crossing, occlusion, lifecycle or scale)");
  }
  return out;
}

/// Tracker output of a run as a Sequence over the scenario's frames.
inline Sequence results_to_sequence(const std::vector<FrameResult>& results, int num_frames) {
  Sequence s(num_frames);
  for (const auto& fr : results)
    for (const auto& t : fr.tracks) s.add(fr.frame, t.id, t.box);
  return s;
}

}  // namespace drtrack
