#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace drtrack {

/**
 * Axis-aligned pixel rectangle, (x1, y1) top-left and (x2, y2) bottom-right.
 *
 * Construction rejects non-finite coordinates and zero or negative extents,
 * so every BBox in the system has positive area.
 */
class BBox {
public:
  BBox(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
    if (!valid(x1, y1, x2, y2)) {
      throw std::invalid_argument("invalid box (" + std::to_string(x1) + ", " + std::to_string(y1) +
                                  ", " + std::to_string(x2) + ", " + std::to_string(y2) + ")");
    }
  }

  static bool valid(double x1, double y1, double x2, double y2) noexcept {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x2 > x1 && y2 > y1;
  }

  static std::optional<BBox> make(double x1, double y1, double x2, double y2) noexcept {
    if (!valid(x1, y1, x2, y2)) return std::nullopt;
    return BBox(x1, y1, x2, y2, Unchecked{});
  }

  static BBox from_center(double cx, double cy, double w, double h) {
    return BBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0);
  }

  double x1() const noexcept { return x1_; }
  double y1() const noexcept { return y1_; }
  double x2() const noexcept { return x2_; }
  double y2() const noexcept { return y2_; }

  double width() const noexcept { return x2_ - x1_; }
  double height() const noexcept { return y2_ - y1_; }
  double area() const noexcept { return width() * height(); }
  double cx() const noexcept { return (x1_ + x2_) / 2.0; }
  double cy() const noexcept { return (y1_ + y2_) / 2.0; }

  BBox translated(double dx, double dy) const { return BBox(x1_ + dx, y1_ + dy, x2_ + dx, y2_ + dy); }

  friend bool operator==(const BBox&, const BBox&) = default;

private:
  struct Unchecked {};
  BBox(double x1, double y1, double x2, double y2, Unchecked) noexcept
      : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {}

  double x1_, y1_, x2_, y2_;
};

/// Intersection-over-union in [0, 1]. Symmetric, and exactly 1 for identical boxes.
inline double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

/// Metric depth image in meters, row-major. A value of 0 marks an invalid pixel.
class DepthMap {
public:
  static constexpr double kInvalid = 0.0;

  DepthMap() = default;

  DepthMap(std::size_t width, std::size_t height, double fill = kInvalid)
      : width_(width), height_(height), values_(width * height, fill) {
    if (!(fill >= 0.0) || !std::isfinite(fill)) throw std::invalid_argument("depth fill must be finite and >= 0");
  }

  DepthMap(std::size_t width, std::size_t height, std::vector<double> values)
      : width_(width), height_(height), values_(std::move(values)) {
    if (values_.size() != width_ * height_) {
      throw std::invalid_argument("depth map has " + std::to_string(values_.size()) + " values, expected " +
                                  std::to_string(width_ * height_));
    }
    for (double v : values_) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("depth values must be finite and >= 0");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  bool empty() const noexcept { return values_.empty(); }

  double at(std::size_t u, std::size_t v) const { return values_[index(u, v)]; }
  void set(std::size_t u, std::size_t v, double meters) {
    if (!(meters >= 0.0) || !std::isfinite(meters)) throw std::invalid_argument("depth must be finite and >= 0");
    values_[index(u, v)] = meters;
  }

  const std::vector<double>& values() const noexcept { return values_; }

private:
  std::size_t index(std::size_t u, std::size_t v) const {
    if (u >= width_ || v >= height_) throw std::out_of_range("pixel outside depth map");
    return v * width_ + u;
  }

  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<double> values_;
};

/// Half-open pixel index ranges [u0, u1) x [v0, v1) whose pixel centers lie in a box.
struct PixelSpan {
  std::size_t u0 = 0, u1 = 0, v0 = 0, v1 = 0;
  bool empty() const noexcept { return u0 >= u1 || v0 >= v1; }
  std::size_t count() const noexcept { return empty() ? 0 : (u1 - u0) * (v1 - v0); }
};

/**
 * Pixels (u, v) with center (u + 0.5, v + 0.5) satisfying x1 <= cx < x2 and
 * y1 <= cy < y2, clipped to a width x height image.
 */
inline PixelSpan pixel_span(const BBox& b, std::size_t width, std::size_t height) noexcept {
  auto lo = [](double edge, std::size_t limit) {
    const double i = std::ceil(edge - 0.5);
    return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(limit)));
  };
  PixelSpan s;
  s.u0 = lo(b.x1(), width);
  s.u1 = lo(b.x2(), width);
  s.v0 = lo(b.y1(), height);
  s.v1 = lo(b.y2(), height);
  return s;
}

/// Mean of the valid (nonzero) depth pixels under a box, or nullopt when there are none.
inline std::optional<double> mean_box_depth(const DepthMap& d, const BBox& b) {
  const PixelSpan s = pixel_span(b, d.width(), d.height());
  if (s.empty()) return std::nullopt;
  double sum = 0.0;
  std::size_t n = 0;
  const auto& vals = d.values();
  for (std::size_t v = s.v0; v < s.v1; ++v) {
    for (std::size_t u = s.u0; u < s.u1; ++u) {
      const double z = vals[v * d.width() + u];
      if (z != DepthMap::kInvalid) {
        sum += z;
        ++n;
      }
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/**
 * Summed-area tables over valid depth and valid-pixel counts, so the per-box
 * mean costs O(1) after an O(width * height) build. Agrees with mean_box_depth
 * up to floating-point summation order.
 */
class DepthIntegral {
public:
  explicit DepthIntegral(const DepthMap& d)
      : width_(d.width()), height_(d.height()), sum_((width_ + 1) * (height_ + 1), 0.0),
        count_((width_ + 1) * (height_ + 1), 0) {
    const auto& vals = d.values();
    for (std::size_t v = 0; v < height_; ++v) {
      double row_sum = 0.0;
      std::size_t row_count = 0;
      for (std::size_t u = 0; u < width_; ++u) {
        const double z = vals[v * width_ + u];
        if (z != DepthMap::kInvalid) {
          row_sum += z;
          ++row_count;
        }
        sum_[idx(u + 1, v + 1)] = sum_[idx(u + 1, v)] + row_sum;
        count_[idx(u + 1, v + 1)] = count_[idx(u + 1, v)] + row_count;
      }
    }
  }

  std::optional<double> mean(const BBox& b) const noexcept {
    const PixelSpan s = pixel_span(b, width_, height_);
    if (s.empty()) return std::nullopt;
    const std::size_t n = count_[idx(s.u1, s.v1)] - count_[idx(s.u0, s.v1)] - count_[idx(s.u1, s.v0)] +
                          count_[idx(s.u0, s.v0)];
    if (n == 0) return std::nullopt;
    const double sum =
        sum_[idx(s.u1, s.v1)] - sum_[idx(s.u0, s.v1)] - sum_[idx(s.u1, s.v0)] + sum_[idx(s.u0, s.v0)];
    return sum / static_cast<double>(n);
  }

private:
  std::size_t idx(std::size_t u, std::size_t v) const noexcept { return v * (width_ + 1) + u; }

  std::size_t width_, height_;
  std::vector<double> sum_;
  std::vector<std::size_t> count_;
};

struct SimilarityParams {
  double alpha = 0.9;      // weight of IoU against depth similarity
  double sigma = 0.5;      // depth decay scale, meters
  double s_neutral = 0.5;  // depth similarity used when either depth is missing

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("sigma must be > 0");
    if (!(s_neutral >= 0.0 && s_neutral <= 1.0)) throw std::invalid_argument("s_neutral must lie in [0, 1]");
  }
};

/// exp(-|d_det - d_trk| / sigma)
inline double depth_similarity(double d_det, double d_trk, double sigma) noexcept {
  return std::exp(-std::abs(d_det - d_trk) / sigma);
}

/// Depth similarity for possibly-missing depths; nullopt when either side has no depth evidence.
inline std::optional<double> depth_similarity(std::optional<double> d_det, std::optional<double> d_trk,
                                              double sigma) noexcept {
  if (!d_det || !d_trk) return std::nullopt;
  return depth_similarity(*d_det, *d_trk, sigma);
}

/// alpha * IoU + (1 - alpha) * S_D, with S_D replaced by s_neutral when undefined.
inline double rgbd_similarity(double iou_score, std::optional<double> s_d, const SimilarityParams& p) noexcept {
  const double depth_term = s_d ? *s_d : p.s_neutral;
  return p.alpha * iou_score + (1.0 - p.alpha) * depth_term;
}

}  // namespace drtrack
