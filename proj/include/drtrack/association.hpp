#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "drtrack/assignment.hpp"
#include "drtrack/geometry.hpp"
#include "drtrack/motion.hpp"

namespace drtrack {

struct AssociationParams {
  double lambda = 0.3;                // weight of the velocity-direction prior
  double gate = 0.3;                  // minimum fused similarity for a first-round match
  double second_round_iou_gate = 0.3; // minimum IoU against the last observation in recovery
  bool second_round = true;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
    if (!(gate >= 0.0 && gate <= 1.0)) throw std::invalid_argument("gate must lie in [0, 1]");
    if (!(second_round_iou_gate >= 0.0 && second_round_iou_gate <= 1.0)) {
      throw std::invalid_argument("second_round_iou_gate must lie in [0, 1]");
    }
  }
};

/// What the first association round needs to know about a live track.
struct TrackCue {
  BBox predicted;
  std::optional<double> depth;
  VelocityDir direction;        // the track's own recent motion direction
  std::optional<BBox> anchor;   // earlier observation that candidate directions start from
};

struct DetectionCue {
  BBox box;
  std::optional<double> depth;
};

/// Every term that enters one cost-matrix entry, kept for diagnostics and tests.
struct PairTerms {
  double iou = 0.0;
  std::optional<double> depth_similarity;
  double rgbd = 0.0;
  double vdc = 0.0;
  double cost = 0.0;
};

/// -(S_RGBD + lambda * VDC)
inline double association_cost(double s_rgbd, double vdc, double lambda) noexcept {
  return -(s_rgbd + lambda * vdc);
}

inline PairTerms pair_terms(const TrackCue& t, const DetectionCue& d, const AssociationParams& assoc,
                            const SimilarityParams& sim) {
  PairTerms p;
  p.iou = iou(t.predicted, d.box);
  p.depth_similarity = depth_similarity(d.depth, t.depth, sim.sigma);
  p.rgbd = rgbd_similarity(p.iou, p.depth_similarity, sim);
  const VelocityDir candidate = t.anchor ? observation_direction(*t.anchor, d.box) : VelocityDir{};
  p.vdc = vdc_score(t.direction, candidate);
  p.cost = association_cost(p.rgbd, p.vdc, assoc.lambda);
  return p;
}

/**
 * Rows are tracks, columns are detections. Pairs whose fused similarity falls
 * below the gate are forbidden rather than given a large finite cost.
 */
inline CostMatrix build_cost_matrix(std::span<const TrackCue> tracks, std::span<const DetectionCue> dets,
                                    const AssociationParams& assoc, const SimilarityParams& sim) {
  CostMatrix c(tracks.size(), dets.size());
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = 0; j < dets.size(); ++j) {
      const PairTerms p = pair_terms(tracks[i], dets[j], assoc, sim);
      if (p.rgbd < assoc.gate) {
        c.forbid(i, j);
      } else {
        c.set(i, j, p.cost);
      }
    }
  }
  return c;
}

/**
 * Observation-centric recovery over first-round leftovers: Hungarian on
 * -IoU(last observation, detection), pairs below iou_gate forbidden.
 * Returned matches index into the full track/detection lists.
 */
inline std::vector<std::pair<std::size_t, std::size_t>> second_round_recovery(
    std::span<const std::size_t> unmatched_tracks, std::span<const std::size_t> unmatched_dets,
    std::span<const BBox> last_observations, std::span<const BBox> det_boxes, double iou_gate) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (unmatched_tracks.empty() || unmatched_dets.empty()) return out;
  CostMatrix c(unmatched_tracks.size(), unmatched_dets.size());
  for (std::size_t i = 0; i < unmatched_tracks.size(); ++i) {
    for (std::size_t j = 0; j < unmatched_dets.size(); ++j) {
      const double s = iou(last_observations[unmatched_tracks[i]], det_boxes[unmatched_dets[j]]);
      if (s < iou_gate || s <= 0.0) {
        c.forbid(i, j);
      } else {
        c.set(i, j, -s);
      }
    }
  }
  for (const auto& [i, j] : solve_assignment(c).matches) out.emplace_back(unmatched_tracks[i], unmatched_dets[j]);
  return out;
}

}  // namespace drtrack
