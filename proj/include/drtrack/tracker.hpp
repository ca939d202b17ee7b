#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "drtrack/assignment.hpp"
#include "drtrack/association.hpp"
#include "drtrack/geometry.hpp"
#include "drtrack/motion.hpp"

namespace drtrack {

enum class TrackStatus { Tentative, Confirmed, Dead };

/// Where a track's depth comes from when building the association cost.
enum class TrackDepthMode {
  CurrentFrame,     // mean depth under the predicted box in the current frame, last_depth as fallback
  LastObservation,  // depth of the last matched detection
};

/// Raw detection as it arrives from a detector or file; validated by the tracker.
struct Detection {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double score = 1.0;
  std::optional<double> depth_m;

  static Detection from_box(const BBox& b, double score = 1.0, std::optional<double> depth = std::nullopt) {
    return {b.x1(), b.y1(), b.x2(), b.y2(), score, depth};
  }
};

struct Observation {
  int frame;
  BBox box;
};

struct Track {
  int id = 0;
  KalmanState kf;
  std::vector<Observation> observations;
  int hits = 0;
  int age = 0;
  int time_since_update = 0;
  TrackStatus status = TrackStatus::Tentative;
  std::optional<double> last_depth;
  VelocityDir direction;

  const BBox& last_observation() const { return observations.back().box; }

  /// Observation delta frames before `frame`, searching delta = window..1, else the latest one.
  const BBox& previous_observation(int frame, int window) const {
    for (int dt = window; dt >= 1; --dt) {
      const int want = frame - dt;
      for (auto it = observations.rbegin(); it != observations.rend() && it->frame >= want; ++it) {
        if (it->frame == want) return it->box;
      }
    }
    return observations.back().box;
  }
};

struct TrackerParams {
  SimilarityParams sim;
  AssociationParams assoc;
  KalmanParams kalman;
  int max_age = 30;
  int min_hits = 3;
  double det_score_min = 0.1;
  int vdc_window = 3;
  TrackDepthMode depth_mode = TrackDepthMode::CurrentFrame;

  void validate() const {
    sim.validate();
    assoc.validate();
    kalman.validate();
    if (max_age < 1) throw std::invalid_argument("max_age must be >= 1");
    if (min_hits < 1) throw std::invalid_argument("min_hits must be >= 1");
    if (!(det_score_min >= 0.0 && det_score_min <= 1.0)) throw std::invalid_argument("det_score_min must lie in [0, 1]");
    if (vdc_window < 1) throw std::invalid_argument("vdc_window must be >= 1");
  }
};

struct TrackOutput {
  int id;
  BBox box;
};

struct FrameDiagnostics {
  int rejected = 0;      // invalid box or score
  int below_score = 0;   // valid but under det_score_min
  int first_round = 0;
  int second_round = 0;
  int births = 0;
  int deaths = 0;
};

struct FrameResult {
  int frame = 0;
  std::vector<TrackOutput> tracks;  // sorted by id
  FrameDiagnostics diagnostics;
};

struct TrackerStats {
  int frames = 0;
  int births = 0;
  int deaths = 0;
  int rejected = 0;
};

/**
 * Depth-aware observation-centric tracker for a single sequence.
 *
 * Each step predicts every live track, associates by the fused RGB-D cost
 * with the velocity-direction prior, recovers leftovers against last
 * observations, updates matches, then applies birth and death rules.
 * Not thread-safe; use one instance per sequence.
 */
class Tracker {
public:
  explicit Tracker(TrackerParams params = {}) : params_(std::move(params)) { params_.validate(); }

  const TrackerParams& params() const noexcept { return params_; }
  const std::vector<Track>& tracks() const noexcept { return tracks_; }
  const TrackerStats& stats() const noexcept { return stats_; }

  /// Frames must strictly increase. `depth` may be null when no depth map exists for the frame.
  FrameResult step(int frame, std::span<const Detection> raw_dets, const DepthMap* depth = nullptr) {
    if (last_frame_ && frame <= *last_frame_) {
      throw std::invalid_argument("frame " + std::to_string(frame) + " is not after frame " +
                                  std::to_string(*last_frame_));
    }
    last_frame_ = frame;
    ++stats_.frames;

    FrameResult result;
    result.frame = frame;

    std::vector<BBox> det_boxes;
    std::vector<std::optional<double>> det_depths;
    const std::optional<DepthIntegral> integral =
        depth && !depth->empty() ? std::optional<DepthIntegral>(std::in_place, *depth) : std::nullopt;
    for (const Detection& d : raw_dets) {
      const auto box = BBox::make(d.x1, d.y1, d.x2, d.y2);
      const bool score_ok = d.score >= 0.0 && d.score <= 1.0;
      const bool depth_ok = !d.depth_m || (std::isfinite(*d.depth_m) && *d.depth_m >= 0.0);
      if (!box || !score_ok || !depth_ok) {
        ++result.diagnostics.rejected;
        continue;
      }
      if (d.score < params_.det_score_min) {
        ++result.diagnostics.below_score;
        continue;
      }
      det_boxes.push_back(*box);
      if (d.depth_m && *d.depth_m > 0.0) {
        det_depths.push_back(*d.depth_m);
      } else {
        det_depths.push_back(integral ? integral->mean(*box) : std::nullopt);
      }
    }
    stats_.rejected += result.diagnostics.rejected;

    std::vector<TrackCue> cues;
    cues.reserve(tracks_.size());
    for (Track& t : tracks_) {
      t.kf = kf_predict(t.kf, params_.kalman);
      ++t.age;
      ++t.time_since_update;
      const BBox predicted = state_to_box(t.kf.mean).value_or(t.last_observation());
      std::optional<double> trk_depth = t.last_depth;
      if (params_.depth_mode == TrackDepthMode::CurrentFrame && integral) {
        if (auto sampled = integral->mean(predicted)) trk_depth = sampled;
      }
      cues.push_back({predicted, trk_depth, t.direction, t.previous_observation(frame, params_.vdc_window)});
    }

    std::vector<DetectionCue> det_cues;
    det_cues.reserve(det_boxes.size());
    for (std::size_t j = 0; j < det_boxes.size(); ++j) det_cues.push_back({det_boxes[j], det_depths[j]});

    const CostMatrix cost = build_cost_matrix(cues, det_cues, params_.assoc, params_.sim);
    Assignment first = solve_assignment(cost);
    std::vector<std::pair<std::size_t, std::size_t>> matches = first.matches;
    result.diagnostics.first_round = static_cast<int>(matches.size());

    std::vector<std::size_t> left_tracks = first.unmatched_rows;
    std::vector<std::size_t> left_dets = first.unmatched_cols;
    if (params_.assoc.second_round && !left_tracks.empty() && !left_dets.empty()) {
      std::vector<BBox> last_obs;
      last_obs.reserve(tracks_.size());
      for (const Track& t : tracks_) last_obs.push_back(t.last_observation());
      const auto recovered =
          second_round_recovery(left_tracks, left_dets, last_obs, det_boxes, params_.assoc.second_round_iou_gate);
      result.diagnostics.second_round = static_cast<int>(recovered.size());
      for (const auto& m : recovered) {
        matches.push_back(m);
        std::erase(left_tracks, m.first);
        std::erase(left_dets, m.second);
      }
    }

    for (const auto& [ti, dj] : matches) update_track(tracks_[ti], frame, det_boxes[dj], det_depths[dj]);

    for (std::size_t ti : left_tracks) {
      Track& t = tracks_[ti];
      if (t.status == TrackStatus::Tentative || t.time_since_update > params_.max_age) {
        t.status = TrackStatus::Dead;
        ++result.diagnostics.deaths;
      }
    }

    for (std::size_t dj : left_dets) {
      Track t;
      t.id = next_id_++;
      t.kf = kf_init(det_boxes[dj], params_.kalman);
      t.observations.push_back({frame, det_boxes[dj]});
      t.hits = 1;
      t.status = params_.min_hits <= 1 ? TrackStatus::Confirmed : TrackStatus::Tentative;
      t.last_depth = det_depths[dj];
      tracks_.push_back(std::move(t));
      ++result.diagnostics.births;
    }

    const bool warmup = stats_.frames <= params_.min_hits;
    for (const Track& t : tracks_) {
      if (t.status == TrackStatus::Dead || t.time_since_update != 0) continue;
      if (t.status != TrackStatus::Confirmed && !warmup) continue;
      result.tracks.push_back({t.id, state_to_box(t.kf.mean).value_or(t.last_observation())});
    }
    std::sort(result.tracks.begin(), result.tracks.end(),
              [](const TrackOutput& a, const TrackOutput& b) { return a.id < b.id; });

    std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::Dead; });
    stats_.births += result.diagnostics.births;
    stats_.deaths += result.diagnostics.deaths;
    return result;
  }

private:
  void update_track(Track& t, int frame, const BBox& box, std::optional<double> depth) {
    if (auto dir = observation_direction(t.previous_observation(frame, params_.vdc_window), box)) t.direction = dir;
    t.kf = kf_update(t.kf, box, params_.kalman);
    t.observations.push_back({frame, box});
    t.time_since_update = 0;
    ++t.hits;
    if (depth) t.last_depth = depth;
    if (t.status == TrackStatus::Tentative && t.hits >= params_.min_hits) t.status = TrackStatus::Confirmed;
  }

  TrackerParams params_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::optional<int> last_frame_;
  TrackerStats stats_;
};

struct FrameDetections {
  int frame = 0;
  std::vector<Detection> detections;
};

/// Runs a fresh tracker over a whole sequence. depth_by_frame must align with dets_by_frame.
inline std::vector<FrameResult> run_sequence(const std::vector<FrameDetections>& dets_by_frame,
                                             const std::vector<std::optional<DepthMap>>& depth_by_frame,
                                             const TrackerParams& params, TrackerStats* stats = nullptr) {
  if (dets_by_frame.size() != depth_by_frame.size()) {
    throw std::invalid_argument("detections cover " + std::to_string(dets_by_frame.size()) +
                                " frames but depth covers " + std::to_string(depth_by_frame.size()));
  }
  Tracker tracker(params);
  std::vector<FrameResult> out;
  out.reserve(dets_by_frame.size());
  for (std::size_t k = 0; k < dets_by_frame.size(); ++k) {
    const auto& depth = depth_by_frame[k];
    out.push_back(tracker.step(dets_by_frame[k].frame, dets_by_frame[k].detections, depth ? &*depth : nullptr));
  }
  if (stats) *stats = tracker.stats();
  return out;
}

}  // namespace drtrack
