#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "drtrack/assignment.hpp"
#include "drtrack/geometry.hpp"

namespace drtrack {

struct LabeledBox {
  int id;
  BBox box;
};

/**
 * Per-frame labeled boxes for one sequence, frames numbered 1..num_frames.
 * Used for ground truth and tracker output alike. Identities are opaque
 * labels; at most one box per identity per frame.
 */
class Sequence {
public:
  Sequence() = default;
  explicit Sequence(int num_frames) : frames_(static_cast<std::size_t>(num_frames)) {
    if (num_frames < 0) throw std::invalid_argument("negative frame count");
  }

  int num_frames() const noexcept { return static_cast<int>(frames_.size()); }

  void add(int frame, int id, const BBox& box) {
    if (frame < 1 || frame > num_frames()) {
      throw std::out_of_range("frame " + std::to_string(frame) + " outside 1.." + std::to_string(num_frames()));
    }
    if (id < 0) throw std::invalid_argument("identity must be >= 0");
    auto& f = frames_[static_cast<std::size_t>(frame - 1)];
    for (const auto& lb : f) {
      if (lb.id == id) {
        throw std::invalid_argument("identity " + std::to_string(id) + " appears twice in frame " +
                                    std::to_string(frame));
      }
    }
    f.push_back({id, box});
  }

  const std::vector<LabeledBox>& frame(int f) const { return frames_.at(static_cast<std::size_t>(f - 1)); }

  std::size_t box_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : frames_) n += f.size();
    return n;
  }

private:
  std::vector<std::vector<LabeledBox>> frames_;
};

using SequenceGT = Sequence;

inline constexpr int kNumAlphas = 19;

/// Localization thresholds 0.05, 0.10, ..., 0.95.
inline double hota_alpha(int k) noexcept { return static_cast<double>(5 * (k + 1)) / 100.0; }

struct MetricBundle {
  double hota = 0, deta = 0, assa = 0, detre = 0, detpr = 0, assre = 0, asspr = 0, loca = 0;
};

using AlphaArray = std::array<double, kNumAlphas>;

/// Per-threshold scores in [0, 1] plus the threshold-averaged bundle in percent.
struct HotaDetail {
  AlphaArray hota{}, deta{}, assa{}, detre{}, detpr{}, assre{}, asspr{}, loca{};
  MetricBundle bundle;
};

/**
 * Additive HOTA accumulators. Association sums are stored pre-weighted by TP
 * count so sequences pool by plain addition.
 */
struct HotaCounts {
  AlphaArray tp{}, fn{}, fp{}, assa_weighted{}, assre_weighted{}, asspr_weighted{}, loca_sum{};
  std::size_t gt_boxes = 0;
  std::size_t pred_boxes = 0;

  HotaCounts& operator+=(const HotaCounts& o) {
    for (int a = 0; a < kNumAlphas; ++a) {
      tp[a] += o.tp[a];
      fn[a] += o.fn[a];
      fp[a] += o.fp[a];
      assa_weighted[a] += o.assa_weighted[a];
      assre_weighted[a] += o.assre_weighted[a];
      asspr_weighted[a] += o.asspr_weighted[a];
      loca_sum[a] += o.loca_sum[a];
    }
    gt_boxes += o.gt_boxes;
    pred_boxes += o.pred_boxes;
    return *this;
  }
};

namespace detail {

inline std::unordered_map<int, std::size_t> index_ids(const Sequence& s) {
  std::set<int> ids;
  for (int f = 1; f <= s.num_frames(); ++f)
    for (const auto& lb : s.frame(f)) ids.insert(lb.id);
  std::unordered_map<int, std::size_t> out;
  for (int id : ids) out.emplace(id, out.size());
  return out;
}

}  // namespace detail

/**
 * HOTA accumulators for one sequence: one Hungarian matching per frame on
 * global-alignment-weighted IoU, thresholded at every alpha; association
 * scores from per-(gt id, pred id) match counts.
 */
inline HotaCounts hota_accumulate(const Sequence& gt, const Sequence& pred) {
  if (gt.num_frames() != pred.num_frames()) {
    throw std::invalid_argument("frame-range mismatch: ground truth has " + std::to_string(gt.num_frames()) +
                                " frames, prediction has " + std::to_string(pred.num_frames()));
  }
  constexpr double eps = std::numeric_limits<double>::epsilon();
  HotaCounts c;
  c.gt_boxes = gt.box_count();
  c.pred_boxes = pred.box_count();

  const auto gt_index = detail::index_ids(gt);
  const auto pr_index = detail::index_ids(pred);
  const std::size_t ng = gt_index.size(), np = pr_index.size();

  auto similarity = [](const std::vector<LabeledBox>& g, const std::vector<LabeledBox>& p) {
    std::vector<double> s(g.size() * p.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) s[i * p.size() + j] = iou(g[i].box, p[j].box);
    return s;
  };

  // Global alignment between identities, from soft per-frame overlap.
  std::vector<double> potential(ng * np, 0.0);
  std::vector<double> gt_count(ng, 0.0), pr_count(np, 0.0);
  for (int f = 1; f <= gt.num_frames(); ++f) {
    const auto& g = gt.frame(f);
    const auto& p = pred.frame(f);
    for (const auto& lb : g) gt_count[gt_index.at(lb.id)] += 1.0;
    for (const auto& lb : p) pr_count[pr_index.at(lb.id)] += 1.0;
    if (g.empty() || p.empty()) continue;
    const auto sim = similarity(g, p);
    std::vector<double> row_sum(g.size(), 0.0), col_sum(p.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) {
        row_sum[i] += sim[i * p.size() + j];
        col_sum[j] += sim[i * p.size() + j];
      }
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double s = sim[i * p.size() + j];
        const double denom = row_sum[i] + col_sum[j] - s;
        if (denom > eps) potential[gt_index.at(g[i].id) * np + pr_index.at(p[j].id)] += s / denom;
      }
  }
  std::vector<double> alignment(ng * np, 0.0);
  for (std::size_t a = 0; a < ng; ++a)
    for (std::size_t b = 0; b < np; ++b) {
      const double pm = potential[a * np + b];
      alignment[a * np + b] = pm / (gt_count[a] + pr_count[b] - pm);
    }

  std::vector<std::vector<double>> match_counts(kNumAlphas, std::vector<double>(ng * np, 0.0));
  for (int f = 1; f <= gt.num_frames(); ++f) {
    const auto& g = gt.frame(f);
    const auto& p = pred.frame(f);
    if (g.empty() || p.empty()) {
      for (int a = 0; a < kNumAlphas; ++a) {
        c.fn[a] += static_cast<double>(g.size());
        c.fp[a] += static_cast<double>(p.size());
      }
      continue;
    }
    const auto sim = similarity(g, p);
    CostMatrix score(g.size(), p.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) {
        const std::size_t gi = gt_index.at(g[i].id), pj = pr_index.at(p[j].id);
        score.set(i, j, -(alignment[gi * np + pj] * sim[i * p.size() + j]));
      }
    const Assignment matching = solve_assignment(score);
    for (int a = 0; a < kNumAlphas; ++a) {
      const double alpha = hota_alpha(a);
      double n_matched = 0.0;
      for (const auto& [i, j] : matching.matches) {
        const double s = sim[i * p.size() + j];
        if (s < alpha - eps) continue;
        n_matched += 1.0;
        c.loca_sum[a] += s;
        match_counts[a][gt_index.at(g[i].id) * np + pr_index.at(p[j].id)] += 1.0;
      }
      c.tp[a] += n_matched;
      c.fn[a] += static_cast<double>(g.size()) - n_matched;
      c.fp[a] += static_cast<double>(p.size()) - n_matched;
    }
  }

  for (int a = 0; a < kNumAlphas; ++a) {
    const auto& mc = match_counts[a];
    for (std::size_t x = 0; x < ng; ++x)
      for (std::size_t y = 0; y < np; ++y) {
        const double m = mc[x * np + y];
        if (m == 0.0) continue;
        c.assa_weighted[a] += m * m / std::max(1.0, gt_count[x] + pr_count[y] - m);
        c.assre_weighted[a] += m * m / std::max(1.0, gt_count[x]);
        c.asspr_weighted[a] += m * m / std::max(1.0, pr_count[y]);
      }
  }
  return c;
}

/// Final ratios from (possibly pooled) accumulators. Empty ground truth with empty prediction scores 100.
inline HotaDetail hota_finalize(const HotaCounts& c) {
  HotaDetail d;
  if (c.gt_boxes == 0 && c.pred_boxes == 0) {
    for (int a = 0; a < kNumAlphas; ++a) {
      d.hota[a] = d.deta[a] = d.assa[a] = d.detre[a] = d.detpr[a] = d.assre[a] = d.asspr[a] = d.loca[a] = 1.0;
    }
    d.bundle = {100, 100, 100, 100, 100, 100, 100, 100};
    return d;
  }
  MetricBundle& b = d.bundle;
  for (int a = 0; a < kNumAlphas; ++a) {
    const double tp = c.tp[a];
    d.detre[a] = tp / std::max(1.0, tp + c.fn[a]);
    d.detpr[a] = tp / std::max(1.0, tp + c.fp[a]);
    d.deta[a] = tp / std::max(1.0, tp + c.fn[a] + c.fp[a]);
    d.assa[a] = c.assa_weighted[a] / std::max(1.0, tp);
    d.assre[a] = c.assre_weighted[a] / std::max(1.0, tp);
    d.asspr[a] = c.asspr_weighted[a] / std::max(1.0, tp);
    d.loca[a] = std::max(1e-10, c.loca_sum[a]) / std::max(1e-10, tp);
    d.hota[a] = std::sqrt(d.deta[a] * d.assa[a]);
    b.hota += d.hota[a];
    b.deta += d.deta[a];
    b.assa += d.assa[a];
    b.detre += d.detre[a];
    b.detpr += d.detpr[a];
    b.assre += d.assre[a];
    b.asspr += d.asspr[a];
    b.loca += d.loca[a];
  }
  const double k = 100.0 / kNumAlphas;
  b.hota *= k;
  b.deta *= k;
  b.assa *= k;
  b.detre *= k;
  b.detpr *= k;
  b.assre *= k;
  b.asspr *= k;
  b.loca *= k;
  return d;
}

inline HotaDetail evaluate_detail(const Sequence& gt, const Sequence& pred) {
  return hota_finalize(hota_accumulate(gt, pred));
}

inline MetricBundle evaluate(const Sequence& gt, const Sequence& pred) { return evaluate_detail(gt, pred).bundle; }

/// Pools accumulators over all sequences before taking ratios.
inline MetricBundle evaluate_benchmark(const std::vector<std::pair<Sequence, Sequence>>& pairs) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_benchmark needs at least one sequence");
  HotaCounts total;
  for (const auto& [gt, pred] : pairs) total += hota_accumulate(gt, pred);
  return hota_finalize(total).bundle;
}

/// Unweighted mean of per-sequence bundles (the non-pooled alternative).
inline MetricBundle average_bundles(const std::vector<MetricBundle>& bundles) {
  if (bundles.empty()) throw std::invalid_argument("cannot average zero bundles");
  MetricBundle m;
  for (const auto& b : bundles) {
    m.hota += b.hota;
    m.deta += b.deta;
    m.assa += b.assa;
    m.detre += b.detre;
    m.detpr += b.detpr;
    m.assre += b.assre;
    m.asspr += b.asspr;
    m.loca += b.loca;
  }
  const double k = 1.0 / static_cast<double>(bundles.size());
  m.hota *= k;
  m.deta *= k;
  m.assa *= k;
  m.detre *= k;
  m.detpr *= k;
  m.assre *= k;
  m.asspr *= k;
  m.loca *= k;
  return m;
}

/**
 * Identity switches, CLEAR-MOT style: per frame, ground truth is matched to
 * predictions by max-IoU assignment at iou_threshold, with pairs continuing
 * the previous match preferred; a switch is counted whenever a ground truth
 * identity is matched to a different prediction identity than at its
 * previous match.
 */
inline int count_id_switches(const Sequence& gt, const Sequence& pred, double iou_threshold = 0.5) {
  std::map<int, int> last_match;
  int switches = 0;
  const int frames = std::min(gt.num_frames(), pred.num_frames());
  for (int f = 1; f <= frames; ++f) {
    const auto& g = gt.frame(f);
    const auto& p = pred.frame(f);
    if (g.empty() || p.empty()) continue;
    CostMatrix c(g.size(), p.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double s = iou(g[i].box, p[j].box);
        if (s < iou_threshold) {
          c.forbid(i, j);
        } else {
          const auto prev = last_match.find(g[i].id);
          const bool continues = prev != last_match.end() && prev->second == p[j].id;
          c.set(i, j, -s - (continues ? 1000.0 : 0.0));
        }
      }
    for (const auto& [i, j] : solve_assignment(c).matches) {
      auto [it, inserted] = last_match.try_emplace(g[i].id, p[j].id);
      if (!inserted && it->second != p[j].id) {
        ++switches;
        it->second = p[j].id;
      }
    }
  }
  return switches;
}

}  // namespace drtrack
