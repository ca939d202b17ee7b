#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "drtrack/assignment.hpp"
#include "drtrack/geometry.hpp"

namespace drtrack {

/// Raw text produced by a grounding model.
struct GroundingResponse {
  std::string raw;
};

struct RewardBreakdown {
  int format = 0;
  double iou = 0.0;
  double total = 0.0;
  int matches = 0;  // number of pairs the assignment produced (diagnostic)
};

struct RewardOptions {
  // Permissive mode accepts any text around a single <answer>...</answer> block
  // and skips the <think> requirement. Off by default.
  bool permissive = false;
};

namespace detail {

inline bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

inline std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

inline bool starts_with_at(std::string_view s, std::size_t pos, std::string_view tag) {
  return s.substr(pos, tag.size()) == tag;
}

// Returns the answer body when the envelope is well formed.
inline std::optional<std::string_view> answer_body(std::string_view s, bool permissive) {
  constexpr std::string_view think_open = "<think>", think_close = "</think>";
  constexpr std::string_view ans_open = "<answer>", ans_close = "</answer>";
  if (permissive) {
    const auto open = s.find(ans_open);
    if (open == std::string_view::npos) return std::nullopt;
    const auto body = open + ans_open.size();
    const auto close = s.find(ans_close, body);
    if (close == std::string_view::npos) return std::nullopt;
    if (s.find(ans_open, close) != std::string_view::npos) return std::nullopt;
    return s.substr(body, close - body);
  }

  std::size_t pos = skip_space(s, 0);
  if (!starts_with_at(s, pos, think_open)) return std::nullopt;
  pos += think_open.size();
  const auto think_end = s.find(think_close, pos);
  if (think_end == std::string_view::npos) return std::nullopt;
  const std::string_view think = s.substr(pos, think_end - pos);
  if (think.find(think_open) != std::string_view::npos || think.find(ans_open) != std::string_view::npos ||
      think.find(ans_close) != std::string_view::npos) {
    return std::nullopt;
  }
  pos = skip_space(s, think_end + think_close.size());
  if (!starts_with_at(s, pos, ans_open)) return std::nullopt;
  pos += ans_open.size();
  const auto close = s.find(ans_close, pos);
  if (close == std::string_view::npos) return std::nullopt;
  const std::string_view body = s.substr(pos, close - pos);
  if (body.find(ans_open) != std::string_view::npos) return std::nullopt;
  if (skip_space(s, close + ans_close.size()) != s.size()) return std::nullopt;
  return body;
}

// Array of objects, each with "bbox_2d": [x1, y1, x2, y2] of finite numbers and positive extent.
inline std::optional<std::vector<BBox>> parse_box_array(std::string_view body) {
  const nlohmann::json j = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_array()) return std::nullopt;
  std::vector<BBox> boxes;
  boxes.reserve(j.size());
  for (const auto& item : j) {
    if (!item.is_object()) return std::nullopt;
    const auto it = item.find("bbox_2d");
    if (it == item.end() || !it->is_array() || it->size() != 4) return std::nullopt;
    double v[4];
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& e = (*it)[k];
      if (!e.is_number()) return std::nullopt;
      v[k] = e.get<double>();
    }
    auto b = BBox::make(v[0], v[1], v[2], v[3]);
    if (!b) return std::nullopt;
    boxes.push_back(*b);
  }
  return boxes;
}

}  // namespace detail

/// 1 when the response follows the <think>...</think><answer>[...]</answer> grammar, else 0.
inline int format_reward(const GroundingResponse& r, const RewardOptions& opt = {}) {
  const auto body = detail::answer_body(r.raw, opt.permissive);
  return body && detail::parse_box_array(*body) ? 1 : 0;
}

/// Boxes in answer order when the format is valid; empty otherwise.
inline std::vector<BBox> parse_answer_boxes(const GroundingResponse& r, const RewardOptions& opt = {}) {
  const auto body = detail::answer_body(r.raw, opt.permissive);
  if (!body) return {};
  return detail::parse_box_array(*body).value_or(std::vector<BBox>{});
}

/// IoU values of a max-total-IoU one-to-one matching between predictions and ground truth.
inline std::vector<double> matched_ious(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
  std::vector<double> out;
  if (preds.empty() || gts.empty()) return out;
  CostMatrix c(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j) c.set(i, j, -iou(preds[i], gts[j]));
  for (const auto& [i, j] : solve_assignment(c).matches) out.push_back(iou(preds[i], gts[j]));
  return out;
}

/// Sum of matched IoUs. Summed in ascending order so equal-valued matchings give identical sums.
inline double iou_reward(const std::vector<BBox>& preds, const std::vector<BBox>& gts) {
  std::vector<double> v = matched_ious(preds, gts);
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum;
}

inline RewardBreakdown total_reward(const GroundingResponse& r, const std::vector<BBox>& gts,
                                    const RewardOptions& opt = {}) {
  RewardBreakdown out;
  const auto body = detail::answer_body(r.raw, opt.permissive);
  const auto boxes = body ? detail::parse_box_array(*body) : std::nullopt;
  if (!boxes) return out;
  out.format = 1;
  out.iou = iou_reward(*boxes, gts);
  out.matches = static_cast<int>(std::min(boxes->size(), gts.size()));
  out.total = out.format + out.iou;
  return out;
}

}  // namespace drtrack
