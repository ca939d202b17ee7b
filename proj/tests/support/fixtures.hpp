#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "drtrack/geometry.hpp"
#include "drtrack/simulator.hpp"

namespace fixtures {

// Scratch directory removed on scope exit.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("drtrack_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

struct GoldenFormatCase {
  std::string response;
  int format;
};

inline std::vector<GoldenFormatCase> load_format_golden(const std::string& path) {
  std::ifstream in(path);
  std::vector<GoldenFormatCase> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    out.push_back({j.at("response").get<std::string>(), j.at("format").get<int>()});
  }
  return out;
}

// Integer-cornered boxes packed into a small canvas so overlaps are common.
inline std::vector<drtrack::BBox> random_boxes(std::mt19937& rng, std::size_t n, int canvas = 60) {
  std::uniform_int_distribution<int> pos(0, canvas), size(1, canvas / 2);
  std::vector<drtrack::BBox> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int x = pos(rng), y = pos(rng);
    const int w = size(rng), h = size(rng);
    out.emplace_back(x, y, x + w, y + h);
  }
  return out;
}

// A pair of box lists of sizes 0..5 each, with some ground-truth boxes copied into the predictions.
inline std::pair<std::vector<drtrack::BBox>, std::vector<drtrack::BBox>> reward_fixture(std::mt19937& rng) {
  std::uniform_int_distribution<int> len(0, 5);
  std::uniform_real_distribution<double> u(0, 1);
  auto preds = random_boxes(rng, static_cast<std::size_t>(len(rng)));
  auto gts = random_boxes(rng, static_cast<std::size_t>(len(rng)));
  for (std::size_t i = 0; i < std::min(preds.size(), gts.size()); ++i)
    if (u(rng) < 0.3) preds[i] = gts[gts.size() - 1 - i];
  return {preds, gts};
}

// Small noisy scenarios: 1..5 targets, 10..50 frames.
inline std::vector<drtrack::ScenarioSpec> small_scenarios(int count, std::uint64_t seed) {
  std::vector<drtrack::ScenarioSpec> out;
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(i) * 104729ULL);
    std::uniform_int_distribution<int> targets(1, 5), frames(10, 50);
    std::uniform_real_distribution<double> u(0, 1);
    drtrack::ScenarioSpec s;
    s.name = "small_" + std::to_string(i);
    s.seed = seed + static_cast<std::uint64_t>(i);
    s.num_frames = frames(rng);
    s.width = 320;
    s.height = 240;
    const int n = targets(rng);
    for (int k = 0; k < n; ++k) s.targets.push_back(drtrack::detail::random_target(rng, s.width, s.height, s.num_frames));
    s.noise = {2.0 * u(rng), 0.3 * u(rng), 0.2 * u(rng)};
    out.push_back(s);
  }
  return out;
}

// Valid annotation text with comments, blank lines, padding and shuffled record order.
inline std::string fuzz_gt_text(std::mt19937& rng, int records) {
  std::uniform_int_distribution<int> coord(-50, 2000), extent(1, 400), pad(0, 2), id(0, 999);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<std::string> lines;
  std::set<std::pair<int, int>> used;
  int fn = 1;
  while (static_cast<int>(lines.size()) < records) {
    if (u(rng) < 0.2) ++fn;
    const int i = id(rng);
    if (!used.emplace(fn, i).second) continue;
    const int x = coord(rng), y = coord(rng);
    const int v[6] = {fn, i, x, y, x + extent(rng), y + extent(rng)};
    std::string line;
    for (int k = 0; k < 6; ++k) {
      if (k) line += ',';
      line += std::string(static_cast<std::size_t>(pad(rng)), ' ') + std::to_string(v[k]);
    }
    lines.push_back(line);
  }
  std::shuffle(lines.begin(), lines.end(), rng);
  std::string text = "# fn, id, x1, y1, x2, y2\n";
  for (const auto& l : lines) {
    if (u(rng) < 0.02) text += "# note\n";
    if (u(rng) < 0.02) text += "\n";
    text += l;
    text += u(rng) < 0.05 ? "\r\n" : "\n";
  }
  return text;
}

}  // namespace fixtures
