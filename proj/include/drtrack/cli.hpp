#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "drtrack/io.hpp"
#include "drtrack/metrics.hpp"
#include "drtrack/rewards.hpp"
#include "drtrack/simulator.hpp"
#include "drtrack/tracker.hpp"

namespace drtrack::cli {

namespace fs = std::filesystem;

/// Input for one sequence: aligned detections and depth over frames 1..num_frames.
struct SequenceInput {
  std::string name;
  int num_frames = 0;
  std::vector<FrameDetections> detections;
  std::vector<std::optional<DepthMap>> depth;
};

struct SequenceSummary {
  std::string name;
  int frames = 0;
  int tracks = 0;  // distinct ids in the output
  int births = 0;
  int deaths = 0;
  int rejected = 0;
  double seconds = 0.0;
};

/// Tracker knobs exposed as flags; applied on top of the config file.
struct TrackerFlags {
  std::string config;
  std::optional<double> alpha, sigma, lambda, gate;
  std::optional<int> max_age, min_hits;

  void attach(CLI::App& app) {
    app.add_option("--config", config, "key = value config file (see the knob list in --help)");
    app.add_option("--alpha", alpha, "IoU weight in the fused similarity");
    app.add_option("--sigma", sigma, "depth similarity scale, meters");
    app.add_option("--lambda", lambda, "velocity-direction prior weight");
    app.add_option("--gate", gate, "first-round similarity gate");
    app.add_option("--max-age", max_age, "frames a track may coast");
    app.add_option("--min-hits", min_hits, "matches needed to confirm a track");
  }

  TrackerParams resolve() const {
    TrackerParams p;
    if (!config.empty()) p = parse_config(read_text_file(config), config);
    if (alpha) p.sim.alpha = *alpha;
    if (sigma) p.sim.sigma = *sigma;
    if (lambda) p.assoc.lambda = *lambda;
    if (gate) p.assoc.gate = *gate;
    if (max_age) p.max_age = *max_age;
    if (min_hits) p.min_hits = *min_hits;
    p.validate();
    return p;
  }
};

inline std::string knob_help() {
  std::ostringstream os;
  os << "Config keys (--config file, one 'key = value' per line, '#' comments):\n";
  for (const auto& [k, d] : config_keys()) os << "  " << std::left << std::setw(24) << k << d << '\n';
  os << "Sequence layout: <dir>/<seq>/gt.txt, <dir>/<seq>/det.jsonl, <dir>/<seq>/depth/<frame>.png\n";
  return os.str();
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<std::string> sequence_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

inline std::optional<fs::path> depth_file(const fs::path& depth_dir, int frame) {
  const fs::path plain = depth_dir / (std::to_string(frame) + ".png");
  if (fs::exists(plain)) return plain;
  char padded[32];
  std::snprintf(padded, sizeof padded, "%06d.png", frame);
  if (fs::exists(depth_dir / padded)) return depth_dir / padded;
  return std::nullopt;
}

/// Reads <dir>/det.jsonl, optional gt.txt (for the frame range) and depth/<frame>.png.
inline SequenceInput load_sequence(const fs::path& dir, bool require_depth) {
  SequenceInput in;
  in.name = dir.filename().string();
  const fs::path det_path = dir / "det.jsonl";
  if (!fs::exists(det_path)) throw std::runtime_error("missing detections file " + det_path.string());
  const auto recs = parse_detections(read_text_file(det_path), det_path.string());
  int frames = 0;
  for (const auto& r : recs) frames = std::max(frames, r.fn);
  if (const fs::path gt = dir / "gt.txt"; fs::exists(gt))
    for (const auto& r : read_gt_file(gt)) frames = std::max(frames, r.fn);
  const fs::path depth_dir = dir / "depth";
  const bool has_depth = fs::is_directory(depth_dir);
  if (require_depth && !has_depth) throw std::runtime_error("missing depth directory " + depth_dir.string());
  in.num_frames = frames;
  in.detections = group_detections(recs, frames);
  in.depth.resize(static_cast<std::size_t>(frames));
  if (has_depth) {
    for (int f = 1; f <= frames; ++f) {
      const auto p = depth_file(depth_dir, f);
      if (!p) {
        if (require_depth) throw std::runtime_error("missing depth map for frame " + std::to_string(f) + " in " + depth_dir.string());
        continue;
      }
      in.depth[static_cast<std::size_t>(f - 1)] = load_depth(*p);
    }
  }
  return in;
}

inline SequenceInput scenario_input(const Scenario& sc) {
  return {sc.spec.name, sc.spec.num_frames, sc.detections, sc.depth};
}

inline SequenceSummary track_one(const SequenceInput& in, const TrackerParams& params, std::vector<FrameResult>& out) {
  const auto t0 = std::chrono::steady_clock::now();
  TrackerStats stats;
  out = run_sequence(in.detections, in.depth, params, &stats);
  SequenceSummary s;
  s.name = in.name;
  s.frames = in.num_frames;
  s.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::set<int> ids;
  for (const auto& fr : out)
    for (const auto& t : fr.tracks) ids.insert(t.id);
  s.tracks = static_cast<int>(ids.size());
  s.births = stats.births;
  s.deaths = stats.deaths;
  s.rejected = stats.rejected;
  return s;
}

inline nlohmann::ordered_json summary_json(const std::vector<SequenceSummary>& seqs, const TrackerParams& p) {
  nlohmann::ordered_json j;
  j["params"] = {{"alpha", p.sim.alpha},       {"sigma", p.sim.sigma},     {"lambda", p.assoc.lambda},
                 {"gate", p.assoc.gate},       {"max_age", p.max_age},     {"min_hits", p.min_hits},
                 {"det_score_min", p.det_score_min}};
  j["sequences"] = nlohmann::ordered_json::array();
  int frames = 0;
  double seconds = 0.0;
  for (const auto& s : seqs) {
    j["sequences"].push_back({{"name", s.name},
                              {"frames", s.frames},
                              {"tracks", s.tracks},
                              {"births", s.births},
                              {"deaths", s.deaths},
                              {"rejected", s.rejected},
                              {"fps", s.seconds > 0 ? s.frames / s.seconds : 0.0}});
    frames += s.frames;
    seconds += s.seconds;
  }
  j["total_frames"] = frames;
  j["fps"] = seconds > 0 ? frames / seconds : 0.0;
  return j;
}

inline const std::vector<std::pair<std::string, double MetricBundle::*>>& metric_columns() {
  static const std::vector<std::pair<std::string, double MetricBundle::*>> cols = {
      {"HOTA", &MetricBundle::hota},   {"DetA", &MetricBundle::deta},   {"AssA", &MetricBundle::assa},
      {"DetRe", &MetricBundle::detre}, {"DetPr", &MetricBundle::detpr}, {"AssRe", &MetricBundle::assre},
      {"AssPr", &MetricBundle::asspr}, {"LocA", &MetricBundle::loca}};
  return cols;
}

inline nlohmann::ordered_json bundle_json(const MetricBundle& b) {
  nlohmann::ordered_json j;
  for (const auto& [name, field] : metric_columns()) j[name] = b.*field;
  return j;
}

inline std::string metric_table(const std::string& first_col, const std::vector<std::pair<std::string, MetricBundle>>& rows) {
  std::size_t w = first_col.size();
  for (const auto& r : rows) w = std::max(w, r.first.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << first_col;
  for (const auto& c : metric_columns()) os << std::right << std::setw(9) << c.first;
  os << '\n';
  os << std::fixed << std::setprecision(2);
  for (const auto& [label, b] : rows) {
    os << std::left << std::setw(static_cast<int>(w)) << label;
    for (const auto& c : metric_columns()) os << std::right << std::setw(9) << b.*(c.second);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

struct TrackOptions {
  TrackerFlags flags;
  std::string data, suite, out, summary;
  std::uint64_t seed = 1;
  bool require_depth = false;
  int jobs = 1;
};

inline int cmd_track(const TrackOptions& o) {
  const TrackerParams params = o.flags.resolve();
  if (o.data.empty() == o.suite.empty()) throw std::runtime_error("track needs exactly one of --data or --suite");
  std::vector<std::string> names;
  std::vector<ScenarioSpec> specs;
  if (!o.data.empty()) {
    names = sequence_names(o.data);
  } else {
    specs = scenario_suite(o.suite, o.seed);
    for (const auto& s : specs) names.push_back(s.name);
  }
  fs::create_directories(o.out);
  std::vector<SequenceSummary> summaries(names.size());
  parallel_for(names.size(), o.jobs, [&](std::size_t i) {
    const SequenceInput in = o.data.empty() ? scenario_input(generate(specs[i]))
                                            : load_sequence(fs::path(o.data) / names[i], o.require_depth);
    std::vector<FrameResult> results;
    summaries[i] = track_one(in, params, results);
    write_text_file(fs::path(o.out) / (names[i] + ".txt"), write_results(results));
  });
  const std::string summary = o.summary.empty() ? (fs::path(o.out) / "summary.json").string() : o.summary;
  write_text_file(summary, summary_json(summaries, params).dump(2) + '\n');
  std::cerr << "tracked " << names.size() << " sequence(s) into " << o.out << '\n';
  return 0;
}

struct EvaluateOptions {
  std::string gt, pred, report;
  bool average = false;
};

inline int cmd_evaluate(const EvaluateOptions& o) {
  const auto names = sequence_names(o.gt);
  std::vector<std::pair<std::string, MetricBundle>> rows;
  HotaCounts pooled;
  std::vector<MetricBundle> bundles;
  for (const auto& name : names) {
    const fs::path gt_path = fs::path(o.gt) / name / "gt.txt";
    if (!fs::exists(gt_path)) continue;
    const auto gt_recs = read_gt_file(gt_path);
    const fs::path pred_path = fs::path(o.pred) / (name + ".txt");
    std::vector<AnnotationRecord> pred_recs;
    if (fs::exists(pred_path)) {
      pred_recs = read_gt_file(pred_path);
    } else {
      std::cerr << "warning: no predictions for sequence '" << name << "'; scoring as empty\n";
    }
    int frames = 0;
    for (const auto& r : gt_recs) frames = std::max(frames, r.fn);
    for (const auto& r : pred_recs) frames = std::max(frames, r.fn);
    const Sequence gt = records_to_sequence(gt_recs, frames);
    const Sequence pred = records_to_sequence(pred_recs, frames);
    const HotaCounts c = hota_accumulate(gt, pred);
    pooled += c;
    const MetricBundle b = hota_finalize(c).bundle;
    bundles.push_back(b);
    rows.emplace_back(name, b);
  }
  if (rows.empty()) throw std::runtime_error("no sequences with gt.txt under " + o.gt);
  const MetricBundle combined = o.average ? average_bundles(bundles) : hota_finalize(pooled).bundle;
  rows.emplace_back(o.average ? "MEAN" : "COMBINED", combined);
  std::cout << metric_table("sequence", rows);
  if (!o.report.empty()) {
    nlohmann::ordered_json j;
    j["combine"] = o.average ? "average" : "pooled";
    j["combined"] = bundle_json(combined);
    j["sequences"] = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) j["sequences"][rows[i].first] = bundle_json(rows[i].second);
    write_text_file(o.report, j.dump(2) + '\n');
  }
  return 0;
}

struct RewardOptionsCli {
  std::string in, out;
  bool permissive = false;
};

/**
 * Input lines: {"response": "<think>...</think><answer>[...]</answer>", "gt_boxes": [[x1,y1,x2,y2], ...]}.
 * Each output line is the input object with "format", "iou", "total" and "matches" appended.
 */
inline int cmd_reward(const RewardOptionsCli& o) {
  const std::string text = read_text_file(o.in);
  std::string out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = detail::trim(raw);
    if (line.empty()) return;
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(o.in, line_no, 0, "not a JSON object");
    const auto resp = j.find("response");
    if (resp == j.end() || !resp->is_string()) throw ParseError(o.in, line_no, 0, "'response' must be a string");
    const auto gt = j.find("gt_boxes");
    if (gt == j.end() || !gt->is_array()) throw ParseError(o.in, line_no, 0, "'gt_boxes' must be an array of boxes");
    std::vector<BBox> gts;
    for (const auto& b : *gt) {
      if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const auto& e) { return e.is_number(); })) {
        throw ParseError(o.in, line_no, 0, "'gt_boxes' entries must be [x1, y1, x2, y2]");
      }
      auto box = BBox::make(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
      if (!box) throw ParseError(o.in, line_no, 0, "invalid box in 'gt_boxes'");
      gts.push_back(*box);
    }
    const RewardBreakdown r = total_reward({resp->get<std::string>()}, gts, {o.permissive});
    j["format"] = r.format;
    j["iou"] = r.iou;
    j["total"] = r.total;
    j["matches"] = r.matches;
    out += j.dump() + '\n';
  });
  write_text_file(o.out, out);
  return 0;
}

struct SimulateOptions {
  std::string suite, out;
  std::uint64_t seed = 1;
  bool no_depth = false;
  int jobs = 1;
};

inline void write_scenario(const Scenario& sc, const fs::path& dir, bool with_depth) {
  fs::create_directories(dir);
  std::string gt = "# fn,id,x1,y1,x2,y2\n";
  gt += write_gt(sequence_to_records(sc.gt));
  write_text_file(dir / "gt.txt", gt);
  std::vector<DetectionRecord> recs;
  for (const auto& fd : sc.detections)
    for (const auto& d : fd.detections) recs.push_back({fd.frame, d.x1, d.y1, d.x2, d.y2, d.score, d.depth_m});
  write_text_file(dir / "det.jsonl", write_detections(recs));
  if (with_depth) {
    for (std::size_t k = 0; k < sc.depth.size(); ++k)
      if (sc.depth[k]) save_depth(dir / "depth" / (std::to_string(k + 1) + ".png"), *sc.depth[k]);
  }
}

inline int cmd_simulate(const SimulateOptions& o) {
  const auto specs = scenario_suite(o.suite, o.seed);
  parallel_for(specs.size(), o.jobs,
               [&](std::size_t i) { write_scenario(generate(specs[i]), fs::path(o.out) / specs[i].name, !o.no_depth); });
  std::cerr << "wrote " << specs.size() << " scenario(s) to " << o.out << '\n';
  return 0;
}

struct SweepOptions {
  TrackerFlags flags;
  std::string param = "alpha", suite = "crossing", out;
  std::vector<double> values{0.0, 0.5, 0.9, 1.0};
  std::uint64_t seed = 1;
  int jobs = 1;
};

inline void set_param(TrackerParams& p, const std::string& name, double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  if (name == "max_age" || name == "min_hits" || name == "vdc_window") {
    if (v != std::floor(v)) throw std::runtime_error("sweep value for '" + name + "' must be an integer");
    os.str(std::to_string(static_cast<long long>(v)));
  }
  apply_config_value(p, name, os.str(), "--param", 0);
}

inline int cmd_sweep(const SweepOptions& o) {
  const TrackerParams base = o.flags.resolve();
  {
    TrackerParams probe = base;
    set_param(probe, o.param, o.values.empty() ? 0.0 : o.values.front());
  }
  const auto specs = scenario_suite(o.suite, o.seed);
  std::vector<Scenario> scenarios(specs.size());
  parallel_for(specs.size(), o.jobs, [&](std::size_t i) { scenarios[i] = generate(specs[i]); });

  std::vector<std::pair<std::string, MetricBundle>> rows;
  for (double v : o.values) {
    TrackerParams p = base;
    set_param(p, o.param, v);
    p.validate();
    std::vector<HotaCounts> counts(scenarios.size());
    parallel_for(scenarios.size(), o.jobs, [&](std::size_t i) {
      const auto results = run_sequence(scenarios[i].detections, scenarios[i].depth, p);
      counts[i] = hota_accumulate(scenarios[i].gt, results_to_sequence(results, scenarios[i].spec.num_frames));
    });
    HotaCounts total;
    for (const auto& c : counts) total += c;
    std::ostringstream label;
    label << v;
    rows.emplace_back(label.str(), hota_finalize(total).bundle);
  }
  std::cout << metric_table(o.param, rows);
  if (!o.out.empty()) {
    nlohmann::ordered_json j;
    j["param"] = o.param;
    j["suite"] = o.suite;
    j["seed"] = o.seed;
    j["rows"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < rows.size(); ++k) {
      nlohmann::ordered_json row;
      row["value"] = o.values[k];
      row["metrics"] = bundle_json(rows[k].second);
      j["rows"].push_back(row);
    }
    write_text_file(o.out, j.dump(2) + '\n');
  }
  return 0;
}

struct ExportDepthOptions {
  std::string in, out;
  double min_m = 0.0, max_m = 10.0;
};

inline int cmd_export_depth(const ExportDepthOptions& o) {
  save_rgb_png(o.out, export_pseudo_rgb(load_depth(o.in), o.min_m, o.max_m));
  return 0;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, char** argv) {
  CLI::App app{"Depth-aware multi-object tracking toolkit"};
  app.footer(knob_help());
  app.require_subcommand(1);

  TrackOptions track;
  auto* t = app.add_subcommand("track", "Track every sequence of a dataset directory or a simulator suite");
  track.flags.attach(*t);
  t->add_option("--data", track.data, "dataset directory with one sub-directory per sequence");
  t->add_option("--suite", track.suite, "simulator suite to generate instead of --data");
  t->add_option("--out", track.out, "output directory for <seq>.txt result files")->required();
  t->add_option("--summary", track.summary, "run summary JSON (default <out>/summary.json)");
  t->add_option("--seed", track.seed, "suite seed");
  t->add_flag("--require-depth", track.require_depth, "fail when a sequence has no depth maps");
  t->add_option("--jobs", track.jobs, "worker threads")->check(CLI::PositiveNumber);

  EvaluateOptions eval;
  auto* e = app.add_subcommand("evaluate", "Score result files against ground truth (HOTA family)");
  e->add_option("--gt", eval.gt, "dataset directory holding <seq>/gt.txt")->required();
  e->add_option("--pred", eval.pred, "directory holding <seq>.txt results")->required();
  e->add_option("--report", eval.report, "write a JSON report here");
  e->add_flag("--average", eval.average, "average per-sequence scores instead of pooling");

  RewardOptionsCli reward;
  auto* r = app.add_subcommand("reward", "Score grounding responses (format + IoU reward)");
  r->add_option("--in", reward.in, "input JSONL: {\"response\": str, \"gt_boxes\": [[x1,y1,x2,y2],...]}")->required();
  r->add_option("--out", reward.out, "output JSONL with format, iou, total, matches")->required();
  r->add_flag("--permissive", reward.permissive, "accept any text around a single answer block");

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Write a simulator suite as a dataset directory");
  s->add_option("--suite", sim.suite, "crossing | occlusion | lifecycle | scale")->required();
  s->add_option("--out", sim.out, "output dataset directory")->required();
  s->add_option("--seed", sim.seed, "suite seed");
  s->add_flag("--no-depth", sim.no_depth, "skip depth images");
  s->add_option("--jobs", sim.jobs, "worker threads")->check(CLI::PositiveNumber);

  SweepOptions sweep;
  auto* w = app.add_subcommand("sweep", "Sweep one config knob over a simulator suite");
  sweep.flags.attach(*w);
  w->add_option("--param", sweep.param, "config key to sweep");
  w->add_option("--values", sweep.values, "values to try")->delimiter(',');
  w->add_option("--suite", sweep.suite, "simulator suite");
  w->add_option("--seed", sweep.seed, "suite seed");
  w->add_option("--out", sweep.out, "write the table as JSON here");
  w->add_option("--jobs", sweep.jobs, "worker threads")->check(CLI::PositiveNumber);

  ExportDepthOptions exp;
  auto* x = app.add_subcommand("export-depth", "Render a 16-bit depth PNG as 8-bit pseudo-RGB");
  x->add_option("--in", exp.in, "16-bit depth PNG in millimeters")->required();
  x->add_option("--out", exp.out, "output RGB PNG")->required();
  x->add_option("--min", exp.min_m, "depth mapped to black, meters");
  x->add_option("--max", exp.max_m, "depth mapped to white, meters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  }

  try {
    if (*t) return cmd_track(track);
    if (*e) return cmd_evaluate(eval);
    if (*r) return cmd_reward(reward);
    if (*s) return cmd_simulate(sim);
    if (*w) return cmd_sweep(sweep);
    if (*x) return cmd_export_depth(exp);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace drtrack::cli
