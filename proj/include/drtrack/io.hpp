#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "drtrack/geometry.hpp"
#include "drtrack/metrics.hpp"
#include "drtrack/tracker.hpp"

namespace drtrack {

/// Parse failure carrying the source path and 1-based line (and column, 0 when not applicable).
class ParseError : public std::runtime_error {
public:
  ParseError(std::string path, std::size_t line, std::size_t column, const std::string& what)
      : std::runtime_error(format(path, line, column, what)), path_(std::move(path)), line_(line), column_(column) {}

  const std::string& path() const noexcept { return path_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(const std::string& path, std::size_t line, std::size_t column, const std::string& what) {
    std::string s = path + ":" + std::to_string(line);
    if (column > 0) s += ":" + std::to_string(column);
    return s + ": " + what;
  }

  std::string path_;
  std::size_t line_, column_;
};

inline std::string read_text_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& p, std::string_view text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + p.string());
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Calls fn(line_number, line) for every line, 1-based, without the newline.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    fn(line_no, text.substr(0, nl));
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ground truth / tracker results: "fn,id,x1,y1,x2,y2", '#' comments.

struct AnnotationRecord {
  int fn = 0;
  int id = 0;
  int x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  BBox box() const { return BBox(x1, y1, x2, y2); }
  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline std::vector<AnnotationRecord> parse_gt(std::string_view text, const std::string& path = "<memory>") {
  std::vector<AnnotationRecord> out;
  std::set<std::pair<int, int>> seen;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = detail::trim(raw);
    if (line.empty() || line.front() == '#') return;
    int v[6];
    std::size_t field = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string_view tok = detail::trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (field >= 6) throw ParseError(path, line_no, field + 1, "expected 6 fields");
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[field]);
      if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ParseError(path, line_no, field + 1, "not an integer: '" + std::string(tok) + "'");
      }
      ++field;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (field != 6) throw ParseError(path, line_no, field, "expected 6 fields, found " + std::to_string(field));
    const AnnotationRecord r{v[0], v[1], v[2], v[3], v[4], v[5]};
    if (r.fn < 1) throw ParseError(path, line_no, 1, "frame number must be >= 1");
    if (r.id < 0) throw ParseError(path, line_no, 2, "identity must be >= 0");
    if (r.x2 <= r.x1) throw ParseError(path, line_no, 5, "x2 must exceed x1");
    if (r.y2 <= r.y1) throw ParseError(path, line_no, 6, "y2 must exceed y1");
    if (!seen.emplace(r.fn, r.id).second) {
      throw ParseError(path, line_no, 2,
                       "duplicate (frame, id) = (" + std::to_string(r.fn) + ", " + std::to_string(r.id) + ")");
    }
    out.push_back(r);
  });
  return out;
}

inline std::vector<AnnotationRecord> read_gt_file(const std::filesystem::path& p) {
  return parse_gt(read_text_file(p), p.string());
}

/// Records sorted by (fn, id), one per line, comments dropped.
inline std::string write_gt(std::vector<AnnotationRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::pair(a.fn, a.id) < std::pair(b.fn, b.id);
  });
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.fn) + ',' + std::to_string(r.id) + ',' + std::to_string(r.x1) + ',' +
           std::to_string(r.y1) + ',' + std::to_string(r.x2) + ',' + std::to_string(r.y2) + '\n';
  }
  return out;
}

/// Rounds half away from zero; a box that collapses under rounding is widened to 1 px.
inline AnnotationRecord to_record(int fn, int id, const BBox& b) {
  AnnotationRecord r{fn, id, static_cast<int>(std::round(b.x1())), static_cast<int>(std::round(b.y1())),
                     static_cast<int>(std::round(b.x2())), static_cast<int>(std::round(b.y2()))};
  if (r.x2 <= r.x1) r.x2 = r.x1 + 1;
  if (r.y2 <= r.y1) r.y2 = r.y1 + 1;
  return r;
}

inline std::vector<AnnotationRecord> results_to_records(const std::vector<FrameResult>& frames) {
  std::vector<AnnotationRecord> recs;
  for (const auto& fr : frames)
    for (const auto& t : fr.tracks) recs.push_back(to_record(fr.frame, t.id, t.box));
  return recs;
}

inline std::string write_results(const std::vector<FrameResult>& frames) { return write_gt(results_to_records(frames)); }

/// Sequence over frames 1..num_frames; defaults to the largest frame number present.
inline Sequence records_to_sequence(const std::vector<AnnotationRecord>& recs, std::optional<int> num_frames = {}) {
  int n = num_frames.value_or(0);
  if (!num_frames)
    for (const auto& r : recs) n = std::max(n, r.fn);
  Sequence s(n);
  for (const auto& r : recs) s.add(r.fn, r.id, r.box());
  return s;
}

inline std::vector<AnnotationRecord> sequence_to_records(const Sequence& s) {
  std::vector<AnnotationRecord> out;
  for (int f = 1; f <= s.num_frames(); ++f)
    for (const auto& lb : s.frame(f)) out.push_back(to_record(f, lb.id, lb.box));
  return out;
}

// ---------------------------------------------------------------------------
// Detections: one JSON object per line, {"fn":1,"bbox":[x1,y1,x2,y2],"score":0.9,"depth_m":2.5}.

struct DetectionRecord {
  int fn = 0;
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double score = 1.0;
  std::optional<double> depth_m;
};

inline std::vector<DetectionRecord> parse_detections(std::string_view text, const std::string& path = "<memory>") {
  std::vector<DetectionRecord> out;
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    const std::string_view line = detail::trim(raw);
    if (line.empty()) return;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(path, line_no, 0, "not a JSON object");
    DetectionRecord r;
    const auto fn = j.find("fn");
    if (fn == j.end() || !fn->is_number_integer() || fn->get<long long>() < 1) {
      throw ParseError(path, line_no, 0, "'fn' must be an integer >= 1");
    }
    r.fn = fn->get<int>();
    const auto bbox = j.find("bbox");
    if (bbox == j.end() || !bbox->is_array() || bbox->size() != 4) {
      throw ParseError(path, line_no, 0, "'bbox' must be an array of 4 numbers");
    }
    for (const auto& e : *bbox)
      if (!e.is_number()) throw ParseError(path, line_no, 0, "'bbox' must be an array of 4 numbers");
    r.x1 = (*bbox)[0].get<double>();
    r.y1 = (*bbox)[1].get<double>();
    r.x2 = (*bbox)[2].get<double>();
    r.y2 = (*bbox)[3].get<double>();
    if (!BBox::valid(r.x1, r.y1, r.x2, r.y2)) throw ParseError(path, line_no, 0, "invalid box");
    const auto score = j.find("score");
    if (score != j.end()) {
      if (!score->is_number()) throw ParseError(path, line_no, 0, "'score' must be a number");
      r.score = score->get<double>();
      if (!(r.score >= 0.0 && r.score <= 1.0)) throw ParseError(path, line_no, 0, "'score' must lie in [0, 1]");
    }
    const auto depth = j.find("depth_m");
    if (depth != j.end() && !depth->is_null()) {
      if (!depth->is_number() || !(depth->get<double>() >= 0.0)) {
        throw ParseError(path, line_no, 0, "'depth_m' must be a number >= 0");
      }
      r.depth_m = depth->get<double>();
    }
    for (const auto& [key, value] : j.items()) {
      if (key != "fn" && key != "bbox" && key != "score" && key != "depth_m") {
        throw ParseError(path, line_no, 0, "unknown key '" + key + "'");
      }
    }
    out.push_back(r);
  });
  return out;
}

inline std::string write_detections(const std::vector<DetectionRecord>& recs) {
  std::string out;
  for (const auto& r : recs) {
    nlohmann::ordered_json j;
    j["fn"] = r.fn;
    j["bbox"] = {r.x1, r.y1, r.x2, r.y2};
    j["score"] = r.score;
    if (r.depth_m) j["depth_m"] = *r.depth_m;
    out += j.dump() + '\n';
  }
  return out;
}

/// Groups records into frames 1..num_frames (empty frames included), keeping file order within a frame.
inline std::vector<FrameDetections> group_detections(const std::vector<DetectionRecord>& recs, int num_frames) {
  std::vector<FrameDetections> out(static_cast<std::size_t>(num_frames));
  for (int f = 1; f <= num_frames; ++f) out[static_cast<std::size_t>(f - 1)].frame = f;
  for (const auto& r : recs) {
    if (r.fn > num_frames) continue;
    out[static_cast<std::size_t>(r.fn - 1)].detections.push_back({r.x1, r.y1, r.x2, r.y2, r.score, r.depth_m});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration: "key = value" lines, '#' comments, unknown keys rejected.

inline const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"alpha", "IoU weight in the fused RGB-D similarity, [0,1] (default 0.9)"},
      {"sigma", "depth similarity decay scale in meters, > 0 (default 0.5)"},
      {"s_neutral", "depth similarity used when depth is missing, [0,1] (default 0.5)"},
      {"lambda", "velocity-direction prior weight, >= 0 (default 0.3)"},
      {"gate", "minimum fused similarity for a first-round match, [0,1] (default 0.3)"},
      {"second_round", "enable last-observation recovery round, true|false (default true)"},
      {"second_round_iou_gate", "minimum IoU in the recovery round, [0,1] (default 0.3)"},
      {"max_age", "frames a track may coast before it dies, >= 1 (default 30)"},
      {"min_hits", "matches needed to confirm a track, >= 1 (default 3)"},
      {"det_score_min", "minimum detection score admitted, [0,1] (default 0.1)"},
      {"vdc_window", "frames between observations used for motion direction, >= 1 (default 3)"},
      {"track_depth", "track depth source, current_frame|last_observation (default current_frame)"},
      {"kf_position_weight", "Kalman position noise weight (default 0.05)"},
      {"kf_velocity_weight", "Kalman velocity noise weight (default 0.00625)"},
  };
  return keys;
}

namespace detail {

inline double parse_double(std::string_view v, const std::string& path, std::size_t line, const std::string& key) {
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ParseError(path, line, 0, "'" + key + "' expects a number, got '" + std::string(v) + "'");
  }
  return out;
}

inline int parse_int(std::string_view v, const std::string& path, std::size_t line, const std::string& key) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
    throw ParseError(path, line, 0, "'" + key + "' expects an integer, got '" + std::string(v) + "'");
  }
  return out;
}

}  // namespace detail

/// Applies one knob to the params; throws std::invalid_argument for unknown keys or malformed values.
inline void apply_config_value(TrackerParams& p, const std::string& key, std::string_view value,
                               const std::string& path = "<config>", std::size_t line = 0) {
  auto num = [&] { return detail::parse_double(value, path, line, key); };
  auto integer = [&] { return detail::parse_int(value, path, line, key); };
  if (key == "alpha") p.sim.alpha = num();
  else if (key == "sigma") p.sim.sigma = num();
  else if (key == "s_neutral") p.sim.s_neutral = num();
  else if (key == "lambda") p.assoc.lambda = num();
  else if (key == "gate") p.assoc.gate = num();
  else if (key == "second_round_iou_gate") p.assoc.second_round_iou_gate = num();
  else if (key == "second_round") {
    if (value == "true") p.assoc.second_round = true;
    else if (value == "false") p.assoc.second_round = false;
    else throw ParseError(path, line, 0, "'second_round' expects true or false");
  } else if (key == "max_age") p.max_age = integer();
  else if (key == "min_hits") p.min_hits = integer();
  else if (key == "det_score_min") p.det_score_min = num();
  else if (key == "vdc_window") p.vdc_window = integer();
  else if (key == "track_depth") {
    if (value == "current_frame") p.depth_mode = TrackDepthMode::CurrentFrame;
    else if (value == "last_observation") p.depth_mode = TrackDepthMode::LastObservation;
    else throw ParseError(path, line, 0, "'track_depth' expects current_frame or last_observation");
  } else if (key == "kf_position_weight") p.kalman.position_weight = num();
  else if (key == "kf_velocity_weight") p.kalman.velocity_weight = num();
  else throw ParseError(path, line, 0, "unknown config key '" + key + "'");
}

inline TrackerParams parse_config(std::string_view text, const std::string& path = "<config>",
                                  TrackerParams base = {}) {
  detail::for_each_line(text, [&](std::size_t line_no, std::string_view raw) {
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, line_no, 0, "expected 'key = value'");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string_view value = detail::trim(line.substr(eq + 1));
    apply_config_value(base, key, value, path, line_no);
  });
  try {
    base.validate();
  } catch (const std::invalid_argument& e) {
    throw ParseError(path, 0, 0, e.what());
  }
  return base;
}

// ---------------------------------------------------------------------------
// Depth images: 16-bit single-channel PNG, millimeters, 0 = invalid.

namespace detail {

struct PngFile {
  std::FILE* fp = nullptr;
  explicit PngFile(const std::filesystem::path& p, const char* mode) : fp(std::fopen(p.c_str(), mode)) {}
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

struct RawPng {
  std::uint32_t width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> bytes;  // rows packed as stored in the file
  std::size_t row_bytes = 0;
  std::vector<png_bytep> rows;
  char error[256] = {};
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* raw = static_cast<RawPng*>(png_get_error_ptr(png));
  std::snprintf(raw->error, sizeof raw->error, "%s", msg);
  png_longjmp(png, 1);
}

inline void png_warning_fn(png_structp, png_const_charp) {}

// Everything written after setjmp lives in `raw`, outside this frame's registers.
inline bool read_png_raw(std::FILE* fp, RawPng& raw) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &raw, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  raw.width = png_get_image_width(png, info);
  raw.height = png_get_image_height(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  raw.color_type = png_get_color_type(png, info);
  if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) png_set_interlace_handling(png);
  png_read_update_info(png, info);
  raw.row_bytes = png_get_rowbytes(png, info);
  raw.bytes.resize(raw.row_bytes * raw.height);
  raw.rows.resize(raw.height);
  for (std::uint32_t y = 0; y < raw.height; ++y) raw.rows[y] = raw.bytes.data() + y * raw.row_bytes;
  png_read_image(png, raw.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool write_png_raw(std::FILE* fp, std::uint32_t width, std::uint32_t height, int bit_depth, int color_type,
                          const std::vector<std::uint8_t>& bytes, std::size_t row_bytes, RawPng& err) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  std::vector<png_bytep> rows(height);
  for (std::uint32_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes.data() + y * row_bytes);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 1);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

/// Loads a 16-bit single-channel millimeter PNG as meters; zeros stay invalid.
inline DepthMap load_depth(const std::filesystem::path& p) {
  detail::PngFile f(p, "rb");
  if (!f.fp) throw std::runtime_error("cannot open depth image " + p.string());
  detail::RawPng raw;
  if (!detail::read_png_raw(f.fp, raw)) {
    throw std::runtime_error("cannot decode depth image " + p.string() + (raw.error[0] ? ": " : "") + raw.error);
  }
  if (raw.color_type != PNG_COLOR_TYPE_GRAY) {
    throw std::runtime_error("depth image " + p.string() + " must have a single gray channel");
  }
  if (raw.bit_depth != 16) {
    throw std::runtime_error("depth image " + p.string() + " must be 16-bit, found " + std::to_string(raw.bit_depth) +
                             "-bit");
  }
  std::vector<double> meters(static_cast<std::size_t>(raw.width) * raw.height);
  for (std::uint32_t y = 0; y < raw.height; ++y) {
    const std::uint8_t* row = raw.bytes.data() + y * raw.row_bytes;
    for (std::uint32_t x = 0; x < raw.width; ++x) {
      const unsigned mm = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
      meters[static_cast<std::size_t>(y) * raw.width + x] = mm / 1000.0;
    }
  }
  return DepthMap(raw.width, raw.height, std::move(meters));
}

/// Writes meters as rounded millimeters, clamped to the 16-bit range.
inline void save_depth(const std::filesystem::path& p, const DepthMap& d) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  const std::size_t row_bytes = d.width() * 2;
  std::vector<std::uint8_t> bytes(row_bytes * d.height());
  for (std::size_t i = 0; i < d.values().size(); ++i) {
    const double mm = std::clamp(std::round(d.values()[i] * 1000.0), 0.0, 65535.0);
    const auto v = static_cast<std::uint16_t>(mm);
    bytes[2 * i] = static_cast<std::uint8_t>(v >> 8);
    bytes[2 * i + 1] = static_cast<std::uint8_t>(v & 0xff);
  }
  detail::PngFile f(p, "wb");
  if (!f.fp) throw std::runtime_error("cannot write " + p.string());
  detail::RawPng err;
  if (!detail::write_png_raw(f.fp, static_cast<std::uint32_t>(d.width()), static_cast<std::uint32_t>(d.height()), 16,
                             PNG_COLOR_TYPE_GRAY, bytes, row_bytes, err)) {
    throw std::runtime_error("failed encoding " + p.string() + ": " + err.error);
  }
}

struct RgbImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major

  std::array<std::uint8_t, 3> at(std::size_t u, std::size_t v) const {
    const std::size_t i = 3 * (v * width + u);
    return {pixels.at(i), pixels.at(i + 1), pixels.at(i + 2)};
  }
};

/// Linear map of [range_min, range_max] meters to [0, 255] on all three channels; invalid pixels stay black.
inline RgbImage export_pseudo_rgb(const DepthMap& d, double range_min_m, double range_max_m) {
  if (!(range_max_m > range_min_m) || !(range_min_m >= 0.0)) {
    throw std::invalid_argument("pseudo-RGB range needs range_max > range_min >= 0");
  }
  RgbImage img{d.width(), d.height(), std::vector<std::uint8_t>(d.width() * d.height() * 3, 0)};
  const double span = range_max_m - range_min_m;
  for (std::size_t i = 0; i < d.values().size(); ++i) {
    const double z = d.values()[i];
    if (z == DepthMap::kInvalid) continue;
    const double t = std::clamp((z - range_min_m) / span, 0.0, 1.0);
    const auto q = static_cast<std::uint8_t>(std::lround(t * 255.0));
    img.pixels[3 * i] = img.pixels[3 * i + 1] = img.pixels[3 * i + 2] = q;
  }
  return img;
}

inline void save_rgb_png(const std::filesystem::path& p, const RgbImage& img) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  detail::PngFile f(p, "wb");
  if (!f.fp) throw std::runtime_error("cannot write " + p.string());
  detail::RawPng err;
  if (!detail::write_png_raw(f.fp, static_cast<std::uint32_t>(img.width), static_cast<std::uint32_t>(img.height), 8,
                             PNG_COLOR_TYPE_RGB, img.pixels, img.width * 3, err)) {
    throw std::runtime_error("failed encoding " + p.string() + ": " + err.error);
  }
}

}  // namespace drtrack
