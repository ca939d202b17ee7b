#include <random>
#include <set>

#include <gtest/gtest.h>

#include "drtrack/io.hpp"
#include "support/fixtures.hpp"

using namespace drtrack;

namespace {

template <typename Fn>
ParseError parse_error_of(Fn&& fn) {
  try {
    fn();
  } catch (const ParseError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a ParseError";
  return ParseError("", 0, 0, "");
}

}  // namespace

TEST(ParseGt, SampleFile) {
  const auto recs = read_gt_file(DRTRACK_TEST_DATA "/sample_gt.txt");
  ASSERT_EQ(recs.size(), 7u);
  EXPECT_EQ(recs.front(), (AnnotationRecord{1, 0, 548, 180, 636, 966}));
  EXPECT_EQ(recs.back(), (AnnotationRecord{3, 2, 687, 374, 902, 607}));
  std::set<int> ids;
  for (const auto& r : recs) ids.insert(r.id);
  EXPECT_EQ(ids, (std::set<int>{0, 1, 2}));
}

TEST(ParseGt, CommentsAndBlankLines) {
  const auto recs = parse_gt("# data\n\n  # indented comment\n2, 4, 1, 2, 3, 4\r\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0], (AnnotationRecord{2, 4, 1, 2, 3, 4}));
}

TEST(ParseGt, ErrorsNamePathLineAndColumn) {
  auto e = parse_error_of([] { parse_gt("# h\n1,0,1,2,3\n", "gt.txt"); });
  EXPECT_EQ(e.path(), "gt.txt");
  EXPECT_EQ(e.line(), 2u);
  EXPECT_NE(std::string(e.what()).find("gt.txt:2"), std::string::npos);

  e = parse_error_of([] { parse_gt("1,0,1,x,3,4\n", "a.txt"); });
  EXPECT_EQ(e.line(), 1u);
  EXPECT_EQ(e.column(), 4u);

  e = parse_error_of([] { parse_gt("1,0,1,2,3,4\n1,0,5,5,9,9\n", "d.txt"); });
  EXPECT_EQ(e.line(), 2u);
  EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);

  e = parse_error_of([] { parse_gt("1,0,5,2,3,4\n"); });
  EXPECT_EQ(e.column(), 5u);
  EXPECT_THROW(parse_gt("0,0,1,2,3,4\n"), ParseError);
  EXPECT_THROW(parse_gt("1,-1,1,2,3,4\n"), ParseError);
  EXPECT_THROW(parse_gt("1,0,1,2,3,4,5\n"), ParseError);
  EXPECT_THROW(parse_gt("1,0,1.5,2,3,4\n"), ParseError);
}

TEST(WriteResults, RoundsHalfAwayFromZero) {
  FrameResult r;
  r.frame = 1;
  r.tracks.push_back({2, BBox(0.5, 1.49, 10.5, 20.51)});
  r.tracks.push_back({1, BBox(-2.5, -1.5, 3.2, 4.7)});
  EXPECT_EQ(write_results({r}), "1,1,-3,-2,3,5\n1,2,1,1,11,21\n");
  EXPECT_EQ(write_results({}), "");
}

TEST(WriteResults, CollapsedBoxIsWidened) {
  FrameResult r;
  r.frame = 3;
  r.tracks.push_back({1, BBox(10.2, 10.2, 10.4, 10.4)});
  EXPECT_EQ(write_results({r}), "3,1,10,10,11,11\n");
}

TEST(WriteResults, RoundTripIsIntegerExact) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> c(-100, 1000), e(1.5, 200);
  for (int k = 0; k < 50; ++k) {
    std::vector<FrameResult> frames;
    for (int f = 1; f <= 10; ++f) {
      FrameResult r;
      r.frame = f;
      for (int id = 1; id <= 5; ++id) {
        const double x = c(rng), y = c(rng);
        r.tracks.push_back({id, BBox(x, y, x + e(rng), y + e(rng))});
      }
      frames.push_back(r);
    }
    const auto recs = parse_gt(write_results(frames));
    EXPECT_EQ(recs, results_to_records(frames));
  }
}

TEST(GtText, FuzzedRoundTripIsByteStable) {
  std::mt19937 rng(11);
  for (int k = 0; k < 20; ++k) {
    const std::string text = fixtures::fuzz_gt_text(rng, 500);
    const auto recs = parse_gt(text);
    ASSERT_EQ(recs.size(), 500u);
    const std::string once = write_gt(recs);
    EXPECT_EQ(write_gt(parse_gt(once)), once);
  }
}

TEST(GtText, SequenceConversion) {
  const auto recs = read_gt_file(DRTRACK_TEST_DATA "/sample_gt.txt");
  const Sequence s = records_to_sequence(recs);
  EXPECT_EQ(s.num_frames(), 3);
  EXPECT_EQ(s.frame(3).size(), 3u);
  EXPECT_EQ(write_gt(sequence_to_records(s)), write_gt(recs));
}

TEST(Detections, ParseAndWrite) {
  const auto recs = parse_detections(
      "{\"fn\":1,\"bbox\":[1,2,3,4],\"score\":0.5}\n\n{\"fn\":2,\"bbox\":[1.5,2,30,40],\"depth_m\":2.5}\n");
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].score, 0.5);
  EXPECT_FALSE(recs[0].depth_m);
  EXPECT_EQ(recs[1].score, 1.0);
  EXPECT_EQ(recs[1].depth_m, 2.5);
  const auto again = parse_detections(write_detections(recs));
  ASSERT_EQ(again.size(), 2u);
  EXPECT_EQ(again[1].x1, 1.5);
  EXPECT_EQ(again[1].depth_m, 2.5);

  const auto frames = group_detections(recs, 3);
  ASSERT_EQ(frames.size(), 3u);
  EXPECT_EQ(frames[2].frame, 3);
  EXPECT_TRUE(frames[2].detections.empty());
  EXPECT_EQ(frames[1].detections.size(), 1u);
}

TEST(Detections, Errors) {
  EXPECT_EQ(parse_error_of([] { parse_detections("{\"fn\":1,\"bbox\":[1,2,3,4]}\nnot json\n", "d.jsonl"); }).line(), 2u);
  EXPECT_THROW(parse_detections("{\"fn\":0,\"bbox\":[1,2,3,4]}"), ParseError);
  EXPECT_THROW(parse_detections("{\"fn\":1,\"bbox\":[3,2,1,4]}"), ParseError);
  EXPECT_THROW(parse_detections("{\"fn\":1,\"bbox\":[1,2,3]}"), ParseError);
  EXPECT_THROW(parse_detections("{\"fn\":1,\"bbox\":[1,2,3,4],\"score\":2}"), ParseError);
  EXPECT_THROW(parse_detections("{\"fn\":1,\"bbox\":[1,2,3,4],\"depth_m\":-1}"), ParseError);
  EXPECT_THROW(parse_detections("{\"fn\":1,\"bbox\":[1,2,3,4],\"colour\":1}"), ParseError);
}

TEST(Config, ParsesEveryKnob) {
  const auto p = parse_config(
      "# tuned\n"
      "alpha = 0.8\n"
      "sigma = 1.0  # meters\n"
      "s_neutral = 0.4\n"
      "lambda = 0.2\n"
      "gate = 0.25\n"
      "second_round = false\n"
      "second_round_iou_gate = 0.4\n"
      "max_age = 12\n"
      "min_hits = 2\n"
      "det_score_min = 0.3\n"
      "vdc_window = 2\n"
      "track_depth = last_observation\n"
      "kf_position_weight = 0.1\n"
      "kf_velocity_weight = 0.01\n");
  EXPECT_EQ(p.sim.alpha, 0.8);
  EXPECT_EQ(p.sim.sigma, 1.0);
  EXPECT_EQ(p.sim.s_neutral, 0.4);
  EXPECT_EQ(p.assoc.lambda, 0.2);
  EXPECT_EQ(p.assoc.gate, 0.25);
  EXPECT_FALSE(p.assoc.second_round);
  EXPECT_EQ(p.assoc.second_round_iou_gate, 0.4);
  EXPECT_EQ(p.max_age, 12);
  EXPECT_EQ(p.min_hits, 2);
  EXPECT_EQ(p.det_score_min, 0.3);
  EXPECT_EQ(p.vdc_window, 2);
  EXPECT_EQ(p.depth_mode, TrackDepthMode::LastObservation);
  EXPECT_EQ(p.kalman.position_weight, 0.1);
  EXPECT_EQ(p.kalman.velocity_weight, 0.01);
  EXPECT_EQ(config_keys().size(), 14u);
}

TEST(Config, Errors) {
  EXPECT_EQ(parse_error_of([] { parse_config("alpha = 0.5\nbeta = 1\n", "c.cfg"); }).line(), 2u);
  EXPECT_THROW(parse_config("alpha 0.5\n"), ParseError);
  EXPECT_THROW(parse_config("alpha = high\n"), ParseError);
  EXPECT_THROW(parse_config("alpha = 1.5\n"), ParseError);
  EXPECT_THROW(parse_config("max_age = 2.5\n"), ParseError);
  EXPECT_THROW(parse_config("second_round = maybe\n"), ParseError);
}

TEST(DepthPng, RoundTripInMillimeters) {
  fixtures::TempDir dir("depth");
  DepthMap d(4, 3, 0.0);
  d.set(0, 0, 2.5);
  d.set(3, 2, 65.535);
  d.set(1, 1, 0.001);
  save_depth(dir / "d.png", d);
  const DepthMap back = load_depth(dir / "d.png");
  ASSERT_EQ(back.width(), 4u);
  ASSERT_EQ(back.height(), 3u);
  EXPECT_EQ(back.at(0, 0), 2.5);
  EXPECT_EQ(back.at(3, 2), 65.535);
  EXPECT_EQ(back.at(1, 1), 0.001);
  EXPECT_EQ(back.at(2, 0), DepthMap::kInvalid);
  EXPECT_FALSE(mean_box_depth(DepthMap(5, 5, 0.0), BBox(0, 0, 5, 5)).has_value());
}

TEST(DepthPng, RejectsWrongLayouts) {
  fixtures::TempDir dir("depth_bad");
  save_rgb_png(dir / "rgb.png", RgbImage{2, 2, std::vector<std::uint8_t>(12, 7)});
  EXPECT_THROW(load_depth(dir / "rgb.png"), std::runtime_error);

  {
    detail::PngFile f(dir / "gray8.png", "wb");
    detail::RawPng err;
    ASSERT_TRUE(detail::write_png_raw(f.fp, 2, 2, 8, PNG_COLOR_TYPE_GRAY, std::vector<std::uint8_t>(4, 9), 2, err));
  }
  EXPECT_THROW(load_depth(dir / "gray8.png"), std::runtime_error);
  write_text_file(dir / "junk.png", "not a png");
  EXPECT_THROW(load_depth(dir / "junk.png"), std::runtime_error);
  EXPECT_THROW(load_depth(dir / "missing.png"), std::runtime_error);
}

TEST(PseudoRgb, LinearMap) {
  DepthMap d(4, 1, 0.0);
  d.set(0, 0, 1.0);
  d.set(1, 0, 5.0);
  d.set(2, 0, 3.0);
  const auto img = export_pseudo_rgb(d, 1.0, 5.0);
  EXPECT_EQ(img.at(0, 0), (std::array<std::uint8_t, 3>{0, 0, 0}));
  EXPECT_EQ(img.at(1, 0), (std::array<std::uint8_t, 3>{255, 255, 255}));
  const auto mid = img.at(2, 0);
  EXPECT_NEAR(mid[0], 128, 1);
  EXPECT_EQ(mid[0], mid[1]);
  EXPECT_EQ(mid[1], mid[2]);
  EXPECT_EQ(img.at(3, 0), (std::array<std::uint8_t, 3>{0, 0, 0}));

  DepthMap far(2, 1, 0.0);
  far.set(0, 0, 0.5);
  far.set(1, 0, 9.0);
  const auto clamped = export_pseudo_rgb(far, 1.0, 5.0);
  EXPECT_EQ(clamped.at(0, 0)[0], 0);
  EXPECT_EQ(clamped.at(1, 0)[0], 255);
  EXPECT_THROW(export_pseudo_rgb(far, 5.0, 5.0), std::invalid_argument);
}
