#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drtrack/metrics.hpp"
#include "drtrack/simulator.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace drtrack;

namespace {

Sequence single_target(int frames, int switch_at) {
  Sequence s(frames);
  for (int f = 1; f <= frames; ++f) s.add(f, f < switch_at ? 1 : 2, BBox(10 + f, 10, 60 + f, 110));
  return s;
}

void expect_matches_oracle(const Sequence& gt, const Sequence& pr, double tol) {
  const auto d = evaluate_detail(gt, pr);
  const auto o = oracle::hota(gt, pr);
  for (int a = 0; a < kNumAlphas; ++a) {
    EXPECT_NEAR(d.hota[a], o.hota[a], tol) << "alpha index " << a;
    EXPECT_NEAR(d.deta[a], o.deta[a], tol);
    EXPECT_NEAR(d.assa[a], o.assa[a], tol);
    EXPECT_NEAR(d.detre[a], o.detre[a], tol);
    EXPECT_NEAR(d.detpr[a], o.detpr[a], tol);
    EXPECT_NEAR(d.assre[a], o.assre[a], tol);
    EXPECT_NEAR(d.asspr[a], o.asspr[a], tol);
    EXPECT_NEAR(d.loca[a], o.loca[a], tol);
  }
  EXPECT_NEAR(d.bundle.hota, o.mean(o.hota), 100 * tol);
  EXPECT_NEAR(d.bundle.assa, o.mean(o.assa), 100 * tol);
  EXPECT_NEAR(d.bundle.loca, o.mean(o.loca), 100 * tol);
}

Sequence tracked(const Scenario& sc) {
  return results_to_sequence(run_sequence(sc.detections, sc.depth, {}), sc.spec.num_frames);
}

}  // namespace

TEST(Evaluate, PerfectPrediction) {
  const Sequence gt = generate(scenario_suite("scale")[3]).gt;
  const auto m = evaluate(gt, gt);
  EXPECT_NEAR(m.hota, 100, 1e-9);
  EXPECT_NEAR(m.deta, 100, 1e-9);
  EXPECT_NEAR(m.assa, 100, 1e-9);
  EXPECT_NEAR(m.loca, 100, 1e-9);
}

TEST(Evaluate, EmptyPrediction) {
  const Sequence gt = single_target(10, 100);
  const auto m = evaluate(gt, Sequence(10));
  EXPECT_EQ(m.hota, 0.0);
  EXPECT_EQ(m.deta, 0.0);
}

TEST(Evaluate, EmptyAgainstEmpty) {
  const auto m = evaluate(Sequence(5), Sequence(5));
  EXPECT_EQ(m.hota, 100.0);
  EXPECT_EQ(m.deta, 100.0);
  EXPECT_EQ(m.assa, 100.0);
  EXPECT_EQ(m.loca, 100.0);
}

TEST(Evaluate, IdSwitchAgreesWithOracle) {
  const Sequence gt = single_target(10, 100);
  const Sequence pr = single_target(10, 6);
  const auto m = evaluate(gt, pr);
  EXPECT_NEAR(m.deta, 100.0, 1e-9);
  EXPECT_GT(m.assa, 0.0);
  EXPECT_LT(m.assa, 100.0);
  expect_matches_oracle(gt, pr, 1e-9);
  EXPECT_EQ(count_id_switches(gt, pr), 1);
}

TEST(Evaluate, FrameRangeMismatchThrows) {
  EXPECT_THROW(evaluate(Sequence(4), Sequence(5)), std::invalid_argument);
}

TEST(Evaluate, AgreesWithOracleOnTrackedScenarios) {
  for (const auto& spec : fixtures::small_scenarios(15, 77)) {
    const Scenario sc = generate(spec);
    expect_matches_oracle(sc.gt, tracked(sc), 1e-6);
  }
}

TEST(Evaluate, PerThresholdIdentitiesAndRanges) {
  for (const auto& spec : fixtures::small_scenarios(20, 91)) {
    const Scenario sc = generate(spec);
    const auto d = evaluate_detail(sc.gt, tracked(sc));
    for (int a = 0; a < kNumAlphas; ++a) {
      EXPECT_NEAR(d.hota[a], std::sqrt(d.deta[a] * d.assa[a]), 1e-9);
      EXPECT_LE(d.deta[a], std::min(d.detre[a], d.detpr[a]) + 1e-12);
      for (double v : {d.hota[a], d.deta[a], d.assa[a], d.detre[a], d.detpr[a], d.assre[a], d.asspr[a], d.loca[a]}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);
      }
    }
  }
}

TEST(Evaluate, DeletingPredictionsNeverRaisesRecall) {
  std::mt19937 rng(5);
  for (const auto& spec : fixtures::small_scenarios(10, 123)) {
    const Scenario sc = generate(spec);
    Sequence pr = tracked(sc);
    double last = evaluate(sc.gt, pr).detre;
    for (int round = 0; round < 4; ++round) {
      Sequence thinner(pr.num_frames());
      std::bernoulli_distribution keep(0.8);
      for (int f = 1; f <= pr.num_frames(); ++f)
        for (const auto& b : pr.frame(f))
          if (keep(rng)) thinner.add(f, b.id, b.box);
      const double now = evaluate(sc.gt, thinner).detre;
      EXPECT_LE(now, last + 1e-9);
      pr = thinner;
      last = now;
    }
  }
}

TEST(EvaluateBenchmark, PoolingRules) {
  const Scenario a = generate(fixtures::small_scenarios(1, 7)[0]);
  const Sequence pa = tracked(a);
  const auto single = evaluate(a.gt, pa);
  const auto one = evaluate_benchmark({{a.gt, pa}});
  const auto twice = evaluate_benchmark({{a.gt, pa}, {a.gt, pa}});
  for (const auto& m : {one, twice}) {
    EXPECT_NEAR(m.hota, single.hota, 1e-9);
    EXPECT_NEAR(m.deta, single.deta, 1e-9);
    EXPECT_NEAR(m.assa, single.assa, 1e-9);
    EXPECT_NEAR(m.loca, single.loca, 1e-9);
  }
  const Sequence g1 = single_target(8, 100), g2 = generate(scenario_suite("scale")[2]).gt;
  const auto perfect = evaluate_benchmark({{g1, g1}, {g2, g2}});
  EXPECT_NEAR(perfect.hota, 100, 1e-9);
  EXPECT_NEAR(perfect.assa, 100, 1e-9);
  EXPECT_THROW(evaluate_benchmark({}), std::invalid_argument);
}

TEST(EvaluateBenchmark, PoolsAccumulatorsRatherThanScores) {
  const Sequence gt = single_target(10, 100);
  const Sequence half = single_target(10, 6);
  const Sequence g2 = single_target(4, 100);
  const auto pooled = evaluate_benchmark({{gt, half}, {g2, g2}});
  const auto mean = average_bundles({evaluate(gt, half), evaluate(g2, g2)});
  EXPECT_NE(pooled.assa, mean.assa);
  HotaCounts c = hota_accumulate(gt, half);
  c += hota_accumulate(g2, g2);
  EXPECT_NEAR(hota_finalize(c).bundle.assa, pooled.assa, 1e-12);
}

TEST(IdSwitches, CountsPerGroundTruthChange) {
  const Sequence gt = single_target(12, 100);
  EXPECT_EQ(count_id_switches(gt, gt), 0);
  Sequence pr(12);
  for (int f = 1; f <= 12; ++f) pr.add(f, f <= 4 ? 7 : (f <= 8 ? 9 : 7), gt.frame(f)[0].box);
  EXPECT_EQ(count_id_switches(gt, pr), 2);
}
