#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "drtrack/motion.hpp"

using namespace drtrack;

namespace {

KalmanParams noiseless() {
  KalmanParams p;
  p.process_scale = 0.0;
  p.measurement_scale = 0.0;
  return p;
}

void expect_symmetric_pd(const StateCovariance& c) {
  EXPECT_LT((c - c.transpose()).cwiseAbs().maxCoeff(), 1e-9);
  for (int i = 0; i < 7; ++i) EXPECT_GT(c(i, i), 0.0);
}

}  // namespace

TEST(KalmanInit, SpecExamples) {
  const auto a = kf_init({0, 0, 10, 10});
  StateVector want;
  want << 5, 5, 100, 1, 0, 0, 0;
  EXPECT_TRUE(a.mean.isApprox(want));
  const auto b = kf_init({10, 20, 30, 60});
  want << 20, 40, 800, 0.5, 0, 0, 0;
  EXPECT_TRUE(b.mean.isApprox(want));
  expect_symmetric_pd(b.covariance);
  EXPECT_DOUBLE_EQ(b.covariance(0, 0), 10.0);
  EXPECT_DOUBLE_EQ(b.covariance(4, 4), 1000.0);
}

TEST(KalmanPredict, ConstantVelocity) {
  KalmanState st = kf_init({0, 0, 10, 10});
  st.mean(4) = 2.0;
  const auto next = kf_predict(st);
  EXPECT_DOUBLE_EQ(next.mean(0), 7.0);
  EXPECT_DOUBLE_EQ(next.mean(1), 5.0);
  EXPECT_DOUBLE_EQ(next.mean(3), 1.0);
  const auto still = kf_predict(kf_init({0, 0, 10, 10}));
  EXPECT_EQ(*state_to_box(still.mean), BBox(0, 0, 10, 10));
}

TEST(KalmanPredict, ClampsShrinkingArea) {
  KalmanState st = kf_init({0, 0, 10, 10});
  st.mean(6) = -150.0;
  const auto next = kf_predict(st);
  EXPECT_DOUBLE_EQ(next.mean(6), 0.0);
  EXPECT_DOUBLE_EQ(next.mean(2), 100.0);
}

TEST(KalmanPredict, ZeroNoiseTracksExactLineFor50Frames) {
  const KalmanParams p = noiseless();
  KalmanState st = kf_init({100, 50, 140, 130}, p);
  st.mean(4) = 3.25;
  st.mean(5) = -1.5;
  for (int k = 1; k <= 50; ++k) {
    st = kf_predict(st, p);
    EXPECT_NEAR(st.mean(0), 120 + 3.25 * k, 1e-6);
    EXPECT_NEAR(st.mean(1), 90 - 1.5 * k, 1e-6);
  }
}

TEST(KalmanUpdate, ZeroInnovationKeepsMean) {
  const KalmanState pred = kf_predict(kf_init({10, 10, 50, 90}));
  const auto post = kf_update(pred, *state_to_box(pred.mean));
  EXPECT_LT((post.mean.head<4>() - pred.mean.head<4>()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(KalmanUpdate, VanishingMeasurementNoiseSnapsToObservation) {
  KalmanParams p;
  p.measurement_scale = 1e-6;
  const KalmanState pred = kf_predict(kf_init({10, 10, 50, 90}, p), p);
  const BBox obs(14, 12, 56, 96);
  const auto post = kf_update(pred, obs, p);
  EXPECT_NEAR(post.mean(0), obs.cx(), 1e-6);
  EXPECT_NEAR(post.mean(1), obs.cy(), 1e-6);
}

TEST(KalmanUpdate, TraceNeverIncreasesAndStaysSymmetric) {
  std::mt19937 rng(17);
  std::normal_distribution<double> n(0, 2);
  KalmanState st = kf_init({100, 100, 140, 200});
  for (int k = 1; k <= 40; ++k) {
    st = kf_predict(st);
    expect_symmetric_pd(st.covariance);
    const double before = st.covariance.trace();
    st = kf_update(st, BBox(100 + 2 * k + n(rng), 100 + n(rng), 140 + 2 * k + n(rng), 200 + n(rng)));
    expect_symmetric_pd(st.covariance);
    EXPECT_LE(st.covariance.trace(), before + 1e-9);
  }
}

TEST(KalmanState, BoxRoundTrip) {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> c(-100, 700), e(0.5, 300);
  for (int k = 0; k < 1000; ++k) {
    const BBox b = BBox::from_center(c(rng), c(rng), e(rng), e(rng));
    StateVector x = StateVector::Zero();
    x.head<4>() = box_to_measurement(b);
    const BBox back = *state_to_box(x);
    EXPECT_NEAR(back.x1(), b.x1(), 1e-9 * (1 + std::abs(b.x1())));
    EXPECT_NEAR(back.y1(), b.y1(), 1e-9 * (1 + std::abs(b.y1())));
    EXPECT_NEAR(back.x2(), b.x2(), 1e-9 * (1 + std::abs(b.x2())));
    EXPECT_NEAR(back.y2(), b.y2(), 1e-9 * (1 + std::abs(b.y2())));
  }
}

TEST(KalmanState, InvalidStateHasNoBox) {
  StateVector x = StateVector::Zero();
  x(2) = -1;
  x(3) = 1;
  EXPECT_FALSE(state_to_box(x).has_value());
}

TEST(KalmanUpdate, ZeroNoiseVelocityConverges) {
  const KalmanParams p = noiseless();
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> v(-8, 8);
  for (int trial = 0; trial < 20; ++trial) {
    const double vx = v(rng), vy = v(rng);
    const BBox start(200, 150, 260, 290);
    KalmanState st = kf_init(start, p);
    for (int k = 1; k <= 10; ++k) st = kf_update(kf_predict(st, p), start.translated(vx * k, vy * k), p);
    EXPECT_NEAR(st.mean(4), vx, 1e-3);
    EXPECT_NEAR(st.mean(5), vy, 1e-3);
  }
}

TEST(Direction, SpecExamples) {
  const auto d = observation_direction(BBox::from_center(0, 0, 2, 2), BBox::from_center(3, 4, 2, 2));
  ASSERT_TRUE(d);
  EXPECT_NEAR(d->dx, 0.6, 1e-12);
  EXPECT_NEAR(d->dy, 0.8, 1e-12);
  EXPECT_FALSE(observation_direction(BBox(0, 0, 2, 2), BBox(0, 0, 2, 2)));
  const auto left = observation_direction(BBox::from_center(0, 0, 2, 2), BBox::from_center(-5, 0, 2, 2));
  EXPECT_NEAR(left->dx, -1.0, 1e-12);
  EXPECT_NEAR(left->dy, 0.0, 1e-12);
}

TEST(Direction, UnitLengthWhenDefined) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> c(-100, 100);
  for (int k = 0; k < 1000; ++k) {
    const auto d = observation_direction(BBox::from_center(c(rng), c(rng), 4, 4), BBox::from_center(c(rng), c(rng), 4, 4));
    ASSERT_TRUE(d);
    EXPECT_NEAR(d->dx * d->dx + d->dy * d->dy, 1.0, 1e-9);
  }
}

TEST(Vdc, SpecExamples) {
  EXPECT_DOUBLE_EQ(vdc_score(Direction{1, 0}, Direction{1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(vdc_score(Direction{1, 0}, Direction{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(vdc_score(Direction{0.6, 0.8}, Direction{1, 0}), 0.6);
  EXPECT_DOUBLE_EQ(vdc_score(std::nullopt, Direction{1, 0}), 0.0);
}

TEST(Vdc, SymmetricBoundedReflexive) {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  for (int k = 0; k < 1000; ++k) {
    const double a = ang(rng), b = ang(rng);
    const Direction da{std::cos(a), std::sin(a)}, db{std::cos(b), std::sin(b)};
    EXPECT_EQ(vdc_score(da, db), vdc_score(db, da));
    EXPECT_LE(std::abs(vdc_score(da, db)), 1.0);
    EXPECT_NEAR(vdc_score(da, da), 1.0, 1e-12);
  }
}
