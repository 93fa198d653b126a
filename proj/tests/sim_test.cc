#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "avtrack/errors.h"
#include "avtrack/sim.h"

namespace avtrack {
namespace {

RunRow Row(double t, double ct, double steer) {
  RunRow r;
  r.t = t;
  r.errors.cross_track = ct;
  r.control.steer = steer;
  return r;
}

TEST(CouplingTest, DecoupledIsIdentity) {
  const EffectiveLimits l = CoupleLimits(CouplingConfig{}, 17.0, 0.4, 1.2);
  EXPECT_EQ(l.steer_max, 1.2);
  EXPECT_EQ(l.v_max, CouplingConfig{}.v_max);
}

TEST(CouplingTest, LongDominantAtStandstillKeepsLimit) {
  CouplingConfig c;
  c.mode = CouplingMode::kLongDominant;
  EXPECT_EQ(CoupleLimits(c, 0.0, 0.0, 1.2).steer_max, 1.2);
}

TEST(CouplingTest, LongDominantHalvesAtCharacteristicSpeed) {
  CouplingConfig c;
  c.mode = CouplingMode::kLongDominant;
  c.c_long = 10.0;
  EXPECT_DOUBLE_EQ(CoupleLimits(c, 10.0, 0.0, 1.2).steer_max, 0.6);
}

TEST(CouplingTest, LatDominantShrinksSpeedLimit) {
  CouplingConfig c;
  c.mode = CouplingMode::kLatDominant;
  c.c_lat = 0.2;
  EXPECT_DOUBLE_EQ(CoupleLimits(c, 5.0, -0.2, 1.2).v_max, 0.5 * c.v_max);
  EXPECT_EQ(CoupleLimits(c, 5.0, 0.0, 1.2).v_max, c.v_max);
}

TEST(CouplingTest, MutualBlendsBothLaws) {
  CouplingConfig c;
  c.mode = CouplingMode::kMutual;
  c.c_long = 10.0;
  c.c_lat = 0.2;
  c.w_long = 0.5;
  c.w_lat = 0.25;
  const EffectiveLimits l = CoupleLimits(c, 10.0, 0.2, 1.0);
  EXPECT_DOUBLE_EQ(l.steer_max, 0.75);
  EXPECT_DOUBLE_EQ(l.v_max, c.v_max * 0.875);
}

TEST(CouplingTest, FasterMeansTighterSteering) {
  CouplingConfig c;
  c.mode = CouplingMode::kLongDominant;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uv(0.01, 40.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = uv(rng);
    ASSERT_LT(CoupleLimits(c, 2 * v, 0, 1.0).steer_max, CoupleLimits(c, v, 0, 1.0).steer_max);
  }
}

TEST(MetricsTest, ConstantCrossTrack) {
  const Metrics m = ComputeMetrics({Row(0, 0.5, 0), Row(0.1, -0.5, 0), Row(0.2, 0.5, 0)});
  EXPECT_DOUBLE_EQ(m.rms_cross_track, 0.5);
  EXPECT_DOUBLE_EQ(m.max_cross_track, 0.5);
}

TEST(MetricsTest, SteerRateHandAverage) {
  const Metrics m = ComputeMetrics({Row(0, 0, 0.0), Row(0.1, 0, 0.1), Row(0.2, 0, 0.1)});
  EXPECT_NEAR(m.mean_abs_steer_rate, 0.5, 1e-12);
}

TEST(MetricsTest, PerfectTrackingIsZero) {
  const Metrics m = ComputeMetrics({Row(0, 0, 0), Row(0.1, 0, 0)});
  EXPECT_EQ(m.rms_cross_track, 0.0);
  EXPECT_EQ(m.max_cross_track, 0.0);
  EXPECT_EQ(m.rms_heading, 0.0);
  EXPECT_EQ(m.rms_speed_err, 0.0);
  EXPECT_EQ(m.mean_abs_steer_rate, 0.0);
  EXPECT_FALSE(m.lap_time.has_value());
}

TEST(MetricsTest, LapTimeAtFirstFullProgress) {
  std::vector<RunRow> rows{Row(0, 0, 0), Row(1, 0, 0), Row(2, 0, 0)};
  rows[1].progress = 0.6;
  rows[2].progress = 1.0;
  const Metrics m = ComputeMetrics(rows);
  ASSERT_TRUE(m.lap_time.has_value());
  EXPECT_EQ(*m.lap_time, 2.0);
  EXPECT_EQ(m.completion, 1.0);
}

TEST(MetricsTest, EmptyRowsRejected) { EXPECT_THROW(ComputeMetrics({}), InvalidInput); }

TEST(SimulateTest, ZeroSpeedStartNeverMoves) {
  const Track track({{0, 0, 0}, {50, 0, 0}}, false);
  SimConfig cfg;
  cfg.max_steps = 200;
  StanleyLateral st(StanleyConfig{});
  const RunRecord r = Simulate(cfg, track, st);
  EXPECT_EQ(r.status, RunStatus::kMaxSteps);
  EXPECT_EQ(r.metrics.completion, 0.0);
  EXPECT_EQ(r.rows.back().state.x, 0.0);
  EXPECT_EQ(r.rows.size(), 200u);
}

TEST(SimulateTest, StanleyCompletesRacetrackLap) {
  const Track track = MakeRacetrack(100, 20, 8);
  StanleyLateral st(StanleyConfig{});
  const RunRecord r = Simulate(SimConfig{}, track, st);
  EXPECT_EQ(r.status, RunStatus::kCompleted);
  EXPECT_EQ(r.metrics.completion, 1.0);
  EXPECT_LT(r.metrics.rms_cross_track, 0.30);
  ASSERT_TRUE(r.metrics.lap_time.has_value());
  EXPECT_NEAR(*r.metrics.lap_time, track.length() / 8.0, 1.0);
}

TEST(SimulateTest, BangBangFailsOnRacetrack) {
  const Track track = MakeRacetrack(100, 20, 8);
  BangBangLateral bb(DegToRad(70.0), 0.1);
  const RunRecord r = Simulate(SimConfig{}, track, bb);
  EXPECT_TRUE(r.diverged || r.metrics.completion < 1.0);
  EXPECT_NE(r.status, RunStatus::kCompleted);
  int flips = 0;
  for (std::size_t i = 1; i < r.rows.size(); ++i) {
    if (r.rows[i].control.steer * r.rows[i - 1].control.steer < 0.0) ++flips;
  }
  EXPECT_GT(flips, 10);
}

class ThrowingLateral : public LateralController {
 public:
  LateralCommand Steer(const SimContext& ctx) override {
    if (ctx.t > 1.0) throw std::runtime_error("controller blew up");
    return {};
  }
};

class NanLateral : public LateralController {
 public:
  LateralCommand Steer(const SimContext&) override { return {std::nan(""), {}, false}; }
};

TEST(SimulateTest, ControllerFailureEndsRunAsDiverged) {
  const Track track = MakeStraightTrack(200, 8);
  ThrowingLateral bad;
  const RunRecord r = Simulate(SimConfig{}, track, bad);
  EXPECT_EQ(r.status, RunStatus::kDiverged);
  EXPECT_TRUE(r.diverged);
  EXPECT_FALSE(r.message.empty());
  NanLateral nan;
  const RunRecord rn = Simulate(SimConfig{}, track, nan);
  EXPECT_EQ(rn.status, RunStatus::kDiverged);
}

TEST(SimulateTest, FiniteTrackEndsAtTheEnd) {
  const Track track = MakeStraightTrack(50, 8);
  SimConfig cfg;
  cfg.stop_on_lap = false;
  StanleyLateral st(StanleyConfig{});
  const RunRecord r = Simulate(cfg, track, st);
  EXPECT_EQ(r.status, RunStatus::kEndOfTrack);
}

TEST(SimulateTest, OffTrackTerminates) {
  const Track track = MakeStraightTrack(200, 8);
  SimConfig cfg;
  cfg.initial.heading_offset = 0.5;
  class Straight : public LateralController {
    LateralCommand Steer(const SimContext&) override { return {}; }
  } straight;
  const RunRecord r = Simulate(cfg, track, straight);
  EXPECT_EQ(r.status, RunStatus::kOffTrack);
}

TEST(SimulateTest, RowInvariants) {
  const Track track = MakeRacetrack(60, 15, 8);
  SimConfig cfg;
  cfg.max_steps = 500;
  PurePursuitLateral pp(PurePursuitConfig{});
  const RunRecord r = Simulate(cfg, track, pp);
  ASSERT_LE(r.rows.size(), 500u);
  for (std::size_t i = 1; i < r.rows.size(); ++i) ASSERT_GT(r.rows[i].t, r.rows[i - 1].t);
  EXPECT_GE(r.metrics.completion, 0.0);
  EXPECT_LE(r.metrics.completion, 1.0);
}

TEST(SimulateTest, DeterministicAcrossRuns) {
  const Track track = MakeRacetrack(100, 20, 8);
  SimConfig cfg;
  cfg.model = ModelKind::kDynamic;
  MpcLateral a(MpcConfig{}, cfg.vehicle), b(MpcConfig{}, cfg.vehicle);
  std::ostringstream sa, sb;
  WriteRunCsv(sa, Simulate(cfg, track, a));
  WriteRunCsv(sb, Simulate(cfg, track, b));
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(SimulateTest, LoggedControlsRespectEffectiveBounds) {
  const Track track = MakeRacetrack(100, 20, 8);
  for (CouplingMode mode : {CouplingMode::kDecoupled, CouplingMode::kLongDominant,
                            CouplingMode::kLatDominant, CouplingMode::kMutual}) {
    SimConfig cfg;
    cfg.coupling.mode = mode;
    cfg.steer_shaper.max_rate = 2.0;
    cfg.initial.lateral_offset = 1.5;
    StanleyLateral st(StanleyConfig{});
    const RunRecord r = Simulate(cfg, track, st);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const RunRow& row = r.rows[i];
      ASSERT_LE(std::abs(row.control.steer), row.steer_limit + 1e-12);
      ASSERT_LE(row.steer_limit, cfg.vehicle.steer_max);
      ASSERT_GE(row.control.accel, row.accel_min);
      ASSERT_LE(row.control.accel, row.accel_max);
      if (i > 0) ASSERT_LE(std::abs(row.control.steer - r.rows[i - 1].control.steer), 2.0 * cfg.dt + 1e-12);
    }
  }
}

TEST(SimulateTest, DynamicPlantTracksRacetrack) {
  const Track track = MakeRacetrack(100, 20, 8);
  SimConfig cfg;
  cfg.model = ModelKind::kDynamic;
  StanleyLateral st(StanleyConfig{});
  const RunRecord r = Simulate(cfg, track, st);
  EXPECT_EQ(r.status, RunStatus::kCompleted);
  EXPECT_LT(r.metrics.rms_cross_track, 0.5);
}

TEST(SimulateTest, InvalidConfigRejected) {
  SimConfig cfg;
  cfg.dt = 0.0;
  StanleyLateral st(StanleyConfig{});
  EXPECT_THROW(Simulate(cfg, MakeStraightTrack(10, 5), st), InvalidInput);
  cfg = SimConfig{};
  cfg.max_steps = 0;
  EXPECT_THROW(cfg.Validate(), InvalidInput);
}

TEST(RunCsvTest, HeaderAndRowCount) {
  const Track track = MakeStraightTrack(20, 5);
  SimConfig cfg;
  cfg.max_steps = 10;
  StanleyLateral st(StanleyConfig{});
  const RunRecord r = Simulate(cfg, track, st);
  std::ostringstream out;
  WriteRunCsv(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,x,y,theta,v,accel,steer,e_ct,e_head,e_v");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 10);
}

}  // namespace
}  // namespace avtrack
