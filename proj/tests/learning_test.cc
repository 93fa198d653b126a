#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "avtrack/bc.h"
#include "avtrack/errors.h"
#include "avtrack/evolve.h"
#include "avtrack/lane_env.h"
#include "avtrack/policy.h"
#include "avtrack/ppo.h"

namespace avtrack {
namespace {

Policy SmallPolicy(std::uint64_t seed, std::vector<int> hidden = {8}) {
  std::mt19937_64 rng(seed);
  return CreatePolicy(hidden, DegToRad(70.0), rng);
}

TEST(PpoSurrogateTest, UnitRatioGivesAdvantage) {
  EXPECT_EQ(PpoSurrogate(1.0, 3.7, 0.2), 3.7);
  EXPECT_EQ(PpoSurrogate(1.0, -2.1, 0.2), -2.1);
}

TEST(PpoSurrogateTest, ClipsOptimisticBranch) { EXPECT_NEAR(PpoSurrogate(1.5, 1.0, 0.2), 1.2, 1e-15); }

TEST(PpoSurrogateTest, PessimisticBranchForNegativeAdvantage) {
  EXPECT_NEAR(PpoSurrogate(0.5, -2.0, 0.2), -1.6, 1e-15);
}

TEST(PpoSurrogateTest, MinProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> ur(0.01, 3.0), ua(-5.0, 5.0), ue(0.0, 0.5);
  for (int i = 0; i < 10000; ++i) {
    const double r = ur(rng), a = ua(rng), eps = ue(rng);
    const double l = PpoSurrogate(r, a, eps);
    ASSERT_LE(l, r * a);
    ASSERT_LE(l, std::clamp(r, 1 - eps, 1 + eps) * a);
    ASSERT_TRUE(l == r * a || l == std::clamp(r, 1 - eps, 1 + eps) * a);
  }
}

TEST(PpoSurrogateTest, ZeroEpsilonFlattensClippedBranch) {
  // With eps = 0 the clipped term is A itself; wherever it is the minimum the
  // objective does not depend on r.
  const double h = 1e-6;
  for (double r : {0.5, 1.5}) {
    for (double a : {-2.0, 2.0}) {
      if (r * a <= a) continue;
      EXPECT_EQ(PpoSurrogate(r + h, a, 0.0), PpoSurrogate(r - h, a, 0.0));
      EXPECT_EQ(PpoSurrogate(r, a, 0.0), a);
    }
  }
}

TEST(PpoSurrogateTest, RejectsBadInputs) {
  EXPECT_THROW(PpoSurrogate(0.0, 1.0, 0.2), InvalidInput);
  EXPECT_THROW(PpoSurrogate(1.0, 1.0, -0.1), InvalidInput);
}

TEST(AdvantageTest, RewardToGoMinusMean) {
  std::vector<Transition> batch(3);
  batch[0].reward = 1.0;
  batch[1].reward = 2.0;
  batch[1].terminal = true;
  batch[2].reward = 4.0;
  batch[2].terminal = true;
  const std::vector<double> adv = ComputeAdvantages(batch, 0.5);
  // Reward-to-go: 1 + 0.5*2 = 2, 2, 4; mean 8/3.
  EXPECT_NEAR(adv[0], 2.0 - 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(adv[1], 2.0 - 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(adv[2], 4.0 - 8.0 / 3.0, 1e-12);
}

TEST(GaussianTest, LogDensity) {
  EXPECT_NEAR(GaussianLogProb(0.0, 0.0, 1.0), -0.5 * std::log(2 * kPi), 1e-15);
  EXPECT_NEAR(GaussianLogProb(1.0, 0.0, 2.0), -0.125 - std::log(2.0) - 0.5 * std::log(2 * kPi), 1e-15);
}

TEST(PolicyTest, OutputSquashedIntoSteeringRange) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 50.0);
  Policy policy = SmallPolicy(2);
  std::vector<double> p = policy.net.GetParams();
  for (double& v : p) v = n(rng);
  policy.net.SetParams(p);
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd obs(kObservationDim);
    for (int k = 0; k < kObservationDim; ++k) obs(k) = n(rng);
    ASSERT_LE(std::abs(policy.MeanSteer(obs)), policy.delta_max);
  }
}

TEST(PolicyTest, ObservationLayout) {
  const Track track = MakeCircleTrack(20, 8);
  const VehicleParams params;
  const Eigen::VectorXd obs = Observe(track, {20.0, 0.0, kPi / 2, 8.0}, params);
  ASSERT_EQ(obs.size(), kObservationDim);
  EXPECT_NEAR(obs(2), 0.8, 1e-12);
  for (int k = 3; k < 6; ++k) EXPECT_NEAR(obs(k), 10.0 / 20.0, 2e-3);
}

TEST(PolicyFileTest, RoundTripIsExact) {
  const Policy a = SmallPolicy(3, {5, 4});
  std::stringstream ss;
  SavePolicy(ss, a);
  const Policy b = LoadPolicy(ss);
  EXPECT_EQ(a.net.GetParams(), b.net.GetParams());
  EXPECT_EQ(a.delta_max, b.delta_max);
  EXPECT_EQ(a.sigma, b.sigma);
  ASSERT_EQ(a.net.layers().size(), b.net.layers().size());
  for (std::size_t l = 0; l < a.net.layers().size(); ++l) {
    EXPECT_EQ(a.net.layers()[l].act, b.net.layers()[l].act);
  }
}

TEST(PolicyFileTest, HeaderLayout) {
  std::stringstream ss;
  SavePolicy(ss, SmallPolicy(4, {3}));
  const std::string bytes = ss.str();
  ASSERT_GE(bytes.size(), 9u);
  EXPECT_EQ(bytes.substr(0, 5), "AVCB1");
  // Layer count 2 as little-endian u32.
  EXPECT_EQ(bytes[5], 2);
  EXPECT_EQ(bytes[6], 0);
  const std::size_t params = 6 * 3 + 3 + 3 * 1 + 1;
  EXPECT_EQ(bytes.size(), 5 + 4 + 2 * 12 + 16 + params * 8);
}

TEST(PolicyFileTest, RejectsCorruptInput) {
  std::stringstream good;
  SavePolicy(good, SmallPolicy(5));
  const std::string bytes = good.str();
  {
    std::stringstream bad(std::string("AVCB2") + bytes.substr(5));
    EXPECT_THROW(LoadPolicy(bad), InvalidInput);
  }
  {
    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(LoadPolicy(truncated), InvalidInput);
  }
  {
    std::string wrong_act = bytes;
    wrong_act[5 + 4 + 8] = 9;
    std::stringstream s(wrong_act);
    EXPECT_THROW(LoadPolicy(s), InvalidInput);
  }
  EXPECT_THROW(LoadPolicyFile("/nonexistent/policy.bin"), InvalidInput);
}

TEST(TrainingLogTest, AppendsRowsWithHeader) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "avtrack_learning_log_test.csv").string();
  std::filesystem::remove(path);
  AppendTrainingLog(path, {0.5, 0.25}, 7);
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(text.str(), "iter,loss_or_reward,seed\n0,0.5,7\n1,0.25,7\n");
  std::filesystem::remove(path);
}

TEST(LaneEnvTest, ReproducibleEpisodes) {
  const Track track = MakeRacetrack(60, 15, 6);
  const Policy policy = SmallPolicy(6);
  std::mt19937_64 a(9), b(9);
  std::vector<Transition> ta, tb;
  const EpisodeResult ra = RunLaneEpisode(policy, track, LaneEnvConfig{}, a, true, &ta);
  const EpisodeResult rb = RunLaneEpisode(policy, track, LaneEnvConfig{}, b, true, &tb);
  EXPECT_EQ(ra.reward, rb.reward);
  ASSERT_EQ(ta.size(), tb.size());
  EXPECT_TRUE(ta.back().terminal);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(ta[i].action, tb[i].action);
}

TEST(LaneEnvTest, ConstantTurnLeavesTheRoadWithPenalty) {
  const Track track = MakeStraightTrack(400, 8);
  Policy policy = SmallPolicy(7);
  std::vector<double> p(policy.net.num_params(), 0.0);
  p.back() = std::atanh(0.1);  // constant 7 degree left turn
  policy.net.SetParams(p);
  std::mt19937_64 rng(1);
  LaneEnvConfig cfg;
  const EpisodeResult r = RunLaneEpisode(policy, track, cfg, rng, false);
  EXPECT_TRUE(r.off_track);
  EXPECT_LT(r.steps, cfg.max_steps);
  EXPECT_LT(r.reward, -cfg.off_track_penalty + 10.0);
}

TEST(PpoTest, FirstEpochRatioIsOne) {
  const Track track = MakeRacetrack(60, 15, 6);
  PpoConfig cfg;
  cfg.iterations = 3;
  cfg.episodes_per_iteration = 2;
  LaneEnvConfig env;
  env.max_steps = 60;
  const PpoResult r = TrainPpo(track, env, SmallPolicy(1), cfg);
  ASSERT_EQ(r.history.size(), 3u);
  for (const auto& h : r.history) EXPECT_EQ(h.first_epoch_max_ratio_dev, 0.0);
}

TEST(PpoTest, BitwiseReproducible) {
  const Track track = MakeRacetrack(60, 15, 6);
  PpoConfig cfg;
  cfg.iterations = 3;
  cfg.episodes_per_iteration = 2;
  cfg.seed = 11;
  LaneEnvConfig env;
  env.max_steps = 60;
  const PpoResult a = TrainPpo(track, env, SmallPolicy(2), cfg);
  const PpoResult b = TrainPpo(track, env, SmallPolicy(2), cfg);
  EXPECT_EQ(a.policy.net.GetParams(), b.policy.net.GetParams());
}

TEST(PpoTest, ConfigValidation) {
  PpoConfig cfg;
  cfg.eps_clip = -0.1;
  EXPECT_THROW(cfg.Validate(), InvalidInput);
  cfg = PpoConfig{};
  cfg.episodes_per_iteration = 0;
  EXPECT_THROW(cfg.Validate(), InvalidInput);
  cfg = PpoConfig{};
  cfg.gamma = 1.5;
  EXPECT_THROW(cfg.Validate(), InvalidInput);
}

TEST(EvolveTest, ToyQuadraticConverges) {
  const Objective f = [](std::span<const double> x) {
    return -((x[0] - 1.0) * (x[0] - 1.0) + (x[1] + 2.0) * (x[1] + 2.0));
  };
  EvolveConfig cfg;
  cfg.seed = 0;
  cfg.generations = 50;
  const EvolveResult r = Evolve(f, {0.0, 0.0}, cfg);
  EXPECT_LT(std::hypot(r.best[0] - 1.0, r.best[1] + 2.0), 0.1);
  EXPECT_EQ(r.best_history.size(), 50u);
}

TEST(EvolveTest, BestSoFarNeverDecreases) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Objective f = [](std::span<const double> x) { return std::sin(3 * x[0]) - x[0] * x[0]; };
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EvolveConfig cfg;
    cfg.seed = seed;
    cfg.generations = 30;
    cfg.population = 6;
    cfg.sigma = 0.5;
    const EvolveResult r = Evolve(f, {noise(rng)}, cfg);
    for (std::size_t i = 1; i < r.best_history.size(); ++i) {
      ASSERT_GE(r.best_history[i], r.best_history[i - 1]);
    }
    EXPECT_EQ(r.best_score, r.best_history.back());
    EXPECT_EQ(f(r.best), r.best_score);
  }
}

TEST(EvolveTest, NoMutationKeepsElites) {
  const Objective f = [](std::span<const double> x) { return -std::abs(x[0] - 3.0); };
  EvolveConfig cfg;
  cfg.population = 2;
  cfg.sigma = 0.0;
  cfg.generations = 10;
  const EvolveResult r = Evolve(f, {0.5, -1.0}, cfg);
  EXPECT_EQ(r.best, (std::vector<double>{0.5, -1.0}));
  for (const auto& e : r.elites) EXPECT_EQ(e, (std::vector<double>{0.5, -1.0}));
  for (double h : r.best_history) EXPECT_EQ(h, r.best_history.front());
}

TEST(EvolveTest, DeterministicPerSeed) {
  const Objective f = [](std::span<const double> x) { return -(x[0] * x[0] + x[1] * x[1]); };
  EvolveConfig cfg;
  cfg.seed = 5;
  cfg.generations = 10;
  EXPECT_EQ(Evolve(f, {1, 1}, cfg).best, Evolve(f, {1, 1}, cfg).best);
}

TEST(EvolveTest, RejectsTinyPopulation) {
  EvolveConfig cfg;
  cfg.population = 1;
  EXPECT_THROW(cfg.Validate(), InvalidInput);
}

TEST(EvolveTest, PolicySearchDoesNotRegress) {
  const Track track = MakeRacetrack(60, 15, 6);
  LaneEnvConfig env;
  env.max_steps = 80;
  EvolveConfig cfg;
  cfg.population = 6;
  cfg.generations = 3;
  const Policy init = SmallPolicy(8, {4});
  const PolicySearchResult r = EvolvePolicy(track, env, init, cfg, 2);
  ASSERT_EQ(r.best_history.size(), 3u);
  const double before = EvaluatePolicy(init, track, env, 2, cfg.seed).mean_reward;
  const double after = EvaluatePolicy(r.policy, track, env, 2, cfg.seed).mean_reward;
  EXPECT_GE(after, before);
  EXPECT_EQ(after, r.best_history.back());
}

class ConstantSteer : public LateralController {
 public:
  explicit ConstantSteer(double steer) : steer_(steer) {}
  LateralCommand Steer(const SimContext&) override { return {steer_, {}, false}; }

 private:
  double steer_;
};

TEST(BehaviorCloneTest, CrashingExpertIsReported) {
  const Track track = MakeStraightTrack(100, 8);
  ConstantSteer expert(0.5);
  BcConfig cfg;
  cfg.episodes = 1;
  EXPECT_THROW(CollectDemonstrations(expert, track, SimConfig{}, cfg), DataCollectionError);
}

TEST(BehaviorCloneTest, BalancingCapsNearZeroLabels) {
  BcDataset data;
  const int n = 100;
  data.obs = Eigen::MatrixXd::Zero(kObservationDim, n);
  data.steer = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) data.obs(0, i) = i;
  for (int i = 0; i < 20; ++i) data.steer(i * 5) = 0.1;  // 20 turning samples
  BcConfig cfg;
  std::mt19937_64 rng(1);
  const BcDataset out = BalanceDataset(data, cfg, rng);
  int zero = 0;
  for (Eigen::Index i = 0; i < out.steer.size(); ++i) {
    if (std::abs(out.steer(i)) < cfg.near_zero_steer) ++zero;
  }
  EXPECT_EQ(out.steer.size(), 40);
  EXPECT_EQ(zero, 20);
  for (Eigen::Index i = 1; i < out.steer.size(); ++i) EXPECT_LT(out.obs(0, i - 1), out.obs(0, i));
}

TEST(BehaviorCloneTest, ZeroEpochsLeavesPolicyUnchanged) {
  BcDataset data;
  data.obs = Eigen::MatrixXd::Ones(kObservationDim, 10);
  data.steer = Eigen::VectorXd::Constant(10, 0.2);
  BcConfig cfg;
  cfg.epochs = 0;
  const Policy init = SmallPolicy(9);
  const BcResult r = TrainBehaviorClone(data, init, cfg);
  EXPECT_EQ(r.policy.net.GetParams(), init.net.GetParams());
  EXPECT_TRUE(r.epoch_loss.empty());
}

TEST(BehaviorCloneTest, LossTrendsDownAndRunsAreReproducible) {
  const Track track = MakeRacetrack(60, 15, 6);
  BcConfig cfg;
  cfg.epochs = 20;
  cfg.episodes = 2;
  cfg.hidden = {16};
  StanleyLateral expert_a(StanleyConfig{}), expert_b(StanleyConfig{});
  const BcResult a = CloneBehavior(expert_a, track, SimConfig{}, cfg);
  const BcResult b = CloneBehavior(expert_b, track, SimConfig{}, cfg);
  ASSERT_EQ(a.epoch_loss.size(), 20u);
  EXPECT_LE(a.epoch_loss.back(), a.epoch_loss.front());
  EXPECT_EQ(a.policy.net.GetParams(), b.policy.net.GetParams());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

}  // namespace
}  // namespace avtrack
