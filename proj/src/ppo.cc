#include "avtrack/ppo.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "avtrack/errors.h"

namespace avtrack {

double PpoSurrogate(double ratio, double advantage, double eps_clip) {
  if (!(ratio > 0.0)) throw InvalidInput("probability ratio must be positive");
  if (!(eps_clip >= 0.0)) throw InvalidInput("eps_clip must be >= 0");
  const double clipped = std::clamp(ratio, 1.0 - eps_clip, 1.0 + eps_clip);
  return std::min(ratio * advantage, clipped * advantage);
}

void PpoConfig::Validate() const {
  if (iterations < 0) throw InvalidInput("iterations must be >= 0");
  if (episodes_per_iteration <= 0) throw InvalidInput("episodes_per_iteration must be positive");
  if (epochs <= 0) throw InvalidInput("epochs must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (!(eps_clip >= 0.0)) throw InvalidInput("eps_clip must be >= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must be in [0, 1]");
}

std::vector<double> ComputeAdvantages(const std::vector<Transition>& batch, double gamma) {
  std::vector<double> adv(batch.size(), 0.0);
  double running = 0.0;
  for (std::size_t i = batch.size(); i-- > 0;) {
    if (batch[i].terminal) running = 0.0;
    running = batch[i].reward + gamma * running;
    adv[i] = running;
  }
  if (adv.empty()) return adv;
  double mean = 0.0;
  for (double a : adv) mean += a;
  mean /= static_cast<double>(adv.size());
  for (double& a : adv) a -= mean;
  return adv;
}

PpoResult TrainPpo(const Track& track, const LaneEnvConfig& env, Policy initial,
                   const PpoConfig& cfg) {
  cfg.Validate();
  env.Validate();
  if (!(initial.sigma > 0.0)) throw InvalidInput("ppo needs a positive exploration sigma");
  std::mt19937_64 rng(cfg.seed);
  PpoResult result;
  result.policy = initial;
  Policy policy = std::move(initial);
  double best_reward = -std::numeric_limits<double>::infinity();
  AdamState adam(policy.net.num_params(), cfg.learning_rate);
  const double sigma2 = policy.sigma * policy.sigma;

  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Transition> batch;
    double reward_sum = 0.0;
    for (int e = 0; e < cfg.episodes_per_iteration; ++e) {
      reward_sum += RunLaneEpisode(policy, track, env, rng, true, &batch).reward;
    }
    PpoIterationStats stats;
    stats.mean_episode_reward = reward_sum / cfg.episodes_per_iteration;
    if (stats.mean_episode_reward > best_reward) {
      best_reward = stats.mean_episode_reward;
      result.policy = policy;
    }

    const std::vector<double> adv = ComputeAdvantages(batch, cfg.gamma);
    const auto n = static_cast<Eigen::Index>(batch.size());
    Eigen::MatrixXd obs(kObservationDim, n);
    for (Eigen::Index i = 0; i < n; ++i) obs.col(i) = batch[i].obs;

    // Behavior log-probabilities from the same batched pass used for training,
    // so the first-epoch ratio is exactly 1.
    std::vector<double> old_logp(batch.size());
    {
      const Eigen::MatrixXd y = Forward(policy.net, obs);
      for (Eigen::Index i = 0; i < n; ++i) {
        old_logp[i] = GaussianLogProb(batch[i].action, policy.delta_max * y(0, i), policy.sigma);
      }
    }

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      ForwardCache cache;
      const Eigen::MatrixXd y = Forward(policy.net, obs, &cache);
      Eigen::MatrixXd d_out(1, n);
      double surrogate = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = policy.delta_max * y(0, i);
        const double logp = GaussianLogProb(batch[i].action, mu, policy.sigma);
        const double r = std::exp(logp - old_logp[i]);
        if (epoch == 0) {
          stats.first_epoch_max_ratio_dev = std::max(stats.first_epoch_max_ratio_dev, std::abs(r - 1.0));
        }
        const double a = adv[i];
        const double unclipped = r * a;
        const double clipped = std::clamp(r, 1.0 - cfg.eps_clip, 1.0 + cfg.eps_clip) * a;
        surrogate += std::min(unclipped, clipped);
        // d(-L)/dy; zero when the clipped branch is the minimum.
        const double dr_dy = r * (batch[i].action - mu) / sigma2 * policy.delta_max;
        d_out(0, i) = unclipped <= clipped ? -a * dr_dy / static_cast<double>(n) : 0.0;
      }
      stats.surrogate = surrogate / static_cast<double>(n);
      const MlpGradients g = Backward(policy.net, cache, d_out);
      std::vector<double> params = policy.net.GetParams();
      const std::vector<double> flat = g.Flatten();
      AdamStep(adam, params, flat);
      policy.net.SetParams(params);
    }
    result.history.push_back(stats);
  }
  if (cfg.iterations > 0) {
    double reward_sum = 0.0;
    for (int e = 0; e < cfg.episodes_per_iteration; ++e) {
      reward_sum += RunLaneEpisode(policy, track, env, rng, true).reward;
    }
    if (reward_sum / cfg.episodes_per_iteration > best_reward) result.policy = policy;
  }
  return result;
}

}  // namespace avtrack
