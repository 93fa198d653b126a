#include "avtrack/bc.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "avtrack/errors.h"

namespace avtrack {

void BcConfig::Validate() const {
  if (epochs < 0) throw InvalidInput("epochs must be >= 0");
  if (batch_size <= 0) throw InvalidInput("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning_rate must be positive");
  if (episodes <= 0) throw InvalidInput("episodes must be positive");
  if (perturbation_std < 0.0 || start_offset < 0.0) throw InvalidInput("noise scales must be >= 0");
  if (!(max_near_zero_fraction > 0.0 && max_near_zero_fraction <= 1.0)) {
    throw InvalidInput("max_near_zero_fraction must be in (0, 1]");
  }
}

namespace {

// Records the expert's label for every step and returns a perturbed command.
class RecordingExpert : public LateralController {
 public:
  RecordingExpert(LateralController& expert, double noise_std, std::uint64_t seed,
                  std::vector<Eigen::VectorXd>& obs, std::vector<double>& labels)
      : expert_(expert), noise_std_(noise_std), rng_(seed), obs_(obs), labels_(labels) {}

  LateralCommand Steer(const SimContext& ctx) override {
    LateralCommand cmd = expert_.Steer(ctx);
    obs_.push_back(Observe(ctx.track, ctx.state, ctx.params));
    labels_.push_back(std::clamp(cmd.steer, -ctx.params.steer_max, ctx.params.steer_max));
    if (noise_std_ > 0.0) cmd.steer += noise_std_ * noise_(rng_);
    return cmd;
  }
  void Reset() override { expert_.Reset(); }

 private:
  LateralController& expert_;
  double noise_std_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::vector<Eigen::VectorXd>& obs_;
  std::vector<double>& labels_;
};

}  // namespace

BcDataset CollectDemonstrations(LateralController& expert, const Track& track,
                                const SimConfig& sim, const BcConfig& cfg) {
  cfg.Validate();
  std::vector<Eigen::VectorXd> obs;
  std::vector<double> labels;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int ep = 0; ep < cfg.episodes; ++ep) {
    SimConfig run = sim;
    double noise = 0.0;
    if (ep > 0) {
      noise = cfg.perturbation_std;
      run.initial.lateral_offset = cfg.start_offset * unit(rng);
    }
    RecordingExpert rec(expert, noise, rng(), obs, labels);
    const RunRecord r = Simulate(run, track, rec);
    if (r.status != RunStatus::kCompleted) {
      throw DataCollectionError(std::string("expert run ended with status ") +
                                RunStatusName(r.status) + (r.message.empty() ? "" : ": " + r.message));
    }
  }
  BcDataset data;
  data.obs.resize(kObservationDim, static_cast<Eigen::Index>(obs.size()));
  data.steer.resize(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    data.obs.col(static_cast<Eigen::Index>(i)) = obs[i];
    data.steer(static_cast<Eigen::Index>(i)) = labels[i];
  }
  return data;
}

BcDataset BalanceDataset(const BcDataset& data, const BcConfig& cfg, std::mt19937_64& rng) {
  std::vector<std::size_t> zero;
  std::vector<std::size_t> other;
  for (Eigen::Index i = 0; i < data.steer.size(); ++i) {
    (std::abs(data.steer(i)) < cfg.near_zero_steer ? zero : other).push_back(static_cast<std::size_t>(i));
  }
  const double frac = cfg.max_near_zero_fraction;
  // zero_kept / (zero_kept + other) <= frac
  const auto cap = frac >= 1.0 ? zero.size()
                               : static_cast<std::size_t>(std::floor(frac / (1.0 - frac) *
                                                                     static_cast<double>(other.size())));
  if (zero.size() > cap) {
    std::shuffle(zero.begin(), zero.end(), rng);
    zero.resize(cap);
  }
  std::vector<std::size_t> keep = other;
  keep.insert(keep.end(), zero.begin(), zero.end());
  std::sort(keep.begin(), keep.end());
  BcDataset out;
  out.obs.resize(data.obs.rows(), static_cast<Eigen::Index>(keep.size()));
  out.steer.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.obs.col(static_cast<Eigen::Index>(k)) = data.obs.col(static_cast<Eigen::Index>(keep[k]));
    out.steer(static_cast<Eigen::Index>(k)) = data.steer(static_cast<Eigen::Index>(keep[k]));
  }
  return out;
}

BcResult TrainBehaviorClone(const BcDataset& data, Policy initial, const BcConfig& cfg) {
  cfg.Validate();
  const Eigen::Index n = data.obs.cols();
  if (n == 0) throw InvalidInput("behavioral cloning needs at least one sample");
  if (data.obs.rows() != initial.net.input_dim() || data.steer.size() != n) {
    throw InvalidInput("dataset does not match the policy input");
  }
  BcResult res;
  res.samples = static_cast<std::size_t>(n);
  res.policy = std::move(initial);
  Policy& p = res.policy;
  const Eigen::MatrixXd target = (data.steer / p.delta_max).transpose();

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamState adam(p.net.num_params(), cfg.learning_rate);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      Eigen::MatrixXd xb(data.obs.rows(), len);
      Eigen::MatrixXd yb(1, len);
      for (Eigen::Index k = 0; k < len; ++k) {
        xb.col(k) = data.obs.col(order[static_cast<std::size_t>(start + k)]);
        yb(0, k) = target(0, order[static_cast<std::size_t>(start + k)]);
      }
      ForwardCache cache;
      const Eigen::MatrixXd pred = Forward(p.net, xb, &cache);
      const MlpGradients g = Backward(p.net, cache, LossGradient(pred, yb, LossKind::kMse));
      std::vector<double> params = p.net.GetParams();
      const std::vector<double> flat = g.Flatten();
      AdamStep(adam, params, flat);
      p.net.SetParams(params);
    }
    res.epoch_loss.push_back(Loss(Forward(p.net, data.obs), target, LossKind::kMse));
  }
  return res;
}

BcResult CloneBehavior(LateralController& expert, const Track& track, const SimConfig& sim,
                       const BcConfig& cfg) {
  cfg.Validate();
  const BcDataset raw = CollectDemonstrations(expert, track, sim, cfg);
  std::mt19937_64 rng(cfg.seed);
  const BcDataset data = BalanceDataset(raw, cfg, rng);
  Policy init = CreatePolicy(cfg.hidden, sim.vehicle.steer_max, rng);
  return TrainBehaviorClone(data, std::move(init), cfg);
}

}  // namespace avtrack
