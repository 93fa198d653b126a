#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "avtrack/lane_env.h"
#include "avtrack/policy.h"

namespace avtrack {

struct EvolveConfig {
  int population = 20;
  int generations = 50;
  double sigma = 0.1;            // Gaussian mutation scale
  double elite_fraction = 0.2;
  std::uint64_t seed = 0;

  void Validate() const;
};

struct EvolveResult {
  std::vector<double> best;                // best-ever candidate
  double best_score = 0.0;
  std::vector<double> best_history;        // best-so-far after each generation
  std::vector<std::vector<double>> elites; // elites of the last generation
};

using Objective = std::function<double(std::span<const double>)>;

/// Maximizes `objective`. Generation 0 is `init` plus mutants of it; each
/// later generation keeps the elites unchanged and fills the rest with
/// mutants of the elites in round-robin order. Deterministic per seed.
EvolveResult Evolve(const Objective& objective, const std::vector<double>& init,
                    const EvolveConfig& cfg);

/// Parameter-space search over policy weights, scored by the mean-action
/// episode reward on `eval_episodes` fixed start states.
struct PolicySearchResult {
  Policy policy;
  std::vector<double> best_history;
};
PolicySearchResult EvolvePolicy(const Track& track, const LaneEnvConfig& env, Policy initial,
                                const EvolveConfig& cfg, int eval_episodes = 4);

}  // namespace avtrack
