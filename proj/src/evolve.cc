#include "avtrack/evolve.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "avtrack/errors.h"

namespace avtrack {

void EvolveConfig::Validate() const {
  if (population < 2) throw InvalidInput("population must be >= 2");
  if (generations < 0) throw InvalidInput("generations must be >= 0");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be >= 0");
  if (!(elite_fraction > 0.0 && elite_fraction <= 1.0)) {
    throw InvalidInput("elite_fraction must be in (0, 1]");
  }
}

EvolveResult Evolve(const Objective& objective, const std::vector<double>& init,
                    const EvolveConfig& cfg) {
  cfg.Validate();
  if (init.empty()) throw InvalidInput("initial candidate is empty");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto pop = static_cast<std::size_t>(cfg.population);
  const std::size_t n_elite = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(cfg.elite_fraction * cfg.population)), 1, pop);

  auto mutate = [&](const std::vector<double>& parent) {
    std::vector<double> child = parent;
    for (double& x : child) x += cfg.sigma * noise(rng);
    return child;
  };

  std::vector<std::vector<double>> population;
  population.push_back(init);
  while (population.size() < pop) population.push_back(mutate(init));

  EvolveResult res;
  res.best = init;
  res.best_score = -std::numeric_limits<double>::infinity();
  std::vector<double> scores(pop);
  std::vector<std::size_t> order(pop);

  if (cfg.generations == 0) {
    res.best_score = objective(init);
    res.elites.push_back(init);
    return res;
  }
  for (int gen = 0; gen < cfg.generations; ++gen) {
    for (std::size_t i = 0; i < pop; ++i) {
      const double f = objective(population[i]);
      scores[i] = std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
    }
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    if (scores[order[0]] > res.best_score) {
      res.best_score = scores[order[0]];
      res.best = population[order[0]];
    }
    res.best_history.push_back(res.best_score);
    res.elites.clear();
    for (std::size_t e = 0; e < n_elite; ++e) res.elites.push_back(population[order[e]]);
    if (gen + 1 == cfg.generations) break;

    std::vector<std::vector<double>> next = res.elites;
    for (std::size_t k = 0; next.size() < pop; ++k) next.push_back(mutate(res.elites[k % n_elite]));
    population = std::move(next);
  }
  return res;
}

PolicySearchResult EvolvePolicy(const Track& track, const LaneEnvConfig& env, Policy initial,
                                const EvolveConfig& cfg, int eval_episodes) {
  env.Validate();
  Policy work = initial;
  const Objective objective = [&](std::span<const double> params) {
    work.net.SetParams(params);
    return EvaluatePolicy(work, track, env, eval_episodes, cfg.seed).mean_reward;
  };
  const EvolveResult r = Evolve(objective, initial.net.GetParams(), cfg);
  PolicySearchResult out;
  out.policy = std::move(initial);
  out.policy.net.SetParams(r.best);
  out.best_history = r.best_history;
  return out;
}

}  // namespace avtrack
