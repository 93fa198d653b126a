#include "avtrack/mpc.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "avtrack/errors.h"

namespace avtrack {

void MpcConfig::Validate() const {
  if (!(ts > 0.0)) throw InvalidInput("mpc ts must be positive");
  if (m < 1 || m > p) throw InvalidInput("mpc horizons need 1 <= m <= p");
  const MpcWeights& w = weights;
  for (double v : {w.pos, w.head, w.vel, w.d_accel, w.d_steer, bounds.penalty}) {
    if (!(v >= 0.0)) throw InvalidInput("mpc weights must be >= 0");
  }
  if (!(opt.tol > 0.0)) throw InvalidInput("mpc tolerance must be positive");
  if (opt.max_iter < 1) throw InvalidInput("mpc max_iter must be >= 1");
  if (!(bounds.accel_min < bounds.accel_max)) throw InvalidInput("mpc accel bounds are empty");
  if (!(bounds.steer_max > 0.0)) throw InvalidInput("mpc steer_max must be positive");
  if (latency_steps < 0) throw InvalidInput("mpc latency_steps must be >= 0");
}

const ControlInput& ControlAt(const ControlSequence& seq, int step) {
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(step), seq.size() - 1);
  return seq[i];
}

PredictedTrajectory Predict(const VehicleParams& params, const VehicleState& state,
                            const ControlSequence& seq, const MpcConfig& cfg) {
  if (seq.empty()) throw InvalidInput("control sequence is empty");
  PredictedTrajectory pred;
  pred.states.reserve(static_cast<std::size_t>(cfg.p));
  VehicleState s = state;
  for (int i = 0; i < cfg.p; ++i) {
    s = StepKinematic(s, ClampControl(ControlAt(seq, i), params), params, cfg.ts);
    pred.states.push_back(s);
  }
  return pred;
}

double StageCost(const PredictedTrajectory& pred, const std::vector<VehicleState>& refs,
                 const ControlSequence& seq, const ControlInput& prev_u, const MpcConfig& cfg,
                 std::vector<double>* per_step) {
  const auto p = static_cast<std::size_t>(cfg.p);
  if (refs.size() != p || pred.states.size() != p) {
    throw InvalidInput("reference and prediction lengths must equal p");
  }
  if (seq.empty()) throw InvalidInput("control sequence is empty");
  const MpcWeights& w = cfg.weights;
  const MpcBounds& b = cfg.bounds;
  if (per_step != nullptr) per_step->assign(p, 0.0);

  double cost = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const VehicleState& s = pred.states[i];
    const VehicleState& r = refs[i];
    const double dx = s.x - r.x;
    const double dy = s.y - r.y;
    const double dh = WrapAngle(s.theta - r.theta);
    const double dv = s.v - r.v;
    double c = w.pos * (dx * dx + dy * dy) + w.head * dh * dh + w.vel * dv * dv;
    const double over_speed = s.v - b.speed_max;
    if (over_speed > 0.0) c += b.penalty * over_speed * over_speed;
    if (per_step != nullptr) (*per_step)[i] = c;
    cost += c;
  }

  ControlInput last = prev_u;
  for (int i = 0; i < cfg.p; ++i) {
    const ControlInput& u = ControlAt(seq, i);
    const double da = u.accel - last.accel;
    const double ds = u.steer - last.steer;
    cost += w.d_accel * da * da + w.d_steer * ds * ds;
    const double accel_excess = std::abs(da) / cfg.ts - b.accel_rate_max;
    const double steer_excess = std::abs(ds) / cfg.ts - b.steer_rate_max;
    if (accel_excess > 0.0) cost += b.penalty * accel_excess * accel_excess;
    if (steer_excess > 0.0) cost += b.penalty * steer_excess * steer_excess;
    last = u;
  }
  return cost;
}

namespace {

struct Box {
  double accel_lo;
  double accel_hi;
  double steer_max;
};

Box HardBox(const VehicleParams& params, const MpcBounds& b) {
  return {std::max(b.accel_min, -params.decel_max), std::min(b.accel_max, params.accel_max),
          std::min(b.steer_max, params.steer_max)};
}

double Lower(const Box& box, std::size_t k) { return k % 2 == 0 ? box.accel_lo : -box.steer_max; }
double Upper(const Box& box, std::size_t k) { return k % 2 == 0 ? box.accel_hi : box.steer_max; }

double& Coord(ControlSequence& seq, std::size_t k) {
  return k % 2 == 0 ? seq[k / 2].accel : seq[k / 2].steer;
}

bool InBox(const ControlSequence& seq, const Box& box) {
  for (const auto& u : seq) {
    if (u.accel < box.accel_lo || u.accel > box.accel_hi || std::abs(u.steer) > box.steer_max) {
      return false;
    }
  }
  return true;
}

}  // namespace

MpcSolution Optimize(const VehicleParams& params, const VehicleState& state,
                     const std::vector<VehicleState>& refs, const ControlInput& prev_u,
                     const MpcConfig& cfg, const ControlSequence* warm_start) {
  const Box box = HardBox(params, cfg.bounds);
  const auto m = static_cast<std::size_t>(cfg.m);
  const std::size_t dims = 2 * m;

  MpcSolution sol;
  auto evaluate = [&](const ControlSequence& seq) {
    ++sol.evaluations;
    if (!InBox(seq, box)) sol.iterates_in_bounds = false;
    return StageCost(Predict(params, state, seq, cfg), refs, seq, prev_u, cfg);
  };
  auto project = [&](ControlSequence& seq) {
    for (auto& u : seq) {
      u.accel = std::clamp(u.accel, box.accel_lo, box.accel_hi);
      u.steer = std::clamp(u.steer, -box.steer_max, box.steer_max);
    }
  };

  ControlSequence best;
  if (warm_start != nullptr && warm_start->size() == m) {
    best = *warm_start;
  } else {
    best.assign(m, prev_u);
  }
  project(best);
  double best_cost = evaluate(best);

  for (int k = 0; k < cfg.opt.coarse_steer_candidates; ++k) {
    const int n = cfg.opt.coarse_steer_candidates;
    const double steer =
        n == 1 ? 0.0 : -box.steer_max + 2.0 * box.steer_max * k / static_cast<double>(n - 1);
    ControlSequence cand(m, ControlInput{best.front().accel, steer});
    const double c = evaluate(cand);
    if (c < best_cost) {
      best_cost = c;
      best = std::move(cand);
    }
  }

  // Initial pattern step: coarse for cold starts, finer around a warm start.
  const double frac = warm_start != nullptr ? 0.05 : 0.25;
  std::vector<double> step(dims);
  std::vector<double> min_step(dims);
  for (std::size_t k = 0; k < dims; ++k) {
    const double range = Upper(box, k) - Lower(box, k);
    step[k] = frac * range;
    min_step[k] = 1e-7 * range;
  }

  std::mt19937 rng(cfg.opt.seed);
  std::vector<std::size_t> order(dims);
  for (std::size_t k = 0; k < dims; ++k) order[k] = k;

  sol.status = OptimizeStatus::kIterationCapped;
  for (int iter = 0; iter < cfg.opt.max_iter; ++iter) {
    ++sol.iterations;
    for (std::size_t i = dims; i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    const double start_cost = best_cost;
    for (std::size_t k : order) {
      for (double dir : {1.0, -1.0}) {
        ControlSequence cand = best;
        double& c = Coord(cand, k);
        c = std::clamp(c + dir * step[k], Lower(box, k), Upper(box, k));
        if (c == Coord(best, k)) continue;
        const double cost = evaluate(cand);
        if (cost < best_cost) {
          best_cost = cost;
          best = std::move(cand);
          break;
        }
      }
    }
    sol.cost_history.push_back(best_cost);
    const double improvement = start_cost - best_cost;
    if (improvement > 0.0) {
      if (improvement < cfg.opt.tol) {
        sol.status = OptimizeStatus::kConverged;
        break;
      }
    } else {
      bool all_small = true;
      for (std::size_t k = 0; k < dims; ++k) {
        step[k] *= 0.5;
        if (step[k] >= min_step[k]) all_small = false;
      }
      if (all_small) {
        sol.status = OptimizeStatus::kConverged;
        break;
      }
    }
  }

  sol.seq = std::move(best);
  sol.pred = Predict(params, state, sol.seq, cfg);
  sol.cost = StageCost(sol.pred, refs, sol.seq, prev_u, cfg, &sol.pred.stage_costs);
  return sol;
}

std::vector<VehicleState> BuildReferences(const Track& track, const VehicleState& state,
                                          const MpcConfig& cfg, bool* end_of_track) {
  const NearestResult nearest = track.Nearest({state.x, state.y});
  if (end_of_track != nullptr) {
    *end_of_track = !track.closed() && nearest.s >= track.length() - 1e-9;
  }
  std::vector<VehicleState> refs;
  refs.reserve(static_cast<std::size_t>(cfg.p));
  double s = nearest.s;
  double v_ref = nearest.point.v_ref;
  for (int i = 0; i < cfg.p; ++i) {
    s += v_ref * cfg.ts;
    double tangent = 0.0;
    Waypoint w = track.SampleAt(s, &tangent);
    if (!track.closed() && s > track.length()) {
      // Past the end: continue straight along the final segment.
      const double extra = s - track.length();
      w.x += extra * std::cos(tangent);
      w.y += extra * std::sin(tangent);
    }
    refs.push_back({w.x, w.y, tangent, w.v_ref});
    v_ref = w.v_ref;
  }
  return refs;
}

MpcController::MpcController(MpcConfig cfg, VehicleParams params, bool warm_start)
    : cfg_(cfg), params_(params), warm_start_(warm_start) {
  cfg_.Validate();
  params_.Validate();
}

void MpcController::Reset() {
  prev_u_ = {};
  last_.reset();
  pending_.clear();
}

MpcStepResult MpcController::Step(const VehicleState& state, const Track& track) {
  // Commands already sent but not yet acting on the plant are replayed through
  // the model so the optimisation starts from the state they will produce.
  VehicleState start = state;
  for (const ControlInput& u : pending_) {
    start = StepKinematic(start, ClampControl(u, params_), params_, cfg_.ts);
  }

  MpcStepResult result;
  const std::vector<VehicleState> refs = BuildReferences(track, start, cfg_, &result.end_of_track);

  ControlSequence shifted;
  const ControlSequence* warm = nullptr;
  if (warm_start_ && last_.has_value()) {
    shifted.assign(last_->seq.begin() + 1, last_->seq.end());
    shifted.push_back(last_->seq.back());
    warm = &shifted;
  }
  MpcSolution sol = Optimize(params_, start, refs, prev_u_, cfg_, warm);

  result.u = sol.seq.front();
  result.iterations = sol.iterations;
  result.cost = sol.cost;
  prev_u_ = result.u;
  if (cfg_.latency_steps > 0) {
    pending_.push_back(result.u);
    while (static_cast<int>(pending_.size()) > cfg_.latency_steps) pending_.pop_front();
  }
  last_ = std::move(sol);
  return result;
}

namespace {

void CheckPositive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) throw InvalidInput(std::string(what) + " must be positive");
}

}  // namespace

DoubleRange SampleTimeRange(double rise_time) {
  CheckPositive(rise_time, "rise time");
  return {0.05 * rise_time, 0.1 * rise_time};
}

IntRange PredictionHorizonRange(double settling_time, double ts) {
  CheckPositive(settling_time, "settling time");
  CheckPositive(ts, "sample time");
  const double base = settling_time / ts;
  return {static_cast<int>(std::lround(base)), static_cast<int>(std::lround(1.5 * base))};
}

IntRange ControlHorizonRange(int p_lo, int p_hi) {
  if (p_lo < 1 || p_hi < p_lo) throw InvalidInput("prediction horizon range is invalid");
  // Guard against 0.1 * 50 evaluating a hair above 5.
  auto up = [](double v) { return std::max(1, static_cast<int>(std::ceil(v - 1e-9))); };
  return {up(0.1 * p_lo), up(0.2 * p_hi)};
}

IntRange ControlHorizonRange(int p) { return ControlHorizonRange(p, p); }

MpcDesign DesignParams(double rise_time, double settling_time) {
  MpcDesign d;
  d.ts = SampleTimeRange(rise_time);
  d.p = PredictionHorizonRange(settling_time, 0.5 * (d.ts.lo + d.ts.hi));
  d.m = ControlHorizonRange(std::max(d.p.lo, 1), std::max(d.p.hi, std::max(d.p.lo, 1)));
  return d;
}

}  // namespace avtrack
