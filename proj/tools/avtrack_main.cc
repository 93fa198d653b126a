#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "avtrack/benchmark.h"
#include "avtrack/config.h"
#include "avtrack/errors.h"
#include "avtrack/mpc.h"
#include "avtrack/policy.h"

namespace fs = std::filesystem;
using namespace avtrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitDiverged = 2;

std::string DefaultLog(const std::string& configured, const std::string& out) {
  return configured.empty() ? out + ".log.csv" : configured;
}

int RunSimulate(const std::string& config_path, const std::string& track_path, const std::string& out_dir) {
  RunSpec spec;
  std::unique_ptr<LateralController> lateral;
  std::optional<Track> track;
  try {
    spec = ParseRunSpec(ReadTextFile(config_path));
    track.emplace(LoadTrackCsv(track_path, spec.track_closed));
    lateral = MakeLateral(spec.lateral, spec.sim.vehicle);
  } catch (const InvalidInput& ex) {
    std::cerr << "invalid config: " << ex.what() << "\n";
    return kExitInvalid;
  }
  const RunRecord rec = Simulate(spec.sim, *track, *lateral);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "run.csv");
    WriteRunCsv(out, rec);
  }
  {
    std::ofstream out(fs::path(out_dir) / "metrics.csv");
    CellResult cell;
    cell.controller = LateralKindName(spec.lateral.kind);
    cell.track = fs::path(track_path).stem().string();
    cell.speed = track->points().front().v_ref;
    cell.status = RunStatusName(rec.status);
    cell.metrics = rec.metrics;
    out << SummaryCsv({cell});
  }
  std::printf("status=%s rms_cross_track=%s completion=%s\n", RunStatusName(rec.status),
              FormatNumber(rec.metrics.rms_cross_track).c_str(),
              FormatNumber(rec.metrics.completion).c_str());
  if (rec.diverged || rec.status == RunStatus::kOffTrack) {
    std::cerr << "run diverged (" << RunStatusName(rec.status) << ")"
              << (rec.message.empty() ? "" : ": " + rec.message) << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

int RunBenchmarkCmd(const std::string& suite_path, const std::string& out_dir) {
  const BenchmarkSuite suite = ParseBenchmarkSuite(ReadTextFile(suite_path));
  const auto cells = RunBenchmark(suite, out_dir);
  for (const auto& c : cells) {
    std::printf("%-14s %-10s %5s  %-12s rms_cross_track=%s\n", c.controller.c_str(), c.track.c_str(),
                FormatNumber(c.speed).c_str(), c.status.c_str(),
                FormatNumber(c.metrics.rms_cross_track).c_str());
  }
  return kExitOk;
}

int RunTrainBc(const std::string& config_path, const std::string& out) {
  const BcJob job = ParseBcJob(ReadTextFile(config_path));
  const Track track = BuildTrack(job.track);
  auto expert = MakeLateral(job.expert, job.sim.vehicle);
  const BcResult res = CloneBehavior(*expert, track, job.sim, job.bc);
  SavePolicyFile(out, res.policy);
  AppendTrainingLog(DefaultLog(job.log_path, out), res.epoch_loss, job.bc.seed);
  std::printf("samples=%zu final_loss=%s\n", res.samples,
              res.epoch_loss.empty() ? "n/a" : FormatNumber(res.epoch_loss.back()).c_str());
  return kExitOk;
}

int RunTrainPpo(const std::string& config_path, const std::string& out) {
  const PpoJob job = ParsePpoJob(ReadTextFile(config_path));
  const Track track = BuildTrack(job.track);
  std::mt19937_64 rng(job.ppo.seed);
  Policy init = CreatePolicy(job.ppo.hidden, job.env.vehicle.steer_max, rng);
  const PpoResult res = TrainPpo(track, job.env, std::move(init), job.ppo);
  SavePolicyFile(out, res.policy);
  std::vector<double> rewards;
  for (const auto& h : res.history) rewards.push_back(h.mean_episode_reward);
  AppendTrainingLog(DefaultLog(job.log_path, out), rewards, job.ppo.seed);
  std::printf("iterations=%zu last_reward=%s\n", rewards.size(),
              rewards.empty() ? "n/a" : FormatNumber(rewards.back()).c_str());
  return kExitOk;
}

int RunEvolve(const std::string& config_path, const std::string& out) {
  const EvolveJob job = ParseEvolveJob(ReadTextFile(config_path));
  const Track track = BuildTrack(job.track);
  std::mt19937_64 rng(job.evolve.seed);
  Policy init = CreatePolicy(job.hidden, job.env.vehicle.steer_max, rng);
  const PolicySearchResult res = EvolvePolicy(track, job.env, std::move(init), job.evolve, job.eval_episodes);
  SavePolicyFile(out, res.policy);
  AppendTrainingLog(DefaultLog(job.log_path, out), res.best_history, job.evolve.seed);
  std::printf("generations=%zu best_reward=%s\n", res.best_history.size(),
              res.best_history.empty() ? "n/a" : FormatNumber(res.best_history.back()).c_str());
  return kExitOk;
}

int RunMpcDesign(double rise, double settle) {
  const MpcDesign d = DesignParams(rise, settle);
  std::printf("ts: [%s, %s] s\n", FormatNumber(d.ts.lo).c_str(), FormatNumber(d.ts.hi).c_str());
  std::printf("p:  [%d, %d] (at ts = %s s)\n", d.p.lo, d.p.hi,
              FormatNumber(0.5 * (d.ts.lo + d.ts.hi)).c_str());
  std::printf("m:  [%d, %d]\n", d.m.lo, d.m.hi);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vehicle trajectory-tracking simulator and controller benchmark"};
  app.require_subcommand(1);

  std::string config, track, out, suite;
  double rise = 0.0, settle = 0.0;

  auto* sim = app.add_subcommand("simulate", "Run one closed-loop episode");
  sim->add_option("--config", config, "Run config (JSON)")->required();
  sim->add_option("--track", track, "Waypoint CSV (x,y,v_ref)")->required();
  sim->add_option("--out", out, "Output directory")->required();

  auto* bench = app.add_subcommand("benchmark", "Run a controller x track x speed suite");
  bench->add_option("--suite", suite, "Suite config (JSON)")->required();
  bench->add_option("--out", out, "Output directory")->required();

  auto* bc = app.add_subcommand("train-bc", "Behavioral cloning from a classical expert");
  bc->add_option("--config", config, "Training config (JSON)")->required();
  bc->add_option("--out", out, "Policy file to write")->required();

  auto* ppo = app.add_subcommand("train-ppo", "Clipped policy-gradient training");
  ppo->add_option("--config", config, "Training config (JSON)")->required();
  ppo->add_option("--out", out, "Policy file to write")->required();

  auto* evo = app.add_subcommand("evolve", "Evolutionary search over policy weights");
  evo->add_option("--config", config, "Training config (JSON)")->required();
  evo->add_option("--out", out, "Policy file to write")->required();

  auto* design = app.add_subcommand("mpc-design", "Print MPC sample time and horizon ranges");
  design->add_option("--rise", rise, "Open-loop rise time, s")->required();
  design->add_option("--settle", settle, "Open-loop settling time, s")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return RunSimulate(config, track, out);
    if (*bench) return RunBenchmarkCmd(suite, out);
    if (*bc) return RunTrainBc(config, out);
    if (*ppo) return RunTrainPpo(config, out);
    if (*evo) return RunEvolve(config, out);
    if (*design) return RunMpcDesign(rise, settle);
  } catch (const InvalidInput& ex) {
    std::cerr << "invalid config: " << ex.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
  return kExitOk;
}
