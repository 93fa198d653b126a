#include "avtrack/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include "avtrack/errors.h"
#include "avtrack/policy.h"
#include "json.hpp"

namespace avtrack {

using nlohmann::json;

const char* LateralKindName(LateralKind kind) {
  switch (kind) {
    case LateralKind::kBangBang:
      return "bang_bang";
    case LateralKind::kPid:
      return "pid";
    case LateralKind::kPurePursuit:
      return "pure_pursuit";
    case LateralKind::kStanley:
      return "stanley";
    case LateralKind::kMpc:
      return "mpc";
    case LateralKind::kPolicy:
      return "policy";
  }
  return "unknown";
}

std::unique_ptr<LateralController> MakeLateral(const LateralSpec& spec, const VehicleParams& params) {
  switch (spec.kind) {
    case LateralKind::kBangBang:
      return std::make_unique<BangBangLateral>(params.steer_max, spec.bang_bang_scale, spec.bang_bang_frame);
    case LateralKind::kPid:
      return std::make_unique<PidLateral>(spec.pid_gains, spec.pid_config, spec.pid_frame, spec.schedule);
    case LateralKind::kPurePursuit:
      return std::make_unique<PurePursuitLateral>(spec.pure_pursuit);
    case LateralKind::kStanley:
      return std::make_unique<StanleyLateral>(spec.stanley);
    case LateralKind::kMpc:
      return std::make_unique<MpcLateral>(spec.mpc, params, spec.mpc_warm_start);
    case LateralKind::kPolicy:
      return std::make_unique<PolicyLateral>(LoadPolicyFile(spec.policy_file));
  }
  throw InvalidInput("unknown lateral controller");
}

Track BuildTrack(const TrackSpec& spec) {
  switch (spec.kind) {
    case TrackKind::kStraight:
      return MakeStraightTrack(spec.length, spec.v_ref, spec.spacing);
    case TrackKind::kCircle:
      return MakeCircleTrack(spec.radius, spec.v_ref, spec.spacing);
    case TrackKind::kRacetrack:
      return MakeRacetrack(spec.straight, spec.radius, spec.v_ref, spec.spacing);
    case TrackKind::kCsv:
      return LoadTrackCsv(spec.path, spec.closed);
  }
  throw InvalidInput("unknown track kind");
}

namespace {

// Typed access to one JSON object that rejects unknown keys on Finish().
class Obj {
 public:
  Obj(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + " must be a JSON object");
  }

  bool Has(const std::string& key) const { return j_.contains(key); }

  double Num(const std::string& key, double def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_number()) throw InvalidInput(Path(key) + " must be a number");
    return v->get<double>();
  }

  long Int(const std::string& key, long def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_number_integer()) throw InvalidInput(Path(key) + " must be an integer");
    return v->get<long>();
  }

  std::uint64_t Seed(const std::string& key, std::uint64_t def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      throw InvalidInput(Path(key) + " must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  bool Bool(const std::string& key, bool def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_boolean()) throw InvalidInput(Path(key) + " must be a boolean");
    return v->get<bool>();
  }

  std::string Str(const std::string& key, const std::string& def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_string()) throw InvalidInput(Path(key) + " must be a string");
    return v->get<std::string>();
  }

  std::vector<int> Ints(const std::string& key, const std::vector<int>& def) {
    const json* v = Get(key);
    if (v == nullptr) return def;
    if (!v->is_array()) throw InvalidInput(Path(key) + " must be an array of integers");
    std::vector<int> out;
    for (const auto& e : *v) {
      if (!e.is_number_integer() || e.get<long>() <= 0) {
        throw InvalidInput(Path(key) + " must contain positive integers");
      }
      out.push_back(e.get<int>());
    }
    return out;
  }

  const json* Get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string Path(const std::string& key) const { return where_ + "." + key; }

  void Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw InvalidInput("unknown key " + Path(it.key()));
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

json ParseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& ex) {
    throw InvalidInput(std::string("invalid JSON: ") + ex.what());
  }
}

Frame ParseFrame(const std::string& s, const std::string& where) {
  if (s == "cog") return Frame::kCog;
  if (s == "front_axle") return Frame::kFrontAxle;
  if (s == "rear_axle") return Frame::kRearAxle;
  throw InvalidInput(where + " must be one of cog, front_axle, rear_axle");
}

std::string FrameName(Frame f) {
  switch (f) {
    case Frame::kCog:
      return "cog";
    case Frame::kFrontAxle:
      return "front_axle";
    case Frame::kRearAxle:
      return "rear_axle";
  }
  return "cog";
}

double DegKey(Obj& o, const std::string& key, double def_rad) {
  return DegToRad(o.Num(key, RadToDeg(def_rad)));
}

VehicleParams ParseVehicle(const json& j) {
  Obj o(j, "vehicle");
  VehicleParams p;
  p.wheelbase = o.Num("wheelbase", p.wheelbase);
  p.dist_rear = o.Num("dist_rear", p.dist_rear);
  p.mass = o.Num("mass", p.mass);
  p.yaw_inertia = o.Num("yaw_inertia", p.yaw_inertia);
  p.corner_stiff_front = o.Num("corner_stiff_front", p.corner_stiff_front);
  p.corner_stiff_rear = o.Num("corner_stiff_rear", p.corner_stiff_rear);
  p.aero_coeff = o.Num("aero_coeff", p.aero_coeff);
  p.rolling_coeff = o.Num("rolling_coeff", p.rolling_coeff);
  p.wheel_radius = o.Num("wheel_radius", p.wheel_radius);
  p.gravity = o.Num("gravity", p.gravity);
  p.road_grade = o.Num("road_grade", p.road_grade);
  p.accel_max = o.Num("accel_max", p.accel_max);
  p.decel_max = o.Num("decel_max", p.decel_max);
  p.steer_max = DegKey(o, "steer_max_deg", p.steer_max);
  o.Finish();
  p.Validate();
  return p;
}

CouplingConfig ParseCoupling(const json& j) {
  Obj o(j, "coupling");
  CouplingConfig c;
  const std::string mode = o.Str("mode", "decoupled");
  if (mode == "decoupled") {
    c.mode = CouplingMode::kDecoupled;
  } else if (mode == "long_dominant") {
    c.mode = CouplingMode::kLongDominant;
  } else if (mode == "lat_dominant") {
    c.mode = CouplingMode::kLatDominant;
  } else if (mode == "mutual") {
    c.mode = CouplingMode::kMutual;
  } else {
    throw InvalidInput("coupling.mode must be decoupled, long_dominant, lat_dominant or mutual");
  }
  c.c_long = o.Num("c_long", c.c_long);
  c.c_lat = o.Num("c_lat", c.c_lat);
  c.lat_scale = o.Num("lat_scale", c.lat_scale);
  c.v_max = o.Num("v_max", c.v_max);
  c.w_long = o.Num("w_long", c.w_long);
  c.w_lat = o.Num("w_lat", c.w_lat);
  o.Finish();
  if (!(c.c_long > 0.0) || !(c.c_lat > 0.0) || !(c.lat_scale >= 0.0) || !(c.v_max > 0.0) ||
      !(c.w_long >= 0.0 && c.w_long <= 1.0) || !(c.w_lat >= 0.0 && c.w_lat <= 1.0)) {
    throw InvalidInput("coupling constants out of range");
  }
  return c;
}

void ParsePidKeys(Obj& o, PidGains& gains, PidConfig& config) {
  gains.kp = o.Num("kp", gains.kp);
  gains.ki = o.Num("ki", gains.ki);
  gains.kd = o.Num("kd", gains.kd);
  config.integral_clamp = o.Num("integral_clamp", config.integral_clamp);
  const long len = o.Int("buffer_len", static_cast<long>(config.buffer_len));
  if (len <= 0) throw InvalidInput(o.Path("buffer_len") + " must be positive");
  config.buffer_len = static_cast<std::size_t>(len);
  config.derivative_filter = o.Num("derivative_filter", config.derivative_filter);
  gains.Validate();
  config.Validate();
}

void ParseShaperKeys(Obj& o, OutputShaper& shaper) {
  shaper.deadband = o.Num("deadband", shaper.deadband);
  shaper.max_rate = o.Num("rate_limit", shaper.max_rate);
  shaper.min = o.Num("out_min", shaper.min);
  shaper.max = o.Num("out_max", shaper.max);
  shaper.Validate();
}

GainSchedule ParseSchedule(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("lateral.schedule must be a non-empty array");
  GainSchedule s;
  for (const auto& e : j) {
    Obj o(e, "lateral.schedule[]");
    GainBreakpoint b;
    if (!o.Has("at")) throw InvalidInput("lateral.schedule entries need `at`");
    b.at = o.Num("at", 0.0);
    b.gains.kp = o.Num("kp", 0.0);
    b.gains.ki = o.Num("ki", 0.0);
    b.gains.kd = o.Num("kd", 0.0);
    o.Finish();
    s.breakpoints.push_back(b);
  }
  s.Validate();
  return s;
}

MpcConfig ParseMpcKeys(Obj& o, MpcConfig c) {
  c.ts = o.Num("ts", c.ts);
  c.p = static_cast<int>(o.Int("p", c.p));
  c.m = static_cast<int>(o.Int("m", c.m));
  c.latency_steps = static_cast<int>(o.Int("latency_steps", c.latency_steps));
  if (const json* w = o.Get("weights")) {
    Obj ow(*w, "lateral.weights");
    c.weights.pos = ow.Num("pos", c.weights.pos);
    c.weights.head = ow.Num("head", c.weights.head);
    c.weights.vel = ow.Num("vel", c.weights.vel);
    c.weights.d_accel = ow.Num("d_accel", c.weights.d_accel);
    c.weights.d_steer = ow.Num("d_steer", c.weights.d_steer);
    ow.Finish();
  }
  if (const json* b = o.Get("bounds")) {
    Obj ob(*b, "lateral.bounds");
    c.bounds.accel_min = ob.Num("accel_min", c.bounds.accel_min);
    c.bounds.accel_max = ob.Num("accel_max", c.bounds.accel_max);
    c.bounds.steer_max = DegKey(ob, "steer_max_deg", c.bounds.steer_max);
    c.bounds.accel_rate_max = ob.Num("accel_rate_max", c.bounds.accel_rate_max);
    c.bounds.steer_rate_max = ob.Num("steer_rate_max", c.bounds.steer_rate_max);
    c.bounds.speed_max = ob.Num("speed_max", c.bounds.speed_max);
    c.bounds.penalty = ob.Num("penalty", c.bounds.penalty);
    ob.Finish();
  }
  if (const json* p = o.Get("opt")) {
    Obj op(*p, "lateral.opt");
    c.opt.max_iter = static_cast<int>(op.Int("max_iter", c.opt.max_iter));
    c.opt.tol = op.Num("tol", c.opt.tol);
    c.opt.seed = static_cast<std::uint32_t>(op.Seed("seed", c.opt.seed));
    c.opt.coarse_steer_candidates =
        static_cast<int>(op.Int("coarse_steer_candidates", c.opt.coarse_steer_candidates));
    op.Finish();
  }
  c.Validate();
  return c;
}

// Parses a lateral controller object. Steering shaper keys are written to
// `shaper` when given.
LateralSpec ParseLateral(const json& j, OutputShaper* shaper) {
  Obj o(j, "lateral");
  LateralSpec spec;
  const std::string type = o.Str("type", "stanley");
  if (type == "bang_bang") {
    spec.kind = LateralKind::kBangBang;
    spec.bang_bang_scale = o.Num("scale", spec.bang_bang_scale);
    spec.bang_bang_frame = ParseFrame(o.Str("frame", FrameName(spec.bang_bang_frame)), o.Path("frame"));
    if (!(spec.bang_bang_scale > 0.0)) throw InvalidInput("lateral.scale must be positive");
  } else if (type == "pid") {
    spec.kind = LateralKind::kPid;
    ParsePidKeys(o, spec.pid_gains, spec.pid_config);
    spec.pid_frame = ParseFrame(o.Str("frame", FrameName(spec.pid_frame)), o.Path("frame"));
    if (const json* s = o.Get("schedule")) spec.schedule = ParseSchedule(*s);
  } else if (type == "pure_pursuit") {
    spec.kind = LateralKind::kPurePursuit;
    auto& c = spec.pure_pursuit;
    c.k_v = o.Num("k_v", c.k_v);
    c.d_l_min = o.Num("d_l_min", c.d_l_min);
    c.d_l_max = o.Num("d_l_max", c.d_l_max);
    c.delta_max = DegKey(o, "delta_max_deg", c.delta_max);
    c.coupled = o.Bool("coupled", c.coupled);
    c.d_l_fixed = o.Num("d_l_fixed", c.d_l_fixed);
    c.Validate();
  } else if (type == "stanley") {
    spec.kind = LateralKind::kStanley;
    auto& c = spec.stanley;
    c.k_delta = o.Num("k_delta", c.k_delta);
    c.k_s = o.Num("k_s", c.k_s);
    c.k_d = o.Num("k_d", c.k_d);
    c.delta_max = DegKey(o, "delta_max_deg", c.delta_max);
    c.Validate();
  } else if (type == "mpc") {
    spec.kind = LateralKind::kMpc;
    spec.mpc = ParseMpcKeys(o, spec.mpc);
    spec.mpc_warm_start = o.Bool("warm_start", spec.mpc_warm_start);
  } else if (type == "policy") {
    spec.kind = LateralKind::kPolicy;
    spec.policy_file = o.Str("file", "");
    if (spec.policy_file.empty()) throw InvalidInput("lateral.file is required for a policy");
  } else {
    throw InvalidInput("lateral.type must be bang_bang, pid, pure_pursuit, stanley, mpc or policy");
  }
  OutputShaper local;
  ParseShaperKeys(o, shaper != nullptr ? *shaper : local);
  o.Finish();
  return spec;
}

InitialState ParseInitial(const json& j) {
  Obj o(j, "initial");
  InitialState s;
  if (o.Has("x") || o.Has("y") || o.Has("theta")) {
    VehicleState p;
    p.x = o.Num("x", 0.0);
    p.y = o.Num("y", 0.0);
    p.theta = o.Num("theta", 0.0);
    p.v = o.Num("v", 0.0);
    s.pose = p;
  } else {
    s.lateral_offset = o.Num("lateral_offset", 0.0);
    s.heading_offset = o.Num("heading_offset", 0.0);
    if (o.Has("speed")) s.speed = o.Num("speed", 0.0);
  }
  o.Finish();
  return s;
}

// Parses the simulation keys of `o` into cfg. Consumes "lateral" when spec is
// non-null.
void ParseSimKeys(Obj& o, SimConfig& cfg, LateralSpec* spec) {
  const std::string model = o.Str("model", "kinematic");
  if (model == "kinematic") {
    cfg.model = ModelKind::kKinematic;
  } else if (model == "dynamic") {
    cfg.model = ModelKind::kDynamic;
  } else {
    throw InvalidInput("model must be kinematic or dynamic");
  }
  cfg.dt = o.Num("dt", cfg.dt);
  cfg.max_steps = o.Int("max_steps", cfg.max_steps);
  cfg.seed = o.Seed("seed", cfg.seed);
  cfg.off_track = o.Num("off_track", cfg.off_track);
  cfg.actuation_delay_steps = static_cast<int>(o.Int("actuation_delay_steps", cfg.actuation_delay_steps));
  cfg.dynamic_substeps = static_cast<int>(o.Int("dynamic_substeps", cfg.dynamic_substeps));
  cfg.dynamic_switch_speed = o.Num("dynamic_switch_speed", cfg.dynamic_switch_speed);
  cfg.stop_on_lap = o.Bool("stop_on_lap", cfg.stop_on_lap);
  cfg.longitudinal_from_lateral = o.Bool("longitudinal_from_lateral", cfg.longitudinal_from_lateral);
  if (const json* v = o.Get("vehicle")) cfg.vehicle = ParseVehicle(*v);
  if (const json* c = o.Get("coupling")) cfg.coupling = ParseCoupling(*c);
  if (const json* i = o.Get("initial")) cfg.initial = ParseInitial(*i);
  if (const json* l = o.Get("longitudinal")) {
    Obj ol(*l, "longitudinal");
    ParsePidKeys(ol, cfg.speed_gains, cfg.speed_pid);
    ol.Finish();
  }
  if (spec != nullptr) {
    if (const json* l = o.Get("lateral")) *spec = ParseLateral(*l, &cfg.steer_shaper);
  }
  cfg.Validate();
}

TrackSpec ParseTrack(const json& j, const std::string& where) {
  Obj o(j, where);
  TrackSpec t;
  t.name = o.Str("name", "");
  const std::string kind = o.Str("kind", "racetrack");
  if (kind == "straight") {
    t.kind = TrackKind::kStraight;
  } else if (kind == "circle") {
    t.kind = TrackKind::kCircle;
  } else if (kind == "racetrack") {
    t.kind = TrackKind::kRacetrack;
  } else if (kind == "csv") {
    t.kind = TrackKind::kCsv;
  } else {
    throw InvalidInput(where + ".kind must be straight, circle, racetrack or csv");
  }
  t.length = o.Num("length", t.length);
  t.radius = o.Num("radius", t.radius);
  t.straight = o.Num("straight", t.straight);
  t.v_ref = o.Num("v_ref", t.v_ref);
  t.spacing = o.Num("spacing", t.spacing);
  t.path = o.Str("path", t.path);
  t.closed = o.Bool("closed", t.closed);
  o.Finish();
  if (t.kind == TrackKind::kCsv && t.path.empty()) throw InvalidInput(where + ".path is required");
  if (t.name.empty()) t.name = kind;
  return t;
}

LaneEnvConfig ParseEnv(const json& j) {
  Obj o(j, "env");
  LaneEnvConfig e;
  if (const json* v = o.Get("vehicle")) e.vehicle = ParseVehicle(*v);
  e.dt = o.Num("dt", e.dt);
  e.max_steps = static_cast<int>(o.Int("max_steps", e.max_steps));
  e.start_offset = o.Num("start_offset", e.start_offset);
  e.start_heading = o.Num("start_heading", e.start_heading);
  e.progress_weight = o.Num("progress_weight", e.progress_weight);
  e.cross_track_weight = o.Num("cross_track_weight", e.cross_track_weight);
  e.off_track = o.Num("off_track", e.off_track);
  e.off_track_penalty = o.Num("off_track_penalty", e.off_track_penalty);
  o.Finish();
  e.Validate();
  return e;
}

}  // namespace

RunSpec ParseRunSpec(const std::string& json_text) {
  const json j = ParseJson(json_text);
  Obj o(j, "config");
  RunSpec spec;
  ParseSimKeys(o, spec.sim, &spec.lateral);
  spec.track_closed = o.Bool("track_closed", spec.track_closed);
  o.Finish();
  return spec;
}

LateralSpec ParseLateralSpec(const std::string& json_text) {
  return ParseLateral(ParseJson(json_text), nullptr);
}

TrackSpec ParseTrackSpec(const std::string& json_text) {
  return ParseTrack(ParseJson(json_text), "track");
}

BcJob ParseBcJob(const std::string& json_text) {
  const json j = ParseJson(json_text);
  Obj o(j, "config");
  BcJob job;
  if (const json* t = o.Get("track")) job.track = ParseTrack(*t, "track");
  if (const json* s = o.Get("sim")) {
    Obj os(*s, "sim");
    ParseSimKeys(os, job.sim, nullptr);
    os.Finish();
  }
  if (const json* e = o.Get("expert")) job.expert = ParseLateral(*e, &job.sim.steer_shaper);
  if (job.expert.kind == LateralKind::kPolicy) throw InvalidInput("expert must be a classical controller");
  if (const json* b = o.Get("bc")) {
    Obj ob(*b, "bc");
    BcConfig& c = job.bc;
    c.hidden = ob.Ints("hidden", c.hidden);
    c.epochs = static_cast<int>(ob.Int("epochs", c.epochs));
    c.batch_size = static_cast<int>(ob.Int("batch_size", c.batch_size));
    c.learning_rate = ob.Num("learning_rate", c.learning_rate);
    c.seed = ob.Seed("seed", c.seed);
    c.episodes = static_cast<int>(ob.Int("episodes", c.episodes));
    c.perturbation_std = ob.Num("perturbation_std", c.perturbation_std);
    c.start_offset = ob.Num("start_offset", c.start_offset);
    c.near_zero_steer = ob.Num("near_zero_steer", c.near_zero_steer);
    c.max_near_zero_fraction = ob.Num("max_near_zero_fraction", c.max_near_zero_fraction);
    ob.Finish();
    c.Validate();
  }
  job.log_path = o.Str("log", "");
  o.Finish();
  return job;
}

PpoJob ParsePpoJob(const std::string& json_text) {
  const json j = ParseJson(json_text);
  Obj o(j, "config");
  PpoJob job;
  if (const json* t = o.Get("track")) job.track = ParseTrack(*t, "track");
  if (const json* e = o.Get("env")) job.env = ParseEnv(*e);
  if (const json* p = o.Get("ppo")) {
    Obj op(*p, "ppo");
    PpoConfig& c = job.ppo;
    c.iterations = static_cast<int>(op.Int("iterations", c.iterations));
    c.episodes_per_iteration = static_cast<int>(op.Int("episodes_per_iteration", c.episodes_per_iteration));
    c.epochs = static_cast<int>(op.Int("epochs", c.epochs));
    c.learning_rate = op.Num("learning_rate", c.learning_rate);
    c.eps_clip = op.Num("eps_clip", c.eps_clip);
    c.gamma = op.Num("gamma", c.gamma);
    c.seed = op.Seed("seed", c.seed);
    c.hidden = op.Ints("hidden", c.hidden);
    op.Finish();
    c.Validate();
  }
  job.log_path = o.Str("log", "");
  o.Finish();
  return job;
}

EvolveJob ParseEvolveJob(const std::string& json_text) {
  const json j = ParseJson(json_text);
  Obj o(j, "config");
  EvolveJob job;
  if (const json* t = o.Get("track")) job.track = ParseTrack(*t, "track");
  if (const json* e = o.Get("env")) job.env = ParseEnv(*e);
  if (const json* ev = o.Get("evolve")) {
    Obj oe(*ev, "evolve");
    EvolveConfig& c = job.evolve;
    c.population = static_cast<int>(oe.Int("population", c.population));
    c.generations = static_cast<int>(oe.Int("generations", c.generations));
    c.sigma = oe.Num("sigma", c.sigma);
    c.elite_fraction = oe.Num("elite_fraction", c.elite_fraction);
    c.seed = oe.Seed("seed", c.seed);
    oe.Finish();
    c.Validate();
  }
  job.hidden = o.Ints("hidden", job.hidden);
  job.eval_episodes = static_cast<int>(o.Int("eval_episodes", job.eval_episodes));
  if (job.eval_episodes <= 0) throw InvalidInput("eval_episodes must be positive");
  job.log_path = o.Str("log", "");
  o.Finish();
  return job;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace avtrack
