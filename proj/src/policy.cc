#include "avtrack/policy.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>

#include "avtrack/errors.h"

namespace avtrack {

Eigen::VectorXd Observe(const Track& track, const VehicleState& state, const VehicleParams& params) {
  const TrackingErrors e = ComputeTrackingErrors(track, state, Frame::kFrontAxle, params);
  const double s = track.Nearest(FramePoint(state, Frame::kFrontAxle, params)).s;
  Eigen::VectorXd obs(kObservationDim);
  obs << e.cross_track, e.heading, state.v / 10.0, 10.0 * track.CurvatureAt(s),
      10.0 * track.CurvatureAt(s + 5.0), 10.0 * track.CurvatureAt(s + 10.0);
  return obs;
}

double Policy::MeanSteer(const Eigen::VectorXd& obs) const {
  const double y = ForwardSample(net, obs)(0);
  return std::clamp(delta_max * y, -delta_max, delta_max);
}

Policy CreatePolicy(const std::vector<int>& hidden, double delta_max, std::mt19937_64& rng) {
  if (!(delta_max > 0.0)) throw InvalidInput("policy delta_max must be positive");
  std::vector<int> sizes{kObservationDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  std::vector<Activation> acts(sizes.size() - 1, Activation::kTanh);
  Policy p;
  p.net = Mlp::Create(sizes, acts, rng);
  p.delta_max = delta_max;
  p.sigma = 0.1 * delta_max;
  return p;
}

LateralCommand PolicyLateral::Steer(const SimContext& ctx) {
  return {policy_.MeanSteer(Observe(ctx.track, ctx.state, ctx.params)), {}, false};
}

namespace {

constexpr char kMagic[5] = {'A', 'V', 'C', 'B', '1'};
constexpr std::uint32_t kMaxLayers = 64;
constexpr std::uint32_t kMaxWidth = 1u << 16;

void PutU32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void PutF64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void ReadExact(std::istream& in, unsigned char* dst, std::size_t n) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw InvalidInput("policy file is truncated");
}

std::uint32_t GetU32(std::istream& in) {
  unsigned char b[4];
  ReadExact(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double GetF64(std::istream& in) {
  unsigned char b[8];
  ReadExact(in, b, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void SavePolicy(std::ostream& out, const Policy& policy) {
  const auto& layers = policy.net.layers();
  out.write(kMagic, sizeof(kMagic));
  PutU32(out, static_cast<std::uint32_t>(layers.size()));
  for (const auto& l : layers) {
    PutU32(out, static_cast<std::uint32_t>(l.w.cols()));
    PutU32(out, static_cast<std::uint32_t>(l.w.rows()));
    PutU32(out, static_cast<std::uint32_t>(l.act));
  }
  PutF64(out, policy.delta_max);
  PutF64(out, policy.sigma);
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) PutF64(out, l.w(r, c));
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) PutF64(out, l.b(r));
  }
  if (!out) throw std::runtime_error("failed to write policy");
}

void SavePolicyFile(const std::string& path, const Policy& policy) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  SavePolicy(out, policy);
}

Policy LoadPolicy(std::istream& in) {
  unsigned char magic[5];
  ReadExact(in, magic, 5);
  if (std::memcmp(magic, kMagic, 5) != 0) throw InvalidInput("not a policy file (bad magic)");
  const std::uint32_t count = GetU32(in);
  if (count == 0 || count > kMaxLayers) throw InvalidInput("policy file has a bad layer count");
  std::vector<DenseLayer> layers(count);
  for (auto& l : layers) {
    const std::uint32_t n_in = GetU32(in);
    const std::uint32_t n_out = GetU32(in);
    const std::uint32_t act = GetU32(in);
    if (n_in == 0 || n_out == 0 || n_in > kMaxWidth || n_out > kMaxWidth) {
      throw InvalidInput("policy file has a bad layer size");
    }
    if (act > static_cast<std::uint32_t>(Activation::kSigmoid)) {
      throw InvalidInput("policy file has an unknown activation");
    }
    l.w.resize(n_out, n_in);
    l.b.resize(n_out);
    l.act = static_cast<Activation>(act);
  }
  Policy p;
  p.delta_max = GetF64(in);
  p.sigma = GetF64(in);
  if (!(p.delta_max > 0.0) || !std::isfinite(p.delta_max) || !(p.sigma >= 0.0) ||
      !std::isfinite(p.sigma)) {
    throw InvalidInput("policy file has invalid delta_max or sigma");
  }
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = GetF64(in);
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = GetF64(in);
  }
  p.net = Mlp(std::move(layers));
  if (p.net.input_dim() != kObservationDim || p.net.output_dim() != 1) {
    throw InvalidInput("policy network must map the observation to one output");
  }
  return p;
}

Policy LoadPolicyFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open policy file " + path);
  return LoadPolicy(in);
}

void AppendTrainingLog(const std::string& path, const std::vector<double>& values,
                       std::uint64_t seed) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  if (fresh) out << "iter,loss_or_reward,seed\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out << i << ',' << FormatNumber(values[i]) << ',' << seed << '\n';
  }
}

}  // namespace avtrack
