#include "avtrack/mlp.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "avtrack/errors.h"

namespace avtrack {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InvalidInput("mlp needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.w.rows() != layer.b.size() || layer.w.rows() == 0 || layer.w.cols() == 0) {
      throw InvalidInput("mlp layer " + std::to_string(l) + " has inconsistent shape");
    }
    if (l > 0 && layer.w.cols() != layers_[l - 1].w.rows()) {
      throw InvalidInput("mlp layer " + std::to_string(l) + " input does not match previous output");
    }
    if (!layer.w.allFinite() || !layer.b.allFinite()) {
      throw InvalidInput("mlp parameters must be finite");
    }
  }
}

Mlp Mlp::Create(const std::vector<int>& sizes, const std::vector<Activation>& activations,
                std::mt19937_64& rng) {
  if (sizes.size() < 2 || activations.size() != sizes.size() - 1) {
    throw InvalidInput("mlp sizes/activations mismatch");
  }
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    if (sizes[l] <= 0 || sizes[l + 1] <= 0) throw InvalidInput("mlp layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer layer;
    layer.w.resize(sizes[l + 1], sizes[l]);
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = dist(rng);
    }
    layer.b = Eigen::VectorXd::Zero(sizes[l + 1]);
    layer.act = activations[l];
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().w.cols()); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().w.rows()); }

std::size_t Mlp::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

std::vector<double> Mlp::GetParams() const {
  std::vector<double> out;
  out.reserve(num_params());
  for (const auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) out.push_back(l.w(r, c));
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) out.push_back(l.b(r));
  }
  return out;
}

void Mlp::SetParams(std::span<const double> params) {
  if (params.size() != num_params()) throw InvalidInput("parameter vector has wrong length");
  std::size_t k = 0;
  for (auto& l : layers_) {
    for (Eigen::Index r = 0; r < l.w.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.w.cols(); ++c) l.w(r, c) = params[k++];
    }
    for (Eigen::Index r = 0; r < l.b.size(); ++r) l.b(r) = params[k++];
  }
}

double Activate(Activation act, double z) {
  switch (act) {
    case Activation::kTanh:
      return std::tanh(z);
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kSigmoid:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::kLinear:
      break;
  }
  return z;
}

double ActivateDerivative(Activation act, double z) {
  switch (act) {
    case Activation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kSigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return s * (1.0 - s);
    }
    case Activation::kLinear:
      break;
  }
  return 1.0;
}

Eigen::MatrixXd Forward(const Mlp& mlp, const Eigen::MatrixXd& input, ForwardCache* cache) {
  if (input.rows() != mlp.input_dim()) {
    throw InvalidInput("input dimension " + std::to_string(input.rows()) + " does not match mlp input " +
                       std::to_string(mlp.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->num_layers = mlp.layers().size();
    cache->param_count = mlp.num_params();
  }
  Eigen::MatrixXd a = input;
  for (const auto& layer : mlp.layers()) {
    Eigen::MatrixXd z = layer.w * a;
    z.colwise() += layer.b;
    if (cache != nullptr) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = z.unaryExpr([&](double v) { return Activate(layer.act, v); });
  }
  return a;
}

Eigen::VectorXd ForwardSample(const Mlp& mlp, const Eigen::VectorXd& input) {
  return Forward(mlp, Eigen::MatrixXd(input), nullptr).col(0);
}

std::vector<double> MlpGradients::Flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < dw.size(); ++l) {
    for (Eigen::Index r = 0; r < dw[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < dw[l].cols(); ++c) out.push_back(dw[l](r, c));
    }
    for (Eigen::Index r = 0; r < db[l].size(); ++r) out.push_back(db[l](r));
  }
  return out;
}

MlpGradients Backward(const Mlp& mlp, const ForwardCache& cache, const Eigen::MatrixXd& d_output) {
  const auto& layers = mlp.layers();
  if (cache.num_layers != layers.size() || cache.param_count != mlp.num_params() ||
      cache.pre.size() != layers.size()) {
    throw InvalidInput("forward cache does not match this mlp");
  }
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (cache.pre[l].rows() != layers[l].w.rows() || cache.inputs[l].rows() != layers[l].w.cols()) {
      throw InvalidInput("forward cache does not match this mlp");
    }
  }
  if (d_output.rows() != mlp.output_dim() || d_output.cols() != cache.pre.back().cols()) {
    throw InvalidInput("upstream gradient shape does not match the forward pass");
  }

  MlpGradients g;
  g.dw.resize(layers.size());
  g.db.resize(layers.size());
  Eigen::MatrixXd da = d_output;
  for (std::size_t i = layers.size(); i-- > 0;) {
    const DenseLayer& layer = layers[i];
    // dz = da (.) g'(z)
    const Eigen::MatrixXd dz =
        da.cwiseProduct(cache.pre[i].unaryExpr([&](double v) { return ActivateDerivative(layer.act, v); }));
    g.dw[i] = dz * cache.inputs[i].transpose();
    g.db[i] = dz.rowwise().sum();
    if (i > 0) da = layer.w.transpose() * dz;
  }
  return g;
}

namespace {

constexpr double kProbClip = 1e-12;

void CheckShapes(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target) {
  if (predicted.rows() != target.rows() || predicted.cols() != target.cols() || predicted.size() == 0) {
    throw InvalidInput("loss operands must have the same non-empty shape");
  }
}

}  // namespace

double Loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target, LossKind kind) {
  CheckShapes(predicted, target);
  const double batch = static_cast<double>(predicted.cols());
  if (kind == LossKind::kMse) {
    return (predicted - target).squaredNorm() / static_cast<double>(predicted.rows()) / batch;
  }
  const Eigen::MatrixXd p = predicted.unaryExpr(
      [](double v) { return std::clamp(v, kProbClip, 1.0 - kProbClip); });
  double total = 0.0;
  if (predicted.rows() == 1) {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      const double y = target(0, c);
      total += -(y * std::log(p(0, c)) + (1.0 - y) * std::log(1.0 - p(0, c)));
    }
  } else {
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
      for (Eigen::Index r = 0; r < p.rows(); ++r) total += -target(r, c) * std::log(p(r, c));
    }
  }
  return total / batch;
}

Eigen::MatrixXd LossGradient(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                             LossKind kind) {
  CheckShapes(predicted, target);
  const double batch = static_cast<double>(predicted.cols());
  if (kind == LossKind::kMse) {
    return 2.0 * (predicted - target) / (static_cast<double>(predicted.rows()) * batch);
  }
  Eigen::MatrixXd g(predicted.rows(), predicted.cols());
  for (Eigen::Index c = 0; c < predicted.cols(); ++c) {
    for (Eigen::Index r = 0; r < predicted.rows(); ++r) {
      const double raw = predicted(r, c);
      const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
      const bool clipped = p != raw;
      const double y = target(r, c);
      double d = predicted.rows() == 1 ? -(y / p) + (1.0 - y) / (1.0 - p) : -y / p;
      g(r, c) = clipped ? 0.0 : d / batch;
    }
  }
  return g;
}

void SgdStep(std::span<double> params, std::span<const double> grads, double alpha) {
  if (params.size() != grads.size()) throw InvalidInput("sgd gradient length mismatch");
  if (!(alpha > 0.0)) throw InvalidInput("learning rate must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= alpha * grads[i];
}

void SgdStep(Mlp& mlp, const MlpGradients& grads, double alpha) {
  std::vector<double> p = mlp.GetParams();
  const std::vector<double> g = grads.Flatten();
  SgdStep(p, g, alpha);
  mlp.SetParams(p);
}

void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.v.size() != params.size() ||
      state.s.size() != params.size()) {
    throw InvalidInput("adam state does not match parameter count");
  }
  ++state.t;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.v[i] = b1 * state.v[i] + (1.0 - b1) * g;
    state.s[i] = b2 * state.s[i] + (1.0 - b2) * g * g;
    const double v_hat = state.v[i] / c1;
    const double s_hat = state.s[i] / c2;
    params[i] -= state.alpha * v_hat / (std::sqrt(s_hat) + state.epsilon);
  }
}

}  // namespace avtrack
