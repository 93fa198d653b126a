#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace avtrack {

enum class Activation : std::uint32_t { kLinear = 0, kTanh = 1, kRelu = 2, kSigmoid = 3 };

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
  Activation act = Activation::kLinear;
};

/// Fully connected feed-forward network.
class Mlp {
 public:
  Mlp() = default;
  /// Throws InvalidInput when adjacent layer dimensions disagree or a
  /// parameter is non-finite.
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Weights uniform in +/- 1/sqrt(fan_in), biases zero. sizes has one more
  /// entry than activations.
  static Mlp Create(const std::vector<int>& sizes, const std::vector<Activation>& activations,
                    std::mt19937_64& rng);

  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  int input_dim() const;
  int output_dim() const;
  std::size_t num_params() const;

  /// Flattened parameters: per layer, w row-major then b.
  std::vector<double> GetParams() const;
  void SetParams(std::span<const double> params);

 private:
  std::vector<DenseLayer> layers_;
};

/// Activations kept for the backward pass. Columns are samples.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;  // a^{l-1} for each layer
  std::vector<Eigen::MatrixXd> pre;     // z^l
  std::size_t num_layers = 0;
  std::size_t param_count = 0;
};

/// Batched forward pass, input is (input_dim x batch). Throws InvalidInput on
/// a dimension mismatch.
Eigen::MatrixXd Forward(const Mlp& mlp, const Eigen::MatrixXd& input, ForwardCache* cache = nullptr);
/// Single-sample convenience form.
Eigen::VectorXd ForwardSample(const Mlp& mlp, const Eigen::VectorXd& input);

double Activate(Activation act, double z);
double ActivateDerivative(Activation act, double z);

struct MlpGradients {
  std::vector<Eigen::MatrixXd> dw;
  std::vector<Eigen::VectorXd> db;

  std::vector<double> Flatten() const;
};

/// Reverse-mode gradients given dLoss/dOutput (output_dim x batch), summed over
/// the batch columns. Throws InvalidInput when the cache does not match mlp.
MlpGradients Backward(const Mlp& mlp, const ForwardCache& cache, const Eigen::MatrixXd& d_output);

enum class LossKind { kMse, kCrossEntropy };

/// Mean over samples (columns) of the per-sample loss. MSE averages the squared
/// error over output components. Cross-entropy uses the binary form for one
/// output and the categorical form otherwise, with predictions clipped to
/// [1e-12, 1 - 1e-12]. Throws InvalidInput on shape mismatch.
double Loss(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target, LossKind kind);
Eigen::MatrixXd LossGradient(const Eigen::MatrixXd& predicted, const Eigen::MatrixXd& target,
                             LossKind kind);

/// w <- w - alpha * dw for every parameter.
void SgdStep(std::span<double> params, std::span<const double> grads, double alpha);
void SgdStep(Mlp& mlp, const MlpGradients& grads, double alpha);

struct AdamState {
  std::vector<double> v;  // first-moment EMA
  std::vector<double> s;  // second-moment EMA
  std::int64_t t = 0;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate) : v(n, 0.0), s(n, 0.0), alpha(learning_rate) {}
};

/// Bias-corrected Adam update; increments t before applying. Throws
/// InvalidInput when the state size does not match params.
void AdamStep(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace avtrack
