#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "avtrack/errors.h"
#include "avtrack/mlp.h"

namespace avtrack {
namespace {

Mlp SingleNeuron(double w0, double w1, double b, Activation act) {
  DenseLayer l;
  l.w = Eigen::MatrixXd(1, 2);
  l.w << w0, w1;
  l.b = Eigen::VectorXd::Constant(1, b);
  l.act = act;
  return Mlp({l});
}

Mlp RandomNet(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> depth(1, 3), width(1, 5), act(0, 3);
  std::vector<int> sizes{width(rng)};
  std::vector<Activation> acts;
  const int layers = depth(rng);
  for (int l = 0; l < layers; ++l) {
    sizes.push_back(width(rng));
    acts.push_back(static_cast<Activation>(act(rng)));
  }
  Mlp net = Mlp::Create(sizes, acts, rng);
  // Non-zero biases keep ReLU pre-activations off the kink at exactly 0.
  std::vector<double> p = net.GetParams();
  std::normal_distribution<double> n(0.0, 0.5);
  for (double& v : p) v += n(rng);
  net.SetParams(p);
  return net;
}

double FiniteDifferenceLoss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            LossKind kind) {
  return Loss(Forward(net, x), y, kind);
}

TEST(MlpTest, SingleLinearNeuron) {
  const Mlp net = SingleNeuron(1, 2, 0.5, Activation::kLinear);
  EXPECT_DOUBLE_EQ(ForwardSample(net, Eigen::Vector2d(1, 1))(0), 3.5);
}

TEST(MlpTest, ActivationsAppliedElementwise) {
  EXPECT_DOUBLE_EQ(ForwardSample(SingleNeuron(1, 2, 0.5, Activation::kRelu), Eigen::Vector2d(-1, -1))(0), 0.0);
  EXPECT_NEAR(ForwardSample(SingleNeuron(1, 0, 0, Activation::kSigmoid), Eigen::Vector2d(0, 5))(0), 0.5, 1e-15);
  EXPECT_NEAR(ForwardSample(SingleNeuron(1, 0, 0, Activation::kTanh), Eigen::Vector2d(0.3, 5))(0), std::tanh(0.3), 1e-15);
}

TEST(MlpTest, RejectsInconsistentShapes) {
  DenseLayer a, b;
  a.w = Eigen::MatrixXd::Zero(3, 2);
  a.b = Eigen::VectorXd::Zero(3);
  b.w = Eigen::MatrixXd::Zero(1, 4);
  b.b = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(Mlp({a, b}), InvalidInput);
  a.b = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(Mlp({a}), InvalidInput);
}

TEST(MlpTest, RejectsNonFiniteParameters) {
  DenseLayer a;
  a.w = Eigen::MatrixXd::Constant(1, 1, std::nan(""));
  a.b = Eigen::VectorXd::Zero(1);
  EXPECT_THROW(Mlp({a}), InvalidInput);
}

TEST(MlpTest, ForwardRejectsWrongInputDimension) {
  const Mlp net = SingleNeuron(1, 2, 0.5, Activation::kLinear);
  EXPECT_THROW(ForwardSample(net, Eigen::Vector3d(1, 1, 1)), InvalidInput);
}

TEST(MlpTest, ParamsRoundTrip) {
  std::mt19937_64 rng(1);
  Mlp net = Mlp::Create({3, 4, 2}, {Activation::kTanh, Activation::kLinear}, rng);
  EXPECT_EQ(net.num_params(), 3u * 4 + 4 + 4 * 2 + 2);
  std::vector<double> p = net.GetParams();
  for (double& v : p) v += 1.0;
  net.SetParams(p);
  EXPECT_EQ(net.GetParams(), p);
  EXPECT_THROW(net.SetParams(std::vector<double>(3)), InvalidInput);
}

TEST(LossTest, MeanSquaredError) {
  EXPECT_DOUBLE_EQ(Loss(Eigen::Vector2d(1, 2), Eigen::Vector2d(0, 0), LossKind::kMse), 2.5);
}

TEST(LossTest, BinaryCrossEntropy) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(1, 1, 0.5);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, 1.0);
  EXPECT_NEAR(Loss(p, y, LossKind::kCrossEntropy), 0.693147, 5e-7);
  EXPECT_NEAR(Loss(p, y, LossKind::kCrossEntropy), -std::log(0.5), 1e-15);
}

TEST(LossTest, CrossEntropyClipsZeroProbability) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Zero(1, 1);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, 1.0);
  EXPECT_TRUE(std::isfinite(Loss(p, y, LossKind::kCrossEntropy)));
}

TEST(LossTest, ShapeMismatchRejected) {
  EXPECT_THROW(Loss(Eigen::Vector2d(1, 2), Eigen::Vector3d(0, 0, 0), LossKind::kMse), InvalidInput);
}

TEST(BackwardTest, SingleNeuronHandGradient) {
  const Mlp net = SingleNeuron(1, 2, 0.5, Activation::kLinear);
  ForwardCache cache;
  const Eigen::MatrixXd x = Eigen::Vector2d(1, 3);
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, 0.0);
  const Eigen::MatrixXd out = Forward(net, x, &cache);  // 7.5
  const MlpGradients g = Backward(net, cache, LossGradient(out, y, LossKind::kMse));
  // dL/dw = 2 * (7.5 - 0) * x.
  EXPECT_DOUBLE_EQ(g.dw[0](0, 0), 15.0);
  EXPECT_DOUBLE_EQ(g.dw[0](0, 1), 45.0);
  EXPECT_DOUBLE_EQ(g.db[0](0), 15.0);
}

TEST(BackwardTest, MatchesCentralDifferencesOnRandomNets) {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> n(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Mlp net = RandomNet(rng);
    const int batch = 3;
    Eigen::MatrixXd x(net.input_dim(), batch);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = n(rng);
    const bool ce = net.layers().back().act == Activation::kSigmoid && net.output_dim() == 1;
    const LossKind kind = ce ? LossKind::kCrossEntropy : LossKind::kMse;
    Eigen::MatrixXd y(net.output_dim(), batch);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = ce ? (n(rng) > 0 ? 1.0 : 0.0) : n(rng);

    ForwardCache cache;
    const Eigen::MatrixXd out = Forward(net, x, &cache);
    const std::vector<double> analytic = Backward(net, cache, LossGradient(out, y, kind)).Flatten();
    std::vector<double> params = net.GetParams();
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(params[k]));
      const double orig = params[k];
      params[k] = orig + h;
      net.SetParams(params);
      const double up = FiniteDifferenceLoss(net, x, y, kind);
      params[k] = orig - h;
      net.SetParams(params);
      const double down = FiniteDifferenceLoss(net, x, y, kind);
      params[k] = orig;
      net.SetParams(params);
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(analytic[k] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(BackwardTest, RejectsForeignCache) {
  std::mt19937_64 rng(3);
  const Mlp a = Mlp::Create({2, 3, 1}, {Activation::kTanh, Activation::kLinear}, rng);
  const Mlp b = Mlp::Create({2, 4, 1}, {Activation::kTanh, Activation::kLinear}, rng);
  ForwardCache cache;
  const Eigen::MatrixXd out = Forward(a, Eigen::MatrixXd::Ones(2, 1), &cache);
  EXPECT_THROW(Backward(b, cache, out), InvalidInput);
}

TEST(OptimizerTest, SgdStep) {
  std::vector<double> w{1.0};
  SgdStep(w, std::vector<double>{2.0}, 0.1);
  EXPECT_DOUBLE_EQ(w[0], 0.8);
  EXPECT_THROW(SgdStep(w, std::vector<double>{1.0, 2.0}, 0.1), InvalidInput);
}

TEST(OptimizerTest, AdamDefaults) {
  const AdamState s(3, 1e-3);
  EXPECT_EQ(s.beta1, 0.9);
  EXPECT_EQ(s.beta2, 0.999);
  EXPECT_EQ(s.epsilon, 1e-8);
  EXPECT_EQ(s.t, 0);
}

TEST(OptimizerTest, AdamFirstStepIsAlphaTimesSign) {
  // The step is alpha * |g| / (|g| + eps), so gradients well above eps.
  for (double g : {0.05, 0.5, 3.0, -7.0}) {
    AdamState s(1, 0.01);
    std::vector<double> w{2.0};
    AdamStep(s, w, std::vector<double>{g});
    const double step = std::abs(w[0] - 2.0);
    EXPECT_NEAR(step, 0.01, 1e-6 * 0.01) << g;
    EXPECT_EQ(s.t, 1);
  }
}

TEST(OptimizerTest, AdamTwoStepsByHand) {
  AdamState s(1, 0.1);
  std::vector<double> w{0.0};
  AdamStep(s, w, std::vector<double>{1.0});
  AdamStep(s, w, std::vector<double>{-2.0});
  // Step 1: v=0.1, s=0.001, v_hat=1, s_hat=1 -> w=-0.1/(1+eps).
  // Step 2: v=0.09-0.2=-0.11, s=0.000999+0.004=0.004999,
  //         v_hat=-0.11/0.19, s_hat=0.004999/0.001999.
  const double v_hat = -0.11 / 0.19;
  const double s_hat = 0.004999 / (1 - 0.999 * 0.999);
  const double first = -0.1 / (1.0 + 1e-8);
  const double expected = first - 0.1 * v_hat / (std::sqrt(s_hat) + 1e-8);
  EXPECT_NEAR(w[0], expected, 1e-12);
}

TEST(OptimizerTest, AdamConstantGradientTwoSteps) {
  AdamState s(1, 0.001);
  std::vector<double> w{0.0};
  AdamStep(s, w, std::vector<double>{1.0});
  const double after_one = w[0];
  AdamStep(s, w, std::vector<double>{1.0});
  // v = 0.19, s = 0.001999; both bias-corrected moments equal 1.
  const double v_hat = 0.19 / (1 - 0.81);
  const double s_hat = 0.001999 / (1 - 0.998001);
  EXPECT_NEAR(w[0] - after_one, -0.001 * v_hat / (std::sqrt(s_hat) + 1e-8), 1e-15);
  EXPECT_NEAR(w[0] - after_one, -0.001, 1e-10);
}

TEST(OptimizerTest, AdamStepBoundedByAlphaOverRandomGradients) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 5.0);
  AdamState s(5, 0.01);
  std::vector<double> w(5, 0.0);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> g(5);
    for (double& x : g) x = n(rng);
    const std::vector<double> before = w;
    AdamStep(s, w, g);
    for (std::size_t i = 0; i < w.size(); ++i) {
      // |v_hat| <= sqrt(s_hat) holds for beta1^2 <= beta2 only asymptotically,
      // so allow the standard bound alpha * (1 - beta1) / sqrt(1 - beta2).
      ASSERT_LE(std::abs(w[i] - before[i]), 0.01 * (1 - 0.9) / std::sqrt(1 - 0.999) + 1e-12);
      ASSERT_GE(s.s[i], 0.0);
    }
  }
}

TEST(OptimizerTest, AdamRejectsMismatchedState) {
  AdamState s(2, 0.01);
  std::vector<double> w(3, 0.0);
  EXPECT_THROW(AdamStep(s, w, std::vector<double>(3, 1.0)), InvalidInput);
}

TEST(TrainingTest, SgdFitsLinearFunction) {
  std::mt19937_64 rng(8);
  Mlp net = Mlp::Create({1, 1}, {Activation::kLinear}, rng);
  Eigen::MatrixXd x(1, 20), y(1, 20);
  for (int i = 0; i < 20; ++i) {
    x(0, i) = -1 + 0.1 * i;
    y(0, i) = 3 * x(0, i) - 0.5;
  }
  for (int it = 0; it < 2000; ++it) {
    ForwardCache c;
    const Eigen::MatrixXd out = Forward(net, x, &c);
    SgdStep(net, Backward(net, c, LossGradient(out, y, LossKind::kMse)), 0.1);
  }
  EXPECT_NEAR(net.layers()[0].w(0, 0), 3.0, 1e-6);
  EXPECT_NEAR(net.layers()[0].b(0), -0.5, 1e-6);
}

}  // namespace
}  // namespace avtrack
