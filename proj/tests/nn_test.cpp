#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "disue/nn/autograd.hpp"
#include "disue/nn/model.hpp"
#include "support.hpp"

using namespace disue;
using namespace disue::nn;
using disue::testing::max_rel_error;
using disue::testing::numeric_gradient;
using disue::testing::random_tensor;

namespace {

// Compares backward() against central differences for a scalar graph built
// from parameter leaves of the given shapes.
using Builder = std::function<Var(const std::vector<Var>&)>;

double gradient_error(const std::vector<Tensor>& inputs, const Builder& build) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::parameter(t));
  backward(build(leaves));
  std::vector<double> analytic;
  for (const auto& v : leaves) {
    auto g = v.grad();
    analytic.insert(analytic.end(), g.values().begin(), g.values().end());
  }

  std::vector<double> flat;
  for (const auto& t : inputs) flat.insert(flat.end(), t.values().begin(), t.values().end());
  auto f = [&](const std::vector<double>& x) {
    std::vector<Var> vs;
    std::size_t off = 0;
    for (const auto& t : inputs) {
      std::vector<double> chunk(x.begin() + static_cast<long>(off), x.begin() + static_cast<long>(off + t.size()));
      vs.push_back(Var::constant(Tensor(t.shape(), chunk)));
      off += t.size();
    }
    return build(vs).item();
  };
  return max_rel_error(analytic, numeric_gradient(f, flat));
}

Tensor probs_from(const Tensor& logits) { return softmax(Var::constant(logits)).value(); }

}  // namespace

TEST(Tensor, ShapeMismatchIsRejected) {
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), InvalidInput);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  Rng rng(3);
  auto model = make_classifier(classifier_architecture(2, 4, 8, 2), rng);
  model = with_params(model, std::vector<double>(model.params.size(), 0.0));
  auto logits = forward_classifier(model, Tensor::matrix(3, 2, {1, 2, -3, 4, 0.5, 9}));
  for (double v : logits.values()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityDenseLayerPassesInputThrough) {
  Mlp net({Layer::dense(3, 3)});
  ClassifierModel m{net, ParamVector({1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0}, net.segments()), 3};
  auto out = forward_classifier(m, Tensor::row({0.3, -2.0, 7.5}));
  EXPECT_EQ(out.values(), (std::vector<double>{0.3, -2.0, 7.5}));
}

TEST(Forward, HandMatrixMultiply) {
  // Stored [in, out], so x W^T for W = [[1,2],[3,4]] is the transpose here.
  Mlp net({Layer::dense(2, 2)});
  ClassifierModel m{net, ParamVector({1, 3, 2, 4, 0, 0}, net.segments()), 2};
  auto out = forward_classifier(m, Tensor::row({1, 1}));
  EXPECT_DOUBLE_EQ(out[0], 3.0);
  EXPECT_DOUBLE_EQ(out[1], 7.0);
}

TEST(Forward, WrongInputWidthIsRejected) {
  Rng rng(1);
  auto model = make_classifier(classifier_architecture(2, 4), rng);
  EXPECT_THROW(forward_classifier(model, Tensor::row({1, 2, 3})), InvalidInput);
}

TEST(Softmax, ClosedForms) {
  auto a = probs_from(Tensor::row({0, 0}));
  EXPECT_NEAR(a[0], 0.5, 1e-12);
  EXPECT_NEAR(a[1], 0.5, 1e-12);
  auto b = probs_from(Tensor::row({1000, 1000}));
  EXPECT_NEAR(b[0], 0.5, 1e-12);
  EXPECT_NEAR(b[1], 0.5, 1e-12);
  auto c = probs_from(Tensor::row({std::log(1.0), std::log(3.0)}));
  EXPECT_NEAR(c[0], 0.25, 1e-12);
  EXPECT_NEAR(c[1], 0.75, 1e-12);
}

TEST(Softmax, ColumnAxis) {
  auto p = softmax(Var::constant(Tensor::matrix(2, 1, {std::log(1.0), std::log(3.0)})), 0).value();
  EXPECT_NEAR(p[0], 0.25, 1e-12);
  EXPECT_NEAR(p[1], 0.75, 1e-12);
}

TEST(KlDivergence, ClosedForms) {
  auto kl = [](std::vector<double> p, std::vector<double> q) {
    return kl_divergence(Var::constant(Tensor::row(p)), Var::constant(Tensor::row(q))).item();
  };
  EXPECT_NEAR(kl({0.3, 0.7}, {0.3, 0.7}), 0.0, 1e-12);
  EXPECT_NEAR(kl({1, 0}, {0.5, 0.5}), std::log(2.0), 1e-12);
  EXPECT_NEAR(kl({0.5, 0.5}, {0.25, 0.75}), 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-12);
  EXPECT_NEAR(kl({0.5, 0.5}, {0.25, 0.75}), 0.1438, 1e-4);
}

TEST(CrossEntropy, ClosedForms) {
  auto ce = [](std::vector<double> logits, int label) {
    std::vector<int> y{label};
    return cross_entropy(Var::constant(Tensor::row(logits)), y).item();
  };
  EXPECT_NEAR(ce({0, 0}, 0), std::log(2.0), 1e-12);
  EXPECT_LT(ce({50, 0}, 0), 1e-20);
  EXPECT_NEAR(ce({std::log(1.0), std::log(3.0)}, 1), -std::log(0.75), 1e-12);
  EXPECT_NEAR(ce({std::log(1.0), std::log(3.0)}, 1), 0.2877, 1e-4);
}

TEST(CrossEntropy, LabelOutOfRangeIsRejected) {
  std::vector<int> y{2};
  EXPECT_THROW(cross_entropy(Var::constant(Tensor::row({0, 0})), y), InvalidInput);
}

TEST(Backward, LinearCase) {
  auto w = Var::parameter(Tensor::row({3}));
  auto x = Var::constant(Tensor::row({2}));
  backward(sum(mul(w, x)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 2.0);
}

TEST(Backward, DisconnectedParameterHasExactlyZeroGradient) {
  auto used = Var::parameter(Tensor::row({1.5, -2.0}));
  auto unused = Var::parameter(Tensor::row({4.0, 5.0}));
  backward(sum(mul(used, used)));
  const Tensor g = unused.grad();
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, DetachedLossIsRejected) {
  auto w = Var::parameter(Tensor::row({1.0}));
  EXPECT_THROW(backward(detach(sum(w))), InvalidState);
}

TEST(Backward, NonScalarLossIsRejected) {
  auto w = Var::parameter(Tensor::row({1.0, 2.0}));
  EXPECT_THROW(backward(scale(w, 2.0)), InvalidInput);
}

TEST(Backward, GradientsResetBetweenPasses) {
  auto w = Var::parameter(Tensor::row({1.0}));
  backward(sum(scale(w, 3.0)));
  backward(sum(scale(w, 3.0)));
  EXPECT_DOUBLE_EQ(w.grad()[0], 3.0);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  auto w = Var::parameter(Tensor::row({2.0}));
  auto y = mul(w, w);
  backward(sum(add(y, y)));  // d/dw 2 w^2 = 4 w
  EXPECT_DOUBLE_EQ(w.grad()[0], 8.0);
}

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{20240611};
  static constexpr double kTol = 1e-4;
};

TEST_F(OpGradient, Matmul) {
  EXPECT_LT(gradient_error({random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)},
                           [](auto& v) { return sum(mul(matmul(v[0], v[1]), matmul(v[0], v[1]))); }),
            kTol);
}

TEST_F(OpGradient, AddBiasReluTanh) {
  EXPECT_LT(gradient_error({random_tensor({4, 3}, rng), random_tensor({3}, rng)},
                           [](auto& v) { return sum(mul(tanh(relu(add_bias(v[0], v[1]))), add_bias(v[0], v[1]))); }),
            kTol);
}

TEST_F(OpGradient, ConcatAndGather) {
  const std::vector<int> idx{2, 0, 2, 1};
  EXPECT_LT(gradient_error({random_tensor({3, 2}, rng), random_tensor({4, 3}, rng)},
                           [&](auto& v) {
                             auto c = concat_cols(gather_rows(v[0], idx), v[1]);
                             return sum(mul(c, tanh(c)));
                           }),
            kTol);
}

TEST_F(OpGradient, SubScaleMeanCombine) {
  EXPECT_LT(gradient_error({random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)},
                           [](auto& v) {
                             std::vector<Var> terms{mean(mul(v[0], v[1])), sum(tanh(sub(v[0], v[1])))};
                             std::vector<double> coeffs{-1.5, 0.25};
                             return combine(terms, coeffs);
                           }),
            kTol);
}

TEST_F(OpGradient, SoftmaxBothAxesAndLogSoftmax) {
  auto w = random_tensor({3, 4}, rng);
  EXPECT_LT(gradient_error({random_tensor({3, 4}, rng)},
                           [&](auto& v) {
                             auto weights = Var::constant(w);
                             return add(sum(mul(softmax(v[0], 1), weights)),
                                        add(sum(mul(softmax(v[0], 0), weights)), sum(mul(log_softmax(v[0]), weights))));
                           }),
            kTol);
}

TEST_F(OpGradient, KlToBothArguments) {
  EXPECT_LT(gradient_error({random_tensor({5, 3}, rng, -2, 2), random_tensor({5, 3}, rng, -2, 2)},
                           [](auto& v) { return kl_divergence(softmax(v[0]), softmax(v[1])); }),
            kTol);
}

TEST_F(OpGradient, CrossEntropyAndWeightedMean) {
  const std::vector<int> labels{0, 2, 1, 2};
  const std::vector<double> weights{0.1, 0.9, 0.5, 0.0};
  EXPECT_LT(gradient_error({random_tensor({4, 3}, rng, -2, 2)},
                           [&](auto& v) {
                             return add(cross_entropy(v[0], labels),
                                        weighted_mean(cross_entropy_rows(v[0], labels), weights));
                           }),
            kTol);
}

TEST_F(OpGradient, DiversityLoss) {
  auto z = random_tensor({5, 7}, rng);
  EXPECT_LT(gradient_error({random_tensor({5, 3}, rng)}, [&](auto& v) { return diversity_loss(v[0], z); }), kTol);
}

TEST_F(OpGradient, ClassifierAndGeneratorParameters) {
  for (int trial = 0; trial < 5; ++trial) {
    Rng init(static_cast<std::uint64_t>(trial));
    auto model = make_classifier(classifier_architecture(2, 4, 6, 2), init);
    auto gen = make_generator(5, 3, 4, 2, 6, init);
    // Zero biases can put a pre-activation exactly on the ReLU kink, where
    // central differences and the subgradient legitimately disagree.
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (auto& v : model.params.values()) v += jitter(rng);
    for (auto& v : gen.params.values()) v += jitter(rng);
    auto z = random_tensor({6, 5}, rng);
    const std::vector<int> y{0, 1, 2, 3, 1, 0};

    auto loss_of = [&](const std::vector<double>& gp, const std::vector<double>& cp, bool grad) {
      GeneratorModel g = gen;
      g.params = ParamVector(gp, gen.params.segments());
      ClassifierModel c = with_params(model, cp);
      ParamBinding gb(g.params, grad), cb(c.params, grad);
      auto x = forward_generator(g, gb, z, y);
      auto loss = add(cross_entropy(forward_classifier(c, cb, x), y), diversity_loss(x, z));
      if (grad) {
        backward(loss);
        auto a = gb.flat_grad();
        auto b = cb.flat_grad();
        a.insert(a.end(), b.begin(), b.end());
        return std::make_pair(loss.item(), a);
      }
      return std::make_pair(loss.item(), std::vector<double>{});
    };

    auto analytic = loss_of(gen.params.values(), model.params.values(), true).second;
    std::vector<double> flat = gen.params.values();
    flat.insert(flat.end(), model.params.values().begin(), model.params.values().end());
    const std::size_t ng = gen.params.size();
    auto f = [&](const std::vector<double>& x) {
      return loss_of({x.begin(), x.begin() + static_cast<long>(ng)}, {x.begin() + static_cast<long>(ng), x.end()},
                     false)
          .first;
    };
    EXPECT_LT(max_rel_error(analytic, numeric_gradient(f, flat)), kTol) << "trial " << trial;
  }
}

TEST(Sgd, HandCases) {
  ParamVector p({1.0});
  sgd_step(p, std::vector<double>{0.0}, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  sgd_step(p, std::vector<double>{1.0}, 0.1, 0.0);
  EXPECT_DOUBLE_EQ(p[0], 0.9);
  ParamVector q({2.0});
  sgd_step(q, std::vector<double>{0.5}, 0.1, 0.001);
  EXPECT_NEAR(q[0], 1.9498, 1e-12);
}

TEST(Sgd, NonFiniteGradientLeavesParametersUntouched) {
  ParamVector p({1.0, 2.0});
  EXPECT_THROW(sgd_step(p, std::vector<double>{0.1, NAN}, 0.1, 0.0), DivergenceError);
  EXPECT_EQ(p.values(), (std::vector<double>{1.0, 2.0}));
}

TEST(ParamVector, ChecksumTracksValues) {
  ParamVector a({1.0, 2.0}), b({1.0, 2.0}), c({2.0, 1.0});
  EXPECT_EQ(a.checksum(), b.checksum());
  EXPECT_NE(a.checksum(), c.checksum());
}
