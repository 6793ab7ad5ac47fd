#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support/oracles.hpp"
#include "voxnox/nn/layers.hpp"
#include "voxnox/nn/ops.hpp"
#include "voxnox/nn/weights.hpp"

using namespace voxnox;
using namespace voxnox::nn;

namespace {

Tensor<double> conv_kernel(std::size_t cout, std::size_t cin, std::size_t k, Rng& rng) {
    return oracle::random_tensor<double>({cout, cin, k, k, k}, rng);
}

// Distinct values at least 0.01 apart, so a finite-difference step never flips an argmax.
Tensor<double> spaced_tensor(Shape shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    std::vector<std::size_t> order(t.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < t.size(); ++i)
        t[i] = 0.01 * double(order[i]) - 0.005 * double(t.size()) + 0.005;
    return t;
}

Tensor<double> one_hot_target(std::size_t n, std::size_t c, std::size_t v, Rng& rng) {
    Tensor<double> t({n, c, v});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t p = 0; p < v; ++p)
            t[(s * c + std::size_t(uniform_int(rng, 0, int(c) - 1))) * v + p] = 1.0;
    return t;
}

} // namespace

TEST(Conv3d, IdentityKernel) {
    Rng rng(51);
    const auto x = oracle::random_tensor<double>({2, 3, 4, 5, 3}, rng);
    Tensor<double> w({3, 3, 3, 3, 3});
    for (std::size_t c = 0; c < 3; ++c)
        w[(((c * 3 + c) * 3 + 1) * 3 + 1) * 3 + 1] = 1.0;
    const auto y = conv3d_forward(x, w, Tensor<double>({3}), 1);
    EXPECT_EQ(y, x);
}

TEST(Conv3d, ZeroInputGivesBias) {
    Rng rng(52);
    const auto w = conv_kernel(4, 2, 3, rng);
    const auto b = oracle::random_tensor<double>({4}, rng);
    const auto y = conv3d_forward(Tensor<double>({1, 2, 3, 3, 3}), w, b, 1);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < 27; ++i)
            EXPECT_EQ(y[c * 27 + i], b[c]);
}

TEST(Conv3d, MatchesNestedLoopOracle) {
    Rng rng(53);
    for (int t = 0; t < 5; ++t) {
        const auto x = oracle::random_tensor<double>({1, 2, 4, 4, 4}, rng);
        const auto w = conv_kernel(3, 2, 3, rng);
        const auto b = oracle::random_tensor<double>({3}, rng);
        const auto got = conv3d_forward(x, w, b, 1);
        const auto want = oracle::conv3d(x, w, b, 1);
        ASSERT_EQ(got.shape(), want.shape());
        for (std::size_t i = 0; i < got.size(); ++i)
            EXPECT_NEAR(got[i], want[i], 1e-10);
    }
}

TEST(Conv3d, LargeVolumeMatchesOracle) {
    // big enough to be split into several tiles
    Rng rng(54);
    const auto x = oracle::random_tensor<double>({2, 3, 22, 21, 20}, rng);
    const auto w = conv_kernel(2, 3, 3, rng);
    const auto b = oracle::random_tensor<double>({2}, rng);
    const auto got = conv3d_forward(x, w, b, 1);
    const auto want = oracle::conv3d(x, w, b, 1);
    for (std::size_t i = 0; i < got.size(); ++i)
        ASSERT_NEAR(got[i], want[i], 1e-10);
}

TEST(Conv3d, UnpaddedAndOneByOne) {
    Rng rng(55);
    const auto x = oracle::random_tensor<double>({1, 2, 5, 4, 6}, rng);
    const auto w3 = conv_kernel(2, 2, 3, rng);
    const auto w1 = conv_kernel(4, 2, 1, rng);
    const auto b2 = oracle::random_tensor<double>({2}, rng);
    const auto b4 = oracle::random_tensor<double>({4}, rng);
    const auto y3 = conv3d_forward(x, w3, b2, 0);
    EXPECT_EQ(y3.shape(), (Shape{1, 2, 3, 2, 4}));
    const auto o3 = oracle::conv3d(x, w3, b2, 0);
    for (std::size_t i = 0; i < y3.size(); ++i)
        EXPECT_NEAR(y3[i], o3[i], 1e-10);
    const auto y1 = conv3d_forward(x, w1, b4, 0);
    const auto o1 = oracle::conv3d(x, w1, b4, 0);
    for (std::size_t i = 0; i < y1.size(); ++i)
        EXPECT_NEAR(y1[i], o1[i], 1e-10);
}

TEST(Conv3d, ShapeMismatchIsAnError) {
    Rng rng(56);
    const auto x = oracle::random_tensor<double>({1, 2, 4, 4, 4}, rng);
    const auto w = conv_kernel(3, 5, 3, rng);
    try {
        conv3d_forward(x, w, Tensor<double>({3}), 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::dimension_mismatch);
    }
}

TEST(Conv3d, GradCheck) {
    Rng rng(57);
    Conv3d<double> layer("c", 2, 3, 3, 1);
    layer.initialize(rng);
    for (int t = 0; t < 5; ++t)
        EXPECT_LT(grad_check(layer, oracle::random_tensor<double>({2, 2, 3, 4, 3}, rng), 1e-3, 100 + t), 1e-4);
}

TEST(UpConv3d, MatchesUpsampleThenConv) {
    Rng rng(58);
    for (int t = 0; t < 4; ++t) {
        const auto x = oracle::random_tensor<double>({2, 3, 3, 4, 2 + std::size_t(t)}, rng);
        const auto w = conv_kernel(4, 3, 3, rng);
        const auto b = oracle::random_tensor<double>({4}, rng);
        const auto got = upconv3d_forward(x, w, b);
        const auto want = oracle::conv3d(upsample_nearest(x, 2), w, b, 1);
        ASSERT_EQ(got.shape(), want.shape());
        for (std::size_t i = 0; i < got.size(); ++i)
            EXPECT_NEAR(got[i], want[i], 1e-12);
    }
}

TEST(UpConv3d, GradCheck) {
    Rng rng(59);
    UpConv3d<double> layer("u", 2, 2);
    layer.initialize(rng);
    for (int t = 0; t < 3; ++t)
        EXPECT_LT(grad_check(layer, oracle::random_tensor<double>({1, 2, 2, 3, 2}, rng), 1e-3, 200 + t), 1e-4);
}

TEST(MaxPool, ConstantInput) {
    Tensor<double> x({1, 2, 5, 5, 5}, 3.5);
    const auto y = maxpool3d(x).output;
    EXPECT_EQ(y.shape(), (Shape{1, 2, 3, 3, 3}));
    for (double v : y.values())
        EXPECT_EQ(v, 3.5);
}

TEST(MaxPool, CeilModeChain) {
    Tensor<float> x({1, 1, 20, 20, 20});
    Shape dims;
    for (int i = 0; i < 3; ++i) {
        x = maxpool3d(x).output;
        dims.push_back(x.dim(2));
    }
    EXPECT_EQ(dims, (Shape{10, 5, 3}));
}

TEST(MaxPool, MatchesNestedLoopOracle) {
    Rng rng(60);
    for (int t = 0; t < 10; ++t) {
        const auto x = oracle::random_tensor<double>(
            {2, 2, std::size_t(uniform_int(rng, 1, 7)), std::size_t(uniform_int(rng, 1, 7)),
             std::size_t(uniform_int(rng, 1, 7))},
            rng);
        EXPECT_EQ(maxpool3d(x).output, oracle::maxpool(x));
    }
}

TEST(MaxPool, BackwardRoutesToArgmaxOnly) {
    Rng rng(61);
    const auto x = spaced_tensor({1, 1, 3, 3, 3}, rng);
    const auto r = maxpool3d(x);
    const auto g = maxpool3d_backward(Tensor<double>(r.output.shape(), 1.0), r.argmax, x.shape());
    double total = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        total += g[i];
        if (g[i] != 0.0)
            EXPECT_TRUE(std::find(r.argmax.begin(), r.argmax.end(), std::uint32_t(i)) != r.argmax.end());
    }
    EXPECT_EQ(total, double(r.output.size()));
}

TEST(MaxPool, GradCheck) {
    Rng rng(62);
    MaxPool3d<double> layer;
    for (int t = 0; t < 5; ++t)
        EXPECT_LT(grad_check(layer, spaced_tensor({1, 2, 3, 4, 5}, rng), 1e-3, 300 + t), 1e-4);
}

TEST(Upsample, SingleVoxel) {
    Tensor<double> x({1, 1, 1, 1, 1}, 2.25);
    const auto y = upsample_nearest(x, 2);
    EXPECT_EQ(y.shape(), (Shape{1, 1, 2, 2, 2}));
    for (double v : y.values())
        EXPECT_EQ(v, 2.25);
}

TEST(Upsample, ChainAndPoolInverse) {
    Tensor<double> x({1, 2, 3, 3, 3}, -0.5);
    auto y = x;
    Shape dims;
    for (int i = 0; i < 3; ++i) {
        y = upsample_nearest(y, 2);
        dims.push_back(y.dim(2));
    }
    EXPECT_EQ(dims, (Shape{6, 12, 24}));
    EXPECT_EQ(maxpool3d(upsample_nearest(x, 2)).output, x);
}

TEST(Upsample, GradientSumsReplicas) {
    Rng rng(63);
    const auto g = oracle::random_tensor<double>({1, 1, 4, 2, 6}, rng);
    const auto back = upsample_nearest_backward(g, 2);
    EXPECT_EQ(back.shape(), (Shape{1, 1, 2, 1, 3}));
    for (std::size_t z = 0; z < 2; ++z)
        for (std::size_t x = 0; x < 3; ++x) {
            double s = 0;
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b)
                    for (std::size_t c = 0; c < 2; ++c)
                        s += g[((2 * z + a) * 2 + b) * 6 + 2 * x + c];
            EXPECT_NEAR(back[z * 3 + x], s, 1e-12);
        }
    Upsample3d<double> layer;
    EXPECT_LT(grad_check(layer, oracle::random_tensor<double>({1, 2, 2, 3, 2}, rng)), 1e-4);
}

TEST(CenterCrop, TakesMiddleAndScattersBack) {
    Tensor<double> x({1, 1, 4, 4, 4});
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = double(i);
    const auto y = center_crop(x, 2, 2, 2);
    EXPECT_EQ(y[0], x[(1 * 4 + 1) * 4 + 1]);
    EXPECT_EQ(y[7], x[(2 * 4 + 2) * 4 + 2]);
    const auto back = center_crop_backward(Tensor<double>(y.shape(), 1.0), x.shape());
    EXPECT_EQ(std::accumulate(back.values().begin(), back.values().end(), 0.0), 8.0);
}

TEST(Dense, IdentityAndBias) {
    Rng rng(64);
    const auto x = oracle::random_tensor<double>({3, 4}, rng);
    Tensor<double> eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i)
        eye[i * 4 + i] = 1.0;
    EXPECT_EQ(dense_forward(x, eye, Tensor<double>({4})), x);
    const auto b = oracle::random_tensor<double>({4}, rng);
    const auto y = dense_forward(Tensor<double>({2, 4}), oracle::random_tensor<double>({4, 4}, rng), b);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t o = 0; o < 4; ++o)
            EXPECT_EQ(y[n * 4 + o], b[o]);
    EXPECT_THROW(dense_forward(x, Tensor<double>({4, 5}), Tensor<double>({4})), Error);
}

TEST(Dense, GradCheck) {
    Rng rng(65);
    Dense<double> layer("d", 6, 4);
    layer.initialize(rng);
    for (int t = 0; t < 5; ++t)
        EXPECT_LT(grad_check(layer, oracle::random_tensor<double>({3, 6}, rng), 1e-3, 400 + t), 1e-4);
}

TEST(ReLU, GradCheckAwayFromKink) {
    Rng rng(66);
    ReLU<double> layer;
    EXPECT_LT(grad_check(layer, spaced_tensor({2, 3, 2, 2, 2}, rng)), 1e-4);
}

TEST(Softmax, SumsToOne) {
    Rng rng(67);
    const auto p = softmax_channels(oracle::random_tensor<double>({2, 5, 3, 2, 2}, rng, -5, 5));
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t v = 0; v < 12; ++v) {
            double s = 0;
            for (std::size_t c = 0; c < 5; ++c)
                s += p[(n * 5 + c) * 12 + v];
            EXPECT_NEAR(s, 1.0, 1e-9);
        }
}

TEST(SoftmaxCe, UniformLogitsGiveLnFive) {
    Rng rng(68);
    const auto target = one_hot_target(3, 5, 7, rng);
    const auto r = softmax_ce_loss(Tensor<double>({3, 5, 7}, 0.25), target);
    EXPECT_NEAR(r.loss, std::log(5.0), 1e-12);
}

TEST(SoftmaxCe, SaturatedCorrectLogitsGiveZero) {
    Rng rng(69);
    const auto target = one_hot_target(2, 5, 4, rng);
    Tensor<double> logits(target.shape());
    for (std::size_t i = 0; i < logits.size(); ++i)
        logits[i] = target[i] * 1e6;
    const auto r = softmax_ce_loss(logits, target);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_LT(r.loss, 1e-12);
}

TEST(SoftmaxCe, GradientIsSoftmaxMinusTargetOverCount) {
    Rng rng(70);
    const auto target = one_hot_target(2, 5, 3, rng);
    const auto logits = oracle::random_tensor<double>(target.shape(), rng, -3, 3);
    const auto r = softmax_ce_loss(logits, target);
    const auto p = softmax_channels(logits);
    for (std::size_t i = 0; i < logits.size(); ++i)
        EXPECT_NEAR(r.grad[i], (p[i] - target[i]) / 6.0, 1e-15);
}

TEST(SoftmaxCe, FiniteDifferences) {
    Rng rng(71);
    for (int t = 0; t < 5; ++t) {
        const auto target = one_hot_target(2, 5, 4, rng);
        EXPECT_LT(grad_check_softmax_ce(oracle::random_tensor<double>(target.shape(), rng, -2, 2), target), 1e-5);
    }
}

TEST(SoftmaxCe, RejectsNonOneHotTarget) {
    Tensor<double> target({1, 5, 1});
    target[0] = 0.5;
    target[1] = 0.5;
    try {
        softmax_ce_loss(Tensor<double>({1, 5, 1}), target);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_argument);
    }
}

TEST(Adam, FirstStepIsSignedLearningRate) {
    for (double g : {1e-6, 0.3, -2.0, 1e4}) {
        Parameter<double> p("p", {1});
        p.value[0] = 0.5;
        p.grad[0] = g;
        long step = 0;
        Parameter<double>* ps[] = {&p};
        AdamOptions opts;
        adam_step<double>(ps, step, opts);
        const double delta = p.value[0] - 0.5;
        EXPECT_EQ(step, 1);
        EXPECT_LT(delta * g, 0.0);
        EXPECT_LE(std::fabs(delta), opts.lr * (1 + 1e-12));
        EXPECT_GE(std::fabs(delta), opts.lr * std::fabs(g) / (std::fabs(g) + opts.eps) * (1 - 1e-12));
    }
}

TEST(Adam, ZeroGradientLeavesParameter) {
    Parameter<double> p("p", {3});
    p.value.fill(0.7);
    long step = 0;
    Parameter<double>* ps[] = {&p};
    for (int i = 0; i < 3; ++i)
        adam_step<double>(ps, step, AdamOptions{});
    for (double v : p.value.values())
        EXPECT_EQ(v, 0.7);
}

TEST(Adam, ThreeStepsOnAQuadraticMatchHandTrace) {
    // f(x) = (x - 2)^2, grad 2 (x - 2), starting at x = 5
    const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double x = 5, m = 0, v = 0;
    std::vector<double> trace;
    for (int t = 1; t <= 3; ++t) {
        const double g = 2 * (x - 2);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        x -= lr * mh / (std::sqrt(vh) + eps);
        trace.push_back(x);
    }
    Parameter<double> p("x", {1});
    p.value[0] = 5;
    long step = 0;
    Parameter<double>* ps[] = {&p};
    for (int t = 0; t < 3; ++t) {
        p.grad[0] = 2 * (p.value[0] - 2);
        adam_step<double>(ps, step, AdamOptions{lr, b1, b2, eps});
        EXPECT_NEAR(p.value[0], trace[std::size_t(t)], 1e-12);
    }
}

TEST(Training, SingleLayerLossMostlyDecreases) {
    int monotone = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        Rng rng(1000 + std::uint64_t(t));
        Dense<float> layer("d", 8, 5);
        layer.initialize(rng);
        const auto x = oracle::random_tensor<float>({1, 8}, rng);
        Tensor<float> target({1, 5});
        target[std::size_t(uniform_int(rng, 0, 4))] = 1.0f;
        long step = 0;
        double last = INFINITY;
        bool ok = true;
        for (int s = 0; s < 50; ++s) {
            for (auto* p : layer.parameters())
                p->zero_grad();
            const auto r = softmax_ce_loss(layer.forward(x), target);
            layer.backward(r.grad);
            const auto params = layer.parameters();
            adam_step<float>(params, step, AdamOptions{});
            ok = ok && r.loss <= last;
            last = r.loss;
        }
        monotone += ok;
    }
    EXPECT_GE(monotone, 95);
}

TEST(Sequential, InferMatchesForward) {
    Rng rng(72);
    Sequential<double> net;
    net.add(std::make_unique<Conv3d<double>>("c", 2, 3, 3, 1));
    net.add(std::make_unique<ReLU<double>>());
    net.add(std::make_unique<MaxPool3d<double>>());
    net.add(std::make_unique<Reshape<double>>(Shape{3 * 8}));
    net.add(std::make_unique<Dense<double>>("d", 24, 4));
    net.initialize(rng);
    const auto x = oracle::random_tensor<double>({2, 2, 4, 4, 4}, rng);
    EXPECT_EQ(net.infer(x), net.forward(x));
    EXPECT_EQ(net.parameters().size(), 4u);
}

TEST(WeightFile, RoundTripIsExact) {
    Rng rng(73);
    std::vector<NamedTensor> tensors{{"enc.w", oracle::random_tensor<float>({2, 3, 3, 3, 3}, rng)},
                                     {"enc.b", oracle::random_tensor<float>({2}, rng)},
                                     {"dense", oracle::random_tensor<float>({7, 5}, rng)}};
    const auto bytes = encode_weights(tensors);
    EXPECT_EQ(bytes.substr(0, 4), "VXNW");
    EXPECT_EQ(decode_weights(bytes), tensors);
}

TEST(WeightFile, CorruptInputIsRejected) {
    Rng rng(74);
    std::vector<NamedTensor> tensors{{"w", oracle::random_tensor<float>({3, 2}, rng)}};
    auto bytes = encode_weights(tensors);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_weights(bad_magic), Error);
    EXPECT_THROW(decode_weights(bytes.substr(0, bytes.size() - 1)), Error);
    EXPECT_THROW(decode_weights(bytes + "x"), Error);
}
