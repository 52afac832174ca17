#include "support.hpp"

#include "mobiload/neuralnet.hpp"

#include <chrono>
#include <functional>

using namespace testing;

namespace {

// 1-1-1 ReLU net with W1=[2], b1=[1], W2=[3], b2=[-1].
struct TinyNet {
    ArchitectureSpec spec = ArchitectureSpec::make(1, {1}, Activation::ReLU, 0.0, 1);
    NetworkParams params;
    TinyNet() {
        params = init_params(spec, 1);
        params.layers[0].weights(0, 0) = 2.0;
        params.layers[0].bias(0) = 1.0;
        params.layers[1].weights(0, 0) = 3.0;
        params.layers[1].bias(0) = -1.0;
    }
};

double min_seconds(int reps, const std::function<void()>& f) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

}  // namespace

TEST_CASE("architecture validation") {
    CHECK(ArchitectureSpec::standard(46).widths == std::vector<std::size_t>{46, 512, 256, 128, 64, 1});
    CHECK(ArchitectureSpec::standard(46).trunk_depth == 3);
    CHECK(ArchitectureSpec::make(3, {4, 5}, Activation::ReLU, 0.0, 1).parameter_count() == 3 * 4 + 4 + 4 * 5 + 5 + 5 + 1);
    CHECK(error_kind_of([] { ArchitectureSpec::make(3, {}, Activation::ReLU, 0.0, 1); }) == ErrorKind::InvalidSpec);
    CHECK(error_kind_of([] { ArchitectureSpec::make(3, {4}, Activation::ReLU, 0.0, 2); }) == ErrorKind::InvalidSpec);
    CHECK(error_kind_of([] { ArchitectureSpec::make(3, {4}, Activation::ReLU, 1.0, 1); }) == ErrorKind::InvalidSpec);
    CHECK(error_kind_of([] { ArchitectureSpec::make(3, {4}, Activation::ReLU, 0.0, 0); }) == ErrorKind::InvalidSpec);
    CHECK(parse_activation("sigmoid") == Activation::Sigmoid);
    CHECK(to_string(Activation::ReLU) == "relu");
    CHECK(error_kind_of([] { parse_activation("tanh"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("initialization: zero biases, seeded, Glorot-uniform bound") {
    const ArchitectureSpec spec = ArchitectureSpec::standard(46);
    const NetworkParams a = init_params(spec, 42), b = init_params(spec, 42);
    CHECK(a == b);
    CHECK_FALSE(a == init_params(spec, 43));
    for (const auto& l : a.layers) CHECK(l.bias.isZero(0.0));
    const double bound = 0.1037;  // sqrt(6 / (46 + 512)) rounded up
    CHECK(a.layers[0].weights.rows() == 512);
    CHECK(a.layers[0].weights.cols() == 46);
    CHECK(a.layers[0].weights.cwiseAbs().maxCoeff() < bound);
    CHECK(a.layers[0].weights.cwiseAbs().maxCoeff() > 0.9 * bound);
}

TEST_CASE("forward: hand arithmetic") {
    TinyNet net;
    const double one[] = {1.0}, minus[] = {-1.0};
    const ForwardTrace t = forward(net.params, net.spec, one, Mode::Infer);
    CHECK(t.activations[1](0, 0) == 3.0);
    CHECK(t.output()(0) == 8.0);
    const ForwardTrace u = forward(net.params, net.spec, minus, Mode::Infer);
    CHECK(u.activations[1](0, 0) == 0.0);
    CHECK(u.output()(0) == -1.0);

    const ArchitectureSpec spec = ArchitectureSpec::make(5, {7, 3}, Activation::Sigmoid, 0.0, 1);
    const NetworkParams zero = zeros_like(init_params(spec, 3));
    const double x[] = {1, 2, 3, 4, 5};
    CHECK(forward(zero, spec, x, Mode::Infer).output()(0) == 0.0);
    const double short_x[] = {1, 2};
    CHECK(error_kind_of([&] { forward(zero, spec, short_x, Mode::Infer); }) == ErrorKind::ShapeMismatch);
}

TEST_CASE("backward: hand chain rule and degenerate cases") {
    TinyNet net;
    const double one[] = {1.0};
    const ForwardTrace t = forward(net.params, net.spec, one, Mode::Infer);
    const Gradients g = backward(net.params, net.spec, t, 1.0);
    CHECK(g.layers[1].weights(0, 0) == 3.0);
    CHECK(g.layers[1].bias(0) == 1.0);
    CHECK(g.layers[0].weights(0, 0) == 3.0);
    CHECK(g.layers[0].bias(0) == 3.0);

    const Gradients z = backward(net.params, net.spec, t, 0.0);
    for (const auto& l : z.layers) {
        CHECK(l.weights.isZero(0.0));
        CHECK(l.bias.isZero(0.0));
    }

    // An inactive ReLU unit passes no gradient to its incoming weights.
    const double minus[] = {-1.0};
    const Gradients dead = backward(net.params, net.spec, forward(net.params, net.spec, minus, Mode::Infer), 1.0);
    CHECK(dead.layers[0].weights(0, 0) == 0.0);
    CHECK(dead.layers[0].bias(0) == 0.0);
    CHECK(dead.layers[1].bias(0) == 1.0);
}

TEST_CASE("batched forward and backward agree with per-sample calls") {
    const ArchitectureSpec spec = ArchitectureSpec::make(6, {8, 5}, Activation::ReLU, 0.0, 1);
    NetworkParams p = init_params(spec, 5);
    for (auto& l : p.layers) l.bias.setConstant(0.05);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd X(6, 10);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
    Eigen::RowVectorXd up(10);
    for (Eigen::Index i = 0; i < 10; ++i) up(i) = n(rng);

    const ForwardTrace bt = forward_batch(spec, LayerView(p), X, Mode::Infer, nullptr);
    std::vector<Layer> bg = zeros_like(p).layers;
    backward_batch(spec, LayerView(p), bt, up, bg);

    Gradients sum = zeros_like(p);
    for (Eigen::Index c = 0; c < 10; ++c) {
        const Eigen::VectorXd x = X.col(c);
        const ForwardTrace t = forward(p, spec, {x.data(), 6}, Mode::Infer);
        CHECK(t.output()(0) == doctest::Approx(bt.output()(c)).epsilon(1e-14));
        const Gradients g = backward(p, spec, t, up(c));
        for (std::size_t i = 0; i < sum.layers.size(); ++i) {
            sum.layers[i].weights += g.layers[i].weights;
            sum.layers[i].bias += g.layers[i].bias;
        }
    }
    for (std::size_t i = 0; i < sum.layers.size(); ++i) {
        CHECK((sum.layers[i].weights - bg[i].weights).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((sum.layers[i].bias - bg[i].bias).cwiseAbs().maxCoeff() < 1e-12);
    }
    const std::vector<double> pred = predict(spec, LayerView(p), X);
    for (Eigen::Index c = 0; c < 10; ++c) CHECK(pred[static_cast<std::size_t>(c)] == bt.output()(c));
}

TEST_CASE("gradient check: pass, sigmoid, injected fault, affine exactness") {
    const ArchitectureSpec five = ArchitectureSpec::make(8, {16, 8, 4}, Activation::ReLU, 0.0, 2);
    const GradientCheckReport ok = gradient_check(five, 7, 1e-4);
    CHECK(ok.passed);
    CHECK(ok.max_relative_error < 1e-4);
    CHECK(ok.parameters_checked == five.parameter_count());

    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        CHECK(gradient_check(ArchitectureSpec::make(10, {12, 9, 6}, Activation::Sigmoid, 0.0, 1), seed, 1e-4).passed);
    }

    const GradientCheckReport bad = gradient_check(five, 7, 1e-4, GradientFault{1, 0, 0, 1e-2});
    CHECK_FALSE(bad.passed);
    CHECK(bad.worst_parameter == "W2(0,0)");

    const GradientCheckReport lin = gradient_check(ArchitectureSpec::make(6, {5, 4}, Activation::Identity, 0.0, 1), 3, 1e-4);
    CHECK(lin.passed);
    CHECK(lin.max_absolute_error < 1e-9);
}

TEST_CASE("dropout: masks, inverted scaling, expectation") {
    const ArchitectureSpec spec = ArchitectureSpec::make(4, {16}, Activation::ReLU, 0.2, 1);
    NetworkParams p = init_params(spec, 9);
    p.layers[0].bias.setConstant(0.3);
    const Eigen::VectorXd x = (Eigen::VectorXd(4) << 0.5, -0.2, 0.9, 0.1).finished();

    const ForwardTrace inf = forward(p, spec, {x.data(), 4}, Mode::Infer, 5);
    CHECK(inf.masks[0].isOnes(0.0));
    CHECK(forward(p, spec, {x.data(), 4}, Mode::Infer, 6).output() == inf.output());

    const Eigen::Index n = 100000;
    const Eigen::MatrixXd X = x.replicate(1, n);
    std::mt19937_64 rng(11);
    const ForwardTrace tr = forward_batch(spec, LayerView(p), X, Mode::Train, &rng);
    const Eigen::MatrixXd& mask = tr.masks[0];
    CHECK(((mask.array() == 0.0) || (mask.array() == 1.0)).all());
    CHECK(mask.mean() == doctest::Approx(0.8).epsilon(0.01));
    // Retained units carry activation / (1 - rate).
    const Eigen::VectorXd y = inf.activations[1].col(0);
    for (Eigen::Index u = 0; u < 16; ++u) {
        const double scaled = tr.activations[1](u, 0);
        CHECK(scaled == doctest::Approx(mask(u, 0) * y(u) / 0.8).epsilon(1e-14));
    }
    const Eigen::VectorXd mean = tr.activations[1].rowwise().mean();
    for (Eigen::Index u = 0; u < 16; ++u) {
        if (y(u) > 0.0) CHECK(std::abs(mean(u) - y(u)) / y(u) < 0.01);
    }
    CHECK(std::abs(tr.output().mean() - inf.output()(0)) < 0.01 * std::max(1.0, std::abs(inf.output()(0))));

    // Dropout needs a random source in train mode.
    CHECK(error_kind_of([&] { forward_batch(spec, LayerView(p), X.leftCols(2), Mode::Train, nullptr); }) ==
          ErrorKind::InvalidSpec);
}

TEST_CASE("forward cost grows linearly with parameter count") {
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(64, 256);
    auto per_param = [&](std::size_t w) {
        const ArchitectureSpec spec = ArchitectureSpec::make(64, {w, w, w}, Activation::ReLU, 0.0, 1);
        const NetworkParams p = init_params(spec, 1);
        const double secs = min_seconds(7, [&] {
            for (int r = 0; r < 5; ++r) {
                volatile double sink = forward_batch(spec, LayerView(p), X, Mode::Infer, nullptr).output()(0);
                (void)sink;
            }
        });
        return secs / static_cast<double>(spec.parameter_count());
    };
    const double small = per_param(64), large = per_param(128);
    CHECK(large / small < 2.5);
}

TEST_CASE("hidden_output matches the trunk activations of a full forward") {
    const ArchitectureSpec spec = ArchitectureSpec::make(5, {6, 4, 3}, Activation::Sigmoid, 0.3, 2);
    const NetworkParams p = init_params(spec, 2);
    const Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 7);
    const ForwardTrace t = forward_batch(spec, LayerView(p), X, Mode::Infer, nullptr);
    const std::vector<Layer> trunk(p.layers.begin(), p.layers.begin() + 2);
    CHECK(hidden_output(spec, trunk, X) == t.activations[2]);
    const std::vector<Layer> head(p.layers.begin() + 2, p.layers.end());
    CHECK(predict(spec, LayerView::tail(head, 2), t.activations[2]) == predict(spec, LayerView(p), X));
}
