#include "mobiload/neuralnet.hpp"

#include "mobiload/error.hpp"

#include <algorithm>
#include <cmath>

namespace mobiload {

namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::ReLU: return z.cwiseMax(0.0);
        case Activation::Sigmoid: return (1.0 + (-z.array()).exp()).inverse().matrix();
        case Activation::Identity: return z;
    }
    return z;
}

// Derivative of the activation at pre-activation z.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::ReLU: return (z.array() > 0.0).cast<double>().matrix();
        case Activation::Sigmoid: {
            const Eigen::ArrayXXd y = (1.0 + (-z.array()).exp()).inverse();
            return (y * (1.0 - y)).matrix();
        }
        case Activation::Identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    }
    return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

void check_view(const ArchitectureSpec& spec, const LayerView& view, Eigen::Index input_rows) {
    require(view.first_layer + view.layers.size() == spec.layers(), ErrorKind::ShapeMismatch,
            "layer view does not end at the output layer");
    require(!view.layers.empty(), ErrorKind::ShapeMismatch, "empty layer view");
    require(static_cast<std::size_t>(input_rows) == spec.widths[view.first_layer], ErrorKind::ShapeMismatch,
            "input has " + std::to_string(input_rows) + " rows, expected " + std::to_string(spec.widths[view.first_layer]));
    for (std::size_t i = 0; i < view.layers.size(); ++i) {
        const std::size_t g = view.first_layer + i;
        const Layer& l = *view.layers[i];
        require(static_cast<std::size_t>(l.weights.rows()) == spec.widths[g + 1] &&
                    static_cast<std::size_t>(l.weights.cols()) == spec.widths[g] &&
                    static_cast<std::size_t>(l.bias.size()) == spec.widths[g + 1],
                ErrorKind::ShapeMismatch, "layer " + std::to_string(g + 1) + " shape differs from the architecture");
    }
}

}  // namespace

std::string to_string(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "relu";
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    fail(ErrorKind::InvalidConfig, "unknown activation \"" + name + "\" (relu, sigmoid, identity)");
}

std::size_t ArchitectureSpec::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) n += widths[i] * widths[i + 1] + widths[i + 1];
    return n;
}

void ArchitectureSpec::validate() const {
    const std::size_t m = layers();
    require(m >= 2, ErrorKind::InvalidSpec, "architecture needs at least 2 layers");
    require(widths.back() == 1, ErrorKind::InvalidSpec, "output width must be 1");
    require(std::all_of(widths.begin(), widths.end(), [](std::size_t w) { return w > 0; }), ErrorKind::InvalidSpec,
            "layer widths must be positive");
    require(activations.size() == m - 1 && dropout.size() == m - 1, ErrorKind::InvalidSpec,
            "need one activation and dropout rate per hidden layer");
    require(std::all_of(dropout.begin(), dropout.end(), [](double p) { return p >= 0.0 && p < 1.0; }),
            ErrorKind::InvalidSpec, "dropout rate must lie in [0, 1)");
    require(trunk_depth >= 1 && trunk_depth < m, ErrorKind::InvalidSpec, "trunk depth l must satisfy 1 <= l < m");
}

ArchitectureSpec ArchitectureSpec::make(std::size_t input_dim, const std::vector<std::size_t>& hidden, Activation act,
                                        double dropout, std::size_t trunk_depth) {
    ArchitectureSpec s;
    s.widths.push_back(input_dim);
    s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
    s.widths.push_back(1);
    s.activations.assign(hidden.size(), act);
    s.dropout.assign(hidden.size(), dropout);
    s.trunk_depth = trunk_depth;
    s.validate();
    return s;
}

ArchitectureSpec ArchitectureSpec::standard(std::size_t input_dim) {
    return make(input_dim, {512, 256, 128, 64}, Activation::ReLU, 0.2, 3);
}

bool Layer::operator==(const Layer& o) const {
    return weights.rows() == o.weights.rows() && weights.cols() == o.weights.cols() && bias.size() == o.bias.size() &&
           weights == o.weights && bias == o.bias;
}

bool NetworkParams::all_finite() const {
    return std::all_of(layers.begin(), layers.end(),
                       [](const Layer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

LayerView::LayerView(const NetworkParams& p) {
    for (const auto& l : p.layers) layers.push_back(&l);
}

LayerView::LayerView(const std::vector<Layer>& trunk, const std::vector<Layer>& head) {
    for (const auto& l : trunk) layers.push_back(&l);
    for (const auto& l : head) layers.push_back(&l);
}

LayerView LayerView::tail(const std::vector<Layer>& head, std::size_t first_layer) {
    LayerView v;
    for (const auto& l : head) v.layers.push_back(&l);
    v.first_layer = first_layer;
    return v;
}

NetworkParams init_params(const ArchitectureSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    NetworkParams p;
    for (std::size_t i = 0; i < spec.layers(); ++i) {
        const std::size_t in = spec.widths[i], out = spec.widths[i + 1];
        const double r = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> u(-r, r);
        Layer l;
        l.weights.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
        for (Eigen::Index row = 0; row < l.weights.rows(); ++row) {
            for (Eigen::Index col = 0; col < l.weights.cols(); ++col) l.weights(row, col) = u(rng);
        }
        l.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out));
        p.layers.push_back(std::move(l));
    }
    return p;
}

NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z;
    for (const auto& l : p.layers) {
        z.layers.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

ForwardTrace forward_batch(const ArchitectureSpec& spec, const LayerView& view, const Eigen::MatrixXd& inputs,
                           Mode mode, std::mt19937_64* rng) {
    check_view(spec, view, inputs.rows());
    const std::size_t m = spec.layers();
    ForwardTrace tr;
    tr.first_layer = view.first_layer;
    tr.activations.push_back(inputs);
    for (std::size_t i = 0; i < view.layers.size(); ++i) {
        const std::size_t g = view.first_layer + i;
        const Layer& l = *view.layers[i];
        Eigen::MatrixXd z = l.weights * tr.activations.back();
        z.colwise() += l.bias;
        if (g + 1 == m) {
            tr.pre_activations.push_back(std::move(z));
            break;
        }
        Eigen::MatrixXd y = activate(spec.activations[g], z);
        const double rate = spec.dropout[g];
        Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(y.rows(), y.cols());
        if (mode == Mode::Train && rate > 0.0) {
            require(rng != nullptr, ErrorKind::InvalidSpec, "train-mode dropout needs a random source");
            std::bernoulli_distribution keep(1.0 - rate);
            for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = keep(*rng) ? 1.0 : 0.0;
            }
            y = (y.array() * mask.array() / (1.0 - rate)).matrix();
        }
        tr.pre_activations.push_back(std::move(z));
        tr.masks.push_back(std::move(mask));
        tr.activations.push_back(std::move(y));
    }
    return tr;
}

void backward_batch(const ArchitectureSpec& spec, const LayerView& view, const ForwardTrace& tr,
                    const Eigen::RowVectorXd& upstream, std::vector<Layer>& grads) {
    require(tr.first_layer == view.first_layer && tr.pre_activations.size() == view.layers.size(),
            ErrorKind::ShapeMismatch, "trace does not belong to this layer view");
    require(grads.size() == view.layers.size(), ErrorKind::ShapeMismatch, "gradient buffer has wrong layer count");
    require(upstream.size() == tr.activations.front().cols(), ErrorKind::ShapeMismatch,
            "upstream gradient count differs from batch size");

    Eigen::MatrixXd delta = upstream;  // d/dZ of the current layer, rows = layer width
    for (std::size_t i = view.layers.size(); i-- > 0;) {
        const std::size_t g = view.first_layer + i;
        const Eigen::MatrixXd& input = tr.activations[i];
        if (g + 1 != spec.layers()) {
            const double rate = spec.dropout[g];
            const double scale = rate > 0.0 ? 1.0 / (1.0 - rate) : 1.0;
            delta = (delta.array() * tr.masks[i].array() * scale *
                     activation_slope(spec.activations[g], tr.pre_activations[i]).array())
                        .matrix();
        }
        grads[i].weights.noalias() += delta * input.transpose();
        grads[i].bias += delta.rowwise().sum();
        if (i > 0) delta = view.layers[i]->weights.transpose() * delta;
    }
}

Eigen::MatrixXd hidden_output(const ArchitectureSpec& spec, const std::vector<Layer>& layers,
                              const Eigen::MatrixXd& inputs) {
    require(layers.size() < spec.layers(), ErrorKind::ShapeMismatch, "hidden_output cannot include the output layer");
    require(static_cast<std::size_t>(inputs.rows()) == spec.input_dim(), ErrorKind::ShapeMismatch,
            "input rows differ from input dim");
    Eigen::MatrixXd y = inputs;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Eigen::MatrixXd z = layers[i].weights * y;
        z.colwise() += layers[i].bias;
        y = activate(spec.activations[i], z);
    }
    return y;
}

ForwardTrace forward(const NetworkParams& params, const ArchitectureSpec& spec, std::span<const double> x, Mode mode,
                     std::uint64_t seed) {
    require(x.size() == spec.input_dim(), ErrorKind::ShapeMismatch,
            "input length " + std::to_string(x.size()) + " differs from input dim " + std::to_string(spec.input_dim()));
    const Eigen::MatrixXd col = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    std::mt19937_64 rng(seed);
    return forward_batch(spec, LayerView(params), col, mode, &rng);
}

Gradients backward(const NetworkParams& params, const ArchitectureSpec& spec, const ForwardTrace& trace,
                   double upstream_gradient) {
    Gradients g = zeros_like(params);
    Eigen::RowVectorXd up = Eigen::RowVectorXd::Constant(trace.activations.front().cols(), upstream_gradient);
    backward_batch(spec, LayerView(params), trace, up, g.layers);
    return g;
}

std::vector<double> predict(const ArchitectureSpec& spec, const LayerView& view, const Eigen::MatrixXd& inputs) {
    const ForwardTrace tr = forward_batch(spec, view, inputs, Mode::Infer, nullptr);
    const Eigen::RowVectorXd out = tr.output();
    return {out.data(), out.data() + out.size()};
}

GradientCheckReport gradient_check(const ArchitectureSpec& spec, std::uint64_t seed, double tolerance,
                                   std::optional<GradientFault> fault) {
    ArchitectureSpec s = spec;
    std::fill(s.dropout.begin(), s.dropout.end(), 0.0);
    s.validate();
    require(s.parameter_count() <= 50000, ErrorKind::InvalidSpec, "gradient check limited to 5e4 parameters");

    NetworkParams p = init_params(s, seed);
    std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
    std::uniform_real_distribution<double> small(-0.1, 0.1);
    for (auto& l : p.layers) {
        for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = small(rng);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.input_dim()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = normal(rng);
    const std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));

    Gradients g = backward(p, s, forward(p, s, xs, Mode::Infer), 1.0);
    if (fault) g.layers.at(fault->layer).weights(fault->row, fault->col) += fault->delta;

    auto out = [&](const NetworkParams& q) { return forward(q, s, xs, Mode::Infer).output()(0); };
    GradientCheckReport rep;
    auto compare = [&](double analytic, double& param, const std::string& label) {
        const double saved = param;
        param = saved + kFiniteDifferenceStep;
        const double up = out(p);
        param = saved - kFiniteDifferenceStep;
        const double down = out(p);
        param = saved;
        const double numeric = (up - down) / (2.0 * kFiniteDifferenceStep);
        const double abs_err = std::abs(analytic - numeric);
        const double rel = abs_err / std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
        rep.max_absolute_error = std::max(rep.max_absolute_error, abs_err);
        if (rel > rep.max_relative_error || rep.worst_parameter.empty()) {
            if (rel >= rep.max_relative_error) rep.worst_parameter = label;
            rep.max_relative_error = std::max(rep.max_relative_error, rel);
        }
        ++rep.parameters_checked;
    };
    for (std::size_t li = 0; li < p.layers.size(); ++li) {
        Layer& l = p.layers[li];
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
                compare(g.layers[li].weights(r, c), l.weights(r, c),
                        "W" + std::to_string(li + 1) + "(" + std::to_string(r) + "," + std::to_string(c) + ")");
            }
            compare(g.layers[li].bias(r), l.bias(r), "b" + std::to_string(li + 1) + "(" + std::to_string(r) + ")");
        }
    }
    rep.passed = rep.max_relative_error < tolerance;
    return rep;
}

}  // namespace mobiload
