#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace mobiload {

enum class Activation { ReLU, Sigmoid, Identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// widths = {input, hidden..., 1}; layer i (0-based) maps widths[i] -> widths[i + 1].
// Hidden layers carry an activation and a dropout rate; the last layer is affine.
struct ArchitectureSpec {
    std::vector<std::size_t> widths;
    std::vector<Activation> activations;
    std::vector<double> dropout;
    std::size_t trunk_depth = 1;  // layers shared across tasks

    std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
    std::size_t input_dim() const { return widths.front(); }
    std::size_t parameter_count() const;
    void validate() const;  // throws InvalidSpec

    // 5 layers, widths input-512-256-128-64-1, ReLU, dropout 0.2, trunk depth 3.
    static ArchitectureSpec standard(std::size_t input_dim);
    static ArchitectureSpec make(std::size_t input_dim, const std::vector<std::size_t>& hidden, Activation act,
                                 double dropout, std::size_t trunk_depth);

    bool operator==(const ArchitectureSpec&) const = default;
};

struct Layer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out

    bool operator==(const Layer& other) const;
};

struct NetworkParams {
    std::vector<Layer> layers;

    bool operator==(const NetworkParams&) const = default;
    bool all_finite() const;
};

using Gradients = NetworkParams;

enum class Mode { Train, Infer };

// Activations Y_0..Y_{m-1} (Y_0 = input), pre-activations Z_1..Z_m, and the 0/1 dropout
// masks of each hidden layer. Columns index samples.
struct ForwardTrace {
    std::vector<Eigen::MatrixXd> activations;
    std::vector<Eigen::MatrixXd> pre_activations;
    std::vector<Eigen::MatrixXd> masks;
    std::size_t first_layer = 0;

    Eigen::RowVectorXd output() const { return pre_activations.back().row(0); }
};

// Non-owning ordered view of consecutive layers [first_layer, first_layer + size) of an
// architecture, e.g. a shared trunk followed by one task head.
struct LayerView {
    std::vector<const Layer*> layers;
    std::size_t first_layer = 0;

    LayerView() = default;
    explicit LayerView(const NetworkParams& p);
    LayerView(const std::vector<Layer>& trunk, const std::vector<Layer>& head);
    static LayerView tail(const std::vector<Layer>& head, std::size_t first_layer);
};

NetworkParams init_params(const ArchitectureSpec& spec, std::uint64_t seed);
NetworkParams zeros_like(const NetworkParams& p);

// Batched forward over the columns of `inputs`. Train mode draws dropout masks from `rng`.
ForwardTrace forward_batch(const ArchitectureSpec& spec, const LayerView& view, const Eigen::MatrixXd& inputs,
                           Mode mode, std::mt19937_64* rng);

// Accumulates d(sum_j upstream_j * output_j)/d(theta) into `grads` (one entry per view layer).
void backward_batch(const ArchitectureSpec& spec, const LayerView& view, const ForwardTrace& trace,
                    const Eigen::RowVectorXd& upstream, std::vector<Layer>& grads);

ForwardTrace forward(const NetworkParams& params, const ArchitectureSpec& spec, std::span<const double> x, Mode mode,
                     std::uint64_t seed = 0);
Gradients backward(const NetworkParams& params, const ArchitectureSpec& spec, const ForwardTrace& trace,
                   double upstream_gradient);

// Infer-mode outputs for every column of `inputs`.
std::vector<double> predict(const ArchitectureSpec& spec, const LayerView& view, const Eigen::MatrixXd& inputs);

// Infer-mode activations after the leading `layers` (all hidden), one column per sample.
Eigen::MatrixXd hidden_output(const ArchitectureSpec& spec, const std::vector<Layer>& layers,
                              const Eigen::MatrixXd& inputs);

struct GradientCheckReport {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t parameters_checked = 0;
    std::string worst_parameter;
    bool passed = false;
};

struct GradientFault {
    std::size_t layer = 0;
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    double delta = 1e-2;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
// Relative error uses max(|analytic|, |numeric|, floor) as denominator so that
// near-zero gradients are compared on an absolute scale.
inline constexpr double kRelativeErrorFloor = 1e-6;

// Compares backward() with central finite differences on a random input drawn from seed.
// `fault` perturbs one analytic weight gradient to exercise the failure path.
GradientCheckReport gradient_check(const ArchitectureSpec& spec, std::uint64_t seed, double tolerance,
                                   std::optional<GradientFault> fault = std::nullopt);

}  // namespace mobiload
