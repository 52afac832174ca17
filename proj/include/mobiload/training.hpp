#pragma once

#include "mobiload/error.hpp"
#include "mobiload/features.hpp"
#include "mobiload/neuralnet.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mobiload {

enum class Optimizer { SGD, Adam };

struct TrainingConfig {
    std::size_t batch_size = 64;
    int epochs = 50;
    double learning_rate = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    std::uint64_t seed = 1;
    double mape_epsilon = 1e-3;  // denominator floor on normalized targets
    int fine_tune_epochs = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;

    void validate() const;  // throws InvalidConfig
    nlohmann::json to_json() const;
};

// (100 / N) * sum |pred - target| / max(target, epsilon).
double mape(std::span<const double> predictions, std::span<const double> targets, double epsilon);

struct TaskHead {
    std::string task_id;
    std::vector<Layer> layers;  // layers l+1..m
    FeatureLayout layout;
    NormalizationState normalizer;

    bool operator==(const TaskHead&) const = default;
};

// One shared trunk (layers 1..l) and one head per task (layers l+1..m). A single-task
// network is the one-head case.
struct MultiTaskModel {
    ArchitectureSpec spec;
    std::vector<Layer> trunk;
    std::vector<TaskHead> heads;  // fixed task order

    // Trunk from init_params(spec, seed); every head starts from the same initial head layers.
    static MultiTaskModel create(const ArchitectureSpec& spec, const std::vector<std::string>& task_ids,
                                 std::uint64_t seed);
    static MultiTaskModel from_network(const ArchitectureSpec& spec, const NetworkParams& params,
                                       const std::string& task_id);

    bool has_task(std::string_view task_id) const;
    const TaskHead& head(std::string_view task_id) const;
    TaskHead& head(std::string_view task_id);
    // The same trunk object whichever task asks; UnknownTask otherwise.
    const std::vector<Layer>& trunk_for(std::string_view task_id) const;
    LayerView view(std::string_view task_id) const;
    NetworkParams network(std::string_view task_id) const;
    std::vector<double> predict(std::string_view task_id, const Eigen::MatrixXd& inputs) const;

    bool operator==(const MultiTaskModel&) const = default;
};

struct TrainingLogRow {
    int epoch = 0;
    std::string task_id;
    double train_mape = 0.0;
    bool operator==(const TrainingLogRow&) const = default;
};

struct TrainingLog {
    std::vector<TrainingLogRow> rows;
    double wall_seconds = 0.0;
    nlohmann::json config;

    std::vector<double> mape_series(std::string_view task_id) const;
    void append(const TrainingLog& other);
    // CSV `epoch,task_id,train_mape`, preceded by a '#' line carrying `header_comment`.
    void write_csv(const std::filesystem::path& path, const std::string& header_comment) const;
};

struct SingleTaskResult {
    NetworkParams params;
    TrainingLog log;
};

// Raised when a batch loss turns non-finite; carries the parameters from the last finished epoch.
class NonFiniteLossError : public Error {
public:
    NonFiniteLossError(const std::string& message, MultiTaskModel last_finite)
        : Error(ErrorKind::NonFiniteLoss, message), last_finite_(std::move(last_finite)) {}
    const MultiTaskModel& last_finite() const { return last_finite_; }

private:
    MultiTaskModel last_finite_;
};

SingleTaskResult train_single(const NetworkParams& params, const ArchitectureSpec& spec, const SampleSet& data,
                              const TrainingConfig& config);

struct MultiTaskResult {
    MultiTaskModel model;
    TrainingLog log;
};

// Each step draws one minibatch per task in task order, evaluated at the same parameters:
// every head takes its own gradient, the trunk takes the sum over tasks. Tasks shorter than
// the longest are topped up by resampling with replacement each epoch.
MultiTaskResult train_multitask(const MultiTaskModel& model, const std::vector<const SampleSet*>& datasets,
                                const TrainingConfig& config);

// config.fine_tune_epochs of training on one task's head with the trunk frozen.
MultiTaskResult fine_tune(const MultiTaskModel& model, std::string_view task_id, const SampleSet& data,
                          const TrainingConfig& config);

}  // namespace mobiload
