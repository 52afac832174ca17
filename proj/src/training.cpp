#include "mobiload/training.hpp"

#include "mobiload/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

namespace mobiload {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    std::uint64_t x = a * 0x9E3779B97F4A7C15ull + b * 0xC2B2AE3D27D4EB4Full + c * 0x165667B19E3779F9ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

struct OptimizerState {
    std::vector<Layer> m, v;
    long step = 0;
};

std::vector<Layer> zeros_like(const std::vector<Layer>& layers) {
    std::vector<Layer> z;
    for (const auto& l : layers) {
        z.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    return z;
}

void reset(std::vector<Layer>& g) {
    for (auto& l : g) {
        l.weights.setZero();
        l.bias.setZero();
    }
}

OptimizerState make_state(const std::vector<Layer>& layers) { return {zeros_like(layers), zeros_like(layers), 0}; }

void apply_update(std::vector<Layer>& layers, const std::vector<Layer>& grads, OptimizerState& st,
                  const TrainingConfig& c) {
    ++st.step;
    if (c.optimizer == Optimizer::SGD) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            layers[i].weights -= c.learning_rate * grads[i].weights;
            layers[i].bias -= c.learning_rate * grads[i].bias;
        }
        return;
    }
    const double t = static_cast<double>(st.step);
    const double c1 = 1.0 - std::pow(c.beta1, t), c2 = 1.0 - std::pow(c.beta2, t);
    auto step = [&](auto& param, const auto& g, auto& m, auto& v) {
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = (c.beta2 * v.array() + (1.0 - c.beta2) * g.array().square()).matrix();
        param.array() -= c.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + c.adam_epsilon);
    };
    for (std::size_t i = 0; i < layers.size(); ++i) {
        step(layers[i].weights, grads[i].weights, st.m[i].weights, st.v[i].weights);
        step(layers[i].bias, grads[i].bias, st.m[i].bias, st.v[i].bias);
    }
}

// Shuffled visiting order of n samples, topped up with draws with replacement to `length`.
std::vector<std::size_t> epoch_order(std::size_t n, std::size_t length, std::uint64_t seed, int epoch) {
    std::mt19937_64 rng(mix(seed, static_cast<std::uint64_t>(epoch), 0x5348554646ull));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    while (order.size() < length) order.push_back(pick(rng));
    return order;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& inputs, const std::size_t* idx, std::size_t count) {
    Eigen::MatrixXd out(inputs.rows(), static_cast<Eigen::Index>(count));
    for (std::size_t j = 0; j < count; ++j) out.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(idx[j]));
    return out;
}

// Mean fractional absolute percentage error of a batch and its gradient w.r.t. each output.
double batch_loss(const Eigen::RowVectorXd& out, const std::vector<double>& targets, const std::size_t* idx,
                  double eps, Eigen::RowVectorXd& upstream) {
    const auto n = out.size();
    upstream.resize(n);
    double loss = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double t = targets[idx[j]];
        const double denom = std::max(t, eps);
        const double diff = out(j) - t;
        loss += std::abs(diff) / denom;
        upstream(j) = (diff > 0.0 ? 1.0 : diff < 0.0 ? -1.0 : 0.0) / denom / static_cast<double>(n);
    }
    return loss / static_cast<double>(n);
}

double full_mape(const ArchitectureSpec& spec, const LayerView& view, const Eigen::MatrixXd& inputs,
                 const std::vector<double>& targets, double eps) {
    const auto pred = predict(spec, view, inputs);
    return mape(pred, targets, eps);
}

void check_data(const ArchitectureSpec& spec, const SampleSet& data, std::size_t input_rows) {
    require(data.size() > 0, ErrorKind::EmptyInput, "training set " + data.task_id + " is empty");
    require(input_rows == spec.input_dim(), ErrorKind::DimensionMismatch,
            "task " + data.task_id + " has input dim " + std::to_string(input_rows) + ", model expects " +
                std::to_string(spec.input_dim()));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Minibatch training of `layers`, which form the tail of the network from `first_layer`.
TrainingLog run_single(const ArchitectureSpec& spec, std::vector<Layer>& layers, std::size_t first_layer,
                       const Eigen::MatrixXd& inputs, const std::vector<double>& targets, const TrainingConfig& config,
                       int epochs, const std::string& task_id,
                       const std::function<MultiTaskModel(const std::vector<Layer>&)>& as_model) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainingLog log;
    log.config = config.to_json();
    const std::size_t n = targets.size();
    OptimizerState state = make_state(layers);
    std::vector<Layer> grads = zeros_like(layers);
    std::vector<Layer> last_finite = layers;
    Eigen::RowVectorXd upstream;

    for (int e = 1; e <= epochs; ++e) {
        const auto order = epoch_order(n, n, config.seed, e);
        std::size_t b = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++b) {
            const std::size_t count = std::min(config.batch_size, n - start);
            const Eigen::MatrixXd x = gather(inputs, order.data() + start, count);
            std::mt19937_64 drop(mix(config.seed, static_cast<std::uint64_t>(e), b + 1));
            const LayerView view = LayerView::tail(layers, first_layer);
            const ForwardTrace tr = forward_batch(spec, view, x, Mode::Train, &drop);
            const double loss = batch_loss(tr.output(), targets, order.data() + start, config.mape_epsilon, upstream);
            if (!std::isfinite(loss)) {
                throw NonFiniteLossError("task " + task_id + ": non-finite loss in epoch " + std::to_string(e),
                                         as_model(last_finite));
            }
            reset(grads);
            backward_batch(spec, view, tr, upstream, grads);
            apply_update(layers, grads, state, config);
        }
        const double m = full_mape(spec, LayerView::tail(layers, first_layer), inputs, targets, config.mape_epsilon);
        if (!std::isfinite(m)) {
            throw NonFiniteLossError("task " + task_id + ": non-finite training MAPE after epoch " + std::to_string(e),
                                     as_model(last_finite));
        }
        log.rows.push_back({e, task_id, m});
        last_finite = layers;
    }
    log.wall_seconds = seconds_since(t0);
    return log;
}

}  // namespace

void TrainingConfig::validate() const {
    require(batch_size >= 1, ErrorKind::InvalidConfig, "batch_size must be >= 1");
    require(epochs >= 1, ErrorKind::InvalidConfig, "epochs must be >= 1");
    require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidConfig,
            "learning_rate must be finite and >= 0");
    require(mape_epsilon > 0.0, ErrorKind::InvalidConfig, "mape_epsilon must be > 0");
    require(fine_tune_epochs >= 0, ErrorKind::InvalidConfig, "fine_tune_epochs must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorKind::InvalidConfig,
            "Adam decay constants must lie in [0, 1)");
}

nlohmann::json TrainingConfig::to_json() const {
    return {{"batch_size", batch_size},
            {"epochs", epochs},
            {"learning_rate", learning_rate},
            {"optimizer", optimizer == Optimizer::Adam ? "adam" : "sgd"},
            {"seed", seed},
            {"mape_epsilon", mape_epsilon},
            {"fine_tune_epochs", fine_tune_epochs}};
}

double mape(std::span<const double> predictions, std::span<const double> targets, double epsilon) {
    require(!targets.empty(), ErrorKind::EmptyInput, "MAPE of an empty set");
    require(predictions.size() == targets.size(), ErrorKind::ShapeMismatch, "prediction and target counts differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        sum += std::abs(predictions[i] - targets[i]) / std::max(targets[i], epsilon);
    }
    return 100.0 * sum / static_cast<double>(targets.size());
}

MultiTaskModel MultiTaskModel::create(const ArchitectureSpec& spec, const std::vector<std::string>& task_ids,
                                      std::uint64_t seed) {
    const NetworkParams init = init_params(spec, seed);
    MultiTaskModel m;
    m.spec = spec;
    m.trunk.assign(init.layers.begin(), init.layers.begin() + static_cast<std::ptrdiff_t>(spec.trunk_depth));
    for (const auto& id : task_ids) {
        require(!m.has_task(id), ErrorKind::InvalidConfig, "duplicate task " + id);
        TaskHead h;
        h.task_id = id;
        h.layers.assign(init.layers.begin() + static_cast<std::ptrdiff_t>(spec.trunk_depth), init.layers.end());
        m.heads.push_back(std::move(h));
    }
    return m;
}

MultiTaskModel MultiTaskModel::from_network(const ArchitectureSpec& spec, const NetworkParams& params,
                                            const std::string& task_id) {
    require(params.layers.size() == spec.layers(), ErrorKind::ShapeMismatch, "parameter layer count differs from spec");
    MultiTaskModel m;
    m.spec = spec;
    m.trunk.assign(params.layers.begin(), params.layers.begin() + static_cast<std::ptrdiff_t>(spec.trunk_depth));
    TaskHead h;
    h.task_id = task_id;
    h.layers.assign(params.layers.begin() + static_cast<std::ptrdiff_t>(spec.trunk_depth), params.layers.end());
    m.heads.push_back(std::move(h));
    return m;
}

bool MultiTaskModel::has_task(std::string_view task_id) const {
    return std::any_of(heads.begin(), heads.end(), [&](const TaskHead& h) { return h.task_id == task_id; });
}

const TaskHead& MultiTaskModel::head(std::string_view task_id) const {
    for (const auto& h : heads) {
        if (h.task_id == task_id) return h;
    }
    fail(ErrorKind::UnknownTask, "model has no task \"" + std::string(task_id) + "\"");
}

TaskHead& MultiTaskModel::head(std::string_view task_id) {
    return const_cast<TaskHead&>(static_cast<const MultiTaskModel&>(*this).head(task_id));
}

const std::vector<Layer>& MultiTaskModel::trunk_for(std::string_view task_id) const {
    head(task_id);
    return trunk;
}

LayerView MultiTaskModel::view(std::string_view task_id) const { return LayerView(trunk, head(task_id).layers); }

NetworkParams MultiTaskModel::network(std::string_view task_id) const {
    NetworkParams p;
    p.layers = trunk;
    const auto& h = head(task_id).layers;
    p.layers.insert(p.layers.end(), h.begin(), h.end());
    return p;
}

std::vector<double> MultiTaskModel::predict(std::string_view task_id, const Eigen::MatrixXd& inputs) const {
    return mobiload::predict(spec, view(task_id), inputs);
}

std::vector<double> TrainingLog::mape_series(std::string_view task_id) const {
    std::vector<double> out;
    for (const auto& r : rows) {
        if (r.task_id == task_id) out.push_back(r.train_mape);
    }
    return out;
}

void TrainingLog::append(const TrainingLog& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
    wall_seconds += other.wall_seconds;
}

void TrainingLog::write_csv(const std::filesystem::path& path, const std::string& header_comment) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "epoch,task_id,train_mape\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.train_mape);
        out << r.epoch << ',' << r.task_id << ',' << buf << '\n';
    }
}

SingleTaskResult train_single(const NetworkParams& params, const ArchitectureSpec& spec, const SampleSet& data,
                              const TrainingConfig& config) {
    config.validate();
    spec.validate();
    check_data(spec, data, data.dimension());
    require(params.layers.size() == spec.layers(), ErrorKind::DimensionMismatch, "parameters do not match spec");
    SingleTaskResult r;
    r.params = params;
    r.log = run_single(spec, r.params.layers, 0, data.inputs, data.targets, config, config.epochs, data.task_id,
                       [&](const std::vector<Layer>& layers) {
                           return MultiTaskModel::from_network(spec, NetworkParams{layers}, data.task_id);
                       });
    return r;
}

MultiTaskResult train_multitask(const MultiTaskModel& model, const std::vector<const SampleSet*>& datasets,
                                const TrainingConfig& config) {
    config.validate();
    model.spec.validate();
    require(datasets.size() >= 2, ErrorKind::InvalidConfig, "multi-task training needs at least 2 tasks");
    require(datasets.size() == model.heads.size(), ErrorKind::InvalidConfig, "one dataset per task head required");
    for (std::size_t j = 0; j < datasets.size(); ++j) {
        const SampleSet& d = *datasets[j];
        check_data(model.spec, d, d.dimension());
        const TaskHead& h = model.heads[j];
        require(d.task_id == h.task_id, ErrorKind::InvalidConfig,
                "dataset " + d.task_id + " is not in head order (expected " + h.task_id + ")");
        require(h.layout.segments.empty() || h.layout.hash() == d.layout.hash(), ErrorKind::LayoutMismatch,
                "dataset layout differs from head layout for " + h.task_id);
    }

    const auto t0 = std::chrono::steady_clock::now();
    MultiTaskResult res{model, {}};
    MultiTaskModel& m = res.model;
    res.log.config = config.to_json();
    const std::size_t P = datasets.size();
    std::size_t n_max = 0;
    for (const auto* d : datasets) n_max = std::max(n_max, d->size());

    OptimizerState trunk_state = make_state(m.trunk);
    std::vector<OptimizerState> head_state;
    for (const auto& h : m.heads) head_state.push_back(make_state(h.layers));
    std::vector<Layer> trunk_grad = zeros_like(m.trunk);
    std::vector<std::vector<Layer>> task_grads;
    for (const auto& h : m.heads) {
        std::vector<Layer> g = zeros_like(m.trunk);
        auto hg = zeros_like(h.layers);
        g.insert(g.end(), hg.begin(), hg.end());
        task_grads.push_back(std::move(g));
    }
    MultiTaskModel last_finite = m;
    Eigen::RowVectorXd upstream;
    const std::size_t l = m.spec.trunk_depth;

    for (int e = 1; e <= config.epochs; ++e) {
        std::vector<std::vector<std::size_t>> orders;
        for (const auto* d : datasets) orders.push_back(epoch_order(d->size(), n_max, config.seed, e));
        std::size_t b = 0;
        for (std::size_t start = 0; start < n_max; start += config.batch_size, ++b) {
            const std::size_t count = std::min(config.batch_size, n_max - start);
            reset(trunk_grad);
            for (std::size_t j = 0; j < P; ++j) {
                const SampleSet& d = *datasets[j];
                const std::size_t* idx = orders[j].data() + start;
                const Eigen::MatrixXd x = gather(d.inputs, idx, count);
                std::mt19937_64 drop(mix(config.seed, static_cast<std::uint64_t>(e), b + 1));
                const LayerView view = m.view(m.heads[j].task_id);
                const ForwardTrace tr = forward_batch(m.spec, view, x, Mode::Train, &drop);
                const double loss = batch_loss(tr.output(), d.targets, idx, config.mape_epsilon, upstream);
                if (!std::isfinite(loss)) {
                    throw NonFiniteLossError("task " + d.task_id + ": non-finite loss in epoch " + std::to_string(e),
                                             last_finite);
                }
                reset(task_grads[j]);
                backward_batch(m.spec, view, tr, upstream, task_grads[j]);
                for (std::size_t i = 0; i < l; ++i) {
                    trunk_grad[i].weights += task_grads[j][i].weights;
                    trunk_grad[i].bias += task_grads[j][i].bias;
                }
            }
            apply_update(m.trunk, trunk_grad, trunk_state, config);
            for (std::size_t j = 0; j < P; ++j) {
                std::vector<Layer> hg(task_grads[j].begin() + static_cast<std::ptrdiff_t>(l), task_grads[j].end());
                apply_update(m.heads[j].layers, hg, head_state[j], config);
            }
        }
        for (std::size_t j = 0; j < P; ++j) {
            const SampleSet& d = *datasets[j];
            const double mp = full_mape(m.spec, m.view(d.task_id), d.inputs, d.targets, config.mape_epsilon);
            if (!std::isfinite(mp)) {
                throw NonFiniteLossError("task " + d.task_id + ": non-finite training MAPE", last_finite);
            }
            res.log.rows.push_back({e, d.task_id, mp});
        }
        last_finite = m;
    }
    res.log.wall_seconds = seconds_since(t0);
    return res;
}

MultiTaskResult fine_tune(const MultiTaskModel& model, std::string_view task_id, const SampleSet& data,
                          const TrainingConfig& config) {
    config.validate();
    const TaskHead& h = model.head(task_id);
    check_data(model.spec, data, data.dimension());
    require(h.layout.segments.empty() || h.layout.hash() == data.layout.hash(), ErrorKind::LayoutMismatch,
            "fine-tune data layout differs from head layout for " + h.task_id);
    MultiTaskResult res{model, {}};
    res.log.config = config.to_json();
    if (config.fine_tune_epochs == 0) return res;

    // Frozen trunk: its embedding of every sample is fixed for the whole run.
    const std::size_t l = model.spec.trunk_depth;
    const Eigen::MatrixXd embed = hidden_output(model.spec, model.trunk, data.inputs);
    TaskHead& target = res.model.head(task_id);
    TrainingConfig ft = config;
    ft.seed = mix(config.seed, 0xF17E, 0);
    res.log = run_single(model.spec, target.layers, l, embed, data.targets, ft, config.fine_tune_epochs,
                         std::string(task_id), [&](const std::vector<Layer>& layers) {
                             MultiTaskModel snap = model;
                             snap.head(task_id).layers = layers;
                             return snap;
                         });
    res.log.config = config.to_json();
    return res;
}

}  // namespace mobiload
