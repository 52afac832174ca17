#include "mobiload/evaluation.hpp"

#include "mobiload/csv.hpp"
#include "mobiload/error.hpp"
#include "mobiload/json_util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mobiload {

using nlohmann::json;

std::string to_string(VariantKind k) {
    switch (k) {
        case VariantKind::NN_Orig: return "NN_Orig";
        case VariantKind::Retrain: return "Retrain";
        case VariantKind::Mobi: return "Mobi";
        case VariantKind::Mobi_MTL: return "Mobi_MTL";
    }
    return "?";
}

VariantKind parse_variant(const std::string& name) {
    for (auto k : {VariantKind::NN_Orig, VariantKind::Retrain, VariantKind::Mobi, VariantKind::Mobi_MTL}) {
        if (to_string(k) == name) return k;
    }
    fail(ErrorKind::InvalidConfig, "unknown variant \"" + name + "\" (expected NN_Orig, Retrain, Mobi or Mobi_MTL)");
}

void VariantSpec::validate() const {
    const bool wants_mobility = kind == VariantKind::Mobi || kind == VariantKind::Mobi_MTL;
    require(mobility == wants_mobility, ErrorKind::InvalidConfig,
            name() + (wants_mobility ? " requires mobility features" : " must not use mobility features"));
    if (kind == VariantKind::Mobi_MTL) {
        require(!groups.empty(), ErrorKind::InvalidConfig, "Mobi_MTL needs at least one task group");
        for (const auto& g : groups) {
            require(g.size() >= 2, ErrorKind::InvalidConfig, "Mobi_MTL task group needs at least 2 regions");
        }
    } else {
        require(groups.empty(), ErrorKind::InvalidConfig, name() + " takes no task groups");
    }
}

VariantSpec VariantSpec::standard(VariantKind kind, const DataSplits& splits, const std::vector<std::string>& region_ids,
                                  std::vector<std::vector<std::string>> groups) {
    VariantSpec s;
    s.kind = kind;
    s.train_span = kind == VariantKind::NN_Orig ? splits.orig_train : splits.recent_train;
    s.mobility = kind == VariantKind::Mobi || kind == VariantKind::Mobi_MTL;
    if (kind == VariantKind::Mobi_MTL) s.groups = groups.empty() ? std::vector<std::vector<std::string>>{region_ids} : std::move(groups);
    s.validate();
    return s;
}

ArchitectureSpec ModelConfig::architecture(std::size_t input_dim) const {
    return ArchitectureSpec::make(input_dim, hidden_widths, activation, dropout, trunk_depth);
}

void ModelConfig::validate() const {
    require(history_hours >= 0, ErrorKind::InvalidConfig, "history_hours must be >= 0");
    training.validate();
    architecture(1).validate();
}

json ModelConfig::to_json() const {
    return {{"hidden_widths", hidden_widths},
            {"activation", to_string(activation)},
            {"dropout", dropout},
            {"trunk_depth", trunk_depth},
            {"history_hours", history_hours},
            {"weather_features", weather_features},
            {"training", training.to_json()}};
}

namespace {

const RegionSeries& find_region(const std::vector<RegionSeries>& regions, const std::string& id) {
    for (const auto& r : regions) {
        if (r.region_id == id) return r;
    }
    fail(ErrorKind::InvalidConfig, "task group references unknown region " + id);
}

struct PreparedTask {
    SampleSet samples;
    NormalizationState normalizer;
};

PreparedTask prepare(const RegionSeries& series, const VariantSpec& spec, const ModelConfig& config) {
    PreparedTask t;
    t.normalizer = fit_normalizer(series, spec.train_span, config.weather_features);
    t.samples = build_samples(series, t.normalizer, {config.history_hours, spec.mobility}, spec.train_span);
    return t;
}

void set_head(MultiTaskModel& m, const PreparedTask& t) {
    TaskHead& h = m.head(t.samples.task_id);
    h.layout = t.samples.layout;
    h.normalizer = t.normalizer;
}

}  // namespace

TrainedVariant train_variant(const VariantSpec& spec, const std::vector<RegionSeries>& regions,
                             const ModelConfig& config, DateRange test) {
    spec.validate();
    config.validate();
    require(spec.train_span.last < test.first || spec.train_span.first > test.last, ErrorKind::InvalidConfig,
            spec.name() + " training span overlaps the test span");
    require(!regions.empty(), ErrorKind::EmptyInput, "no regions to train on");

    TrainedVariant out;
    out.spec = spec;
    out.log.config = config.to_json();
    out.checkpoint.metadata = {{"variant", spec.name()},
                               {"train_span", jsonutil::to_json(spec.train_span)},
                               {"mobility", spec.mobility},
                               {"seed", config.training.seed},
                               {"config", config.to_json()}};

    // Every sample set is built before any training so data errors surface first.
    if (spec.kind != VariantKind::Mobi_MTL) {
        std::vector<PreparedTask> tasks;
        for (const auto& r : regions) tasks.push_back(prepare(r, spec, config));
        for (const auto& t : tasks) {
            const ArchitectureSpec arch = config.architecture(t.samples.dimension());
            const NetworkParams init = init_params(arch, config.training.seed);
            SingleTaskResult res = train_single(init, arch, t.samples, config.training);
            MultiTaskModel m = MultiTaskModel::from_network(arch, res.params, t.samples.task_id);
            set_head(m, t);
            out.checkpoint.models.push_back(std::move(m));
            out.log.append(res.log);
        }
        return out;
    }

    std::vector<std::vector<PreparedTask>> groups;
    for (const auto& g : spec.groups) {
        std::vector<PreparedTask> tasks;
        for (const auto& id : g) tasks.push_back(prepare(find_region(regions, id), spec, config));
        for (const auto& t : tasks) {
            require(t.samples.dimension() == tasks.front().samples.dimension(), ErrorKind::DimensionMismatch,
                    "regions in a task group need the same feature layout (" + t.samples.task_id + ")");
        }
        groups.push_back(std::move(tasks));
    }
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        auto& tasks = groups[gi];
        const ArchitectureSpec arch = config.architecture(tasks.front().samples.dimension());
        MultiTaskModel m = MultiTaskModel::create(arch, spec.groups[gi], config.training.seed);
        std::vector<const SampleSet*> data;
        for (const auto& t : tasks) {
            set_head(m, t);
            data.push_back(&t.samples);
        }
        MultiTaskResult co = train_multitask(m, data, config.training);
        out.log.append(co.log);
        m = std::move(co.model);
        for (const auto& t : tasks) {
            MultiTaskResult ft = fine_tune(m, t.samples.task_id, t.samples, config.training);
            for (auto& row : ft.log.rows) row.task_id += "@fine_tune";
            out.log.append(ft.log);
            m = std::move(ft.model);
        }
        out.checkpoint.models.push_back(std::move(m));
    }
    return out;
}

std::vector<RegionPredictions> predict_span(const Checkpoint& ckpt, const std::vector<RegionSeries>& regions,
                                            DateRange span) {
    std::vector<RegionPredictions> out;
    for (const auto& series : regions) {
        const MultiTaskModel* model = nullptr;
        for (const auto& m : ckpt.models) {
            if (m.has_task(series.region_id)) model = &m;
        }
        if (!model) continue;
        const TaskHead& head = model->head(series.region_id);
        const FeatureOptions opts{head.layout.history_hours, head.layout.has_mobility()};
        const SampleSet s = build_samples(series, head.normalizer, opts, span);
        require(s.layout.hash() == head.layout.hash(), ErrorKind::LayoutMismatch,
                "features rebuilt for " + series.region_id + " do not match the checkpoint layout");
        const std::vector<double> y = model->predict(series.region_id, s.inputs);
        RegionPredictions p;
        p.region_id = series.region_id;
        p.actual_mw = s.actual_mw;
        for (std::size_t i = 0; i < s.size(); ++i) {
            p.target_times.push_back(s.target_time(i));
            p.pred_mw.push_back(head.normalizer.denormalize_load(y[i]));
        }
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<double> signed_errors(std::span<const double> predictions, std::span<const double> actuals) {
    require(predictions.size() == actuals.size(), ErrorKind::ShapeMismatch, "prediction and actual counts differ");
    std::vector<double> e(actuals.size());
    for (std::size_t i = 0; i < actuals.size(); ++i) {
        require(actuals[i] > 0.0, ErrorKind::ZeroActual,
                "actual load " + csv::format_double(actuals[i]) + " at position " + std::to_string(i) + " is not positive");
        e[i] = 100.0 * (predictions[i] - actuals[i]) / actuals[i];
    }
    return e;
}

double report_mape(std::span<const double> predictions, std::span<const double> actuals) {
    require(!actuals.empty(), ErrorKind::EmptyInput, "MAPE of an empty set");
    const auto e = signed_errors(predictions, actuals);
    double s = 0.0;
    for (double v : e) s += std::abs(v);
    return s / static_cast<double>(e.size());
}

double quantile_sorted(const std::vector<double>& v, double p) {
    require(!v.empty(), ErrorKind::EmptyInput, "quantile of an empty set");
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ErrorSummary summarize_errors(std::vector<double> e) {
    ErrorSummary s;
    s.count = e.size();
    if (e.empty()) return s;
    std::sort(e.begin(), e.end());
    s.mean_bias = std::accumulate(e.begin(), e.end(), 0.0) / static_cast<double>(e.size());
    s.q05 = quantile_sorted(e, 0.05);
    s.q25 = quantile_sorted(e, 0.25);
    s.median = quantile_sorted(e, 0.5);
    s.q75 = quantile_sorted(e, 0.75);
    s.q95 = quantile_sorted(e, 0.95);
    s.over_forecast_share =
        static_cast<double>(std::count_if(e.begin(), e.end(), [](double v) { return v > 0.0; })) /
        static_cast<double>(e.size());
    return s;
}

double MapeTable::at(std::string_view region, std::string_view variant) const {
    const auto r = std::find(regions.begin(), regions.end(), region);
    const auto v = std::find(variants.begin(), variants.end(), variant);
    require(r != regions.end() && v != variants.end(), ErrorKind::UnknownTask,
            "no MAPE for " + std::string(region) + "/" + std::string(variant));
    return mape[static_cast<std::size_t>(r - regions.begin())][static_cast<std::size_t>(v - variants.begin())];
}

EvaluationReport make_report(const std::vector<VariantResult>& results) {
    require(!results.empty(), ErrorKind::EmptyInput, "no variant results to report");
    EvaluationReport rep;
    const auto& ref = results.front().regions;
    for (const auto& rp : ref) rep.table.regions.push_back(rp.region_id);
    rep.table.mape.assign(ref.size(), {});
    for (const auto& res : results) {
        require(res.regions.size() == ref.size(), ErrorKind::MismatchedTestSets,
                res.variant + " covers a different set of regions");
        rep.table.variants.push_back(res.variant);
        std::vector<double> all_errors;
        for (std::size_t r = 0; r < ref.size(); ++r) {
            const auto& p = res.regions[r];
            require(p.region_id == ref[r].region_id && p.target_times == ref[r].target_times && p.actual_mw == ref[r].actual_mw,
                    ErrorKind::MismatchedTestSets,
                    res.variant + " was scored on different test samples for " + ref[r].region_id);
            const auto e = signed_errors(p.pred_mw, p.actual_mw);
            double s = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i) {
                s += std::abs(e[i]);
                rep.predictions.push_back({p.target_times[i], p.region_id, res.variant, p.pred_mw[i], p.actual_mw[i], e[i]});
            }
            require(!e.empty(), ErrorKind::EmptyInput, "no test samples for " + p.region_id);
            rep.table.mape[r].push_back(s / static_cast<double>(e.size()));
            all_errors.insert(all_errors.end(), e.begin(), e.end());
        }
        rep.summaries.push_back(summarize_errors(std::move(all_errors)));
        rep.runtime_seconds.push_back(res.runtime_seconds);
    }
    return rep;
}

Comparison compare_variants(const MapeTable& t, const std::string& baseline, const std::string& target) {
    require(!t.regions.empty() && !t.variants.empty(), ErrorKind::EmptyInput, "empty MAPE table");
    Comparison c;
    c.table = t;
    c.variant_means.assign(t.variants.size(), 0.0);
    for (std::size_t r = 0; r < t.regions.size(); ++r) {
        require(t.mape[r].size() == t.variants.size(), ErrorKind::MismatchedTestSets,
                "region " + t.regions[r] + " lacks a score for some variant");
        std::size_t best = 0;
        for (std::size_t v = 0; v < t.variants.size(); ++v) {
            c.variant_means[v] += t.mape[r][v] / static_cast<double>(t.regions.size());
            if (t.mape[r][v] < t.mape[r][best]) best = v;
        }
        c.best_variant.push_back(t.variants[best]);
    }
    const auto b = std::find(t.variants.begin(), t.variants.end(), baseline);
    const auto g = std::find(t.variants.begin(), t.variants.end(), target);
    if (b == t.variants.end() || g == t.variants.end()) {
        c.ratio_of_means = c.mean_of_ratios = std::numeric_limits<double>::quiet_NaN();
        return c;
    }
    const auto bi = static_cast<std::size_t>(b - t.variants.begin());
    const auto gi = static_cast<std::size_t>(g - t.variants.begin());
    c.ratio_of_means = c.variant_means[bi] / c.variant_means[gi];
    double s = 0.0;
    for (std::size_t r = 0; r < t.regions.size(); ++r) s += t.mape[r][bi] / t.mape[r][gi];
    c.mean_of_ratios = s / static_cast<double>(t.regions.size());
    return c;
}

Comparison compare_variants(const EvaluationReport& report) { return compare_variants(report.table); }

std::vector<WeeklyMape> weekly_mape(const EvaluationReport& report) {
    std::vector<WeeklyMape> out;
    for (const auto& region : report.table.regions) {
        for (const auto& variant : report.table.variants) {
            std::vector<double> sum, count;
            std::optional<Instant> first;
            for (const auto& p : report.predictions) {
                if (p.region_id != region || p.variant != variant) continue;
                if (!first) first = p.timestamp;
                const auto w = static_cast<std::size_t>((p.timestamp - *first) / (7 * 24 * kHour));
                if (w >= sum.size()) {
                    sum.resize(w + 1, 0.0);
                    count.resize(w + 1, 0.0);
                }
                sum[w] += std::abs(p.signed_error);
                count[w] += 1.0;
            }
            for (std::size_t w = 0; w < sum.size(); ++w) {
                if (count[w] > 0) out.push_back({region, variant, static_cast<int>(w) + 1, sum[w] / count[w]});
            }
        }
    }
    return out;
}

namespace {

std::ofstream open_artifact(const std::filesystem::path& path, const std::string& header_comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    return out;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_scores_csv(const EvaluationReport& rep, const std::filesystem::path& path, const std::string& header_comment) {
    auto out = open_artifact(path, header_comment);
    out << "region,variant,test_mape\n";
    for (std::size_t r = 0; r < rep.table.regions.size(); ++r) {
        for (std::size_t v = 0; v < rep.table.variants.size(); ++v) {
            out << rep.table.regions[r] << ',' << rep.table.variants[v] << ',' << fmt(rep.table.mape[r][v]) << '\n';
        }
    }
}

void write_predictions_csv(const EvaluationReport& rep, const std::filesystem::path& path,
                           const std::string& header_comment) {
    auto out = open_artifact(path, header_comment);
    out << "timestamp_utc,region,variant,pred_mw,actual_mw,signed_err_pct\n";
    for (const auto& p : rep.predictions) {
        out << format_timestamp(p.timestamp) << ',' << p.region_id << ',' << p.variant << ',' << fmt(p.pred_mw) << ','
            << fmt(p.actual_mw) << ',' << fmt(p.signed_error) << '\n';
    }
}

std::string format_table(const Comparison& c) {
    const auto& t = c.table;
    std::size_t first = 6;
    for (const auto& r : t.regions) first = std::max(first, r.size());
    std::vector<std::size_t> widths;
    for (const auto& v : t.variants) widths.push_back(std::max<std::size_t>(v.size(), 8));
    std::ostringstream os;
    auto cell = [&](const std::string& s, std::size_t w, bool left) {
        os << (left ? "" : std::string(w - std::min(w, s.size()), ' ')) << s
           << (left ? std::string(w - std::min(w, s.size()), ' ') : "");
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };
    cell("region", first, true);
    for (std::size_t v = 0; v < t.variants.size(); ++v) {
        os << "  ";
        cell(t.variants[v], widths[v], false);
    }
    os << "  best\n";
    for (std::size_t r = 0; r < t.regions.size(); ++r) {
        cell(t.regions[r], first, true);
        for (std::size_t v = 0; v < t.variants.size(); ++v) {
            os << "  ";
            cell(num(t.mape[r][v]), widths[v], false);
        }
        os << "  " << c.best_variant[r] << '\n';
    }
    cell("mean", first, true);
    for (std::size_t v = 0; v < t.variants.size(); ++v) {
        os << "  ";
        cell(num(c.variant_means[v]), widths[v], false);
    }
    os << '\n';
    if (!std::isnan(c.ratio_of_means)) {
        os << "improvement NN_Orig/Mobi_MTL: ratio of means " << num(c.ratio_of_means) << ", mean of ratios "
           << num(c.mean_of_ratios) << '\n';
    }
    return os.str();
}

}  // namespace mobiload
