#pragma once

#include "mobiload/checkpoint.hpp"
#include "mobiload/dataset.hpp"
#include "mobiload/features.hpp"
#include "mobiload/training.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mobiload {

enum class VariantKind { NN_Orig, Retrain, Mobi, Mobi_MTL };

std::string to_string(VariantKind k);
VariantKind parse_variant(const std::string& name);

struct VariantSpec {
    VariantKind kind = VariantKind::NN_Orig;
    DateRange train_span;
    bool mobility = false;
    std::vector<std::vector<std::string>> groups;  // Mobi_MTL task groups

    std::string name() const { return to_string(kind); }
    void validate() const;  // InvalidConfig

    // Spans and mobility flag of the standard protocol. Mobi_MTL takes `groups`
    // (one group of every region when empty).
    static VariantSpec standard(VariantKind kind, const DataSplits& splits, const std::vector<std::string>& region_ids,
                                std::vector<std::vector<std::string>> groups = {});
};

// Network shape and feature options shared by every variant of an experiment.
struct ModelConfig {
    std::vector<std::size_t> hidden_widths = {512, 256, 128, 64};
    Activation activation = Activation::ReLU;
    double dropout = 0.2;
    std::size_t trunk_depth = 3;
    int history_hours = 24;
    std::vector<std::string> weather_features;  // empty: every channel
    TrainingConfig training;

    ArchitectureSpec architecture(std::size_t input_dim) const;
    void validate() const;
    nlohmann::json to_json() const;
};

struct TrainedVariant {
    VariantSpec spec;
    Checkpoint checkpoint;
    TrainingLog log;  // fine-tune rows carry task ids suffixed "@fine_tune"
};

// fit_normalizer(train span) -> build_samples -> train (multi-task + fine-tune for Mobi_MTL).
// `test` guards isolation: a train span reaching into it is rejected.
TrainedVariant train_variant(const VariantSpec& spec, const std::vector<RegionSeries>& regions,
                             const ModelConfig& config, DateRange test);

struct RegionPredictions {
    std::string region_id;
    std::vector<Instant> target_times;
    std::vector<double> pred_mw;
    std::vector<double> actual_mw;
};

// MW predictions for every forecastable target of `span`, per region that the checkpoint
// covers, in `regions` order. LayoutMismatch if rebuilt features differ from the stored layout.
std::vector<RegionPredictions> predict_span(const Checkpoint& ckpt, const std::vector<RegionSeries>& regions,
                                            DateRange span);

// 100 * (pred - actual) / actual; ZeroActual for actual <= 0.
std::vector<double> signed_errors(std::span<const double> predictions, std::span<const double> actuals);
// Mean absolute signed error (no floor).
double report_mape(std::span<const double> predictions, std::span<const double> actuals);

struct ErrorSummary {
    std::size_t count = 0;
    double mean_bias = 0.0;
    double q05 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q95 = 0.0;
    double over_forecast_share = 0.0;
};
ErrorSummary summarize_errors(std::vector<double> errors);

// Type-7 (linear interpolation) sample quantile of sorted values, p in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double p);

struct VariantResult {
    std::string variant;
    std::vector<RegionPredictions> regions;
    double runtime_seconds = 0.0;
};

struct PredictionRow {
    Instant timestamp;
    std::string region_id;
    std::string variant;
    double pred_mw = 0.0;
    double actual_mw = 0.0;
    double signed_error = 0.0;
};

struct MapeTable {
    std::vector<std::string> regions;
    std::vector<std::string> variants;
    std::vector<std::vector<double>> mape;  // [region][variant]

    double at(std::string_view region, std::string_view variant) const;
};

struct EvaluationReport {
    MapeTable table;
    std::vector<PredictionRow> predictions;
    std::vector<ErrorSummary> summaries;  // per variant, table order
    std::vector<double> runtime_seconds;  // per variant

    double mape(std::string_view region, std::string_view variant) const { return table.at(region, variant); }
};

// MismatchedTestSets unless every variant predicts the same targets per region.
EvaluationReport make_report(const std::vector<VariantResult>& results);

struct Comparison {
    MapeTable table;
    std::vector<double> variant_means;      // mean over regions, per variant
    std::vector<std::string> best_variant;  // per region
    double ratio_of_means = 0.0;            // mean(baseline) / mean(target); NaN when either is absent
    double mean_of_ratios = 0.0;            // mean over regions of baseline / target
};

Comparison compare_variants(const MapeTable& table, const std::string& baseline = "NN_Orig",
                            const std::string& target = "Mobi_MTL");
Comparison compare_variants(const EvaluationReport& report);

// Per-region, per-variant MAPE over 7-day blocks starting at the first prediction's local date.
struct WeeklyMape {
    std::string region_id;
    std::string variant;
    int week = 0;
    double mape = 0.0;
};
std::vector<WeeklyMape> weekly_mape(const EvaluationReport& report);

// CSV artifacts; each begins with a '#' line carrying `header_comment`.
void write_scores_csv(const EvaluationReport& report, const std::filesystem::path& path,
                      const std::string& header_comment);
void write_predictions_csv(const EvaluationReport& report, const std::filesystem::path& path,
                           const std::string& header_comment);
std::string format_table(const Comparison& cmp);

}  // namespace mobiload
