#pragma once

#include "mobiload/dataset.hpp"
#include "mobiload/timeutil.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mobiload {

inline constexpr std::size_t kHourBlock = 24;
inline constexpr std::size_t kMonthBlock = 12;
inline constexpr std::size_t kDayTypeBlock = 2;  // (weekday, weekend)
inline constexpr std::size_t kHolidayBlock = 2;  // (holiday, non-holiday)
inline constexpr std::size_t kCalendarWidth = kHourBlock + kMonthBlock + kDayTypeBlock + kHolidayBlock;
inline constexpr double kMobilityScale = 0.01;

// Min-max scaling fitted on a training span only.
struct NormalizationState {
    double load_min = 0.0;
    double load_max = 1.0;
    std::vector<std::string> weather_names;
    std::vector<double> weather_min;
    std::vector<double> weather_max;
    double mobility_scale = kMobilityScale;

    double normalize_load(double mw) const { return (mw - load_min) / (load_max - load_min); }
    double denormalize_load(double y) const { return y * (load_max - load_min) + load_min; }
    double normalize_weather(std::size_t k, double v) const {
        return (v - weather_min[k]) / (weather_max[k] - weather_min[k]);
    }
    bool operator==(const NormalizationState&) const = default;
};

// `weather_features` selects channels by name; empty keeps all of them in series order.
NormalizationState fit_normalizer(const RegionSeries& series, DateRange train_span,
                                  const std::vector<std::string>& weather_features = {});

using CalendarCode = std::array<double, kCalendarWidth>;

CalendarCode encode_calendar(const LocalTime& t, bool holiday);
CalendarCode encode_calendar(const LocalTime& t, const std::vector<Date>& sorted_holidays);

struct DecodedCalendar {
    int hour = 0;
    unsigned month = 1;
    bool weekend = false;
    bool holiday = false;
    bool operator==(const DecodedCalendar&) const = default;
};
DecodedCalendar decode_calendar(std::span<const double> code);

struct Segment {
    std::string name;
    std::size_t length = 0;
    bool operator==(const Segment&) const = default;
};

// Ordered input segments: hour, month, daytype, holiday, weather, [mobility], load_lag.
// The weather segment holds the target-hour values first, then H history hours oldest first.
struct FeatureLayout {
    std::vector<Segment> segments;
    std::vector<std::string> weather_features;
    std::vector<std::string> mobility_indices;
    int history_hours = 24;

    std::size_t dimension() const;
    std::size_t offset(std::string_view segment) const;
    bool has_segment(std::string_view segment) const;
    bool has_mobility() const { return has_segment("mobility"); }

    std::string descriptor() const;  // canonical JSON sidecar text
    std::uint64_t hash() const;      // FNV-1a of descriptor()
    static FeatureLayout parse_descriptor(const std::string& text);

    bool operator==(const FeatureLayout&) const = default;
};

struct FeatureOptions {
    int history_hours = 24;
    bool with_mobility = true;
};

FeatureLayout make_layout(const NormalizationState& norm, const std::vector<std::string>& mobility_indices,
                          const FeatureOptions& options);

// D_tr for one task: column i of `inputs` pairs with targets[i].
struct SampleSet {
    std::string task_id;
    FeatureLayout layout;
    Eigen::MatrixXd inputs;         // dimension x samples
    std::vector<double> targets;    // normalized load at issue + horizon
    std::vector<double> actual_mw;  // same target in MW
    std::vector<Instant> issue_times;
    std::vector<int> horizons;

    std::size_t size() const { return targets.size(); }
    std::size_t dimension() const { return static_cast<std::size_t>(inputs.rows()); }
    std::span<const double> input(std::size_t i) const {
        return {inputs.data() + i * dimension(), dimension()};
    }
    Instant target_time(std::size_t i) const { return issue_times[i] + horizons[i] * kHour; }
    SampleSet subset(const std::vector<std::size_t>& indices) const;
};

// Series weather columns selected by the normalizer, in normalizer order; LayoutMismatch if absent.
std::vector<std::size_t> weather_channels(const RegionSeries& series, const NormalizationState& norm);

// One feature vector for issue hour `t` (grid index) and horizon k: `calendar` of the target
// time, weather at t + k and t - H + 1..t, `mobility` (percent; ignored without a mobility
// segment) and normalized loads t - H..t. Writes layout.dimension() values to `out`.
void encode_sample(const RegionSeries& series, const NormalizationState& norm, const FeatureLayout& layout,
                   const std::vector<std::size_t>& channels, std::size_t t, int k, const CalendarCode& calendar,
                   const double* mobility, double* out);

// One sample per (issue hour, horizon k = 1..24), issued at local midnight of each day in
// `span` whose 24 targets all fall inside `span`. Sorted by (issue time, k).
SampleSet build_samples(const RegionSeries& series, const NormalizationState& norm, const FeatureOptions& options,
                        DateRange span);

}  // namespace mobiload
