#pragma once

#include "mobiload/timeutil.hpp"

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobiload {

inline constexpr std::array<std::string_view, 4> kWeatherColumns = {"temp_c", "precip_mm", "cloud_pct",
                                                                     "pressure_hpa"};
inline constexpr int kMaxInterpolatedGapHours = 6;

// Hourly load/weather plus daily mobility for one region. Missing raw values are NaN;
// once aligned, every hour of `span` (local dates) is present and finite.
struct RegionSeries {
    std::string region_id;
    std::string timezone = "UTC";
    DateRange span;

    std::vector<Instant> timestamps;
    std::vector<double> load;  // MW

    std::vector<std::string> weather_names;
    std::vector<double> weather;  // row-major: hour x weather_names

    std::vector<std::string> mobility_names;
    std::vector<Date> mobility_dates;
    std::vector<double> mobility;         // row-major: day x mobility_names, percent of baseline
    std::vector<double> mobility_hourly;  // row-major: hour x mobility_names (aligned series only)

    std::vector<Date> holidays;  // sorted, unique

    std::size_t hours() const { return timestamps.size(); }
    std::size_t weather_width() const { return weather_names.size(); }
    std::size_t mobility_width() const { return mobility_names.size(); }
    double weather_at(std::size_t hour, std::size_t channel) const {
        return weather[hour * weather_names.size() + channel];
    }
    double mobility_hourly_at(std::size_t hour, std::size_t index) const {
        return mobility_hourly[hour * mobility_names.size() + index];
    }
    const double* mobility_on(Date d) const;  // nullptr if the date is not covered
    bool is_holiday(Date d) const;
    // Position of `t` on the aligned grid; nullopt outside it.
    std::optional<std::size_t> hour_index(Instant t) const;
    // UTC instants bounding the local-date span: [begin, end).
    Instant span_begin() const;
    Instant span_end() const;

    bool operator==(const RegionSeries&) const = default;
};

struct RegionFiles {
    std::string region_id;
    std::string timezone = "UTC";
    std::filesystem::path load;
    std::vector<std::filesystem::path> weather;
    std::vector<std::filesystem::path> mobility;
    std::optional<std::filesystem::path> holidays;

    bool operator==(const RegionFiles&) const = default;
};

struct DataSplits {
    DateRange orig_train;    // long pre-shock history
    DateRange recent_train;  // short recent window
    DateRange test;

    bool operator==(const DataSplits&) const = default;
};

struct DatasetManifest {
    std::vector<RegionFiles> regions;
    DateRange span;
    DataSplits splits;

    const RegionFiles& region(std::string_view id) const;
    bool operator==(const DatasetManifest&) const = default;
};

// Throws InvalidConfig when split dates fall outside the span or the test window
// does not start after both training windows end.
void validate(const DatasetManifest& manifest);

// Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct IngestStats {
    int load_hours_filled = 0;
    int weather_hours_filled = 0;
    int mobility_days_filled = 0;
    int rows_dropped = 0;  // rows outside the span
};

RegionSeries ingest_region(const RegionFiles& files, DateRange span, IngestStats* stats = nullptr);

// Complete hourly grid over the series span: load and weather gaps of at most
// kMaxInterpolatedGapHours are linearly interpolated (edge gaps take the nearest
// value), longer gaps raise GapTooLarge. Daily mobility is forward-filled
// (back-filled before the first observation) and replicated over each local day.
RegionSeries align_hourly(const RegionSeries& series, IngestStats* stats = nullptr);

// Ingests and aligns every region of a validated manifest, in manifest order.
std::vector<RegionSeries> load_dataset(const DatasetManifest& manifest, std::vector<IngestStats>* stats = nullptr);

// Writes load.csv, weather[_k].csv, mobility.csv and holidays.csv into `dir`.
RegionFiles write_region_csvs(const RegionSeries& series, const std::filesystem::path& dir);

}  // namespace mobiload
