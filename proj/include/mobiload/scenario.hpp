#pragma once

#include "mobiload/dataset.hpp"
#include "mobiload/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mobiload {

struct ScenarioSpec {
    std::string region_id;
    DateRange target_span;       // dates to project
    DateRange weather_template;  // historical dates supplying weather and lagged load
    // Per mobility index, percent of baseline, in the model layout's index order.
    // A single value applies to every index.
    std::vector<double> mobility_mean;
    std::vector<double> mobility_std;
    std::size_t samples = 200;
    std::uint64_t seed = 1;
    double confidence = 0.95;

    void validate() const;  // InvalidConfig / SpanMismatch
    nlohmann::json to_json() const;
};

struct MobilityStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> std;  // sample standard deviation (n - 1)
};

// Daily mobility statistics over `window` (at least 7 days, inside the series span).
MobilityStats estimate_mobility_stats(const RegionSeries& series, DateRange window);

struct Projection {
    std::vector<Instant> timestamps;
    std::vector<double> point_mw;  // model output at the mobility mean
    std::vector<double> lower_mw;
    std::vector<double> upper_mw;
    nlohmann::json scenario;
};

// Day d of the target span is forecast from local midnight with the calendar of the target
// dates and the weather and lagged load observed around day d of the template. Bands are
// empirical quantiles over `samples` runs with daily mobility drawn from N(mean, std),
// clamped at 0, independently per index and day.
Projection project(const ScenarioSpec& spec, const MultiTaskModel& model, const RegionSeries& series);

// CSV `timestamp,point_mw,lo_mw,hi_mw`, preceded by a '#' line carrying `header_comment`.
void write_projection_csv(const Projection& p, const std::filesystem::path& path, const std::string& header_comment);

}  // namespace mobiload
