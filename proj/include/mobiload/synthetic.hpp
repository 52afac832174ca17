#pragma once

#include "mobiload/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mobiload {

// Coefficients of the load mapping shared by every region (the "trunk" of the truth).
struct SharedCoefficients {
    double commercial = 0.6;           // weight of the workday commercial profile
    double commercial_floor = 0.2;     // commercial share that survives zero mobility
    double residential = 0.45;
    double residential_rebound = 0.3;  // residential increase per unit of lost mobility
    double heating = 0.12;             // per 10 K below 15 C
    double cooling = 0.18;             // per 10 K above 22 C
    double cloud_lighting = 0.04;
    double precipitation = 0.01;
};

// Per-region affine rescaling of the shared mapping plus climate.
struct RegionCoefficients {
    double scale_mw = 1000.0;
    double offset_mw = 100.0;
    double temp_mean_c = 12.0;
    double temp_amplitude_c = 10.0;
    std::string timezone = "UTC";
};

struct ShockSchedule {
    int start_day = 700;            // 0-based day index of the lockdown
    double depth = 0.3;             // fractional mobility drop at the start
    double recovery_per_day = 0.0;  // fraction of the drop recovered per day afterwards
};

struct SyntheticSpec {
    int regions = 4;
    int days = 761;
    std::uint64_t seed = 1;
    Date start = Date{std::chrono::year{2018} / 4 / 15};
    SharedCoefficients shared;
    std::vector<RegionCoefficients> heads;  // empty: derived from seed
    ShockSchedule shock;
    std::vector<ShockSchedule> region_shocks;  // empty: every region uses `shock`
    double noise_std = 0.01;       // hourly load noise, fraction of mean load
    double mobility_noise = 0.03;  // daily multiplicative mobility jitter
    std::vector<std::string> mobility_indices = {"driving", "transit", "workplaces"};
};

struct GroundTruth {
    std::vector<std::vector<double>> noiseless_load;  // per region, per hour (MW)
};

struct SyntheticDataset {
    std::vector<RegionSeries> regions;
    GroundTruth truth;
    DataSplits splits;
    DateRange span;
};

void validate(const SyntheticSpec& spec);
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

// Splits relative to the end of the series: 15 test days, a 76-day recent window
// before them, a 15-day gap, and everything earlier as long history.
DataSplits default_splits(const SyntheticSpec& spec);

// Four regions sharing the mapping, lockdown at day 700 with region-specific depth
// and recovery, 761 days in total.
SyntheticSpec standard_fixture(std::uint64_t seed);

// Writes per-region CSVs under dir/<region_id>/ plus dir/manifest.json; returns the manifest path.
std::filesystem::path write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

}  // namespace mobiload
