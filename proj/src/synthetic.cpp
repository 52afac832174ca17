#include "mobiload/synthetic.hpp"

#include "mobiload/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace mobiload {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr const char* kZones[] = {"America/Los_Angeles", "America/Chicago", "America/New_York", "Europe/Berlin"};

double gauss_bump(double x, double center, double width) {
    const double z = (x - center) / width;
    return std::exp(-0.5 * z * z);
}

// Daily profile of workday commercial demand (office hours plateau).
double commercial_profile(int hour, bool workday) {
    const double h = hour;
    const double plateau = 1.0 / (1.0 + std::exp(-(h - 7.5) * 1.5)) * 1.0 / (1.0 + std::exp((h - 18.0) * 1.2));
    return workday ? 0.15 + plateau : 0.1 + 0.35 * plateau;
}

double residential_profile(int hour) {
    return 0.45 + 0.45 * gauss_bump(hour, 19.5, 2.2) + 0.2 * gauss_bump(hour, 7.0, 1.5);
}

double shock_fraction(const ShockSchedule& s, int day) {
    if (day < s.start_day) return 0.0;
    return std::max(0.0, 1.0 - s.recovery_per_day * (day - s.start_day));
}

bool fixed_holiday(Date d) {
    std::chrono::year_month_day ymd{d};
    const unsigned m = static_cast<unsigned>(ymd.month()), dd = static_cast<unsigned>(ymd.day());
    return (m == 1 && dd == 1) || (m == 7 && dd == 4) || (m == 11 && dd == 11) || (m == 12 && (dd == 25 || dd == 26));
}

}  // namespace

void validate(const SyntheticSpec& spec) {
    require(spec.regions >= 1, ErrorKind::InvalidSpec, "synthetic spec needs at least one region");
    require(spec.days >= 14, ErrorKind::InvalidSpec, "synthetic spec needs at least 14 days");
    require(spec.noise_std >= 0.0, ErrorKind::InvalidSpec, "noise std must be >= 0");
    require(spec.mobility_noise >= 0.0, ErrorKind::InvalidSpec, "mobility noise must be >= 0");
    require(!spec.mobility_indices.empty(), ErrorKind::InvalidSpec, "at least one mobility index required");
    require(spec.heads.empty() || static_cast<int>(spec.heads.size()) == spec.regions, ErrorKind::InvalidSpec,
            "heads must be empty or one per region");
    require(spec.region_shocks.empty() || static_cast<int>(spec.region_shocks.size()) == spec.regions,
            ErrorKind::InvalidSpec, "region_shocks must be empty or one per region");
    auto check_shock = [](const ShockSchedule& s) {
        require(s.depth >= 0.0 && s.depth <= 1.0, ErrorKind::InvalidSpec, "shock depth must lie in [0, 1]");
        require(s.recovery_per_day >= 0.0, ErrorKind::InvalidSpec, "recovery slope must be >= 0");
    };
    check_shock(spec.shock);
    for (const auto& s : spec.region_shocks) check_shock(s);
}

DataSplits default_splits(const SyntheticSpec& spec) {
    const int days = spec.days;
    const int test_len = std::min(15, std::max(2, days / 8));
    const int recent_len = std::min(76, (days - test_len) / 2);
    const int gap = std::min(15, std::max(0, (days - test_len - recent_len) / 4));
    auto day = [&](int i) { return spec.start + std::chrono::days{i}; };
    DataSplits s;
    s.test = {day(days - test_len), day(days - 1)};
    s.recent_train = {day(days - test_len - recent_len), day(days - test_len - 1)};
    // Day 0 only supplies lag history for the first issue day.
    s.orig_train = {day(1), day(days - test_len - recent_len - gap - 1)};
    return s;
}

SyntheticSpec standard_fixture(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.regions = 4;
    spec.days = 761;
    spec.seed = seed;
    spec.shock = {700, 0.35, 0.004};
    spec.region_shocks = {{700, 0.45, 0.006}, {700, 0.25, 0.002}, {700, 0.40, 0.008}, {700, 0.30, 0.004}};
    return spec;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticDataset out;
    out.span = {spec.start, spec.start + std::chrono::days{spec.days - 1}};
    out.splits = default_splits(spec);

    for (int r = 0; r < spec.regions; ++r) {
        std::mt19937_64 rng(splitmix64(spec.seed * 1000003ull + static_cast<std::uint64_t>(r)));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        RegionCoefficients head;
        if (!spec.heads.empty()) {
            head = spec.heads[static_cast<std::size_t>(r)];
        } else {
            head.scale_mw = 500.0 + 2500.0 * unit(rng);
            head.offset_mw = 50.0 + 350.0 * unit(rng);
            head.temp_mean_c = 8.0 + 10.0 * unit(rng);
            head.temp_amplitude_c = 6.0 + 8.0 * unit(rng);
            head.timezone = kZones[r % 4];
        }
        const ShockSchedule shock = spec.region_shocks.empty() ? spec.shock : spec.region_shocks[static_cast<std::size_t>(r)];

        RegionSeries s;
        s.region_id = "region_" + std::to_string(r);
        s.timezone = head.timezone;
        s.span = out.span;
        s.weather_names.assign(kWeatherColumns.begin(), kWeatherColumns.end());
        s.mobility_names = spec.mobility_indices;
        std::sort(s.mobility_names.begin(), s.mobility_names.end());
        const TimeZone& tz = TimeZone::locate(s.timezone);
        const std::size_t mn = s.mobility_names.size();

        // Daily drivers.
        std::vector<double> temp_anom(spec.days), cloud_day(spec.days), pressure_day(spec.days);
        std::vector<bool> rainy(spec.days);
        double ta = 0.0, ca = 0.0, pa = 0.0;
        for (int d = 0; d < spec.days; ++d) {
            const Date date = spec.start + std::chrono::days{d};
            s.mobility_dates.push_back(date);
            if (fixed_holiday(date)) s.holidays.push_back(date);
            ta = 0.8 * ta + 1.8 * normal(rng);
            ca = 0.6 * ca + 1.0 * normal(rng);
            pa = 0.7 * pa + 4.0 * normal(rng);
            temp_anom[d] = ta;
            cloud_day[d] = 100.0 / (1.0 + std::exp(-ca));
            pressure_day[d] = 1013.0 + pa;
            rainy[d] = cloud_day[d] > 60.0 && unit(rng) < 0.7;

            const double level = 1.0 - shock.depth * shock_fraction(shock, d);
            const bool weekend = std::chrono::weekday{date}.iso_encoding() >= 6;
            for (std::size_t i = 0; i < mn; ++i) {
                const double weekly = weekend ? 0.92 : 1.0;
                const double jitter = 1.0 + spec.mobility_noise * normal(rng);
                s.mobility.push_back(std::max(0.0, 100.0 * level * weekly * jitter));
            }
        }

        const Instant begin = s.span_begin(), end = s.span_end();
        std::vector<double> truth;
        const auto& c = spec.shared;
        for (Instant t = begin; t < end; t += kHour) {
            const LocalTime lt = tz.to_local(t);
            const int d = static_cast<int>((lt.date - spec.start).count());
            const int h = lt.hour;
            const double doy = static_cast<double>((lt.date - Date{std::chrono::year_month_day{lt.date}.year() / 1 / 1}).count());
            const double seasonal = -std::cos(2.0 * std::numbers::pi * (doy - 15.0) / 365.25);
            const double temp = head.temp_mean_c + head.temp_amplitude_c * seasonal + temp_anom[d] +
                                4.0 * std::cos(2.0 * std::numbers::pi * (h - 15.0) / 24.0) + 0.3 * normal(rng);
            const double cloud = std::clamp(cloud_day[d] + 5.0 * normal(rng), 0.0, 100.0);
            const double precip = rainy[d] && unit(rng) < 0.5 ? -std::log(1.0 - unit(rng)) : 0.0;
            const double pressure = pressure_day[d] + 0.3 * normal(rng);

            s.timestamps.push_back(t);
            s.weather.insert(s.weather.end(), {temp, precip, cloud, pressure});

            double activity = 0.0;
            const double* mob = s.mobility.data() + static_cast<std::size_t>(d) * mn;
            for (std::size_t i = 0; i < mn; ++i) activity += mob[i];
            activity /= 100.0 * static_cast<double>(mn);
            for (std::size_t i = 0; i < mn; ++i) s.mobility_hourly.push_back(mob[i]);

            const bool weekend = std::chrono::weekday{lt.date}.iso_encoding() >= 6;
            const bool workday = !weekend && !fixed_holiday(lt.date);
            const double daylight = (h >= 7 && h <= 18) ? 1.0 : 0.0;
            const double g = c.commercial * commercial_profile(h, workday) *
                                 (c.commercial_floor + (1.0 - c.commercial_floor) * activity) +
                             c.residential * residential_profile(h) * (1.0 + c.residential_rebound * (1.0 - activity)) +
                             c.heating * std::max(0.0, 15.0 - temp) / 10.0 +
                             c.cooling * std::max(0.0, temp - 22.0) / 10.0 +
                             c.cloud_lighting * daylight * cloud / 100.0 + c.precipitation * std::min(precip, 5.0);
            truth.push_back(head.scale_mw * g + head.offset_mw);
        }

        double mean = 0.0;
        for (double v : truth) mean += v;
        mean /= static_cast<double>(truth.size());
        s.load.resize(truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            const double noise = spec.noise_std > 0.0 ? spec.noise_std * mean * normal(rng) : 0.0;
            s.load[i] = std::max(truth[i] + noise, 1e-3 * mean);
        }
        out.truth.noiseless_load.push_back(std::move(truth));
        out.regions.push_back(std::move(s));
    }
    return out;
}

std::filesystem::path write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir) {
    DatasetManifest m;
    m.span = data.span;
    m.splits = data.splits;
    for (const auto& s : data.regions) m.regions.push_back(write_region_csvs(s, dir / s.region_id));
    const auto path = dir / "manifest.json";
    save_manifest(m, path);
    return path;
}

}  // namespace mobiload
