#pragma once

#include "mobiload/dataset.hpp"
#include "mobiload/error.hpp"
#include "mobiload/synthetic.hpp"

#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

namespace testing {

namespace fs = std::filesystem;
using namespace mobiload;

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("mobiload_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline Date ymd(int y, unsigned m, unsigned d) { return Date{std::chrono::year{y} / m / d}; }

// Aligned series on a local-date span with deterministic smooth values.
inline RegionSeries make_series(const std::string& id, const std::string& tz, DateRange span,
                                std::vector<std::string> mobility = {"driving"}) {
    RegionSeries raw;
    raw.region_id = id;
    raw.timezone = tz;
    raw.span = span;
    raw.weather_names.assign(kWeatherColumns.begin(), kWeatherColumns.end());
    raw.mobility_names = std::move(mobility);
    for (Instant t = raw.span_begin(); t < raw.span_end(); t += kHour) {
        const double h = static_cast<double>(raw.timestamps.size());
        raw.timestamps.push_back(t);
        raw.load.push_back(1000.0 + 200.0 * std::sin(h / 3.8) + 0.5 * h);
        raw.weather.insert(raw.weather.end(),
                           {10.0 + 5.0 * std::cos(h / 5.0), std::fmod(h, 7.0) / 3.0, std::fmod(h * 13.0, 100.0),
                            1010.0 + std::sin(h / 11.0)});
    }
    for (int d = 0; d < span.days(); ++d) {
        raw.mobility_dates.push_back(span.first + std::chrono::days{d});
        for (std::size_t i = 0; i < raw.mobility_names.size(); ++i) {
            raw.mobility.push_back(70.0 + 3.0 * d + 5.0 * static_cast<double>(i));
        }
    }
    return align_hourly(raw);
}

// Small synthetic dataset with the shock inside the last part of the span.
inline SyntheticDataset small_synthetic(std::uint64_t seed, int days = 60, int regions = 2) {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.days = days;
    spec.regions = regions;
    spec.shock = {days - days / 4, 0.4, 0.0};
    return generate_synthetic(spec);
}

template <typename F>
ErrorKind error_kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected a mobiload::Error");
    return ErrorKind::InvalidData;
}

template <typename F>
std::string error_message_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    FAIL("expected a mobiload::Error");
    return {};
}

}  // namespace testing
