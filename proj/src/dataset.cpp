#include "mobiload/dataset.hpp"

#include "mobiload/csv.hpp"
#include "mobiload/error.hpp"
#include "mobiload/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

namespace mobiload {

namespace fs = std::filesystem;
using jsonutil::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string channel_suffix(std::size_t file_index) {
    return file_index == 0 ? std::string{} : "#" + std::to_string(file_index + 1);
}

// Fills NaN runs in place. Returns the number of filled entries.
int fill_hourly_gaps(std::vector<double>& v, std::size_t stride, std::size_t channel, const RegionSeries& grid,
                     const std::string& what) {
    const std::size_t n = grid.timestamps.size();
    auto at = [&](std::size_t i) -> double& { return v[i * stride + channel]; };
    int filled = 0;
    std::size_t i = 0;
    while (i < n) {
        if (!std::isnan(at(i))) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && std::isnan(at(j))) ++j;
        const std::size_t run = j - i;
        if (run > static_cast<std::size_t>(kMaxInterpolatedGapHours) || (i == 0 && j == n)) {
            fail(ErrorKind::GapTooLarge, "region " + grid.region_id + ": " + what + " gap of " + std::to_string(run) +
                                             " h from " + format_timestamp(grid.timestamps[i]) + " to " +
                                             format_timestamp(grid.timestamps[j - 1]));
        }
        if (i == 0) {
            for (std::size_t k = i; k < j; ++k) at(k) = at(j);
        } else if (j == n) {
            for (std::size_t k = i; k < j; ++k) at(k) = at(i - 1);
        } else {
            const double a = at(i - 1), b = at(j);
            const double span = static_cast<double>(run + 1);
            for (std::size_t k = i; k < j; ++k) at(k) = a + (b - a) * static_cast<double>(k - i + 1) / span;
        }
        filled += static_cast<int>(run);
        i = j;
    }
    return filled;
}

void require_columns(const csv::Table& t, std::initializer_list<std::string_view> names) {
    for (auto n : names) t.column(n);
}

std::vector<double> read_finite(const csv::Table& t, std::size_t col, bool positive) {
    std::vector<double> out(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out[r] = csv::to_double(t, r, col);
        if (!std::isfinite(out[r]) || (positive && out[r] <= 0.0)) {
            fail(ErrorKind::InvalidData, t.source + ":" + std::to_string(t.line_numbers[r]) + ": " + t.header[col] +
                                             (positive ? " must be finite and > 0" : " must be finite"));
        }
    }
    return out;
}

std::vector<Instant> read_times(const csv::Table& t) {
    const auto col = t.column("timestamp_utc");
    std::vector<Instant> out(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        out[r] = parse_timestamp(t.rows[r][col]);
        if (r > 0 && out[r] <= out[r - 1]) {
            fail(ErrorKind::InvalidData, t.source + ":" + std::to_string(t.line_numbers[r]) +
                                             ": timestamps must be strictly increasing");
        }
    }
    return out;
}

void check_exists(const fs::path& p) {
    if (!fs::exists(p)) fail(ErrorKind::MissingFile, "missing file " + p.string());
}

}  // namespace

const double* RegionSeries::mobility_on(Date d) const {
    auto it = std::lower_bound(mobility_dates.begin(), mobility_dates.end(), d);
    if (it == mobility_dates.end() || *it != d) return nullptr;
    return mobility.data() + static_cast<std::size_t>(it - mobility_dates.begin()) * mobility_names.size();
}

bool RegionSeries::is_holiday(Date d) const { return std::binary_search(holidays.begin(), holidays.end(), d); }

std::optional<std::size_t> RegionSeries::hour_index(Instant t) const {
    if (timestamps.empty() || t < timestamps.front() || t > timestamps.back()) return std::nullopt;
    const auto offset = (t - timestamps.front()).count();
    if (offset % 3600 != 0) return std::nullopt;
    return static_cast<std::size_t>(offset / 3600);
}

Instant RegionSeries::span_begin() const { return TimeZone::locate(timezone).local_midnight(span.first); }

Instant RegionSeries::span_end() const {
    return TimeZone::locate(timezone).local_midnight(span.last + std::chrono::days{1});
}

const RegionFiles& DatasetManifest::region(std::string_view id) const {
    for (const auto& r : regions) {
        if (r.region_id == id) return r;
    }
    fail(ErrorKind::InvalidConfig, "manifest has no region \"" + std::string(id) + "\"");
}

void validate(const DatasetManifest& m) {
    auto inside = [&](const DateRange& r, const char* name) {
        require(m.span.contains(r), ErrorKind::InvalidConfig,
                std::string("split ") + name + " lies outside the manifest span");
    };
    inside(m.splits.orig_train, "orig_train");
    inside(m.splits.recent_train, "recent_train");
    inside(m.splits.test, "test");
    require(m.splits.test.first > m.splits.orig_train.last && m.splits.test.first > m.splits.recent_train.last,
            ErrorKind::InvalidConfig, "test window must start after every training window ends");
    for (std::size_t i = 0; i < m.regions.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            require(m.regions[i].region_id != m.regions[j].region_id, ErrorKind::InvalidConfig,
                    "duplicate region_id " + m.regions[i].region_id);
        }
    }
}

DatasetManifest load_manifest(const fs::path& path) {
    const json j = jsonutil::parse_file(path.string());
    const std::string where = path.string();
    jsonutil::check_keys(j, {"span", "splits", "regions"}, where);
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
    auto path_list = [&](const json& v, const std::string& w) {
        std::vector<fs::path> out;
        if (v.is_string()) {
            out.push_back(resolve(v.get<std::string>()));
        } else if (v.is_array()) {
            for (const auto& e : v) {
                if (!e.is_string()) fail(ErrorKind::InvalidConfig, w + ": expected path strings");
                out.push_back(resolve(e.get<std::string>()));
            }
        } else {
            fail(ErrorKind::InvalidConfig, w + ": expected a path or list of paths");
        }
        return out;
    };

    DatasetManifest m;
    m.span = jsonutil::date_range(jsonutil::at(j, "span", where), where + ".span");
    const json& splits = jsonutil::at(j, "splits", where);
    jsonutil::check_keys(splits, {"orig_train", "recent_train", "test"}, where + ".splits");
    m.splits.orig_train = jsonutil::date_range(jsonutil::at(splits, "orig_train", where), where + ".splits.orig_train");
    m.splits.recent_train =
        jsonutil::date_range(jsonutil::at(splits, "recent_train", where), where + ".splits.recent_train");
    m.splits.test = jsonutil::date_range(jsonutil::at(splits, "test", where), where + ".splits.test");

    const json& regions = jsonutil::at(j, "regions", where);
    if (!regions.is_array()) fail(ErrorKind::InvalidConfig, where + ".regions: expected a list");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const json& r = regions[i];
        const std::string w = where + ".regions[" + std::to_string(i) + "]";
        jsonutil::check_keys(r, {"region_id", "timezone", "load", "weather", "mobility", "holidays"}, w);
        RegionFiles f;
        f.region_id = jsonutil::get<std::string>(r, "region_id", w);
        f.timezone = jsonutil::get_or<std::string>(r, "timezone", "UTC", w);
        f.load = resolve(jsonutil::get<std::string>(r, "load", w));
        f.weather = path_list(jsonutil::at(r, "weather", w), w + ".weather");
        if (r.contains("mobility")) f.mobility = path_list(r["mobility"], w + ".mobility");
        if (r.contains("holidays")) f.holidays = resolve(jsonutil::get<std::string>(r, "holidays", w));
        m.regions.push_back(std::move(f));
    }
    validate(m);
    return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
    const fs::path base = path.parent_path();
    auto rel = [&](const fs::path& p) { return p.lexically_proximate(base).generic_string(); };
    json regions = json::array();
    for (const auto& r : m.regions) {
        json e{{"region_id", r.region_id}, {"timezone", r.timezone}, {"load", rel(r.load)}};
        json w = json::array();
        for (const auto& p : r.weather) w.push_back(rel(p));
        e["weather"] = w;
        if (!r.mobility.empty()) {
            json mo = json::array();
            for (const auto& p : r.mobility) mo.push_back(rel(p));
            e["mobility"] = mo;
        }
        if (r.holidays) e["holidays"] = rel(*r.holidays);
        regions.push_back(std::move(e));
    }
    json j{{"span", jsonutil::to_json(m.span)},
           {"splits",
            {{"orig_train", jsonutil::to_json(m.splits.orig_train)},
             {"recent_train", jsonutil::to_json(m.splits.recent_train)},
             {"test", jsonutil::to_json(m.splits.test)}}},
           {"regions", regions}};
    std::ofstream out(path);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    out << j.dump(2) << "\n";
}

RegionSeries ingest_region(const RegionFiles& files, DateRange span, IngestStats* stats) {
    check_exists(files.load);
    for (const auto& p : files.weather) check_exists(p);
    for (const auto& p : files.mobility) check_exists(p);
    if (files.holidays) check_exists(*files.holidays);
    require(!files.weather.empty(), ErrorKind::InvalidConfig, "region " + files.region_id + " lists no weather file");

    IngestStats local_stats;
    IngestStats& st = stats ? *stats : local_stats;

    RegionSeries raw;
    raw.region_id = files.region_id;
    raw.timezone = files.timezone;
    raw.span = span;
    const Instant begin = raw.span_begin(), end = raw.span_end();
    auto in_span = [&](Instant t) { return t >= begin && t < end; };

    const csv::Table load_t = csv::read(files.load);
    require_columns(load_t, {"timestamp_utc", "load_mw"});
    const auto load_times = read_times(load_t);
    const auto load_vals = read_finite(load_t, load_t.column("load_mw"), true);

    struct WeatherFile {
        std::vector<Instant> times;
        std::vector<std::vector<double>> cols;
    };
    std::vector<WeatherFile> wfiles;
    for (std::size_t k = 0; k < files.weather.size(); ++k) {
        const csv::Table t = csv::read(files.weather[k]);
        require_columns(t, {"timestamp_utc", "temp_c", "precip_mm", "cloud_pct", "pressure_hpa"});
        WeatherFile wf;
        wf.times = read_times(t);
        for (auto name : kWeatherColumns) {
            wf.cols.push_back(read_finite(t, t.column(name), false));
            raw.weather_names.push_back(std::string(name) + channel_suffix(k));
        }
        wfiles.push_back(std::move(wf));
    }

    // Union of in-span timestamps; NaN marks values a file does not provide.
    std::vector<Instant> times;
    for (auto t : load_times) {
        if (in_span(t)) times.push_back(t);
        else ++st.rows_dropped;
    }
    for (const auto& wf : wfiles) {
        for (auto t : wf.times) {
            if (in_span(t)) times.push_back(t);
            else ++st.rows_dropped;
        }
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    auto pos = [&](Instant t) { return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin()); };

    raw.timestamps = times;
    raw.load.assign(times.size(), kMissing);
    for (std::size_t r = 0; r < load_times.size(); ++r) {
        if (in_span(load_times[r])) raw.load[pos(load_times[r])] = load_vals[r];
    }
    const std::size_t wn = raw.weather_names.size();
    raw.weather.assign(times.size() * wn, kMissing);
    for (std::size_t k = 0; k < wfiles.size(); ++k) {
        const auto& wf = wfiles[k];
        for (std::size_t r = 0; r < wf.times.size(); ++r) {
            if (!in_span(wf.times[r])) continue;
            const std::size_t row = pos(wf.times[r]);
            for (std::size_t c = 0; c < kWeatherColumns.size(); ++c) {
                raw.weather[row * wn + k * kWeatherColumns.size() + c] = wf.cols[c][r];
            }
        }
    }

    // Mobility: long format, one row per (date, index).
    std::map<std::string, std::map<Date, double>> mob;
    for (std::size_t k = 0; k < files.mobility.size(); ++k) {
        const csv::Table t = csv::read(files.mobility[k]);
        require_columns(t, {"date", "index_name", "value_pct"});
        const auto dc = t.column("date"), nc = t.column("index_name"), vc = t.column("value_pct");
        const auto vals = read_finite(t, vc, false);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const Date d = parse_date(t.rows[r][dc]);
            if (!span.contains(d)) {
                ++st.rows_dropped;
                continue;
            }
            require(!t.rows[r][nc].empty(), ErrorKind::SchemaMismatch,
                    t.source + ":" + std::to_string(t.line_numbers[r]) + ": empty index_name");
            auto [it, inserted] = mob[t.rows[r][nc] + channel_suffix(k)].emplace(d, vals[r]);
            require(inserted, ErrorKind::InvalidData,
                    t.source + ":" + std::to_string(t.line_numbers[r]) + ": duplicate (date, index_name)");
        }
    }
    std::vector<Date> mob_dates;
    for (const auto& [name, series] : mob) {
        raw.mobility_names.push_back(name);
        for (const auto& [d, v] : series) mob_dates.push_back(d);
    }
    std::sort(mob_dates.begin(), mob_dates.end());
    mob_dates.erase(std::unique(mob_dates.begin(), mob_dates.end()), mob_dates.end());
    raw.mobility_dates = mob_dates;
    raw.mobility.assign(mob_dates.size() * raw.mobility_names.size(), kMissing);
    for (std::size_t i = 0; i < raw.mobility_names.size(); ++i) {
        for (const auto& [d, v] : mob[raw.mobility_names[i]]) {
            const auto row = static_cast<std::size_t>(std::lower_bound(mob_dates.begin(), mob_dates.end(), d) - mob_dates.begin());
            raw.mobility[row * raw.mobility_names.size() + i] = v;
        }
    }

    if (files.holidays) {
        const csv::Table t = csv::read(*files.holidays);
        const auto dc = t.column("date");
        for (const auto& row : t.rows) raw.holidays.push_back(parse_date(row[dc]));
    }
    return align_hourly(raw, &st);
}

RegionSeries align_hourly(const RegionSeries& series, IngestStats* stats) {
    IngestStats local_stats;
    IngestStats& st = stats ? *stats : local_stats;

    RegionSeries out;
    out.region_id = series.region_id;
    out.timezone = series.timezone;
    out.span = series.span;
    out.weather_names = series.weather_names;
    out.mobility_names = series.mobility_names;

    const TimeZone& tz = TimeZone::locate(series.timezone);
    const Instant begin = out.span_begin(), end = out.span_end();
    for (Instant t = begin; t < end; t += kHour) out.timestamps.push_back(t);
    const std::size_t n = out.timestamps.size();
    const std::size_t wn = series.weather_names.size();

    out.load.assign(n, kMissing);
    out.weather.assign(n * wn, kMissing);
    for (std::size_t r = 0; r < series.timestamps.size(); ++r) {
        const Instant t = series.timestamps[r];
        if (r > 0 && t <= series.timestamps[r - 1]) {
            fail(ErrorKind::InvalidData, "region " + series.region_id + ": timestamps not strictly increasing at " +
                                             format_timestamp(t));
        }
        if (t < begin || t >= end) {
            ++st.rows_dropped;
            continue;
        }
        const auto offset = (t - begin).count();
        require(offset % 3600 == 0, ErrorKind::InvalidData,
                "region " + series.region_id + ": timestamp " + format_timestamp(t) + " is not on the hour");
        const auto i = static_cast<std::size_t>(offset / 3600);
        out.load[i] = series.load[r];
        for (std::size_t c = 0; c < wn; ++c) out.weather[i * wn + c] = series.weather[r * wn + c];
    }
    st.load_hours_filled += fill_hourly_gaps(out.load, 1, 0, out, "load");
    for (std::size_t c = 0; c < wn; ++c) {
        st.weather_hours_filled += fill_hourly_gaps(out.weather, wn, c, out, "weather " + series.weather_names[c]);
    }

    const std::size_t mn = series.mobility_names.size();
    if (mn > 0) {
        const int days = out.span.days();
        for (int d = 0; d < days; ++d) out.mobility_dates.push_back(out.span.first + std::chrono::days{d});
        out.mobility.assign(static_cast<std::size_t>(days) * mn, kMissing);
        for (std::size_t r = 0; r < series.mobility_dates.size(); ++r) {
            const Date d = series.mobility_dates[r];
            if (!out.span.contains(d)) continue;
            const auto row = static_cast<std::size_t>((d - out.span.first).count());
            for (std::size_t i = 0; i < mn; ++i) out.mobility[row * mn + i] = series.mobility[r * mn + i];
        }
        for (std::size_t i = 0; i < mn; ++i) {
            std::optional<double> first;
            for (int d = 0; d < days && !first; ++d) {
                const double v = out.mobility[static_cast<std::size_t>(d) * mn + i];
                if (!std::isnan(v)) first = v;
            }
            require(first.has_value(), ErrorKind::InvalidData,
                    "region " + series.region_id + ": mobility index " + series.mobility_names[i] + " has no values in span");
            double last = *first;
            for (int d = 0; d < days; ++d) {
                double& v = out.mobility[static_cast<std::size_t>(d) * mn + i];
                if (std::isnan(v)) {
                    v = last;
                    ++st.mobility_days_filled;
                } else {
                    last = v;
                }
            }
        }
        out.mobility_hourly.resize(n * mn);
        for (std::size_t h = 0; h < n; ++h) {
            const auto row = static_cast<std::size_t>((tz.local_date(out.timestamps[h]) - out.span.first).count());
            for (std::size_t i = 0; i < mn; ++i) out.mobility_hourly[h * mn + i] = out.mobility[row * mn + i];
        }
    }

    out.holidays = series.holidays;
    std::sort(out.holidays.begin(), out.holidays.end());
    out.holidays.erase(std::unique(out.holidays.begin(), out.holidays.end()), out.holidays.end());
    return out;
}

RegionFiles write_region_csvs(const RegionSeries& s, const fs::path& dir) {
    fs::create_directories(dir);
    RegionFiles files;
    files.region_id = s.region_id;
    files.timezone = s.timezone;
    auto open = [](const fs::path& p) {
        std::ofstream out(p, std::ios::binary);
        if (!out) fail(ErrorKind::MissingFile, "cannot write " + p.string());
        return out;
    };

    files.load = dir / "load.csv";
    {
        auto out = open(files.load);
        out << "timestamp_utc,load_mw\n";
        for (std::size_t i = 0; i < s.hours(); ++i) {
            out << format_timestamp(s.timestamps[i]) << ',' << csv::format_double(s.load[i]) << '\n';
        }
    }

    const std::size_t wn = s.weather_width();
    const std::size_t per_file = kWeatherColumns.size();
    require(wn % per_file == 0 && wn > 0, ErrorKind::InvalidData, "weather channels do not form whole files");
    for (std::size_t k = 0; k < wn / per_file; ++k) {
        for (std::size_t c = 0; c < per_file; ++c) {
            require(s.weather_names[k * per_file + c] == std::string(kWeatherColumns[c]) + channel_suffix(k),
                    ErrorKind::InvalidData, "unexpected weather channel " + s.weather_names[k * per_file + c]);
        }
        fs::path p = dir / (k == 0 ? std::string("weather.csv") : "weather_" + std::to_string(k + 1) + ".csv");
        auto out = open(p);
        out << "timestamp_utc,temp_c,precip_mm,cloud_pct,pressure_hpa\n";
        for (std::size_t i = 0; i < s.hours(); ++i) {
            out << format_timestamp(s.timestamps[i]);
            for (std::size_t c = 0; c < per_file; ++c) out << ',' << csv::format_double(s.weather_at(i, k * per_file + c));
            out << '\n';
        }
        files.weather.push_back(p);
    }

    if (s.mobility_width() > 0) {
        fs::path p = dir / "mobility.csv";
        auto out = open(p);
        out << "date,index_name,value_pct\n";
        for (std::size_t d = 0; d < s.mobility_dates.size(); ++d) {
            for (std::size_t i = 0; i < s.mobility_width(); ++i) {
                out << format_date(s.mobility_dates[d]) << ',' << s.mobility_names[i] << ','
                    << csv::format_double(s.mobility[d * s.mobility_width() + i]) << '\n';
            }
        }
        files.mobility.push_back(p);
    }

    files.holidays = dir / "holidays.csv";
    {
        auto out = open(*files.holidays);
        out << "date\n";
        for (auto d : s.holidays) out << format_date(d) << '\n';
    }
    return files;
}

std::vector<RegionSeries> load_dataset(const DatasetManifest& manifest, std::vector<IngestStats>* stats) {
    validate(manifest);
    require(!manifest.regions.empty(), ErrorKind::InvalidConfig, "manifest has no regions");
    std::vector<RegionSeries> out;
    if (stats) stats->assign(manifest.regions.size(), IngestStats{});
    for (std::size_t r = 0; r < manifest.regions.size(); ++r) {
        IngestStats* st = stats ? &(*stats)[r] : nullptr;
        out.push_back(align_hourly(ingest_region(manifest.regions[r], manifest.span, st), st));
    }
    return out;
}

}  // namespace mobiload
