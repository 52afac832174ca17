#include "mobiload/features.hpp"

#include "mobiload/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace mobiload {

using nlohmann::json;

namespace {

struct HourRange {
    std::size_t begin;
    std::size_t end;
};

HourRange hours_of(const RegionSeries& s, DateRange span, const char* what) {
    require(s.span.contains(span), ErrorKind::SpanTooShort,
            std::string(what) + " span " + format_date(span.first) + ".." + format_date(span.last) +
                " lies outside the series span of " + s.region_id);
    const TimeZone& tz = TimeZone::locate(s.timezone);
    const auto b = s.hour_index(tz.local_midnight(span.first));
    const Instant end_t = tz.local_midnight(span.last + std::chrono::days{1});
    require(b.has_value(), ErrorKind::SpanTooShort, std::string(what) + " span not covered by series hours");
    const std::size_t e = end_t > s.timestamps.back() ? s.hours() : *s.hour_index(end_t);
    return {*b, e};
}

}  // namespace

NormalizationState fit_normalizer(const RegionSeries& series, DateRange train_span,
                                  const std::vector<std::string>& weather_features) {
    const auto [b, e] = hours_of(series, train_span, "training");
    require(e > b, ErrorKind::SpanTooShort, "empty training span");

    NormalizationState st;
    const auto [lo, hi] = std::minmax_element(series.load.begin() + static_cast<std::ptrdiff_t>(b),
                                              series.load.begin() + static_cast<std::ptrdiff_t>(e));
    st.load_min = *lo;
    st.load_max = *hi;
    require(st.load_max > st.load_min, ErrorKind::DegenerateChannel,
            "load is constant over the training span of " + series.region_id);

    std::vector<std::size_t> channels;
    if (weather_features.empty()) {
        for (std::size_t c = 0; c < series.weather_width(); ++c) channels.push_back(c);
    } else {
        for (const auto& name : weather_features) {
            auto it = std::find(series.weather_names.begin(), series.weather_names.end(), name);
            require(it != series.weather_names.end(), ErrorKind::InvalidConfig,
                    "unknown weather feature \"" + name + "\" for " + series.region_id);
            channels.push_back(static_cast<std::size_t>(it - series.weather_names.begin()));
        }
    }
    for (std::size_t c : channels) {
        double mn = series.weather_at(b, c), mx = mn;
        for (std::size_t i = b; i < e; ++i) {
            mn = std::min(mn, series.weather_at(i, c));
            mx = std::max(mx, series.weather_at(i, c));
        }
        require(mx > mn, ErrorKind::DegenerateChannel,
                "weather channel " + series.weather_names[c] + " is constant over the training span of " +
                    series.region_id);
        st.weather_names.push_back(series.weather_names[c]);
        st.weather_min.push_back(mn);
        st.weather_max.push_back(mx);
    }
    return st;
}

CalendarCode encode_calendar(const LocalTime& t, bool holiday) {
    CalendarCode code{};
    const std::chrono::year_month_day ymd{t.date};
    const bool weekend = std::chrono::weekday{t.date}.iso_encoding() >= 6;
    code[static_cast<std::size_t>(t.hour)] = 1.0;
    code[kHourBlock + static_cast<unsigned>(ymd.month()) - 1] = 1.0;
    code[kHourBlock + kMonthBlock + (weekend ? 1 : 0)] = 1.0;
    code[kHourBlock + kMonthBlock + kDayTypeBlock + (holiday ? 0 : 1)] = 1.0;
    return code;
}

CalendarCode encode_calendar(const LocalTime& t, const std::vector<Date>& sorted_holidays) {
    return encode_calendar(t, std::binary_search(sorted_holidays.begin(), sorted_holidays.end(), t.date));
}

DecodedCalendar decode_calendar(std::span<const double> code) {
    require(code.size() >= kCalendarWidth, ErrorKind::ShapeMismatch, "calendar code too short");
    auto argmax = [&](std::size_t from, std::size_t len) {
        return static_cast<std::size_t>(std::max_element(code.begin() + static_cast<std::ptrdiff_t>(from),
                                                         code.begin() + static_cast<std::ptrdiff_t>(from + len)) -
                                        (code.begin() + static_cast<std::ptrdiff_t>(from)));
    };
    DecodedCalendar d;
    d.hour = static_cast<int>(argmax(0, kHourBlock));
    d.month = static_cast<unsigned>(argmax(kHourBlock, kMonthBlock)) + 1;
    d.weekend = argmax(kHourBlock + kMonthBlock, kDayTypeBlock) == 1;
    d.holiday = argmax(kHourBlock + kMonthBlock + kDayTypeBlock, kHolidayBlock) == 0;
    return d;
}

std::size_t FeatureLayout::dimension() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.length;
    return n;
}

std::size_t FeatureLayout::offset(std::string_view segment) const {
    std::size_t n = 0;
    for (const auto& s : segments) {
        if (s.name == segment) return n;
        n += s.length;
    }
    fail(ErrorKind::LayoutMismatch, "layout has no segment " + std::string(segment));
}

bool FeatureLayout::has_segment(std::string_view segment) const {
    return std::any_of(segments.begin(), segments.end(), [&](const Segment& s) { return s.name == segment; });
}

std::string FeatureLayout::descriptor() const {
    json segs = json::array();
    for (const auto& s : segments) segs.push_back({{"name", s.name}, {"length", s.length}});
    json j{{"version", 1},
           {"segments", segs},
           {"weather_features", weather_features},
           {"mobility_indices", mobility_indices},
           {"history_hours", history_hours}};
    return j.dump();
}

std::uint64_t FeatureLayout::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : descriptor()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

FeatureLayout FeatureLayout::parse_descriptor(const std::string& text) {
    try {
        const json j = json::parse(text);
        FeatureLayout l;
        require(j.at("version").get<int>() == 1, ErrorKind::LayoutMismatch, "unsupported layout version");
        for (const auto& s : j.at("segments")) {
            l.segments.push_back({s.at("name").get<std::string>(), s.at("length").get<std::size_t>()});
        }
        l.weather_features = j.at("weather_features").get<std::vector<std::string>>();
        l.mobility_indices = j.at("mobility_indices").get<std::vector<std::string>>();
        l.history_hours = j.at("history_hours").get<int>();
        return l;
    } catch (const json::exception& e) {
        fail(ErrorKind::LayoutMismatch, std::string("malformed layout descriptor: ") + e.what());
    }
}

FeatureLayout make_layout(const NormalizationState& norm, const std::vector<std::string>& mobility_indices,
                          const FeatureOptions& options) {
    require(options.history_hours >= 0, ErrorKind::InvalidConfig, "history_hours must be >= 0");
    const auto steps = static_cast<std::size_t>(options.history_hours) + 1;
    FeatureLayout l;
    l.history_hours = options.history_hours;
    l.weather_features = norm.weather_names;
    l.segments = {{"hour", kHourBlock}, {"month", kMonthBlock}, {"daytype", kDayTypeBlock}, {"holiday", kHolidayBlock}};
    if (!norm.weather_names.empty()) l.segments.push_back({"weather", norm.weather_names.size() * steps});
    if (options.with_mobility) {
        l.mobility_indices = mobility_indices;
        l.segments.push_back({"mobility", mobility_indices.size()});
    }
    l.segments.push_back({"load_lag", steps});
    return l;
}

SampleSet SampleSet::subset(const std::vector<std::size_t>& indices) const {
    SampleSet out;
    out.task_id = task_id;
    out.layout = layout;
    out.inputs.resize(inputs.rows(), static_cast<Eigen::Index>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        const std::size_t i = indices[j];
        require(i < size(), ErrorKind::ShapeMismatch, "subset index out of range");
        out.inputs.col(static_cast<Eigen::Index>(j)) = inputs.col(static_cast<Eigen::Index>(i));
        out.targets.push_back(targets[i]);
        out.actual_mw.push_back(actual_mw[i]);
        out.issue_times.push_back(issue_times[i]);
        out.horizons.push_back(horizons[i]);
    }
    return out;
}

std::vector<std::size_t> weather_channels(const RegionSeries& series, const NormalizationState& norm) {
    std::vector<std::size_t> channels;
    for (const auto& name : norm.weather_names) {
        auto it = std::find(series.weather_names.begin(), series.weather_names.end(), name);
        require(it != series.weather_names.end(), ErrorKind::LayoutMismatch,
                "normalizer weather channel " + name + " missing from " + series.region_id);
        channels.push_back(static_cast<std::size_t>(it - series.weather_names.begin()));
    }
    return channels;
}

void encode_sample(const RegionSeries& series, const NormalizationState& norm, const FeatureLayout& layout,
                   const std::vector<std::size_t>& channels, std::size_t t, int k, const CalendarCode& calendar,
                   const double* mobility, double* x) {
    const auto H = static_cast<std::size_t>(layout.history_hours);
    const std::size_t target = t + static_cast<std::size_t>(k);
    const std::size_t wn = channels.size();
    std::size_t p = 0;
    for (double v : calendar) x[p++] = v;
    if (wn > 0) {
        for (std::size_t c = 0; c < wn; ++c) x[p++] = norm.normalize_weather(c, series.weather_at(target, channels[c]));
        for (std::size_t h = H; h >= 1; --h) {
            for (std::size_t c = 0; c < wn; ++c) x[p++] = norm.normalize_weather(c, series.weather_at(t - h + 1, channels[c]));
        }
    }
    if (layout.has_mobility()) {
        for (std::size_t i = 0; i < layout.mobility_indices.size(); ++i) x[p++] = mobility[i] * norm.mobility_scale;
    }
    for (std::size_t h = 0; h <= H; ++h) x[p++] = norm.normalize_load(series.load[t - H + h]);
}

SampleSet build_samples(const RegionSeries& series, const NormalizationState& norm, const FeatureOptions& options,
                        DateRange span) {
    require(series.span.contains(span), ErrorKind::SpanTooShort,
            "sample span lies outside the series span of " + series.region_id);
    if (options.with_mobility) {
        require(series.mobility_width() > 0 && series.mobility_hourly.size() == series.hours() * series.mobility_width(),
                ErrorKind::ModelWithoutMobility, "region " + series.region_id + " has no aligned mobility data");
    }
    const std::vector<std::size_t> channels = weather_channels(series, norm);

    SampleSet out;
    out.task_id = series.region_id;
    out.layout = make_layout(norm, series.mobility_names, options);
    const std::size_t dim = out.layout.dimension();
    const std::size_t mn = options.with_mobility ? series.mobility_width() : 0;
    const auto H = static_cast<std::size_t>(options.history_hours);
    const TimeZone& tz = TimeZone::locate(series.timezone);
    const Instant span_end = tz.local_midnight(span.last + std::chrono::days{1});

    std::vector<std::size_t> issue_hours;
    for (Date d = span.first; d <= span.last; d += std::chrono::days{1}) {
        const Instant t = tz.local_midnight(d);
        if (t + 24 * kHour >= span_end) continue;
        const auto idx = series.hour_index(t);
        require(idx.has_value(), ErrorKind::SpanTooShort, "issue time " + format_timestamp(t) + " not on the grid");
        require(*idx >= H, ErrorKind::SpanTooShort,
                "span start leaves no room for " + std::to_string(H) + " h of history in " + series.region_id);
        issue_hours.push_back(*idx);
    }
    require(!issue_hours.empty(), ErrorKind::SpanTooShort,
            "span " + format_date(span.first) + ".." + format_date(span.last) + " yields no complete forecast day");

    const std::size_t n = issue_hours.size() * 24;
    out.inputs.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(n));
    out.targets.reserve(n);
    std::size_t col = 0;
    for (std::size_t t : issue_hours) {
        for (int k = 1; k <= 24; ++k, ++col) {
            const std::size_t target = t + static_cast<std::size_t>(k);
            const CalendarCode cal = encode_calendar(tz.to_local(series.timestamps[target]), series.holidays);
            const double* mob = mn > 0 ? series.mobility_hourly.data() + t * mn : nullptr;
            encode_sample(series, norm, out.layout, channels, t, k, cal, mob, out.inputs.data() + col * dim);

            out.targets.push_back(norm.normalize_load(series.load[target]));
            out.actual_mw.push_back(series.load[target]);
            out.issue_times.push_back(series.timestamps[t]);
            out.horizons.push_back(k);
        }
    }
    return out;
}

}  // namespace mobiload
