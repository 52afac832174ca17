#include "mobiload/scenario.hpp"

#include "mobiload/error.hpp"
#include "mobiload/evaluation.hpp"
#include "mobiload/features.hpp"
#include "mobiload/json_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace mobiload {

void ScenarioSpec::validate() const {
    require(target_span.days() == weather_template.days(), ErrorKind::SpanMismatch,
            "weather template spans " + std::to_string(weather_template.days()) + " days, target spans " +
                std::to_string(target_span.days()));
    require(!mobility_mean.empty(), ErrorKind::InvalidConfig, "scenario needs a mobility mean");
    require(mobility_std.empty() || mobility_std.size() == mobility_mean.size() || mobility_std.size() == 1,
            ErrorKind::InvalidConfig, "mobility std must have one value or one per index");
    for (double m : mobility_mean) require(std::isfinite(m), ErrorKind::InvalidConfig, "mobility mean must be finite");
    for (double s : mobility_std) {
        require(std::isfinite(s) && s >= 0.0, ErrorKind::InvalidConfig, "mobility std must be finite and >= 0");
    }
    require(samples >= 1, ErrorKind::InvalidConfig, "sample count must be >= 1");
    require(confidence > 0.0 && confidence < 1.0, ErrorKind::InvalidConfig, "confidence must lie in (0, 1)");
}

nlohmann::json ScenarioSpec::to_json() const {
    return {{"region", region_id},
            {"target_span", jsonutil::to_json(target_span)},
            {"weather_template", jsonutil::to_json(weather_template)},
            {"mobility_mean", mobility_mean},
            {"mobility_std", mobility_std},
            {"samples", samples},
            {"seed", seed},
            {"confidence", confidence}};
}

MobilityStats estimate_mobility_stats(const RegionSeries& series, DateRange window) {
    require(series.span.contains(window), ErrorKind::SpanMismatch,
            "mobility window " + format_date(window.first) + ".." + format_date(window.last) +
                " lies outside the series span of " + series.region_id);
    require(window.days() >= 7, ErrorKind::WindowTooShort,
            "mobility window has " + std::to_string(window.days()) + " days, at least 7 required");
    require(series.mobility_width() > 0, ErrorKind::ModelWithoutMobility,
            "region " + series.region_id + " has no mobility data");
    const std::size_t mn = series.mobility_width();
    MobilityStats st;
    st.names = series.mobility_names;
    st.mean.assign(mn, 0.0);
    st.std.assign(mn, 0.0);
    std::vector<std::vector<double>> values(mn);
    for (Date d = window.first; d <= window.last; d += std::chrono::days{1}) {
        const double* row = series.mobility_on(d);
        require(row != nullptr, ErrorKind::InvalidData, "no mobility on " + format_date(d) + " in " + series.region_id);
        for (std::size_t i = 0; i < mn; ++i) values[i].push_back(row[i]);
    }
    for (std::size_t i = 0; i < mn; ++i) {
        const auto n = static_cast<double>(values[i].size());
        double sum = 0.0;
        for (double v : values[i]) sum += v;
        st.mean[i] = sum / n;
        double ss = 0.0;
        for (double v : values[i]) ss += (v - st.mean[i]) * (v - st.mean[i]);
        st.std[i] = std::sqrt(ss / (n - 1.0));
    }
    return st;
}

namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t n, const char* what) {
    if (v.empty()) return std::vector<double>(n, 0.0);
    if (v.size() == 1) return std::vector<double>(n, v.front());
    require(v.size() == n, ErrorKind::InvalidConfig,
            std::string(what) + " has " + std::to_string(v.size()) + " values, the model has " + std::to_string(n) +
                " mobility indices");
    return v;
}

}  // namespace

Projection project(const ScenarioSpec& spec, const MultiTaskModel& model, const RegionSeries& series) {
    spec.validate();
    const TaskHead& head = model.head(spec.region_id);
    const FeatureLayout& layout = head.layout;
    require(layout.has_mobility(), ErrorKind::ModelWithoutMobility,
            "model for " + spec.region_id + " has no mobility inputs");
    require(series.region_id == spec.region_id, ErrorKind::InvalidConfig,
            "series " + series.region_id + " does not belong to scenario region " + spec.region_id);
    require(series.span.contains(spec.weather_template), ErrorKind::SpanMismatch,
            "weather template lies outside the series span of " + series.region_id);
    require(series.mobility_names == layout.mobility_indices, ErrorKind::LayoutMismatch,
            "series mobility indices differ from the model layout");

    const std::size_t mn = layout.mobility_indices.size();
    const std::vector<double> mean = broadcast(spec.mobility_mean, mn, "mobility_mean");
    const std::vector<double> stdev = broadcast(spec.mobility_std, mn, "mobility_std");
    const std::vector<std::size_t> channels = weather_channels(series, head.normalizer);
    const TimeZone& tz = TimeZone::locate(series.timezone);
    const auto H = static_cast<std::size_t>(layout.history_hours);
    const std::size_t dim = layout.dimension();
    require(dim == model.spec.input_dim(), ErrorKind::LayoutMismatch, "layout dimension differs from the model input");
    const auto days = static_cast<std::size_t>(spec.target_span.days());

    Projection out;
    out.scenario = spec.to_json();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(days * 24));
    for (std::size_t d = 0; d < days; ++d) {
        const Date tmpl = spec.weather_template.first + std::chrono::days{static_cast<int>(d)};
        const auto idx = series.hour_index(tz.local_midnight(tmpl));
        require(idx.has_value() && *idx >= H && *idx + 24 < series.hours(), ErrorKind::SpanMismatch,
                "template day " + format_date(tmpl) + " lacks the history or next-day hours it needs");
        const Instant issue = tz.local_midnight(spec.target_span.first + std::chrono::days{static_cast<int>(d)});
        for (int k = 1; k <= 24; ++k) {
            const Instant when = issue + k * kHour;
            const CalendarCode cal = encode_calendar(tz.to_local(when), series.holidays);
            const auto col = static_cast<Eigen::Index>(d * 24 + static_cast<std::size_t>(k - 1));
            encode_sample(series, head.normalizer, layout, channels, *idx, k, cal, mean.data(), x.col(col).data());
            out.timestamps.push_back(when);
        }
    }

    const std::vector<double> point = model.predict(spec.region_id, x);
    for (double y : point) out.point_mw.push_back(head.normalizer.denormalize_load(y));

    const bool random = std::any_of(stdev.begin(), stdev.end(), [](double s) { return s > 0.0; });
    if (!random) {
        out.lower_mw = out.upper_mw = out.point_mw;
        return out;
    }

    const auto mob_row = static_cast<Eigen::Index>(layout.offset("mobility"));
    const std::size_t n_out = point.size();
    std::vector<std::vector<double>> draws(n_out, std::vector<double>(spec.samples));
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd xs = x;
    for (std::size_t s = 0; s < spec.samples; ++s) {
        for (std::size_t d = 0; d < days; ++d) {
            for (std::size_t i = 0; i < mn; ++i) {
                const double m = std::max(0.0, mean[i] + stdev[i] * normal(rng));
                const double v = m * head.normalizer.mobility_scale;
                for (std::size_t k = 0; k < 24; ++k) {
                    xs(mob_row + static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d * 24 + k)) = v;
                }
            }
        }
        const std::vector<double> y = model.predict(spec.region_id, xs);
        for (std::size_t h = 0; h < n_out; ++h) draws[h][s] = head.normalizer.denormalize_load(y[h]);
    }
    const double lo_p = (1.0 - spec.confidence) / 2.0, hi_p = (1.0 + spec.confidence) / 2.0;
    for (auto& v : draws) {
        std::sort(v.begin(), v.end());
        out.lower_mw.push_back(quantile_sorted(v, lo_p));
        out.upper_mw.push_back(quantile_sorted(v, hi_p));
    }
    return out;
}

void write_projection_csv(const Projection& p, const std::filesystem::path& path, const std::string& header_comment) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::MissingFile, "cannot write " + path.string());
    if (!header_comment.empty()) out << "# " << header_comment << "\n";
    out << "timestamp,point_mw,lo_mw,hi_mw\n";
    char buf[128];
    for (std::size_t i = 0; i < p.timestamps.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", p.point_mw[i], p.lower_mw[i], p.upper_mw[i]);
        out << format_timestamp(p.timestamps[i]) << ',' << buf << '\n';
    }
}

}  // namespace mobiload
