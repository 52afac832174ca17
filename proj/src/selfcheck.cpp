#include "mobiload/selfcheck.hpp"

#include "mobiload/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace mobiload {

SampleSet overfit_fixture(std::uint64_t seed, std::size_t count, int history_hours) {
    SyntheticSpec spec;
    spec.regions = 1;
    spec.days = 21;
    spec.seed = seed;
    spec.shock.start_day = 1000;
    const SyntheticDataset data = generate_synthetic(spec);
    const RegionSeries& s = data.regions.front();
    const DateRange span{data.span.first + std::chrono::days{1}, data.span.last};
    const NormalizationState norm = fit_normalizer(s, data.span);
    const SampleSet all = build_samples(s, norm, {history_hours, true}, span);
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all.targets[i] >= 0.2) eligible.push_back(i);
    }
    require(eligible.size() >= count, ErrorKind::SpanTooShort, "overfit fixture has too few samples");
    std::vector<std::size_t> pick;
    for (std::size_t j = 0; j < count; ++j) pick.push_back(eligible[j * eligible.size() / count]);
    return all.subset(pick);
}

ArchitectureSpec overfit_architecture(std::size_t input_dim) {
    return ArchitectureSpec::make(input_dim, {128, 64}, Activation::ReLU, 0.0, 1);
}

TrainingConfig overfit_config(std::uint64_t seed) {
    TrainingConfig c;
    c.epochs = 500;
    c.batch_size = 32;
    c.learning_rate = 3e-4;
    c.seed = seed;
    return c;
}

namespace {

std::string fmt(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

CheckResult check_gradients(bool inject) {
    CheckResult r{"gradient_check", true, ""};
    double worst = 0.0;
    int idx = 0;
    for (Activation a : {Activation::ReLU, Activation::Sigmoid}) {
        for (std::size_t depth : {2u, 3u, 4u}) {
            std::vector<std::size_t> hidden(depth, 12);
            const auto spec = ArchitectureSpec::make(9, hidden, a, 0.0, 1);
            std::optional<GradientFault> fault;
            if (inject && idx == 0) fault = GradientFault{};
            const auto rep = gradient_check(spec, 100 + static_cast<std::uint64_t>(idx), 1e-4, fault);
            worst = std::max(worst, rep.max_relative_error);
            if (!rep.passed) {
                r.passed = false;
                r.detail += to_string(a) + " depth " + std::to_string(depth + 1) + " worst " + rep.worst_parameter + "; ";
            }
            ++idx;
        }
    }
    r.detail = "max relative error " + fmt("%.3g", worst) + (r.detail.empty() ? "" : " (" + r.detail + ")");
    return r;
}

CheckResult check_encoder() {
    CheckResult r{"calendar_encoder", true, ""};
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> day(0, 3650), hour(0, 23);
    std::bernoulli_distribution hol(0.1);
    int bad = 0;
    for (int i = 0; i < 2000; ++i) {
        const Date d = Date{std::chrono::year{2015} / 1 / 1} + std::chrono::days{day(rng)};
        const LocalTime t{d, hour(rng), 0};
        const bool h = hol(rng);
        const CalendarCode c = encode_calendar(t, h);
        const std::size_t starts[] = {0, kHourBlock, kHourBlock + kMonthBlock, kHourBlock + kMonthBlock + kDayTypeBlock,
                                      kCalendarWidth};
        bool ok = true;
        for (int b = 0; b < 4; ++b) {
            double sum = 0.0;
            for (std::size_t j = starts[b]; j < starts[b + 1]; ++j) sum += c[j];
            ok = ok && sum == 1.0;
        }
        const DecodedCalendar dc = decode_calendar(c);
        const bool weekend = std::chrono::weekday{d}.iso_encoding() >= 6;
        ok = ok && dc.hour == t.hour && dc.month == static_cast<unsigned>(std::chrono::year_month_day{d}.month()) &&
             dc.weekend == weekend && dc.holiday == h;
        if (!ok) ++bad;
    }
    r.passed = bad == 0;
    r.detail = std::to_string(2000 - bad) + "/2000 timestamps round-trip";
    return r;
}

CheckResult check_mape() {
    CheckResult r{"mape_cases", true, ""};
    const std::vector<double> a{1.0, 2.0}, p11{1.1}, t1{1.0}, t2{0.5, 0.25}, p2{0.55, 0.2};
    const double identity = mape(a, a, 1e-3);
    const double ten = mape(p11, t1, 1e-3);
    const double fifteen = mape(p2, t2, 1e-3);
    r.passed = identity == 0.0 && std::abs(ten - 10.0) < 1e-12 && std::abs(fifteen - 15.0) < 1e-12;
    r.detail = "identity " + fmt("%g", identity) + ", 1.1 vs 1.0 -> " + fmt("%.12g", ten) + ", pair case -> " +
               fmt("%.12g", fifteen);
    return r;
}

CheckResult check_overfit() {
    CheckResult r{"overfit_smoke", false, ""};
    const SampleSet data = overfit_fixture(3);
    const auto spec = overfit_architecture(data.dimension());
    const auto res = train_single(init_params(spec, 3), spec, data, overfit_config(3));
    const double final_mape = res.log.rows.back().train_mape;
    r.passed = final_mape < 1.0;
    r.detail = "training MAPE after 500 epochs " + fmt("%.4f", final_mape) + "%";
    return r;
}

}  // namespace

std::vector<CheckResult> run_selfchecks(bool inject_gradient_fault) {
    return {check_gradients(inject_gradient_fault), check_encoder(), check_mape(), check_overfit()};
}

}  // namespace mobiload
