#include "support.hpp"

#include "mobiload/evaluation.hpp"

#include <cmath>
#include <set>

using namespace testing;

namespace {

const std::vector<std::string> kVariants = {"NN_Orig", "Retrain", "Mobi", "Mobi_MTL"};

// Published twelve-region MAPE (%) benchmark, variants in kVariants order.
MapeTable benchmark_table() {
    MapeTable t;
    t.variants = kVariants;
    t.regions = {"Seattle", "Chicago", "Boston", "Mid-Atlantic", "ERCOT Coast", "ERCOT NCENT",
                 "ERCOT SCENT", "NYISO", "CAISO", "UK", "Germany", "France"};
    const double nn[] = {15.01, 14.44, 6.55, 14.60, 7.38, 8.48, 8.16, 12.91, 8.51, 10.11, 7.73, 22.71};
    const double re[] = {7.55, 17.92, 15.26, 17.27, 7.17, 9.60, 7.73, 15.55, 7.77, 13.78, 7.77, 8.31};
    const double mo[] = {6.51, 4.08, 4.38, 7.08, 1.85, 2.70, 5.18, 6.25, 5.97, 8.74, 6.24, 5.93};
    const double mt[] = {2.28, 2.33, 2.91, 2.61, 1.80, 1.59, 2.71, 5.24, 3.15, 4.46, 4.52, 4.1};
    for (std::size_t r = 0; r < 12; ++r) t.mape.push_back({nn[r], re[r], mo[r], mt[r]});
    return t;
}

ModelConfig small_model(int epochs = 3) {
    ModelConfig c;
    c.hidden_widths = {16, 8};
    c.trunk_depth = 1;
    c.dropout = 0.0;
    c.history_hours = 2;
    c.weather_features = {"temp_c", "cloud_pct", "pressure_hpa"};
    c.training.epochs = epochs;
    c.training.batch_size = 64;
    c.training.learning_rate = 2e-3;
    c.training.mape_epsilon = 0.1;
    c.training.fine_tune_epochs = 2;
    return c;
}

std::vector<std::string> ids_of(const std::vector<RegionSeries>& regions) {
    std::vector<std::string> ids;
    for (const auto& r : regions) ids.push_back(r.region_id);
    return ids;
}

RegionPredictions preds(const std::string& id, std::vector<double> p, std::vector<double> a) {
    RegionPredictions r;
    r.region_id = id;
    for (std::size_t i = 0; i < a.size(); ++i) r.target_times.push_back(parse_timestamp("2020-05-01T00:00Z") + (int(i) + 1) * kHour);
    r.pred_mw = std::move(p);
    r.actual_mw = std::move(a);
    return r;
}

}  // namespace

TEST_CASE("signed errors and reporting MAPE") {
    const std::vector<double> a = {100.0, 200.0};
    CHECK(signed_errors(a, a) == std::vector<double>{0.0, 0.0});
    CHECK(signed_errors(std::vector<double>{110.0}, std::vector<double>{100.0})[0] == doctest::Approx(10.0).epsilon(1e-14));
    const auto e = signed_errors(std::vector<double>{90.0, 210.0}, a);
    CHECK(e[0] == doctest::Approx(-10.0).epsilon(1e-14));
    CHECK(e[1] == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(summarize_errors(e).mean_bias == doctest::Approx(-2.5).epsilon(1e-14));
    CHECK(report_mape(std::vector<double>{90.0, 210.0}, a) == doctest::Approx(7.5).epsilon(1e-14));
    CHECK(error_kind_of([] { signed_errors(std::vector<double>{1.0}, std::vector<double>{0.0}); }) == ErrorKind::ZeroActual);
    CHECK(error_kind_of([] { signed_errors(std::vector<double>{1.0}, std::vector<double>{-3.0}); }) == ErrorKind::ZeroActual);
}

TEST_CASE("error summary quantiles") {
    // Oracle values from an independent inclusive-method quantile implementation.
    const ErrorSummary s = summarize_errors({3.0, -1.0, 7.5, 2.0, 10.0, -4.0, 0.5});
    CHECK(s.count == 7);
    CHECK(s.q05 == doctest::Approx(-3.1).epsilon(1e-12));
    CHECK(s.q25 == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(s.median == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.q75 == doctest::Approx(5.25).epsilon(1e-12));
    CHECK(s.q95 == doctest::Approx(9.25).epsilon(1e-12));
    CHECK(s.over_forecast_share == doctest::Approx(5.0 / 7.0));
    CHECK(quantile_sorted({1.0}, 0.7) == 1.0);
}

TEST_CASE("twelve-region benchmark: best variants and the two improvement ratios") {
    const Comparison c = compare_variants(benchmark_table());
    CHECK(c.best_variant[0] == "Mobi_MTL");
    CHECK(std::all_of(c.best_variant.begin(), c.best_variant.end(), [](const std::string& v) { return v == "Mobi_MTL"; }));
    // Oracles computed independently from the published table.
    CHECK(c.mean_of_ratios == doctest::Approx(3.9792696494080233).epsilon(1e-12));
    CHECK(c.ratio_of_means == doctest::Approx(3.6230769230769235).epsilon(1e-12));
    CHECK(std::round(c.mean_of_ratios * 100.0) / 100.0 == 3.98);
    CHECK(c.variant_means[0] == doctest::Approx(136.59 / 12.0).epsilon(1e-12));

    const std::string text = format_table(c);
    CHECK(text.find("Seattle") != std::string::npos);
    CHECK(text.find("ratio of means 3.62, mean of ratios 3.98") != std::string::npos);

    MapeTable only_two;
    only_two.regions = {"x"};
    only_two.variants = {"Retrain", "Mobi"};
    only_two.mape = {{2.0, 1.0}};
    CHECK(std::isnan(compare_variants(only_two).ratio_of_means));
}

TEST_CASE("reports: identical predictions, mismatched test sets") {
    const RegionPredictions a = preds("r", {90, 210, 300}, {100, 200, 300});
    const VariantResult nn{"NN_Orig", {a}, 0.0}, mtl{"Mobi_MTL", {a}, 0.0};
    const EvaluationReport rep = make_report({nn, mtl});
    CHECK(compare_variants(rep).ratio_of_means == 1.0);
    CHECK(compare_variants(rep).mean_of_ratios == 1.0);
    CHECK(rep.mape("r", "NN_Orig") == doctest::Approx(5.0));
    CHECK(rep.predictions.size() == 6);
    // Reporting MAPE is the mean absolute signed error of the same predictions.
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) s += std::abs(rep.predictions[i].signed_error) / 3.0;
    CHECK(rep.mape("r", "NN_Orig") == doctest::Approx(s).epsilon(1e-15));

    RegionPredictions shifted = a;
    shifted.target_times[1] += kHour;
    CHECK(error_kind_of([&] { make_report({nn, VariantResult{"Mobi", {shifted}, 0.0}}); }) == ErrorKind::MismatchedTestSets);
    CHECK(error_kind_of([&] { make_report({nn, VariantResult{"Mobi", {}, 0.0}}); }) == ErrorKind::MismatchedTestSets);
    RegionPredictions other = a;
    other.actual_mw[0] = 101;
    CHECK(error_kind_of([&] { make_report({nn, VariantResult{"Mobi", {other}, 0.0}}); }) == ErrorKind::MismatchedTestSets);
    CHECK(error_kind_of([&] { rep.mape("r", "Retrain"); }) == ErrorKind::UnknownTask);

    TempDir dir("report");
    write_scores_csv(rep, dir / "scores.csv", "hdr");
    CHECK(read_file(dir / "scores.csv").rfind("# hdr\nregion,variant,test_mape\nr,NN_Orig,5\n", 0) == 0);
    write_predictions_csv(rep, dir / "pred.csv", "hdr");
    CHECK(read_file(dir / "pred.csv")
              .rfind("# hdr\ntimestamp_utc,region,variant,pred_mw,actual_mw,signed_err_pct\n2020-05-01T01:00:00Z,r,NN_Orig,90,100,-10\n",
                     0) == 0);
}

TEST_CASE("weekly MAPE splits the test span into 7-day blocks") {
    std::vector<double> p, a;
    for (int i = 0; i < 24 * 10; ++i) {
        a.push_back(100.0);
        p.push_back(i < 24 * 7 ? 101.0 : 104.0);
    }
    const EvaluationReport rep = make_report({VariantResult{"Mobi", {preds("r", p, a)}, 0.0}});
    const auto weeks = weekly_mape(rep);
    REQUIRE(weeks.size() == 2);
    CHECK(weeks[0].week == 1);
    CHECK(weeks[0].mape == doctest::Approx(1.0));
    CHECK(weeks[1].mape == doctest::Approx(4.0));
}

TEST_CASE("variant specs follow the protocol") {
    const DataSplits splits{{ymd(2018, 1, 1), ymd(2019, 12, 31)}, {ymd(2020, 2, 15), ymd(2020, 4, 30)},
                            {ymd(2020, 5, 1), ymd(2020, 5, 15)}};
    const std::vector<std::string> ids = {"a", "b", "c"};
    const VariantSpec nn = VariantSpec::standard(VariantKind::NN_Orig, splits, ids);
    CHECK(nn.train_span == splits.orig_train);
    CHECK_FALSE(nn.mobility);
    CHECK(VariantSpec::standard(VariantKind::Retrain, splits, ids).train_span == splits.recent_train);
    CHECK_FALSE(VariantSpec::standard(VariantKind::Retrain, splits, ids).mobility);
    CHECK(VariantSpec::standard(VariantKind::Mobi, splits, ids).mobility);
    const VariantSpec mtl = VariantSpec::standard(VariantKind::Mobi_MTL, splits, ids);
    CHECK(mtl.mobility);
    CHECK(mtl.groups == std::vector<std::vector<std::string>>{ids});
    CHECK(error_kind_of([&] { VariantSpec::standard(VariantKind::Mobi_MTL, splits, ids, {{"a"}, {"b", "c"}}); }) ==
          ErrorKind::InvalidConfig);
    VariantSpec bad = nn;
    bad.mobility = true;
    CHECK(error_kind_of([&] { bad.validate(); }) == ErrorKind::InvalidConfig);
    CHECK(parse_variant("Mobi_MTL") == VariantKind::Mobi_MTL);
    CHECK(error_kind_of([] { parse_variant("mobi"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("train_variant and predict_span: counts, isolation, layouts") {
    const SyntheticDataset data = small_synthetic(3, 60, 2);
    const auto ids = ids_of(data.regions);
    const ModelConfig cfg = small_model();
    const DateRange test = data.splits.test;

    for (VariantKind k : {VariantKind::NN_Orig, VariantKind::Retrain, VariantKind::Mobi, VariantKind::Mobi_MTL}) {
        CAPTURE(to_string(k));
        const VariantSpec spec = VariantSpec::standard(k, data.splits, ids);
        const TrainedVariant tv = train_variant(spec, data.regions, cfg, test);
        CHECK(tv.checkpoint.metadata.at("variant") == to_string(k));
        CHECK(tv.checkpoint.models.size() == (k == VariantKind::Mobi_MTL ? 1u : 2u));
        const auto pr = predict_span(tv.checkpoint, data.regions, test);
        REQUIRE(pr.size() == 2);
        std::size_t total = 0;
        for (const auto& r : pr) {
            total += r.pred_mw.size();
            CHECK(std::all_of(r.pred_mw.begin(), r.pred_mw.end(), [](double v) { return std::isfinite(v); }));
        }
        CHECK(total == 24u * static_cast<std::size_t>(test.days() - 1) * 2u);
        for (const auto& m : tv.checkpoint.models) {
            for (const auto& h : m.heads) CHECK(h.layout.has_mobility() == spec.mobility);
        }
        if (k == VariantKind::Mobi_MTL) {
            std::set<std::string> tasks;
            for (const auto& row : tv.log.rows) tasks.insert(row.task_id);
            CHECK(tasks == std::set<std::string>{"region_0", "region_1", "region_0@fine_tune", "region_1@fine_tune"});
            CHECK(tv.log.rows.size() == 2u * 3u + 2u * 2u);
        } else {
            CHECK(tv.log.rows.size() == 2u * 3u);
        }
    }

    VariantSpec leak = VariantSpec::standard(VariantKind::Retrain, data.splits, ids);
    leak.train_span.last = test.first;
    CHECK(error_kind_of([&] { train_variant(leak, data.regions, cfg, test); }) == ErrorKind::InvalidConfig);

    // Renamed mobility indices rebuild a different layout, which the checkpoint refuses.
    const TrainedVariant mobi =
        train_variant(VariantSpec::standard(VariantKind::Mobi, data.splits, ids), data.regions, cfg, test);
    std::vector<RegionSeries> renamed = data.regions;
    for (auto& r : renamed) r.mobility_names[0] = "parks";
    CHECK(error_kind_of([&] { predict_span(mobi.checkpoint, renamed, test); }) == ErrorKind::LayoutMismatch);

    std::vector<RegionSeries> no_mob = data.regions;
    for (auto& r : no_mob) {
        r.mobility_names.clear();
        r.mobility.clear();
        r.mobility_hourly.clear();
    }
    CHECK(error_kind_of([&] {
              train_variant(VariantSpec::standard(VariantKind::Mobi, data.splits, ids), no_mob, cfg, test);
          }) == ErrorKind::ModelWithoutMobility);
}

TEST_CASE("train_variant is deterministic") {
    const SyntheticDataset data = small_synthetic(4, 40, 2);
    const VariantSpec spec = VariantSpec::standard(VariantKind::Mobi_MTL, data.splits, ids_of(data.regions));
    const TrainedVariant a = train_variant(spec, data.regions, small_model(2), data.splits.test);
    const TrainedVariant b = train_variant(spec, data.regions, small_model(2), data.splits.test);
    CHECK(serialize(a.checkpoint) == serialize(b.checkpoint));
    CHECK(a.log.rows == b.log.rows);
}

TEST_CASE("NN_Orig degrades once the mobility shock arrives") {
    SyntheticSpec spec;
    spec.seed = 21;
    spec.days = 150;
    spec.regions = 1;
    spec.shock = {120, 0.45, 0.0};
    const SyntheticDataset data = generate_synthetic(spec);
    const DateRange train{ymd(2018, 4, 16), ymd(2018, 4, 15) + std::chrono::days{99}};
    const DateRange validation{ymd(2018, 4, 15) + std::chrono::days{105}, ymd(2018, 4, 15) + std::chrono::days{118}};
    const DateRange test{ymd(2018, 4, 15) + std::chrono::days{125}, ymd(2018, 4, 15) + std::chrono::days{139}};
    ModelConfig cfg = small_model(30);
    cfg.hidden_widths = {32, 16};
    cfg.history_hours = 24;
    VariantSpec v;
    v.kind = VariantKind::NN_Orig;
    v.train_span = train;
    const TrainedVariant tv = train_variant(v, data.regions, cfg, test);
    auto score = [&](DateRange span) {
        const auto p = predict_span(tv.checkpoint, data.regions, span).front();
        return report_mape(p.pred_mw, p.actual_mw);
    };
    const double before = score(validation), after = score(test);
    CAPTURE(before);
    CAPTURE(after);
    CHECK(after > before);
    const auto p = predict_span(tv.checkpoint, data.regions, test).front();
    // Without mobility inputs the pre-shock model over-forecasts the reduced load.
    CHECK(summarize_errors(signed_errors(p.pred_mw, p.actual_mw)).mean_bias > 0.0);
}
