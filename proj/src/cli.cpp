#include "mobiload/cli.hpp"

#include "mobiload/checkpoint.hpp"
#include "mobiload/csv.hpp"
#include "mobiload/error.hpp"
#include "mobiload/selfcheck.hpp"
#include "mobiload/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mobiload::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Runs `body`, mapping library errors to exit 1 and anything else to exit 2.
template <typename F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        err << "error\t" << kind_name(e.kind()) << "\t" << e.what() << "\n";
        return kExitUserError;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
}

std::string artifact_header(const std::string& command, const json& config, std::uint64_t seed) {
    return json{{"command", command}, {"config", config}, {"seed", seed}}.dump();
}

fs::path checkpoint_path(const RunConfig& c, VariantKind k) { return c.out / (to_string(k) + ".ckpt"); }
fs::path log_path(const RunConfig& c, VariantKind k) { return c.out / (to_string(k) + "_log.csv"); }

std::vector<VariantSpec> variant_specs(const RunConfig& c, const DatasetManifest& m,
                                       const std::vector<RegionSeries>& regions) {
    std::vector<std::string> ids;
    for (const auto& r : regions) ids.push_back(r.region_id);
    std::vector<VariantSpec> out;
    for (auto k : c.variants) out.push_back(VariantSpec::standard(k, m.splits, ids, c.mtl_groups));
    return out;
}

// Temporary files renamed into place once every variant has succeeded.
class StagedOutputs {
public:
    fs::path stage(const fs::path& final_path) {
        staged_.push_back({final_path, fs::path(final_path.string() + ".tmp")});
        return staged_.back().second;
    }
    void commit() {
        for (const auto& [dst, tmp] : staged_) fs::rename(tmp, dst);
        staged_.clear();
    }
    ~StagedOutputs() {
        std::error_code ec;
        for (const auto& [dst, tmp] : staged_) fs::remove(tmp, ec);
    }

private:
    std::vector<std::pair<fs::path, fs::path>> staged_;
};

}  // namespace

int cmd_ingest(const fs::path& manifest_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const DatasetManifest m = load_manifest(manifest_path);
        validate(m);
        if (m.regions.empty()) {
            err << "error\tInvalidConfig\t-\tno regions in " << manifest_path.string() << "\n";
            return kExitUserError;
        }
        int failures = 0;
        for (const auto& files : m.regions) {
            try {
                IngestStats st;
                const RegionSeries s = align_hourly(ingest_region(files, m.span, &st), &st);
                out << "region " << s.region_id << ": " << s.hours() << " hours " << format_date(s.span.first) << ".."
                    << format_date(s.span.last) << ", " << s.weather_width() << " weather, " << s.mobility_width()
                    << " mobility; filled load " << st.load_hours_filled << " h, weather " << st.weather_hours_filled
                    << " h, mobility " << st.mobility_days_filled << " d; dropped " << st.rows_dropped << " rows\n";
            } catch (const Error& e) {
                ++failures;
                err << "error\t" << kind_name(e.kind()) << "\t" << files.region_id << "\t" << e.what() << "\n";
            }
        }
        if (failures > 0) {
            out << failures << " of " << m.regions.size() << " regions failed\n";
            return kExitUserError;
        }
        out << m.regions.size() << " regions OK\n";
        return kExitOk;
    });
}

int cmd_synth(const fs::path& dir, std::uint64_t seed, std::optional<int> days, std::optional<int> regions,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        SyntheticSpec spec = standard_fixture(seed);
        if (days) {
            spec.days = *days;
            const int shock = std::min(spec.shock.start_day, std::max(1, *days - *days / 13));
            spec.shock.start_day = shock;
            for (auto& s : spec.region_shocks) s.start_day = shock;
        }
        if (regions) {
            spec.regions = *regions;
            spec.region_shocks.clear();
        }
        const SyntheticDataset data = generate_synthetic(spec);
        fs::create_directories(dir);
        const fs::path manifest = write_synthetic(data, dir);
        out << "wrote " << data.regions.size() << " regions, " << spec.days << " days to " << manifest.string() << "\n";
        return kExitOk;
    });
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const DatasetManifest m = load_manifest(c.manifest);
        const std::vector<RegionSeries> regions = load_dataset(m);
        const std::vector<VariantSpec> specs = variant_specs(c, m, regions);
        for (const auto& s : specs) {
            if (!s.mobility) continue;
            for (const auto& r : regions) {
                require(r.mobility_width() > 0, ErrorKind::ModelWithoutMobility,
                        s.name() + " needs mobility data, region " + r.region_id + " has none");
            }
        }
        fs::create_directories(c.out);
        StagedOutputs staged;
        for (const auto& s : specs) {
            const ModelConfig mc = c.model_for(s.kind);
            const auto t0 = std::chrono::steady_clock::now();
            TrainedVariant tv = train_variant(s, regions, mc, m.splits.test);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            save_checkpoint(tv.checkpoint, staged.stage(checkpoint_path(c, s.kind)));
            tv.log.write_csv(staged.stage(log_path(c, s.kind)), artifact_header("train", c.to_json(), c.seed));
            out << "trained " << s.name() << ": " << tv.checkpoint.models.size() << " model(s), "
                << tv.log.rows.size() << " log rows, " << secs << " s\n";
            if (c.verbosity > 0) {
                for (const auto& row : tv.log.rows) {
                    out << "  epoch " << row.epoch << " " << row.task_id << " train MAPE " << row.train_mape << "\n";
                }
            }
        }
        staged.commit();
        return kExitOk;
    });
}

int cmd_evaluate(const RunConfig& c, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const DatasetManifest m = load_manifest(c.manifest);
        const std::vector<RegionSeries> regions = load_dataset(m);
        std::vector<VariantResult> results;
        for (auto k : c.variants) {
            const Checkpoint ck = load_checkpoint(checkpoint_path(c, k));
            const auto t0 = std::chrono::steady_clock::now();
            VariantResult r{to_string(k), predict_span(ck, regions, m.splits.test), 0.0};
            r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            require(!r.regions.empty(), ErrorKind::MissingCheckpoint,
                    "checkpoint for " + r.variant + " covers none of the manifest regions");
            results.push_back(std::move(r));
        }
        const EvaluationReport rep = make_report(results);
        const Comparison cmp = compare_variants(rep);
        const std::string header = artifact_header("evaluate", c.to_json(), c.seed);
        fs::create_directories(c.out);
        write_scores_csv(rep, c.out / "scores.csv", header);
        write_predictions_csv(rep, c.out / "predictions.csv", header);
        {
            std::ofstream w(c.out / "weekly.csv", std::ios::binary);
            w << "# " << header << "\nregion,variant,week,mape\n";
            for (const auto& row : weekly_mape(rep)) {
                w << row.region_id << ',' << row.variant << ',' << row.week << ',' << csv::format_double(row.mape) << '\n';
            }
        }
        std::ostringstream summary;
        summary << format_table(cmp) << "\nsigned error (%)  mean_bias  q05  q25  median  q75  q95  over_share\n";
        for (std::size_t v = 0; v < rep.summaries.size(); ++v) {
            const auto& s = rep.summaries[v];
            char buf[256];
            std::snprintf(buf, sizeof buf, "%-16s  %8.3f  %6.2f  %6.2f  %6.2f  %6.2f  %6.2f  %5.3f\n",
                          rep.table.variants[v].c_str(), s.mean_bias, s.q05, s.q25, s.median, s.q75, s.q95,
                          s.over_forecast_share);
            summary << buf;
        }
        {
            std::ofstream w(c.out / "summary.txt", std::ios::binary);
            w << "# " << header << "\n" << summary.str();
        }
        out << summary.str();
        return kExitOk;
    });
}

int cmd_project(const ScenarioFile& f, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const Checkpoint ck = load_checkpoint(f.checkpoint);
        const MultiTaskModel& model = ck.model_for(f.spec.region_id);
        const DatasetManifest m = load_manifest(f.manifest);
        const std::vector<RegionSeries> regions = load_dataset(m);
        const RegionSeries* series = nullptr;
        for (const auto& r : regions) {
            if (r.region_id == f.spec.region_id) series = &r;
        }
        require(series != nullptr, ErrorKind::InvalidConfig, "manifest has no region " + f.spec.region_id);
        const TaskHead& head = model.head(f.spec.region_id);
        require(head.layout.has_mobility(), ErrorKind::ModelWithoutMobility,
                "checkpoint model for " + f.spec.region_id + " has no mobility inputs");
        const ScenarioSpec spec = f.resolve(head.layout.mobility_indices, series);
        const Projection p = project(spec, model, *series);
        if (f.output.has_parent_path()) fs::create_directories(f.output.parent_path());
        write_projection_csv(p, f.output, json{{"command", "project"}, {"scenario", p.scenario}}.dump());
        double mean = 0.0;
        for (double v : p.point_mw) mean += v / static_cast<double>(p.point_mw.size());
        out << "projected " << p.timestamps.size() << " hours for " << spec.region_id << ", mean point load " << mean
            << " MW -> " << f.output.string() << "\n";
        return kExitOk;
    });
}

int cmd_selfcheck(bool inject, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto results = run_selfchecks(inject);
        int failed = 0;
        for (const auto& r : results) {
            out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
            if (!r.passed) ++failed;
        }
        out << "selfcheck: " << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " passed\n";
        if (failed > 0) {
            for (const auto& r : results) {
                if (!r.passed) err << "failed check: " << r.name << "\n";
            }
            return kExitUserError;
        }
        return kExitOk;
    });
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Mobility-augmented day-ahead load forecasting", "mobiload"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalOptions g;
    std::string config_path, out_path;
    std::uint64_t seed = 0;
    auto* config_opt = app.add_option("--config", config_path, "Run config (train/evaluate) or scenario file (project)");
    auto* seed_opt = app.add_option("--seed", seed, "Override the seed");
    auto* out_opt = app.add_option("--out", out_path, "Output directory (file for project)");
    app.add_flag("--verbose", g.verbose, "Print per-epoch training progress");

    std::string manifest;
    auto* ingest = app.add_subcommand("ingest", "Ingest and validate every region of a manifest");
    ingest->add_option("manifest", manifest, "Manifest JSON (default: the config's manifest)");

    std::optional<int> days, regions;
    auto* synth = app.add_subcommand("synth", "Write the standard synthetic fixture");
    synth->add_option("--days", days, "Days of data");
    synth->add_option("--regions", regions, "Number of regions");

    auto* train = app.add_subcommand("train", "Train every configured variant");
    auto* evaluate = app.add_subcommand("evaluate", "Score trained variants on the test span");
    auto* proj = app.add_subcommand("project", "Project load under a mobility scenario");
    bool inject = false;
    auto* selfcheck = app.add_subcommand("selfcheck", "Run built-in consistency checks");
    selfcheck->add_flag("--inject-gradient-fault", inject, "Corrupt one analytic gradient (debug)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUserError;
    }
    if (*config_opt) g.config = config_path;
    if (*seed_opt) g.seed = seed;
    if (*out_opt) g.out = out_path;

    auto need_config = [&]() -> RunConfig {
        require(g.config.has_value(), ErrorKind::InvalidConfig, "--config is required");
        RunConfig c = load_run_config(*g.config);
        if (g.seed) {
            c.seed = *g.seed;
            c.model.training.seed = *g.seed;
        }
        if (g.out) c.out = *g.out;
        if (g.verbose) c.verbosity = std::max(c.verbosity, 1);
        return c;
    };

    if (ingest->parsed()) {
        return guarded(err, [&] {
            fs::path p = manifest;
            if (p.empty()) p = need_config().manifest;
            return cmd_ingest(p, out, err);
        });
    }
    if (synth->parsed()) {
        return guarded(err, [&] {
            require(g.out.has_value(), ErrorKind::InvalidConfig, "synth needs --out <dir>");
            return cmd_synth(*g.out, g.seed.value_or(1), days, regions, out, err);
        });
    }
    if (train->parsed()) return guarded(err, [&] { return cmd_train(need_config(), out, err); });
    if (evaluate->parsed()) return guarded(err, [&] { return cmd_evaluate(need_config(), out, err); });
    if (proj->parsed()) {
        return guarded(err, [&] {
            require(g.config.has_value(), ErrorKind::InvalidConfig, "project needs --config <scenario file>");
            ScenarioFile f = load_scenario_file(*g.config);
            if (g.seed) f.spec.seed = *g.seed;
            if (g.out) f.output = *g.out;
            return cmd_project(f, out, err);
        });
    }
    if (selfcheck->parsed()) return cmd_selfcheck(inject, out, err);
    return kExitUserError;
}

}  // namespace mobiload::cli
