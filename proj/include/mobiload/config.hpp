#pragma once

#include "mobiload/evaluation.hpp"
#include "mobiload/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mobiload {

// Keys (all optional except "manifest"):
//   manifest          path, relative to the config file
//   variants          subset of ["NN_Orig", "Retrain", "Mobi", "Mobi_MTL"]
//   mtl_groups        lists of region ids; default one group of every region
//   history_hours     H
//   weather_features  weather channel names; default all
//   architecture      {hidden_widths, activation, dropout, trunk_depth}
//   training          {batch_size, epochs, learning_rate, optimizer, mape_epsilon,
//                      fine_tune_epochs, variant_epochs: {variant: epochs}}
//   seed, out, verbosity
struct RunConfig {
    std::filesystem::path manifest;
    std::vector<VariantKind> variants = {VariantKind::NN_Orig, VariantKind::Retrain, VariantKind::Mobi,
                                         VariantKind::Mobi_MTL};
    std::vector<std::vector<std::string>> mtl_groups;
    ModelConfig model;
    std::map<std::string, int> variant_epochs;
    std::filesystem::path out = "out";
    std::uint64_t seed = 1;
    int verbosity = 0;

    // Model settings for one variant, with the run seed and any epoch override applied.
    ModelConfig model_for(VariantKind kind) const;
    // Everything that determines results; paths are left out so relocated runs match.
    nlohmann::json to_json() const;
};

RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir, const std::string& where);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_template();

// Keys: manifest, checkpoint, region, target_span, weather_template, mobility_mean,
// mobility_std, mobility_window, samples, seed, confidence, output. mobility_mean and
// mobility_std take a number, a list in layout order, or an object keyed by index name;
// without mobility_mean, mobility_window supplies the observed mean and std.
struct ScenarioFile {
    std::filesystem::path manifest;
    std::filesystem::path checkpoint;
    std::filesystem::path output;
    ScenarioSpec spec;
    nlohmann::json mobility_mean;
    nlohmann::json mobility_std;
    std::optional<DateRange> mobility_window;

    // Fills spec.mobility_mean/std in `indices` order.
    ScenarioSpec resolve(const std::vector<std::string>& indices, const RegionSeries* series) const;
};

ScenarioFile parse_scenario_file(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                 const std::string& where);
ScenarioFile load_scenario_file(const std::filesystem::path& path);

}  // namespace mobiload
