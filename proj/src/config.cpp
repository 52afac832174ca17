#include "mobiload/config.hpp"

#include "mobiload/error.hpp"
#include "mobiload/json_util.hpp"

namespace mobiload {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    return fs::path(p).is_absolute() ? fs::path(p) : base / p;
}

Optimizer parse_optimizer(const std::string& s) {
    if (s == "adam") return Optimizer::Adam;
    if (s == "sgd") return Optimizer::SGD;
    fail(ErrorKind::InvalidConfig, "unknown optimizer \"" + s + "\" (expected adam or sgd)");
}

}  // namespace

ModelConfig RunConfig::model_for(VariantKind kind) const {
    ModelConfig m = model;
    m.training.seed = seed;
    if (auto it = variant_epochs.find(to_string(kind)); it != variant_epochs.end()) m.training.epochs = it->second;
    return m;
}

json RunConfig::to_json() const {
    std::vector<std::string> names;
    for (auto v : variants) names.push_back(to_string(v));
    json m = model.to_json();
    m["training"].erase("seed");
    return {{"variants", names}, {"mtl_groups", mtl_groups}, {"model", m},
            {"variant_epochs", variant_epochs}, {"seed", seed}};
}

RunConfig parse_run_config(const json& j, const fs::path& base, const std::string& where) {
    using namespace jsonutil;
    require(j.is_object(), ErrorKind::InvalidConfig, where + ": expected a JSON object");
    check_keys(j, {"manifest", "variants", "mtl_groups", "history_hours", "weather_features", "architecture", "training",
                   "seed", "out", "verbosity"},
               where);
    RunConfig c;
    c.manifest = resolve(base, get<std::string>(j, "manifest", where));
    if (j.contains("variants")) {
        c.variants.clear();
        for (const auto& v : get<std::vector<std::string>>(j, "variants", where)) c.variants.push_back(parse_variant(v));
        require(!c.variants.empty(), ErrorKind::InvalidConfig, where + ".variants: empty");
    }
    c.mtl_groups = get_or<std::vector<std::vector<std::string>>>(j, "mtl_groups", {}, where);
    c.model.history_hours = get_or<int>(j, "history_hours", c.model.history_hours, where);
    c.model.weather_features = get_or<std::vector<std::string>>(j, "weather_features", {}, where);
    if (j.contains("architecture")) {
        const json& a = j.at("architecture");
        const std::string w = where + ".architecture";
        check_keys(a, {"hidden_widths", "activation", "dropout", "trunk_depth"}, w);
        c.model.hidden_widths = get_or<std::vector<std::size_t>>(a, "hidden_widths", c.model.hidden_widths, w);
        if (a.contains("activation")) c.model.activation = parse_activation(get<std::string>(a, "activation", w));
        c.model.dropout = get_or<double>(a, "dropout", c.model.dropout, w);
        c.model.trunk_depth = get_or<std::size_t>(a, "trunk_depth", c.model.trunk_depth, w);
    }
    if (j.contains("training")) {
        const json& t = j.at("training");
        const std::string w = where + ".training";
        check_keys(t, {"batch_size", "epochs", "learning_rate", "optimizer", "mape_epsilon", "fine_tune_epochs",
                       "variant_epochs"},
                   w);
        auto& tc = c.model.training;
        tc.batch_size = get_or<std::size_t>(t, "batch_size", tc.batch_size, w);
        tc.epochs = get_or<int>(t, "epochs", tc.epochs, w);
        tc.learning_rate = get_or<double>(t, "learning_rate", tc.learning_rate, w);
        if (t.contains("optimizer")) tc.optimizer = parse_optimizer(get<std::string>(t, "optimizer", w));
        tc.mape_epsilon = get_or<double>(t, "mape_epsilon", tc.mape_epsilon, w);
        tc.fine_tune_epochs = get_or<int>(t, "fine_tune_epochs", tc.fine_tune_epochs, w);
        c.variant_epochs = get_or<std::map<std::string, int>>(t, "variant_epochs", {}, w);
        for (const auto& [name, epochs] : c.variant_epochs) {
            parse_variant(name);
            require(epochs >= 1, ErrorKind::InvalidConfig, w + ".variant_epochs." + name + " must be >= 1");
        }
    }
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed, where);
    c.out = resolve(base, get_or<std::string>(j, "out", "out", where));
    c.verbosity = get_or<int>(j, "verbosity", 0, where);
    c.model.training.seed = c.seed;
    c.model.validate();
    for (const auto& g : c.mtl_groups) {
        require(g.size() >= 2, ErrorKind::InvalidConfig, where + ".mtl_groups: every group needs at least 2 regions");
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    const json j = jsonutil::parse_file(path.string());
    return parse_run_config(j, path.parent_path(), path.string());
}

json run_config_template() {
    const ModelConfig m;
    return {{"manifest", "manifest.json"},
            {"variants", {"NN_Orig", "Retrain", "Mobi", "Mobi_MTL"}},
            {"history_hours", m.history_hours},
            {"architecture",
             {{"hidden_widths", m.hidden_widths},
              {"activation", to_string(m.activation)},
              {"dropout", m.dropout},
              {"trunk_depth", m.trunk_depth}}},
            {"training",
             {{"batch_size", m.training.batch_size},
              {"epochs", m.training.epochs},
              {"learning_rate", m.training.learning_rate},
              {"optimizer", "adam"},
              {"mape_epsilon", m.training.mape_epsilon},
              {"fine_tune_epochs", m.training.fine_tune_epochs}}},
            {"seed", 1},
            {"out", "out"}};
}

namespace {

std::vector<double> resolve_values(const json& v, const std::vector<std::string>& indices, const std::string& what) {
    if (v.is_null()) return {};
    if (v.is_number()) return {v.get<double>()};
    if (v.is_array()) return v.get<std::vector<double>>();
    require(v.is_object(), ErrorKind::InvalidConfig, what + ": expected a number, list or object");
    std::vector<double> out;
    for (const auto& name : indices) {
        require(v.contains(name), ErrorKind::InvalidConfig, what + ": no value for mobility index " + name);
        out.push_back(v.at(name).get<double>());
    }
    for (const auto& [name, _] : v.items()) {
        require(std::find(indices.begin(), indices.end(), name) != indices.end(), ErrorKind::InvalidConfig,
                what + ": unknown mobility index " + name);
    }
    return out;
}

}  // namespace

ScenarioSpec ScenarioFile::resolve(const std::vector<std::string>& indices, const RegionSeries* series) const {
    ScenarioSpec s = spec;
    if (mobility_mean.is_null()) {
        require(mobility_window.has_value() && series != nullptr, ErrorKind::InvalidConfig,
                "scenario needs mobility_mean or mobility_window");
        const MobilityStats st = estimate_mobility_stats(*series, *mobility_window);
        require(st.names == indices, ErrorKind::LayoutMismatch, "series mobility indices differ from the model layout");
        s.mobility_mean = st.mean;
        s.mobility_std = mobility_std.is_null() ? st.std : resolve_values(mobility_std, indices, "mobility_std");
        return s;
    }
    s.mobility_mean = resolve_values(mobility_mean, indices, "mobility_mean");
    s.mobility_std = resolve_values(mobility_std, indices, "mobility_std");
    return s;
}

ScenarioFile parse_scenario_file(const json& j, const fs::path& base, const std::string& where) {
    using namespace jsonutil;
    require(j.is_object(), ErrorKind::InvalidConfig, where + ": expected a JSON object");
    check_keys(j, {"manifest", "checkpoint", "region", "target_span", "weather_template", "mobility_mean",
                   "mobility_std", "mobility_window", "samples", "seed", "confidence", "output"},
               where);
    ScenarioFile f;
    f.manifest = resolve(base, get<std::string>(j, "manifest", where));
    f.checkpoint = resolve(base, get<std::string>(j, "checkpoint", where));
    f.spec.region_id = get<std::string>(j, "region", where);
    f.spec.target_span = date_range(at(j, "target_span", where), where + ".target_span");
    f.spec.weather_template = date_range(at(j, "weather_template", where), where + ".weather_template");
    f.mobility_mean = j.value("mobility_mean", json());
    f.mobility_std = j.value("mobility_std", json());
    if (j.contains("mobility_window")) f.mobility_window = date_range(j.at("mobility_window"), where + ".mobility_window");
    require(!f.mobility_mean.is_null() || f.mobility_window.has_value(), ErrorKind::InvalidConfig,
            where + ": needs mobility_mean or mobility_window");
    f.spec.samples = get_or<std::size_t>(j, "samples", f.spec.samples, where);
    f.spec.seed = get_or<std::uint64_t>(j, "seed", f.spec.seed, where);
    f.spec.confidence = get_or<double>(j, "confidence", f.spec.confidence, where);
    f.output = resolve(base, get_or<std::string>(j, "output", "projection_" + f.spec.region_id + ".csv", where));
    return f;
}

ScenarioFile load_scenario_file(const fs::path& path) {
    const json j = jsonutil::parse_file(path.string());
    return parse_scenario_file(j, path.parent_path(), path.string());
}

}  // namespace mobiload
