#pragma once

#include "mobiload/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace mobiload::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitInternal = 2;

struct GlobalOptions {
    std::optional<std::filesystem::path> config;
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    bool verbose = false;
};

// Validation report for every region; one tab-separated "error" line per failure.
int cmd_ingest(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);
// Standard synthetic fixture (optionally resized) written as CSVs plus manifest.json.
int cmd_synth(const std::filesystem::path& dir, std::uint64_t seed, std::optional<int> days,
              std::optional<int> regions, std::ostream& out, std::ostream& err);
// One checkpoint <out>/<variant>.ckpt and log <out>/<variant>_log.csv per variant.
int cmd_train(const RunConfig& config, std::ostream& out, std::ostream& err);
// scores.csv, predictions.csv, weekly.csv and summary.txt under <out>.
int cmd_evaluate(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_project(const ScenarioFile& scenario, std::ostream& out, std::ostream& err);
int cmd_selfcheck(bool inject_gradient_fault, std::ostream& out, std::ostream& err);

// Parses argv (subcommands ingest, synth, train, evaluate, project, selfcheck) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mobiload::cli
