#pragma once

#include "mobiload/features.hpp"
#include "mobiload/neuralnet.hpp"
#include "mobiload/training.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mobiload {

// 64 samples with normalized targets >= 0.2, drawn evenly from one synthetic region;
// no lag history, so the inputs are calendar, target-hour weather, mobility and the issue-hour load.
SampleSet overfit_fixture(std::uint64_t seed, std::size_t count = 64, int history_hours = 0);
ArchitectureSpec overfit_architecture(std::size_t input_dim);
TrainingConfig overfit_config(std::uint64_t seed);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Gradient check, calendar encoder, MAPE hand cases and the overfit smoke test.
// `inject_gradient_fault` corrupts one analytic gradient so the first check must fail.
std::vector<CheckResult> run_selfchecks(bool inject_gradient_fault = false);

}  // namespace mobiload
