/**
 * @file sweep.hpp
 * @brief Grid sweep over network specs and lags with a test-set leaderboard
 */
#pragma once

#include "emu/eval.hpp"
#include "emu/training.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace emu {

struct SweepRow {
    GridCell cell;
    std::string label;
    std::optional<TrainedModel> model;
    std::array<Metrics, kNumOutputs> test{};
    double test_mse_sum = 0.0;
    std::string error; ///< set when the cell failed
};

/// Called after each cell; lets callers persist bundles as the sweep runs.
using SweepCallback = std::function<void(const SweepRow&)>;

/// Trains every cell with seed derive_seed(config.seed, cell index) and
/// scores it on the test split. Failed cells are recorded, not thrown.
/// Rows are returned ranked: successful cells by test MSE summed over the
/// outputs (ties by label), then failures in grid order.
/// Throws EmptyGrid when `cells` is empty.
std::vector<SweepRow> grid_sweep(const ClusterData& data, const std::vector<GridCell>& cells,
                                 const TrainingConfig& config, const SweepCallback& on_cell = {});

nlohmann::json leaderboard_json(const std::vector<SweepRow>& rows);

} // namespace emu
