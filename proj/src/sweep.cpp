#include "emu/sweep.hpp"

#include "emu/error.hpp"
#include "emu/log.hpp"

#include <algorithm>

namespace emu {

std::vector<SweepRow> grid_sweep(const ClusterData& data, const std::vector<GridCell>& cells,
                                 const TrainingConfig& config, const SweepCallback& on_cell) {
    if (cells.empty())
        throw Error(ErrorKind::EmptyGrid, "the grid has no cells");
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        SweepRow row;
        row.cell = cells[i];
        row.label = cells[i].label();
        try {
            TrainingConfig tc = config;
            tc.lag_days = cells[i].lag;
            tc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
            TrainedModel model = train_cluster(data, cells[i].spec, tc);
            const WindowSet test = data.windows(SplitPart::test, cells[i].lag);
            const EvaluatedSeries series = evaluate_series(model, test);
            for (std::size_t k = 0; k < kNumOutputs; ++k) {
                row.test[k] = metrics(series.true_scaled[k], series.pred_scaled[k]);
                row.test_mse_sum += row.test[k].mse;
            }
            row.model = std::move(model);
        } catch (const Error& e) {
            row.error = e.what();
            log_warn("cell " + row.label + " failed: " + row.error);
        }
        if (on_cell)
            on_cell(row);
        rows.push_back(std::move(row));
    }
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        if (a.model.has_value() != b.model.has_value())
            return a.model.has_value();
        if (!a.model)
            return false;
        if (a.test_mse_sum != b.test_mse_sum)
            return a.test_mse_sum < b.test_mse_sum;
        return a.label < b.label;
    });
    return rows;
}

nlohmann::json leaderboard_json(const std::vector<SweepRow>& rows) {
    nlohmann::json out = nlohmann::json::array();
    int rank = 1;
    for (const auto& r : rows) {
        nlohmann::json j = {{"cell", r.label}, {"network", r.cell.spec}, {"lag_days", r.cell.lag}};
        if (r.model) {
            j["rank"] = rank++;
            j["status"] = "ok";
            j["best_epoch"] = r.model->best_epoch;
            j["epochs"] = r.model->log.size();
            j["best_val_mse"] = r.model->best_val_mse;
            j["test_mse_sum"] = r.test_mse_sum;
            nlohmann::json test = nlohmann::json::object();
            for (std::size_t k = 0; k < kNumOutputs; ++k)
                test[kOutputNames[k]] = {{"MSE", r.test[k].mse}, {"MAE", r.test[k].mae}, {"Bias", r.test[k].bias}};
            j["test"] = test;
        } else {
            j["status"] = "failed";
            j["error"] = r.error;
        }
        out.push_back(std::move(j));
    }
    return out;
}

} // namespace emu
