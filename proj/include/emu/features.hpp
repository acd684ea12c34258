/**
 * @file features.hpp
 * @brief Per-day predictor features derived from a run
 *
 * Emitted column order (each block only when its row is included):
 *
 *   mgmt_soil, mgmt_pesticide, mgmt_fertiliser, mgmt_millmud, conductivity,
 *   day_of_year, season_sin, season_cos, planting_month, planting_year,
 *   days_since_cane_planted, days_since_cowpea_planted, days_since_fertiliser,
 *   days_since_millmud, cane_in, cowpea_in, persistent_fertiliser,
 *   persistent_millmud, rainfall, evaporation, fertiliser, millmud,
 *   rainfall_ema<a>..., evaporation_ema<a>..., fertiliser_ema<a>...,
 *   millmud_ema<a>...
 *
 * With one-hot category encoding the first five columns expand to one column
 * per table entry (e.g. mgmt_soil=conventional).
 */
#pragma once

#include "emu/dataset.hpp"

#include <json.hpp>

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emu {

enum class FeatureRow {
    management,
    conductivity,
    day_of_year,
    seasonal,
    planting_month,
    planting_year,
    time_since_cane,
    time_since_cowpea,
    time_since_fertiliser,
    time_since_millmud,
    cane_in,
    cowpea_in,
    persistent_fertiliser,
    persistent_millmud,
    rainfall,
    evaporation,
    fertiliser,
    millmud,
    smoothed_rainfall,
    smoothed_evaporation,
    smoothed_fertiliser,
    smoothed_millmud,
    count_
};

inline constexpr std::size_t kNumFeatureRows = static_cast<std::size_t>(FeatureRow::count_);
const char* to_string(FeatureRow row);

enum class CategoryEncoding { ordinal, one_hot };

/// Reconstructed crop cycle used when the run has no planting columns:
/// cane from the first day of the planting month/year for `cane_cycle_days`,
/// then a cowpea fallow, then cane again at the next planting month.
struct CropCalendarConfig {
    int cane_cycle_days = 4 * 365;
    int cowpea_days = 150;
};

struct FeatureSpec {
    std::vector<double> smoothing_alphas = {0.9, 0.5, 0.1};
    double seasonal_period = 365.25;
    std::array<bool, kNumFeatureRows> include = make_all_included();
    /// Fixed value reported before the first event; default is days of history so far.
    std::optional<double> time_since_cap;
    CategoryEncoding encoding = CategoryEncoding::ordinal;
    /// soil, pesticide, fertiliser, millmud category -> code.
    std::array<std::map<std::string, int>, 4> management_codes;
    std::map<std::string, int> conductivity_codes;
    CropCalendarConfig crop;

    bool includes(FeatureRow row) const { return include[static_cast<std::size_t>(row)]; }
    void validate() const;

    static std::array<bool, kNumFeatureRows> make_all_included() {
        std::array<bool, kNumFeatureRows> a{};
        a.fill(true);
        return a;
    }
};

void to_json(nlohmann::json& j, const FeatureSpec& spec);
void from_json(const nlohmann::json& j, FeatureSpec& spec);

/// Row-major day x feature matrix aligned with a run's calendar.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(Date start, std::vector<std::string> names, std::size_t rows);

    Date start() const { return start_; }
    Date date(std::size_t i) const { return add_days(start_, static_cast<std::int64_t>(i)); }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return names_.size(); }

    double& at(std::size_t row, std::size_t col) { return values_[row * cols() + col]; }
    double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    std::span<const double> row(std::size_t i) const { return {values_.data() + i * cols(), cols()}; }
    std::span<double> row(std::size_t i) { return {values_.data() + i * cols(), cols()}; }
    std::vector<double> column(std::size_t col) const;
    std::optional<std::size_t> index_of(const std::string& name) const;

    FeatureTable slice(std::size_t begin, std::size_t count) const;
    std::string to_csv() const;

    bool operator==(const FeatureTable&) const = default;

private:
    Date start_ = make_date(1970, 1, 1);
    std::vector<std::string> names_;
    std::size_t rows_ = 0;
    std::vector<double> values_;
};

/// s_0 = x_0, s_t = alpha * x_t + (1 - alpha) * s_{t-1}.
std::vector<double> exp_smooth(std::span<const double> series, double alpha);

struct SeasonalPair {
    double sin_component;
    double cos_component;
};
SeasonalPair seasonal_encoding(int day_index_in_year, double period);

/// Days since the most recent true flag at or before t. Before any event the
/// value is `sentinel` when given, otherwise t + 1.
std::vector<double> time_since_event(const std::vector<bool>& event_flags,
                                     std::optional<double> sentinel = std::nullopt);

/// Most recent strictly positive amount at or before t (0 before any).
std::vector<double> persistent_value(std::span<const double> amounts);

struct CropCalendar {
    std::vector<bool> cane_planted, cowpea_planted, cane_in, cowpea_in;
};

/// Crop events for `n` days from `start`, reconstructed from the scenario's
/// planting month and year.
CropCalendar reconstruct_crop_calendar(const ScenarioKey& key, const Date& start, std::size_t n,
                                       const CropCalendarConfig& cfg);

/// Feature names emitted for `spec` (deterministic).
std::vector<std::string> feature_names(const FeatureSpec& spec);

FeatureTable derive_features(const ModelRun& run, const FeatureSpec& spec);

} // namespace emu
