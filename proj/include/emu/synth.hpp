/**
 * @file synth.hpp
 * @brief Synthetic meteorology and a toy daily water/nitrogen balance
 *
 * The toy simulator stands in for a crop model so the pipeline can be
 * exercised end to end. One soil-water bucket drives runoff, drainage and
 * evapotranspiration; erosion scales with runoff and crop cover; dissolved
 * and leachable nitrogen pools are filled by fertiliser and mill mud and
 * emptied by runoff, drainage and first-order decay.
 */
#pragma once

#include "emu/dataset.hpp"
#include "emu/features.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace emu::synth {

/// Seasons are DJF, MAM, JJA, SON.
struct RainfallModel {
    std::array<double, 4> wet_day_probability{0.55, 0.35, 0.15, 0.25};
    double gamma_shape = 0.7;
    std::array<double, 4> gamma_scale{20.0, 12.0, 6.0, 10.0}; ///< mm
};

struct EvaporationModel {
    double mean = 4.5;      ///< mm/day
    double amplitude = 2.0; ///< mm/day
    int peak_day = 15;      ///< day of year of the maximum
    double noise_sd = 0.6;
};

struct Meteorology {
    std::string id;
    Date start;
    std::vector<double> rainfall;
    std::vector<double> evaporation;
};

struct Application {
    int day = 0;         ///< days after each planting anniversary
    double amount = 0.0; ///< kg N/ha for fertiliser, t/ha for mill mud
};

/// A management class; the codes become the ScenarioKey management entries.
struct ManagementClass {
    std::array<std::string, 4> codes{"0", "0", "0", "0"};
    std::vector<Application> fertiliser;
    std::vector<Application> millmud;
    double cover = 1.0; ///< multiplies crop cover in the erosion term
};

struct SoilType {
    std::string id = "0";
    std::string conductivity = "0";
    double capacity = 120.0;      ///< bucket size, mm
    double field_capacity = 0.6;  ///< fraction of capacity
    double drainage_rate = 0.25;  ///< fraction of water above field capacity per day
    double retention = 60.0;      ///< runoff retention parameter of a dry soil, mm
    double erodibility = 1.0;
};

struct Coefficients {
    double erosion = 0.02;
    double erosion_exponent = 1.4;
    double cover_cane = 0.4;
    double cover_cowpea = 0.6;
    double cover_bare = 1.0;
    double et_coefficient = 0.9;
    double dissolved_fraction = 0.15; ///< share of applied N entering the dissolved pool
    double dissolved_decay = 0.05;   ///< per day
    double leachable_decay = 0.02;   ///< per day
    double runoff_mixing = 100.0;    ///< mm
    double drainage_mixing = 20.0;   ///< mm
    double millmud_n = 8.0;          ///< kg N per tonne
    double millmud_release = 0.01;   ///< per day
    double mineralisation = 2.0;     ///< background N supply, kg N/ha/day
};

struct SynthConfig {
    int years = 50;
    int start_year = 1969;
    std::uint64_t seed = 0;
    int planting_month = 9;
    int planting_year = 1969;
    RainfallModel rainfall;
    EvaporationModel evaporation;
    Coefficients coefficients;
    CropCalendarConfig crop;
    std::vector<SoilType> soils;
    std::vector<ManagementClass> managements;

    /// 6 management classes x 2 soils.
    static SynthConfig reference();
    void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
/// Missing keys keep the reference values.
void from_json(const nlohmann::json& j, SynthConfig& c);

/// Daily series from 1 January of start_year for `years` calendar years.
Meteorology gen_meteorology(const SynthConfig& config);

/// Daily forcing calendar of a management class over a crop calendar.
struct Schedule {
    std::vector<double> fertiliser, millmud;
};
Schedule management_schedule(const ManagementClass& m, const CropCalendar& crop);

ModelRun toy_simulate(const Meteorology& met, const SoilType& soil, const ManagementClass& management,
                      const SynthConfig& config);

/// Every soil x management combination, ids "S<i>_M<j>" (1-based).
std::vector<ModelRun> reference_runs(const SynthConfig& config);

/// Forcing columns written by the generator.
std::vector<std::string> forcing_names();

/// Writes <id>.csv and <id>.scenario.json for each run.
void write_archive(const std::vector<ModelRun>& runs, const std::filesystem::path& dir);

} // namespace emu::synth
