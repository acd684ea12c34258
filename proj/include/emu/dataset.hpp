/**
 * @file dataset.hpp
 * @brief Run archive schema, CSV ingestion and calendar splits
 *
 * A run file is a CSV with one header row. The first mapped column is the ISO
 * date; the remaining columns are mapped to logical variable names through a
 * RunSchema so that any archive layout can be read without code changes.
 */
#pragma once

#include "emu/date.hpp"

#include <json.hpp>

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emu {

inline constexpr std::size_t kNumOutputs = 4;

/// Target variables, in the fixed order used by every model and report.
inline constexpr std::array<const char*, kNumOutputs> kOutputNames = {
    "runoff", "soil_loss", "DINrunoff", "Nleached"};

/// Index of an output variable name, or nullopt.
std::optional<std::size_t> output_index(const std::string& name);

struct ScenarioKey {
    std::string soil_type;
    /// soil, pesticide, fertiliser, millmud management classes.
    std::array<std::string, 4> management;
    std::string meteorology_id;
    int planting_month = 1;
    int planting_year = 1970;
    std::string conductivity;

    void validate() const;
    bool operator==(const ScenarioKey&) const = default;
};

void to_json(nlohmann::json& j, const ScenarioKey& key);
void from_json(const nlohmann::json& j, ScenarioKey& key);

/// One simulator run. Days are contiguous by construction: the calendar is
/// `start` plus `num_days()` consecutive days.
struct ModelRun {
    std::string id;
    ScenarioKey key;
    Date start = make_date(1970, 1, 1);
    std::map<std::string, std::vector<double>> forcings;
    std::array<std::vector<double>, kNumOutputs> outputs;

    std::size_t num_days() const { return outputs[0].size(); }
    Date date(std::size_t i) const { return add_days(start, static_cast<std::int64_t>(i)); }
    Date last_date() const { return date(num_days() - 1); }
    bool has_forcing(const std::string& name) const { return forcings.count(name) != 0; }
    const std::vector<double>& forcing(const std::string& name) const;

    /// Copy of days [begin, begin + count).
    ModelRun slice(std::size_t begin, std::size_t count) const;

    /// Checks every ModelRun invariant; throws the matching Error.
    void validate() const;

    bool operator==(const ModelRun&) const = default;
};

/// Column mapping for run CSVs.
struct RunSchema {
    std::string date_column = "date";
    /// logical name -> CSV header. Must include the four outputs.
    std::map<std::string, std::string> columns;
    /// Scenario applied to every file; otherwise `<stem>.scenario.json` is read.
    std::optional<ScenarioKey> scenario;
    std::vector<std::string> missing_tokens = {"", "NA", "NaN", "nan"};
    /// Clamp negative outputs to zero with a warning instead of failing.
    bool lenient = false;

    /// Identity mapping for the given logical names (header == logical name).
    static RunSchema identity(const std::vector<std::string>& forcing_names);
};

void to_json(nlohmann::json& j, const RunSchema& schema);
void from_json(const nlohmann::json& j, RunSchema& schema);

ModelRun load_run(const std::filesystem::path& path, const RunSchema& schema);

/// Parses CSV text directly (used by load_run and by tests).
ModelRun parse_run_csv(const std::string& text, const std::string& run_id, const ScenarioKey& key,
                       const RunSchema& schema);

/// Writes `run` in the schema's layout. Values use shortest round-trip
/// formatting, so load_run(write_run(r)) == r.
std::string format_run_csv(const ModelRun& run, const RunSchema& schema);
void write_run(const ModelRun& run, const std::filesystem::path& path, const RunSchema& schema);
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Loads every *.csv in `dir`, sorted by file name.
std::vector<ModelRun> load_runs(const std::filesystem::path& dir, const RunSchema& schema);

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct SplitSpec {
    DateRange train{make_date(1970, 1, 1), make_date(2010, 12, 31)};
    DateRange validation{make_date(2011, 1, 1), make_date(2015, 12, 31)};
    DateRange test{make_date(2016, 1, 1), make_date(2018, 11, 19)};

    void validate() const;
};

void to_json(nlohmann::json& j, const SplitSpec& spec);
void from_json(const nlohmann::json& j, SplitSpec& spec);

enum class SplitPart { train, validation, test };
const char* to_string(SplitPart part);
SplitPart parse_split_part(const std::string& name);

/// Half-open index interval into a run's days.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    bool empty() const { return begin == end; }
};

/// Day indices of `range` within a calendar starting at `start` with `n` days.
IndexRange index_range(const Date& start, std::size_t n, const DateRange& range);

struct SplitIndices {
    IndexRange train, validation, test;
    const IndexRange& operator[](SplitPart p) const;
};

/// Strict mode throws EmptySlice(which) for the first empty part.
SplitIndices split_indices(const ModelRun& run, const SplitSpec& spec, bool strict = true);

struct RunSplit {
    std::optional<ModelRun> train, validation, test;
};

/// Strict mode: every part must be non-empty. Relaxed mode: empty parts are nullopt.
RunSplit split_run(const ModelRun& run, const SplitSpec& spec, bool strict = true);

} // namespace emu
