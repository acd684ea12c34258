/**
 * @file clustering.hpp
 * @brief Minimum-correlation matrices over runs and threshold clusters
 *
 * Two runs are compared by C_min = min over the four outputs of the Pearson
 * correlation of their daily series. Runs sharing a GroupKey (everything in
 * the scenario except management) form one matrix; clusters are connected
 * components of the graph whose edges have C_min >= threshold.
 */
#pragma once

#include "emu/dataset.hpp"

#include <json.hpp>

#include <compare>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emu {

/// Stand-in for an undefined correlation (constant series). Compares below
/// every threshold.
inline constexpr double kUndefinedCorrelation = -std::numeric_limits<double>::infinity();

/// Pearson sample correlation; nullopt when either series is constant.
std::optional<double> sample_correlation(std::span<const double> a, std::span<const double> b);

/// Minimum correlation over the four outputs, restricted to `window` when
/// given. nullopt when any output correlation is undefined.
std::optional<double> min_corr(const ModelRun& run_i, const ModelRun& run_j,
                               const std::optional<DateRange>& window = std::nullopt);

struct GroupKey {
    std::string meteorology_id;
    std::string soil_type;
    std::string conductivity;
    int planting_month = 0;
    int planting_year = 0;

    static GroupKey of(const ScenarioKey& key);
    std::string label() const;
    auto operator<=>(const GroupKey&) const = default;
};

struct MinCorrMatrix {
    std::vector<std::string> run_ids;
    /// Row-major n x n; undefined entries hold kUndefinedCorrelation.
    std::vector<double> values;

    std::size_t size() const { return run_ids.size(); }
    double at(std::size_t i, std::size_t j) const { return values[i * size() + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * size() + j]; }
    bool defined(std::size_t i, std::size_t j) const { return at(i, j) != kUndefinedCorrelation; }

    /// Header row of run ids; undefined entries written as NA.
    std::string to_csv() const;
};

/// Serial reference: one pair at a time in (i, j) order.
MinCorrMatrix min_corr_matrix_serial(std::span<const ModelRun* const> runs, const std::optional<DateRange>& window);
/// OpenMP over pairs. Each entry is computed in isolation, so the result is
/// bitwise identical to the serial version.
MinCorrMatrix min_corr_matrix(std::span<const ModelRun* const> runs, const std::optional<DateRange>& window);

/// Partitions runs by GroupKey and builds one matrix per group. Within a
/// group, runs are ordered by id.
std::map<GroupKey, MinCorrMatrix> build_matrices(std::span<const ModelRun> runs,
                                                 const std::optional<DateRange>& window = std::nullopt);

enum class ClusterMode {
    components, ///< connected components (transitive closure)
    mutual,     ///< greedy maximum cliques, every pair above threshold
};

struct ClusterSet {
    double threshold = 0.95;
    ClusterMode mode = ClusterMode::components;
    /// Partition of all runs. Members sorted by id; clusters ordered by
    /// their smallest member.
    std::vector<std::vector<std::string>> clusters;
    /// Runs whose cluster has a single member.
    std::vector<std::string> singletons;
};

ClusterSet extract_clusters(const MinCorrMatrix& matrix, double threshold,
                            ClusterMode mode = ClusterMode::components);

ClusterMode parse_cluster_mode(const std::string& name);
const char* to_string(ClusterMode mode);

} // namespace emu
