#include "emu/clustering.hpp"

#include "emu/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace emu {

std::optional<double> sample_correlation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw Error(ErrorKind::LengthMismatch,
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    if (a.size() < 2)
        throw Error(ErrorKind::TooShort, "need at least 2 values");
    const double n = static_cast<double>(a.size());
    double mean_a = 0.0, mean_b = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i];
        mean_b += b[i];
    }
    mean_a /= n;
    mean_b /= n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - mean_a;
        const double db = b[i] - mean_b;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (!(saa > 0.0) || !(sbb > 0.0))
        return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> min_corr(const ModelRun& run_i, const ModelRun& run_j, const std::optional<DateRange>& window) {
    if (run_i.start != run_j.start || run_i.num_days() != run_j.num_days())
        throw Error(ErrorKind::DateMismatch, run_i.id + " vs " + run_j.id);
    IndexRange r{0, run_i.num_days()};
    if (window)
        r = index_range(run_i.start, run_i.num_days(), *window);
    std::optional<double> lowest;
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        const std::span<const double> a(run_i.outputs[k].data() + r.begin, r.size());
        const std::span<const double> b(run_j.outputs[k].data() + r.begin, r.size());
        const auto c = sample_correlation(a, b);
        if (!c)
            return std::nullopt;
        lowest = lowest ? std::min(*lowest, *c) : *c;
    }
    return lowest;
}

// ============================================================================
// Matrices
// ============================================================================

GroupKey GroupKey::of(const ScenarioKey& key) {
    return {key.meteorology_id, key.soil_type, key.conductivity, key.planting_month, key.planting_year};
}

std::string GroupKey::label() const {
    return "met=" + meteorology_id + ";soil=" + soil_type + ";cond=" + conductivity +
           ";pm=" + std::to_string(planting_month) + ";py=" + std::to_string(planting_year);
}

std::string MinCorrMatrix::to_csv() const {
    std::string out = "run_id";
    for (const auto& id : run_ids)
        out += "," + id;
    out += '\n';
    char buf[32];
    for (std::size_t i = 0; i < size(); ++i) {
        out += run_ids[i];
        for (std::size_t j = 0; j < size(); ++j) {
            out += ',';
            if (!defined(i, j)) {
                out += "NA";
            } else {
                auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, at(i, j));
                out.append(buf, ptr);
            }
        }
        out += '\n';
    }
    return out;
}

namespace {

MinCorrMatrix empty_matrix(std::span<const ModelRun* const> runs) {
    MinCorrMatrix m;
    for (const auto* r : runs)
        m.run_ids.push_back(r->id);
    m.values.assign(runs.size() * runs.size(), kUndefinedCorrelation);
    return m;
}

double entry(const ModelRun& a, const ModelRun& b, const std::optional<DateRange>& window) {
    const auto c = min_corr(a, b, window);
    return c ? *c : kUndefinedCorrelation;
}

} // namespace

MinCorrMatrix min_corr_matrix_serial(std::span<const ModelRun* const> runs, const std::optional<DateRange>& window) {
    MinCorrMatrix m = empty_matrix(runs);
    for (std::size_t i = 0; i < runs.size(); ++i)
        for (std::size_t j = i; j < runs.size(); ++j) {
            m.at(i, j) = entry(*runs[i], *runs[j], window);
            m.at(j, i) = m.at(i, j);
        }
    return m;
}

MinCorrMatrix min_corr_matrix(std::span<const ModelRun* const> runs, const std::optional<DateRange>& window) {
    MinCorrMatrix m = empty_matrix(runs);
    const std::size_t n = runs.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            pairs.emplace_back(i, j);
    // validate alignment up front; exceptions must not escape the parallel region
    for (std::size_t i = 1; i < n; ++i)
        if (runs[i]->start != runs[0]->start || runs[i]->num_days() != runs[0]->num_days())
            throw Error(ErrorKind::DateMismatch, runs[0]->id + " vs " + runs[i]->id);
    if (n > 0 && window) {
        const IndexRange r = index_range(runs[0]->start, runs[0]->num_days(), *window);
        if (r.size() < 2)
            throw Error(ErrorKind::TooShort, "correlation window has fewer than 2 days");
    }
#pragma omp parallel for schedule(dynamic)
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto [i, j] = pairs[p];
        const double v = entry(*runs[i], *runs[j], window);
        m.at(i, j) = v;
        m.at(j, i) = v;
    }
    return m;
}

std::map<GroupKey, MinCorrMatrix> build_matrices(std::span<const ModelRun> runs, const std::optional<DateRange>& window) {
    std::map<GroupKey, std::vector<const ModelRun*>> groups;
    for (const auto& r : runs)
        groups[GroupKey::of(r.key)].push_back(&r);
    std::map<GroupKey, MinCorrMatrix> out;
    for (auto& [key, members] : groups) {
        std::sort(members.begin(), members.end(), [](const ModelRun* a, const ModelRun* b) { return a->id < b->id; });
        out[key] = min_corr_matrix(members, window);
    }
    return out;
}

// ============================================================================
// Cluster extraction
// ============================================================================

namespace {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

bool edge(const MinCorrMatrix& m, std::size_t i, std::size_t j, double threshold) {
    return m.defined(i, j) && m.at(i, j) >= threshold;
}

// Bron-Kerbosch with pivoting; keeps the largest clique, ties broken by the
// lexicographically smallest sorted member-id list.
void max_clique(const MinCorrMatrix& m, double threshold, std::vector<std::size_t>& r, std::vector<std::size_t> p,
                std::vector<std::size_t> x, std::vector<std::size_t>& best,
                const std::vector<std::string>& ids) {
    if (p.empty() && x.empty()) {
        auto key = [&](const std::vector<std::size_t>& c) {
            std::vector<std::string> k;
            for (auto i : c)
                k.push_back(ids[i]);
            std::sort(k.begin(), k.end());
            return k;
        };
        if (r.size() > best.size() || (r.size() == best.size() && key(r) < key(best)))
            best = r;
        return;
    }
    if (r.size() + p.size() < best.size())
        return;
    std::size_t pivot = p.empty() ? x.front() : p.front();
    std::vector<std::size_t> candidates;
    for (auto v : p)
        if (!edge(m, pivot, v, threshold) || v == pivot)
            candidates.push_back(v);
    for (auto v : candidates) {
        std::vector<std::size_t> np, nx;
        for (auto u : p)
            if (u != v && edge(m, u, v, threshold))
                np.push_back(u);
        for (auto u : x)
            if (edge(m, u, v, threshold))
                nx.push_back(u);
        r.push_back(v);
        max_clique(m, threshold, r, np, nx, best, ids);
        r.pop_back();
        p.erase(std::find(p.begin(), p.end(), v));
        x.push_back(v);
    }
}

} // namespace

ClusterSet extract_clusters(const MinCorrMatrix& matrix, double threshold, ClusterMode mode) {
    if (!(threshold > -1.0 && threshold <= 1.0))
        throw Error(ErrorKind::InvalidConfig, "threshold must lie in (-1, 1]");
    const std::size_t n = matrix.size();
    std::vector<std::vector<std::string>> groups;

    if (mode == ClusterMode::components) {
        DisjointSets sets(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (edge(matrix, i, j, threshold))
                    sets.unite(i, j);
        std::map<std::size_t, std::vector<std::string>> by_root;
        for (std::size_t i = 0; i < n; ++i)
            by_root[sets.find(i)].push_back(matrix.run_ids[i]);
        for (auto& [root, members] : by_root)
            groups.push_back(std::move(members));
    } else {
        std::vector<std::size_t> remaining(n);
        std::iota(remaining.begin(), remaining.end(), 0);
        while (!remaining.empty()) {
            std::vector<std::size_t> r, best;
            max_clique(matrix, threshold, r, remaining, {}, best, matrix.run_ids);
            std::vector<std::string> members;
            for (auto i : best) {
                members.push_back(matrix.run_ids[i]);
                remaining.erase(std::find(remaining.begin(), remaining.end(), i));
            }
            groups.push_back(std::move(members));
        }
    }

    for (auto& g : groups)
        std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

    ClusterSet set;
    set.threshold = threshold;
    set.mode = mode;
    set.clusters = std::move(groups);
    for (const auto& c : set.clusters)
        if (c.size() == 1)
            set.singletons.push_back(c.front());
    return set;
}

ClusterMode parse_cluster_mode(const std::string& name) {
    if (name == "components")
        return ClusterMode::components;
    if (name == "mutual")
        return ClusterMode::mutual;
    throw Error(ErrorKind::InvalidConfig, "unknown cluster mode '" + name + "'");
}

const char* to_string(ClusterMode mode) { return mode == ClusterMode::components ? "components" : "mutual"; }

} // namespace emu
