#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance binary. Nothing here calls into the library code under test.

#include "emu/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <vector>

namespace oracle {

/// Two-pass Pearson correlation in extended precision.
inline long double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    long double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    long double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const long double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    return sab / std::sqrt(saa * sbb);
}

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x)
            x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

/// Connected components of {(i, j) : corr(i, j) >= threshold} by exhaustive
/// pairwise check, as a set of index sets.
inline std::set<std::set<std::size_t>> components(const std::vector<std::vector<double>>& corr, double threshold) {
    const std::size_t n = corr.size();
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (corr[i][j] >= threshold)
                uf.unite(i, j);
    std::vector<std::set<std::size_t>> by_root(n);
    for (std::size_t i = 0; i < n; ++i)
        by_root[uf.find(i)].insert(i);
    std::set<std::set<std::size_t>> out;
    for (auto& s : by_root)
        if (!s.empty())
            out.insert(s);
    return out;
}

/// Every fine cluster lies inside exactly one coarse cluster.
inline bool refines(const std::set<std::set<std::size_t>>& fine, const std::set<std::set<std::size_t>>& coarse) {
    for (const auto& f : fine) {
        int containing = 0;
        for (const auto& c : coarse)
            if (std::includes(c.begin(), c.end(), f.begin(), f.end()))
                ++containing;
        if (containing != 1)
            return false;
    }
    return true;
}

/// A group of runs sharing one scenario group, with outputs built from a
/// few shared base signals plus run-specific noise so that correlations
/// spread across typical thresholds.
inline std::vector<emu::ModelRun> random_group(std::mt19937_64& rng, std::size_t runs, std::size_t length) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::array<std::vector<double>, emu::kNumOutputs> base;
    for (auto& b : base) {
        b.resize(length);
        for (auto& v : b)
            v = g(rng);
    }
    std::vector<emu::ModelRun> out(runs);
    for (std::size_t r = 0; r < runs; ++r) {
        auto& run = out[r];
        run.id = "run" + std::to_string(r);
        run.key.soil_type = "1";
        run.key.management = {"1", "1", "1", std::to_string(r)};
        run.key.meteorology_id = "m";
        run.key.planting_month = 9;
        run.key.planting_year = 1970;
        run.key.conductivity = "1";
        run.start = emu::make_date(1970, 1, 1);
        const double noise = 0.05 + 0.6 * u(rng) * u(rng);
        for (std::size_t k = 0; k < emu::kNumOutputs; ++k) {
            run.outputs[k].resize(length);
            for (std::size_t t = 0; t < length; ++t)
                run.outputs[k][t] = base[k][t] + noise * g(rng);
        }
    }
    return out;
}

/// Minimum over outputs of the oracle Pearson correlation.
inline double min_corr(const emu::ModelRun& a, const emu::ModelRun& b) {
    long double m = 2.0L;
    for (std::size_t k = 0; k < emu::kNumOutputs; ++k)
        m = std::min(m, pearson(a.outputs[k], b.outputs[k]));
    return static_cast<double>(m);
}


// ---------------------------------------------------------------------------
// Network evaluation from a flat parameter vector with plain loops. Layout:
// per GRU layer W (3h x d_in), U (3h x h), b (3h) with gates stacked z, r, h;
// then per dense layer W (out x in), b (out); the last dense layer is linear.
// ---------------------------------------------------------------------------

using Vec = std::vector<double>;

struct Cursor {
    const std::vector<double>& p;
    std::size_t at = 0;
    double next() { return p[at++]; }
};

/// y = W x + b for a row-major W read from the cursor, then b.
inline Vec affine(Cursor& c, const Vec& x, std::size_t rows) {
    std::vector<Vec> W(rows, Vec(x.size()));
    for (auto& row : W)
        for (auto& w : row)
            w = c.next();
    Vec y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        long double acc = 0;
        for (std::size_t j = 0; j < x.size(); ++j)
            acc += static_cast<long double>(W[i][j]) * x[j];
        y[i] = static_cast<double>(acc);
    }
    for (auto& v : y)
        v += c.next();
    return y;
}

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

struct GruDims {
    std::size_t input, width;
};

/// One GRU layer over a whole sequence; `standard` applies the reset gate to
/// the previous state inside the candidate.
inline std::vector<Vec> gru_sequence(Cursor& c, const std::vector<Vec>& xs, GruDims d, bool standard) {
    const std::size_t h = d.width;
    std::vector<Vec> W(3 * h, Vec(d.input)), U(3 * h, Vec(h));
    Vec b(3 * h);
    for (auto& row : W)
        for (auto& w : row)
            w = c.next();
    for (auto& row : U)
        for (auto& w : row)
            w = c.next();
    for (auto& v : b)
        v = c.next();
    auto dot = [](const Vec& a, const Vec& x) {
        long double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            acc += static_cast<long double>(a[i]) * x[i];
        return static_cast<double>(acc);
    };
    Vec state(h, 0.0);
    std::vector<Vec> out;
    for (const auto& x : xs) {
        Vec z(h), r(h), cand(h), next(h);
        for (std::size_t i = 0; i < h; ++i) {
            z[i] = sigmoid(dot(W[i], x) + dot(U[i], state) + b[i]);
            r[i] = sigmoid(dot(W[h + i], x) + dot(U[h + i], state) + b[h + i]);
        }
        Vec gated(h);
        for (std::size_t i = 0; i < h; ++i)
            gated[i] = standard ? r[i] * state[i] : state[i];
        for (std::size_t i = 0; i < h; ++i)
            cand[i] = std::tanh(dot(W[2 * h + i], x) + dot(U[2 * h + i], gated) + b[2 * h + i]);
        for (std::size_t i = 0; i < h; ++i)
            next[i] = (1.0 - z[i]) * state[i] + z[i] * cand[i];
        state = next;
        out.push_back(state);
    }
    return out;
}

struct NetDims {
    std::size_t input = 1;
    std::vector<std::size_t> gru_widths;
    std::vector<std::size_t> dense_widths; ///< hidden ReLU layers
    std::size_t output = 4;
    bool standard = true;
};

inline Vec network(const std::vector<double>& params, const NetDims& d, const std::vector<Vec>& xs) {
    Cursor c{params};
    std::vector<Vec> seq = xs;
    std::size_t in = d.input;
    for (std::size_t w : d.gru_widths) {
        seq = gru_sequence(c, seq, {in, w}, d.standard);
        in = w;
    }
    Vec y = seq.back();
    for (std::size_t w : d.dense_widths) {
        y = affine(c, y, w);
        for (auto& v : y)
            v = std::max(v, 0.0);
    }
    return affine(c, y, d.output);
}

/// Central finite differences of a scalar function of a parameter vector.
template <typename F>
std::vector<double> finite_difference(std::vector<double> params, F loss, double step) {
    std::vector<double> g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double keep = params[i];
        params[i] = keep + step;
        const double up = loss(params);
        params[i] = keep - step;
        const double down = loss(params);
        params[i] = keep;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

/// Largest |a - b| / max(|a|, |b|) over entries; pairs where both sides are
/// below `floor` in magnitude count as agreeing.
inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-9) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
        if (scale < floor)
            continue;
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

} // namespace oracle
