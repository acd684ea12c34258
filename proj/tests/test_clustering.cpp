#include "emu/clustering.hpp"

#include "helpers.hpp"
#include "oracles.hpp"

using namespace emu;

namespace {

MinCorrMatrix matrix_of(std::vector<std::vector<double>> entries) {
    MinCorrMatrix m;
    for (std::size_t i = 0; i < entries.size(); ++i)
        m.run_ids.push_back(std::to_string(i + 1));
    for (const auto& row : entries)
        m.values.insert(m.values.end(), row.begin(), row.end());
    return m;
}

std::set<std::set<std::size_t>> as_index_sets(const ClusterSet& set, const MinCorrMatrix& m) {
    std::set<std::set<std::size_t>> out;
    for (const auto& cluster : set.clusters) {
        std::set<std::size_t> s;
        for (const auto& id : cluster)
            s.insert(static_cast<std::size_t>(std::find(m.run_ids.begin(), m.run_ids.end(), id) - m.run_ids.begin()));
        out.insert(s);
    }
    return out;
}

std::vector<std::vector<double>> rows_of(const MinCorrMatrix& m) {
    std::vector<std::vector<double>> rows(m.size(), std::vector<double>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            rows[i][j] = m.at(i, j);
    return rows;
}

std::vector<const ModelRun*> pointers(const std::vector<ModelRun>& runs) {
    std::vector<const ModelRun*> p;
    for (const auto& r : runs)
        p.push_back(&r);
    return p;
}

} // namespace

TEST_CASE("sample_correlation examples") {
    const std::vector<double> a{1, 2, 3}, b{3, 2, 1};
    CHECK(*sample_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(*sample_correlation(a, b) == doctest::Approx(-1.0).epsilon(1e-15));
    const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
    const double expected = static_cast<double>(oracle::pearson(x, y));
    CHECK(expected == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(*sample_correlation(x, y) == doctest::Approx(expected).epsilon(1e-14));
    const std::vector<double> flat{2, 2, 2};
    CHECK(!sample_correlation(a, flat));
    CHECK_ERROR_KIND(sample_correlation(a, x), ErrorKind::LengthMismatch);
}

TEST_CASE("sample_correlation agrees with the extended-precision oracle") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(57), b(57);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = g(rng) + 100.0;
            b[i] = 0.4 * a[i] + g(rng);
        }
        CHECK(std::abs(*sample_correlation(a, b) - static_cast<double>(oracle::pearson(a, b))) < 1e-12);
    }
}

TEST_CASE("min_corr examples") {
    std::mt19937_64 rng(2);
    auto group = oracle::random_group(rng, 2, 60);
    const ModelRun& a = group[0];
    CHECK(*min_corr(a, a) == doctest::Approx(1.0).epsilon(1e-14));

    ModelRun neg = a;
    for (double& v : neg.outputs[2])
        v = -v;
    CHECK(*min_corr(a, neg) == doctest::Approx(-1.0).epsilon(1e-14));

    // Known per-output correlations: min picks the smallest.
    const ModelRun& b = group[1];
    long double smallest = 2.0L;
    for (std::size_t k = 0; k < kNumOutputs; ++k)
        smallest = std::min(smallest, oracle::pearson(a.outputs[k], b.outputs[k]));
    CHECK(*min_corr(a, b) == doctest::Approx(static_cast<double>(smallest)).epsilon(1e-12));

    ModelRun flat = a;
    std::fill(flat.outputs[1].begin(), flat.outputs[1].end(), 0.0);
    CHECK(!min_corr(a, flat));
}

TEST_CASE("min_corr restricted to a window") {
    const Date start = make_date(1970, 1, 1);
    // Agree on the first 20 days, anti-correlated afterwards.
    const ModelRun a = test::make_run("a", start, 40, [](auto k, auto t) { return double(t * (k + 1)); });
    const ModelRun b = test::make_run("b", start, 40, [](auto k, auto t) {
        return t < 20 ? double(t * (k + 1)) : -double(t * (k + 1));
    });
    CHECK(*min_corr(a, b, DateRange{start, add_days(start, 19)}) == doctest::Approx(1.0));
    CHECK(*min_corr(a, b) < 0.5);
}

TEST_CASE("build_matrices groups by everything but management") {
    std::mt19937_64 rng(3);
    auto runs = oracle::random_group(rng, 3, 50);
    auto other = oracle::random_group(rng, 2, 50);
    for (auto& r : other) {
        r.id = "x" + r.id;
        r.key.soil_type = "2";
    }
    const auto one = build_matrices(runs);
    REQUIRE(one.size() == 1);
    const auto& m = one.begin()->second;
    CHECK(m.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(m.at(i, i) == doctest::Approx(1.0).epsilon(1e-14));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(m.at(i, j) == m.at(j, i));

    runs.insert(runs.end(), other.begin(), other.end());
    const auto two = build_matrices(runs);
    REQUIRE(two.size() == 2);
    std::size_t total = 0;
    for (const auto& [key, mat] : two) {
        total += mat.size();
        for (const auto& id : mat.run_ids)
            CHECK((id[0] == 'x') == (key.soil_type == "2"));
    }
    CHECK(total == 5);

    std::vector<ModelRun> single{runs.front()};
    const auto lone = build_matrices(single);
    REQUIRE(lone.size() == 1);
    CHECK(lone.begin()->second.size() == 1);
    CHECK(lone.begin()->second.at(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("extract_clusters examples") {
    const auto m = matrix_of({{1.0, 0.97, 0.80}, {0.97, 1.0, 0.96}, {0.80, 0.96, 1.0}});
    const auto joined = extract_clusters(m, 0.95);
    CHECK(joined.clusters == std::vector<std::vector<std::string>>{{"1", "2", "3"}});
    CHECK(joined.singletons.empty());

    const auto strict = extract_clusters(m, 1.0);
    CHECK(strict.clusters == std::vector<std::vector<std::string>>{{"1"}, {"2"}, {"3"}});
    CHECK(strict.singletons == std::vector<std::string>{"1", "2", "3"});

    // Mutual mode needs every pair above threshold.
    const auto mutual = extract_clusters(m, 0.95, ClusterMode::mutual);
    CHECK(mutual.clusters.size() == 2);

    auto undefined = matrix_of({{1.0, kUndefinedCorrelation}, {kUndefinedCorrelation, 1.0}});
    CHECK(extract_clusters(undefined, -0.999).clusters.size() == 2);
}

TEST_CASE("extract_clusters matches a union-find oracle and refines with threshold") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto runs = oracle::random_group(rng, 6, 50);
        const auto ptrs = pointers(runs);
        const MinCorrMatrix m = min_corr_matrix(ptrs, std::nullopt);
        for (std::size_t i = 0; i < runs.size(); ++i)
            for (std::size_t j = 0; j < runs.size(); ++j)
                CHECK(std::abs(m.at(i, j) - oracle::min_corr(runs[i], runs[j])) < 1e-12);
        const auto rows = rows_of(m);
        std::set<std::set<std::size_t>> previous;
        for (double th : {0.99, 0.95, 0.9, 0.85, 0.5}) {
            const auto got = as_index_sets(extract_clusters(m, th), m);
            CHECK(got == oracle::components(rows, th));
            if (!previous.empty())
                CHECK(oracle::refines(previous, got));
            previous = got;
        }
    }
}

TEST_CASE("cluster membership is invariant to run order and affine output transforms") {
    std::mt19937_64 rng(5);
    auto runs = oracle::random_group(rng, 7, 60);
    const auto base = build_matrices(runs).begin()->second;
    const auto reference = extract_clusters(base, 0.9).clusters;

    std::shuffle(runs.begin(), runs.end(), rng);
    CHECK(extract_clusters(build_matrices(runs).begin()->second, 0.9).clusters == reference);

    for (auto& r : runs)
        for (auto& series : r.outputs)
            for (double& v : series)
                v = 3.5 * v + 12.0;
    const auto scaled = build_matrices(runs).begin()->second;
    for (std::size_t i = 0; i < base.size(); ++i)
        for (std::size_t j = 0; j < base.size(); ++j)
            CHECK(scaled.at(i, j) == doctest::Approx(base.at(i, j)).epsilon(1e-12));
}

TEST_CASE("parallel matrix is bitwise identical to the serial one") {
    std::mt19937_64 rng(6);
    const auto runs = oracle::random_group(rng, 12, 400);
    const auto ptrs = pointers(runs);
    const DateRange window{make_date(1970, 2, 1), make_date(1970, 12, 1)};
    for (const auto& w : {std::optional<DateRange>{}, std::optional<DateRange>{window}}) {
        const auto serial = min_corr_matrix_serial(ptrs, w);
        const auto parallel = min_corr_matrix(ptrs, w);
        CHECK(serial.run_ids == parallel.run_ids);
        CHECK(std::memcmp(serial.values.data(), parallel.values.data(), serial.values.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("matrix CSV marks undefined entries") {
    auto m = matrix_of({{1.0, kUndefinedCorrelation}, {kUndefinedCorrelation, 1.0}});
    const std::string csv = m.to_csv();
    CHECK(csv.find("NA") != std::string::npos);
    CHECK(csv.rfind("run_id,1,2\n", 0) == 0);
}
