#include "emu/features.hpp"

#include "helpers.hpp"

#include <cmath>
#include <numbers>
#include <set>

using namespace emu;

namespace {

ModelRun driven_run(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ModelRun run = test::make_run("r", make_date(1970, 1, 1), n, [&](auto, auto) { return u(rng); });
    for (std::size_t t = 0; t < n; ++t) {
        run.forcings["rainfall"][t] = u(rng) < 0.3 ? 20.0 * u(rng) : 0.0;
        run.forcings["evaporation"][t] = 3.0 + u(rng);
        run.forcings["fertiliser"][t] = t % 97 == 40 ? 150.0 : 0.0;
        run.forcings["millmud"][t] = t % 400 == 10 ? 30.0 : 0.0;
    }
    return run;
}

} // namespace

TEST_CASE("exp_smooth recurrence") {
    const std::vector<double> x{1, 0, 0};
    const auto s = exp_smooth(x, 0.5);
    REQUIRE(s.size() == 3);
    // s0 = 1, s1 = 0.5*0 + 0.5*1, s2 = 0.5*0 + 0.5*0.5
    CHECK(s[0] == 1.0);
    CHECK(s[1] == 0.5);
    CHECK(s[2] == 0.25);

    const std::vector<double> c(5, 3.25);
    for (double a : {0.1, 0.5, 0.9})
        for (double v : exp_smooth(c, a))
            CHECK(v == doctest::Approx(3.25).epsilon(1e-15));
    const std::vector<double> z(4, 0.0);
    CHECK(exp_smooth(z, 0.1) == z);

    for (double bad : {0.0, 1.0, -0.5, 1.5})
        CHECK_ERROR_KIND(exp_smooth(x, bad), ErrorKind::AlphaOutOfRange);
}

TEST_CASE("exp_smooth stays within the series range") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5.0, 7.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(100);
        for (auto& v : x)
            v = u(rng);
        const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
        for (double s : exp_smooth(x, 0.05 + 0.9 * (trial / 50.0))) {
            CHECK(s >= *lo);
            CHECK(s <= *hi);
        }
    }
}

TEST_CASE("seasonal encoding") {
    const auto full = seasonal_encoding(365, 365.0);
    CHECK(std::abs(full.sin_component) < 1e-9);
    CHECK(std::abs(full.cos_component - 1.0) < 1e-9);
    const auto quarter = seasonal_encoding(91, 364.0);
    CHECK(std::abs(quarter.sin_component - 1.0) < 1e-9);
    CHECK(std::abs(quarter.cos_component) < 1e-9);

    // Oracle in extended precision.
    const long double angle = 2.0L * std::numbers::pi_v<long double> * 100.0L / 365.25L;
    const auto d100 = seasonal_encoding(100, 365.25);
    CHECK(std::abs(d100.sin_component - static_cast<double>(std::sin(angle))) < 1e-12);
    CHECK(std::abs(d100.cos_component - static_cast<double>(std::cos(angle))) < 1e-12);
}

TEST_CASE("time_since_event") {
    CHECK(time_since_event({false, true, false, false}) == std::vector<double>{1, 0, 1, 2});
    CHECK(time_since_event({false, false, true}) == std::vector<double>{1, 2, 0});
    CHECK(time_since_event({false, true, false, false}, 999.0) == std::vector<double>{999, 0, 1, 2});
    CHECK(time_since_event({true, true, true}) == std::vector<double>{0, 0, 0});
    CHECK(time_since_event({true, false, true, false}) == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("persistent_value") {
    CHECK(persistent_value(std::vector<double>{0, 5, 0, 0, 2, 0}) == std::vector<double>{0, 5, 5, 5, 2, 2});
    CHECK(persistent_value(std::vector<double>{0, 0, 0}) == std::vector<double>{0, 0, 0});
    CHECK(persistent_value(std::vector<double>{3, 0, 0}) == std::vector<double>{3, 3, 3});
}

TEST_CASE("feature names for the default spec") {
    const auto names = feature_names(FeatureSpec{});
    const std::vector<std::string> expected = {
        "mgmt_soil", "mgmt_pesticide", "mgmt_fertiliser", "mgmt_millmud", "conductivity", "day_of_year",
        "season_sin", "season_cos", "planting_month", "planting_year", "days_since_cane_planted",
        "days_since_cowpea_planted", "days_since_fertiliser", "days_since_millmud", "cane_in", "cowpea_in",
        "persistent_fertiliser", "persistent_millmud", "rainfall", "evaporation", "fertiliser", "millmud",
        "rainfall_ema0.9", "rainfall_ema0.5", "rainfall_ema0.1", "evaporation_ema0.9", "evaporation_ema0.5",
        "evaporation_ema0.1", "fertiliser_ema0.9", "fertiliser_ema0.5", "fertiliser_ema0.1", "millmud_ema0.9",
        "millmud_ema0.5", "millmud_ema0.1"};
    CHECK(names == expected);
    // 22 scalar columns (seasonal contributes sin and cos) + 4 drivers x 3 alphas.
    CHECK(names.size() == 22 + 4 * 3);
    std::set<std::string> unique(names.begin(), names.end());
    CHECK(unique.size() == names.size());
}

TEST_CASE("derive_features basic rows") {
    ModelRun run = driven_run(800, 3);
    const FeatureSpec spec;
    const FeatureTable table = derive_features(run, spec);
    CHECK(table.rows() == run.num_days());
    CHECK(table.names() == feature_names(spec));
    CHECK(table.at(0, *table.index_of("day_of_year")) == 1.0);
    CHECK(table.at(365, *table.index_of("day_of_year")) == 1.0);
    CHECK(table.at(10, *table.index_of("mgmt_fertiliser")) == 1.0);
    const auto fert_days = table.column(*table.index_of("days_since_fertiliser"));
    CHECK(fert_days[40] == 0.0);
    CHECK(fert_days[45] == 5.0);
    CHECK(fert_days[39] == 40.0);
    const auto persistent = table.column(*table.index_of("persistent_fertiliser"));
    CHECK(persistent[39] == 0.0);
    CHECK(persistent[60] == 150.0);
    // planting_month flags September days, planting_year flags 1970.
    const auto pm = table.column(*table.index_of("planting_month"));
    const auto py = table.column(*table.index_of("planting_year"));
    CHECK(pm[0] == 0.0);
    CHECK(pm[243] == 1.0); // 1970-09-01
    CHECK(py[364] == 1.0);
    CHECK(py[365] == 0.0);
    for (std::size_t r = 0; r < table.rows(); ++r)
        for (double v : table.row(r))
            REQUIRE(std::isfinite(v));
    CHECK(derive_features(run, spec) == table);
}

TEST_CASE("zero rainfall gives zero rainfall-derived features") {
    ModelRun run = driven_run(200, 4);
    std::fill(run.forcings["rainfall"].begin(), run.forcings["rainfall"].end(), 0.0);
    const FeatureTable table = derive_features(run, FeatureSpec{});
    for (const auto& name : table.names())
        if (name.rfind("rainfall", 0) == 0)
            for (double v : table.column(*table.index_of(name)))
                CHECK(v == 0.0);
}

TEST_CASE("features are causal") {
    const ModelRun run = driven_run(600, 5);
    const FeatureTable full = derive_features(run, FeatureSpec{});
    for (std::size_t t : {1u, 17u, 250u, 599u}) {
        const FeatureTable prefix = derive_features(run.slice(0, t), FeatureSpec{});
        CHECK(prefix == full.slice(0, t));
    }
}

TEST_CASE("missing forcing is reported only when its rows are included") {
    ModelRun run = driven_run(50, 6);
    run.forcings.erase("millmud");
    FeatureSpec spec;
    CHECK_ERROR_KIND(derive_features(run, spec), ErrorKind::MissingForcing);
    for (auto row : {FeatureRow::millmud, FeatureRow::smoothed_millmud, FeatureRow::persistent_millmud,
                     FeatureRow::time_since_millmud})
        spec.include[static_cast<std::size_t>(row)] = false;
    const FeatureTable table = derive_features(run, spec);
    CHECK(!table.index_of("millmud"));
    CHECK(table.index_of("fertiliser"));
}

TEST_CASE("category encodings") {
    ModelRun run = driven_run(10, 7);
    run.key.management = {"trash", "1", "1", "1"};
    FeatureSpec spec;
    CHECK_ERROR_KIND(derive_features(run, spec), ErrorKind::UnknownCategory);
    spec.management_codes[0] = {{"burnt", 0}, {"trash", 4}};
    CHECK(derive_features(run, spec).at(0, 0) == 4.0);

    spec.encoding = CategoryEncoding::one_hot;
    spec.management_codes = {std::map<std::string, int>{{"burnt", 0}, {"trash", 1}},
                             {{"1", 0}}, {{"1", 0}}, {{"1", 0}}};
    spec.conductivity_codes = {{"1", 0}, {"2", 1}};
    const FeatureTable t = derive_features(run, spec);
    CHECK(t.at(3, *t.index_of("mgmt_soil=burnt")) == 0.0);
    CHECK(t.at(3, *t.index_of("mgmt_soil=trash")) == 1.0);
    CHECK(t.at(3, *t.index_of("conductivity=1")) == 1.0);
    CHECK(t.at(3, *t.index_of("conductivity=2")) == 0.0);
}

TEST_CASE("crop calendar reconstruction and forcing override") {
    ScenarioKey key;
    key.planting_month = 9;
    key.planting_year = 1970;
    CropCalendarConfig cfg;
    cfg.cane_cycle_days = 100;
    cfg.cowpea_days = 30;
    const Date start = make_date(1970, 1, 1);
    const auto cal = reconstruct_crop_calendar(key, start, 800, cfg);
    const std::size_t plant = static_cast<std::size_t>(days_between(start, make_date(1970, 9, 1)));
    CHECK(!cal.cane_in[plant - 1]);
    CHECK(cal.cane_planted[plant]);
    CHECK(cal.cane_in[plant]);
    CHECK(cal.cane_in[plant + 99]);
    CHECK(!cal.cane_in[plant + 100]);
    CHECK(cal.cowpea_planted[plant + 100]);
    CHECK(cal.cowpea_in[plant + 129]);
    CHECK(!cal.cowpea_in[plant + 130]);
    const std::size_t replant = static_cast<std::size_t>(days_between(start, make_date(1971, 9, 1)));
    CHECK(cal.cane_planted[replant]);
    CHECK(std::count(cal.cane_planted.begin(), cal.cane_planted.end(), true) == 2);

    ModelRun run = driven_run(30, 8);
    run.forcings["cane_in"].assign(30, 1.0);
    const FeatureTable t = derive_features(run, FeatureSpec{});
    CHECK(t.at(0, *t.index_of("cane_in")) == 1.0);
}

TEST_CASE("FeatureSpec JSON") {
    FeatureSpec spec;
    spec.smoothing_alphas = {0.3};
    spec.time_since_cap = 400.0;
    spec.include[static_cast<std::size_t>(FeatureRow::day_of_year)] = false;
    const nlohmann::json j = spec;
    const FeatureSpec back = j.get<FeatureSpec>();
    CHECK(feature_names(back) == feature_names(spec));
    CHECK(back.time_since_cap == 400.0);

    nlohmann::json bad = j;
    bad["smoothing_alphas"] = {1.2};
    CHECK_ERROR_KIND(bad.get<FeatureSpec>(), ErrorKind::AlphaOutOfRange);
    bad = j;
    bad["unexpected"] = true;
    CHECK_ERROR_KIND(bad.get<FeatureSpec>(), ErrorKind::InvalidConfig);
}
