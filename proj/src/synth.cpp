#include "emu/synth.hpp"

#include "emu/error.hpp"
#include "emu/seed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace emu::synth {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RainfallModel, wet_day_probability, gamma_shape, gamma_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvaporationModel, mean, amplitude, peak_day, noise_sd)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Application, day, amount)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ManagementClass, codes, fertiliser, millmud, cover)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SoilType, id, conductivity, capacity, field_capacity, drainage_rate,
                                                retention, erodibility)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Coefficients, erosion, erosion_exponent, cover_cane, cover_cowpea,
                                                cover_bare, et_coefficient, dissolved_fraction, dissolved_decay,
                                                leachable_decay, runoff_mixing, drainage_mixing, millmud_n,
                                                millmud_release, mineralisation)

SynthConfig SynthConfig::reference() {
    SynthConfig c;
    c.soils = {
        SoilType{"1", "1", 120.0, 0.6, 0.25, 25.0, 1.0},
        SoilType{"2", "2", 180.0, 0.7, 0.10, 35.0, 0.6},
    };
    // codes: soil management, pesticide, fertiliser, mill mud
    c.managements = {
        ManagementClass{{"1", "1", "1", "0"}, {{45, 160.0}}, {}, 1.0},
        ManagementClass{{"1", "1", "2", "0"}, {{45, 200.0}}, {}, 1.0},
        ManagementClass{{"2", "1", "3", "0"}, {{45, 120.0}}, {}, 0.7},
        ManagementClass{{"1", "2", "4", "0"}, {{45, 90.0}, {120, 70.0}}, {}, 1.0},
        ManagementClass{{"1", "2", "5", "0"}, {{150, 160.0}}, {}, 1.0},
        ManagementClass{{"2", "1", "6", "1"}, {{45, 100.0}}, {{0, 40.0}}, 0.7},
    };
    return c;
}

void SynthConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, "synth: " + msg); };
    if (years < 1)
        fail("years must be >= 1");
    if (planting_month < 1 || planting_month > 12)
        fail("planting_month must be in 1..12");
    for (double p : rainfall.wet_day_probability)
        if (!(p >= 0.0 && p <= 1.0))
            fail("wet-day probabilities must lie in [0, 1]");
    if (!(rainfall.gamma_shape > 0.0))
        fail("gamma_shape must be > 0");
    for (double s : rainfall.gamma_scale)
        if (!(s > 0.0))
            fail("gamma_scale must be > 0");
    if (!(evaporation.mean >= 0.0 && evaporation.amplitude >= 0.0 && evaporation.noise_sd >= 0.0))
        fail("evaporation parameters must be >= 0");
    const Coefficients& k = coefficients;
    for (double v : {k.erosion, k.erosion_exponent, k.cover_cane, k.cover_cowpea, k.cover_bare, k.et_coefficient,
                     k.dissolved_decay, k.leachable_decay, k.millmud_n, k.millmud_release, k.mineralisation})
        if (!(v >= 0.0))
            fail("coefficients must be >= 0");
    for (double v : {k.dissolved_fraction, k.dissolved_decay, k.leachable_decay, k.millmud_release})
        if (v > 1.0)
            fail("fractions and daily rates must be <= 1");
    if (!(k.runoff_mixing > 0.0 && k.drainage_mixing > 0.0))
        fail("mixing depths must be > 0");
    for (const auto& s : soils)
        if (!(s.capacity > 0.0 && s.field_capacity >= 0.0 && s.field_capacity <= 1.0 && s.drainage_rate >= 0.0 &&
              s.drainage_rate <= 1.0 && s.retention > 0.0 && s.erodibility >= 0.0))
            fail("invalid soil " + s.id);
    for (const auto& m : managements) {
        if (!(m.cover >= 0.0))
            fail("cover must be >= 0");
        for (const auto* apps : {&m.fertiliser, &m.millmud})
            for (const auto& a : *apps)
                if (a.day < 0 || !(a.amount >= 0.0))
                    fail("applications need day >= 0 and amount >= 0");
    }
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
    j = nlohmann::json{{"years", c.years},
                       {"start_year", c.start_year},
                       {"seed", c.seed},
                       {"planting_month", c.planting_month},
                       {"planting_year", c.planting_year},
                       {"rainfall", c.rainfall},
                       {"evaporation", c.evaporation},
                       {"coefficients", c.coefficients},
                       {"crop", {{"cane_cycle_days", c.crop.cane_cycle_days}, {"cowpea_days", c.crop.cowpea_days}}},
                       {"soils", c.soils},
                       {"managements", c.managements}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
    static const std::vector<std::string> known = {"years", "start_year", "seed", "planting_month",
                                                   "planting_year", "rainfall", "evaporation", "coefficients",
                                                   "crop", "soils", "managements"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown synth key '" + k + "'");
    c = SynthConfig::reference();
    c.years = j.value("years", c.years);
    c.start_year = j.value("start_year", c.start_year);
    c.seed = j.value("seed", c.seed);
    c.planting_month = j.value("planting_month", c.planting_month);
    c.planting_year = j.value("planting_year", c.planting_year);
    if (j.contains("rainfall"))
        c.rainfall = j["rainfall"].get<RainfallModel>();
    if (j.contains("evaporation"))
        c.evaporation = j["evaporation"].get<EvaporationModel>();
    if (j.contains("coefficients"))
        c.coefficients = j["coefficients"].get<Coefficients>();
    if (j.contains("crop")) {
        c.crop.cane_cycle_days = j["crop"].value("cane_cycle_days", c.crop.cane_cycle_days);
        c.crop.cowpea_days = j["crop"].value("cowpea_days", c.crop.cowpea_days);
    }
    if (j.contains("soils"))
        c.soils = j["soils"].get<std::vector<SoilType>>();
    if (j.contains("managements"))
        c.managements = j["managements"].get<std::vector<ManagementClass>>();
    c.validate();
}

namespace {

int season_of(unsigned month) {
    if (month == 12 || month <= 2)
        return 0;
    if (month <= 5)
        return 1;
    if (month <= 8)
        return 2;
    return 3;
}

} // namespace

Meteorology gen_meteorology(const SynthConfig& config) {
    config.validate();
    Meteorology met;
    met.id = std::to_string(config.seed);
    met.start = make_date(config.start_year, 1, 1);
    const auto n = static_cast<std::size_t>(days_between(met.start, make_date(config.start_year + config.years, 1, 1)));
    met.rainfall.resize(n);
    met.evaporation.resize(n);

    std::mt19937_64 rain_rng(derive_seed(config.seed, "synth/rainfall"));
    std::mt19937_64 evap_rng(derive_seed(config.seed, "synth/evaporation"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::array<std::gamma_distribution<double>, 4> intensity;
    for (int s = 0; s < 4; ++s)
        intensity[static_cast<std::size_t>(s)] =
            std::gamma_distribution<double>(config.rainfall.gamma_shape, config.rainfall.gamma_scale[s]);
    std::normal_distribution<double> noise(0.0, 1.0);
    const EvaporationModel& ev = config.evaporation;

    for (std::size_t t = 0; t < n; ++t) {
        const Date d = add_days(met.start, static_cast<std::int64_t>(t));
        const auto s = static_cast<std::size_t>(season_of(month_of(d)));
        // Both draws happen every day so the stream does not depend on the outcome.
        const double u = unit(rain_rng);
        const double amount = intensity[s](rain_rng);
        met.rainfall[t] = u < config.rainfall.wet_day_probability[s] ? amount : 0.0;
        const double phase = 2.0 * std::numbers::pi * (day_of_year(d) - ev.peak_day) / 365.25;
        met.evaporation[t] = std::max(0.0, ev.mean + ev.amplitude * std::cos(phase) + ev.noise_sd * noise(evap_rng));
    }
    return met;
}

Schedule management_schedule(const ManagementClass& m, const CropCalendar& crop) {
    const std::size_t n = crop.cane_in.size();
    Schedule s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
    long since_planting = -1;
    for (std::size_t t = 0; t < n; ++t) {
        if (crop.cane_planted[t])
            since_planting = 0;
        else if (since_planting >= 0)
            ++since_planting;
        if (since_planting < 0 || !crop.cane_in[t])
            continue;
        const long in_year = since_planting % 365;
        for (const auto& a : m.fertiliser)
            if (in_year == a.day)
                s.fertiliser[t] += a.amount;
        // Mill mud goes on once per crop cycle.
        for (const auto& a : m.millmud)
            if (since_planting == a.day)
                s.millmud[t] += a.amount;
    }
    return s;
}

ModelRun toy_simulate(const Meteorology& met, const SoilType& soil, const ManagementClass& management,
                      const SynthConfig& config) {
    const Coefficients& k = config.coefficients;
    const std::size_t n = met.rainfall.size();

    ModelRun run;
    run.key.soil_type = soil.id;
    run.key.management = management.codes;
    run.key.meteorology_id = met.id;
    run.key.planting_month = config.planting_month;
    run.key.planting_year = config.planting_year;
    run.key.conductivity = soil.conductivity;
    run.start = met.start;

    const CropCalendar crop = reconstruct_crop_calendar(run.key, met.start, n, config.crop);
    const Schedule sched = management_schedule(management, crop);
    auto flags = [](const std::vector<bool>& v) { return std::vector<double>(v.begin(), v.end()); };
    run.forcings["rainfall"] = met.rainfall;
    run.forcings["evaporation"] = met.evaporation;
    run.forcings["fertiliser"] = sched.fertiliser;
    run.forcings["millmud"] = sched.millmud;
    run.forcings["cane_planted"] = flags(crop.cane_planted);
    run.forcings["cowpea_planted"] = flags(crop.cowpea_planted);
    run.forcings["cane_in"] = flags(crop.cane_in);
    run.forcings["cowpea_in"] = flags(crop.cowpea_in);
    for (auto& o : run.outputs)
        o.assign(n, 0.0);

    const double fc = soil.field_capacity * soil.capacity;
    double water = 0.5 * fc;
    double dissolved = 0.0, leachable = 0.0, organic = 0.0;

    for (std::size_t t = 0; t < n; ++t) {
        const double rain = met.rainfall[t];

        // Curve-number style excess; retention shrinks as the bucket fills.
        const double retention = soil.retention * (1.0 - water / soil.capacity) + 1.0;
        const double ia = 0.2 * retention;
        const double runoff = rain > ia ? (rain - ia) * (rain - ia) / (rain - ia + retention) : 0.0;
        water += rain - runoff;
        double drainage = water > fc ? soil.drainage_rate * (water - fc) : 0.0;
        water -= drainage;
        if (water > soil.capacity) {
            drainage += water - soil.capacity;
            water = soil.capacity;
        }
        water -= std::min(water, k.et_coefficient * met.evaporation[t] * water / soil.capacity);

        const double cover =
            crop.cane_in[t] ? k.cover_cane : (crop.cowpea_in[t] ? k.cover_cowpea : k.cover_bare);
        const double soil_loss =
            runoff > 0.0 ? k.erosion * soil.erodibility * std::pow(runoff, k.erosion_exponent) * cover * management.cover
                         : 0.0;

        const double applied = sched.fertiliser[t] + k.mineralisation;
        dissolved += k.dissolved_fraction * applied;
        leachable += (1.0 - k.dissolved_fraction) * applied;
        organic += k.millmud_n * sched.millmud[t];
        const double released = k.millmud_release * organic;
        organic -= released;
        dissolved += k.dissolved_fraction * released;
        leachable += (1.0 - k.dissolved_fraction) * released;

        const double din = dissolved * runoff / (runoff + k.runoff_mixing);
        dissolved -= din;
        const double leached = leachable * drainage / (drainage + k.drainage_mixing);
        leachable -= leached;
        dissolved *= 1.0 - k.dissolved_decay;
        leachable *= 1.0 - k.leachable_decay;

        run.outputs[0][t] = runoff;
        run.outputs[1][t] = soil_loss;
        run.outputs[2][t] = din;
        run.outputs[3][t] = leached;
    }
    return run;
}

std::vector<ModelRun> reference_runs(const SynthConfig& config) {
    config.validate();
    const Meteorology met = gen_meteorology(config);
    std::vector<ModelRun> runs(config.soils.size() * config.managements.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const std::size_t s = i / config.managements.size();
        const std::size_t m = i % config.managements.size();
        runs[i] = toy_simulate(met, config.soils[s], config.managements[m], config);
        runs[i].id = "S" + std::to_string(s + 1) + "_M" + std::to_string(m + 1);
    }
    return runs;
}

std::vector<std::string> forcing_names() {
    return {"rainfall", "evaporation", "fertiliser", "millmud", "cane_planted", "cowpea_planted", "cane_in",
            "cowpea_in"};
}

void write_archive(const std::vector<ModelRun>& runs, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const RunSchema schema = RunSchema::identity(forcing_names());
    for (const auto& run : runs)
        write_run(run, dir / (run.id + ".csv"), schema);
}

} // namespace emu::synth
