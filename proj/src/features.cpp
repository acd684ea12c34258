#include "emu/features.hpp"

#include "emu/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

namespace emu {

namespace {

constexpr std::array<const char*, kNumFeatureRows> kRowNames = {
    "management",         "conductivity",          "day_of_year",
    "seasonal",           "planting_month",        "planting_year",
    "time_since_cane",    "time_since_cowpea",     "time_since_fertiliser",
    "time_since_millmud", "cane_in",               "cowpea_in",
    "persistent_fertiliser", "persistent_millmud", "rainfall",
    "evaporation",        "fertiliser",            "millmud",
    "smoothed_rainfall",  "smoothed_evaporation",  "smoothed_fertiliser",
    "smoothed_millmud"};

constexpr std::array<const char*, 4> kManagementNames = {"mgmt_soil", "mgmt_pesticide",
                                                         "mgmt_fertiliser", "mgmt_millmud"};
constexpr std::array<const char*, 4> kDriverNames = {"rainfall", "evaporation", "fertiliser",
                                                     "millmud"};

std::string short_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::vector<std::pair<std::string, int>> sorted_by_code(const std::map<std::string, int>& table) {
    std::vector<std::pair<std::string, int>> v(table.begin(), table.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    return v;
}

int ordinal_code(const std::map<std::string, int>& table, const std::string& category) {
    if (auto it = table.find(category); it != table.end())
        return it->second;
    int value = 0;
    auto [ptr, ec] = std::from_chars(category.data(), category.data() + category.size(), value);
    if (ec == std::errc{} && ptr == category.data() + category.size() && value >= 0)
        return value;
    throw Error(ErrorKind::UnknownCategory, category);
}

} // namespace

const char* to_string(FeatureRow row) { return kRowNames[static_cast<std::size_t>(row)]; }

void FeatureSpec::validate() const {
    if (smoothing_alphas.empty())
        throw Error(ErrorKind::AlphaOutOfRange, "no smoothing alphas");
    for (double a : smoothing_alphas)
        if (!(a > 0.0 && a < 1.0))
            throw Error(ErrorKind::AlphaOutOfRange, short_double(a));
    if (!(seasonal_period > 0.0))
        throw Error(ErrorKind::InvalidConfig, "seasonal_period must be > 0");
    if (crop.cane_cycle_days < 1 || crop.cowpea_days < 0)
        throw Error(ErrorKind::InvalidConfig, "crop calendar durations must be positive");
}

void to_json(nlohmann::json& j, const FeatureSpec& spec) {
    std::vector<std::string> excluded;
    for (std::size_t r = 0; r < kNumFeatureRows; ++r)
        if (!spec.include[r])
            excluded.push_back(kRowNames[r]);
    j = nlohmann::json{{"smoothing_alphas", spec.smoothing_alphas},
                       {"seasonal_period", spec.seasonal_period},
                       {"exclude", excluded},
                       {"encoding", spec.encoding == CategoryEncoding::ordinal ? "ordinal" : "one_hot"},
                       {"management_codes", spec.management_codes},
                       {"conductivity_codes", spec.conductivity_codes},
                       {"crop", {{"cane_cycle_days", spec.crop.cane_cycle_days},
                                 {"cowpea_days", spec.crop.cowpea_days}}}};
    if (spec.time_since_cap)
        j["time_since_cap"] = *spec.time_since_cap;
}

void from_json(const nlohmann::json& j, FeatureSpec& spec) {
    static const std::vector<std::string> known = {
        "smoothing_alphas", "seasonal_period",   "exclude", "encoding", "management_codes",
        "conductivity_codes", "crop", "time_since_cap"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown feature key '" + k + "'");
    spec = FeatureSpec{};
    if (j.contains("smoothing_alphas"))
        spec.smoothing_alphas = j["smoothing_alphas"].get<std::vector<double>>();
    if (j.contains("seasonal_period"))
        spec.seasonal_period = j["seasonal_period"].get<double>();
    if (j.contains("exclude")) {
        for (const auto& name : j["exclude"].get<std::vector<std::string>>()) {
            auto it = std::find_if(kRowNames.begin(), kRowNames.end(),
                                   [&](const char* r) { return name == r; });
            if (it == kRowNames.end())
                throw Error(ErrorKind::InvalidConfig, "unknown feature row '" + name + "'");
            spec.include[static_cast<std::size_t>(it - kRowNames.begin())] = false;
        }
    }
    if (j.contains("encoding")) {
        const auto e = j["encoding"].get<std::string>();
        if (e == "ordinal")
            spec.encoding = CategoryEncoding::ordinal;
        else if (e == "one_hot")
            spec.encoding = CategoryEncoding::one_hot;
        else
            throw Error(ErrorKind::InvalidConfig, "unknown encoding '" + e + "'");
    }
    if (j.contains("management_codes"))
        spec.management_codes = j["management_codes"].get<std::array<std::map<std::string, int>, 4>>();
    if (j.contains("conductivity_codes"))
        spec.conductivity_codes = j["conductivity_codes"].get<std::map<std::string, int>>();
    if (j.contains("crop")) {
        spec.crop.cane_cycle_days = j["crop"].value("cane_cycle_days", spec.crop.cane_cycle_days);
        spec.crop.cowpea_days = j["crop"].value("cowpea_days", spec.crop.cowpea_days);
    }
    if (j.contains("time_since_cap"))
        spec.time_since_cap = j["time_since_cap"].get<double>();
    spec.validate();
}

// ============================================================================
// FeatureTable
// ============================================================================

FeatureTable::FeatureTable(Date start, std::vector<std::string> names, std::size_t rows)
    : start_(start), names_(std::move(names)), rows_(rows), values_(rows * names_.size(), 0.0) {}

std::vector<double> FeatureTable::column(std::size_t col) const {
    std::vector<double> out(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        out[i] = at(i, col);
    return out;
}

std::optional<std::size_t> FeatureTable::index_of(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end())
        return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

FeatureTable FeatureTable::slice(std::size_t begin, std::size_t count) const {
    FeatureTable out(date(begin), names_, count);
    std::copy_n(values_.begin() + static_cast<std::ptrdiff_t>(begin * cols()), count * cols(),
                out.values_.begin());
    return out;
}

std::string FeatureTable::to_csv() const {
    std::string out = "date";
    for (const auto& n : names_)
        out += "," + n;
    out += '\n';
    for (std::size_t i = 0; i < rows_; ++i) {
        out += format_date(date(i));
        for (double v : row(i))
            out += "," + short_double(v);
        out += '\n';
    }
    return out;
}

// ============================================================================
// Primitive transforms
// ============================================================================

std::vector<double> exp_smooth(std::span<const double> series, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw Error(ErrorKind::AlphaOutOfRange, short_double(alpha));
    std::vector<double> out(series.size());
    if (series.empty())
        return out;
    out[0] = series[0];
    for (std::size_t t = 1; t < series.size(); ++t)
        out[t] = alpha * series[t] + (1.0 - alpha) * out[t - 1];
    return out;
}

SeasonalPair seasonal_encoding(int day_index_in_year, double period) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(day_index_in_year) / period;
    return {std::sin(angle), std::cos(angle)};
}

std::vector<double> time_since_event(const std::vector<bool>& event_flags, std::optional<double> sentinel) {
    std::vector<double> out(event_flags.size());
    std::optional<std::size_t> last;
    for (std::size_t t = 0; t < event_flags.size(); ++t) {
        if (event_flags[t])
            last = t;
        if (last)
            out[t] = static_cast<double>(t - *last);
        else
            out[t] = sentinel ? *sentinel : static_cast<double>(t + 1);
    }
    return out;
}

std::vector<double> persistent_value(std::span<const double> amounts) {
    std::vector<double> out(amounts.size());
    double current = 0.0;
    for (std::size_t t = 0; t < amounts.size(); ++t) {
        if (amounts[t] > 0.0)
            current = amounts[t];
        out[t] = current;
    }
    return out;
}

CropCalendar reconstruct_crop_calendar(const ScenarioKey& key, const Date& start, std::size_t n,
                                       const CropCalendarConfig& cfg) {
    CropCalendar cal;
    cal.cane_planted.assign(n, false);
    cal.cowpea_planted.assign(n, false);
    cal.cane_in.assign(n, false);
    cal.cowpea_in.assign(n, false);
    if (n == 0)
        return cal;

    const std::int64_t run_first = day_number(start);
    const std::int64_t run_last = run_first + static_cast<std::int64_t>(n) - 1;
    auto mark = [&](std::vector<bool>& v, std::int64_t day) {
        if (day >= run_first && day <= run_last)
            v[static_cast<std::size_t>(day - run_first)] = true;
    };

    Date planting = make_date(key.planting_year, static_cast<unsigned>(key.planting_month), 1);
    while (day_number(planting) <= run_last) {
        const std::int64_t cane_start = day_number(planting);
        const std::int64_t cowpea_start = cane_start + cfg.cane_cycle_days;
        mark(cal.cane_planted, cane_start);
        for (std::int64_t d = cane_start; d < cowpea_start; ++d)
            mark(cal.cane_in, d);
        const std::int64_t fallow_end = cowpea_start + cfg.cowpea_days;
        if (cfg.cowpea_days > 0) {
            mark(cal.cowpea_planted, cowpea_start);
            for (std::int64_t d = cowpea_start; d < fallow_end; ++d)
                mark(cal.cowpea_in, d);
        }
        // next cane planting: first day of the planting month on or after the fallow ends
        const Date after{std::chrono::sys_days{std::chrono::days{fallow_end}}};
        Date next = make_date(year_of(after), static_cast<unsigned>(key.planting_month), 1);
        if (day_number(next) < fallow_end)
            next = make_date(year_of(after) + 1, static_cast<unsigned>(key.planting_month), 1);
        planting = next;
    }
    return cal;
}

// ============================================================================
// derive_features
// ============================================================================

std::vector<std::string> feature_names(const FeatureSpec& spec) {
    std::vector<std::string> names;
    auto add_category = [&](const std::string& base, const std::map<std::string, int>& table) {
        if (spec.encoding == CategoryEncoding::ordinal) {
            names.push_back(base);
        } else {
            for (const auto& [cat, code] : sorted_by_code(table))
                names.push_back(base + "=" + cat);
        }
    };
    if (spec.includes(FeatureRow::management))
        for (std::size_t m = 0; m < 4; ++m)
            add_category(kManagementNames[m], spec.management_codes[m]);
    if (spec.includes(FeatureRow::conductivity))
        add_category("conductivity", spec.conductivity_codes);
    if (spec.includes(FeatureRow::day_of_year))
        names.push_back("day_of_year");
    if (spec.includes(FeatureRow::seasonal)) {
        names.push_back("season_sin");
        names.push_back("season_cos");
    }
    const std::pair<FeatureRow, const char*> simple[] = {
        {FeatureRow::planting_month, "planting_month"},
        {FeatureRow::planting_year, "planting_year"},
        {FeatureRow::time_since_cane, "days_since_cane_planted"},
        {FeatureRow::time_since_cowpea, "days_since_cowpea_planted"},
        {FeatureRow::time_since_fertiliser, "days_since_fertiliser"},
        {FeatureRow::time_since_millmud, "days_since_millmud"},
        {FeatureRow::cane_in, "cane_in"},
        {FeatureRow::cowpea_in, "cowpea_in"},
        {FeatureRow::persistent_fertiliser, "persistent_fertiliser"},
        {FeatureRow::persistent_millmud, "persistent_millmud"},
        {FeatureRow::rainfall, "rainfall"},
        {FeatureRow::evaporation, "evaporation"},
        {FeatureRow::fertiliser, "fertiliser"},
        {FeatureRow::millmud, "millmud"},
    };
    for (const auto& [row, name] : simple)
        if (spec.includes(row))
            names.push_back(name);
    const FeatureRow smoothed[] = {FeatureRow::smoothed_rainfall, FeatureRow::smoothed_evaporation,
                                   FeatureRow::smoothed_fertiliser, FeatureRow::smoothed_millmud};
    for (std::size_t v = 0; v < 4; ++v)
        if (spec.includes(smoothed[v]))
            for (double a : spec.smoothing_alphas)
                names.push_back(std::string(kDriverNames[v]) + "_ema" + short_double(a));
    return names;
}

FeatureTable derive_features(const ModelRun& run, const FeatureSpec& spec) {
    spec.validate();
    const std::size_t n = run.num_days();
    FeatureTable table(run.start, feature_names(spec), n);
    std::size_t col = 0;

    auto put_column = [&](const std::vector<double>& values) {
        for (std::size_t t = 0; t < n; ++t)
            table.at(t, col) = values[t];
        ++col;
    };
    auto put_constant = [&](double value) {
        for (std::size_t t = 0; t < n; ++t)
            table.at(t, col) = value;
        ++col;
    };
    auto put_flags = [&](const std::vector<bool>& flags) {
        for (std::size_t t = 0; t < n; ++t)
            table.at(t, col) = flags[t] ? 1.0 : 0.0;
        ++col;
    };
    auto put_category = [&](const std::map<std::string, int>& table_codes, const std::string& category) {
        if (spec.encoding == CategoryEncoding::ordinal) {
            put_constant(static_cast<double>(ordinal_code(table_codes, category)));
            return;
        }
        if (!table_codes.count(category))
            throw Error(ErrorKind::UnknownCategory, category);
        for (const auto& [cat, code] : sorted_by_code(table_codes))
            put_constant(cat == category ? 1.0 : 0.0);
    };

    // Driver series are required only when a row that reads them is included.
    auto driver = [&](std::size_t v) -> const std::vector<double>& {
        if (!run.has_forcing(kDriverNames[v]))
            throw Error(ErrorKind::MissingForcing, kDriverNames[v]);
        return run.forcings.at(kDriverNames[v]);
    };
    auto flags_from = [&](const std::vector<double>& series) {
        std::vector<bool> f(n);
        for (std::size_t t = 0; t < n; ++t)
            f[t] = series[t] > 0.0;
        return f;
    };

    std::optional<CropCalendar> reconstructed;
    auto crop_flags = [&](const char* column, std::vector<bool> CropCalendar::*member) {
        if (run.has_forcing(column))
            return flags_from(run.forcings.at(column));
        if (!reconstructed)
            reconstructed = reconstruct_crop_calendar(run.key, run.start, n, spec.crop);
        return (*reconstructed).*member;
    };

    if (spec.includes(FeatureRow::management))
        for (std::size_t m = 0; m < 4; ++m)
            put_category(spec.management_codes[m], run.key.management[m]);
    if (spec.includes(FeatureRow::conductivity))
        put_category(spec.conductivity_codes, run.key.conductivity);

    if (spec.includes(FeatureRow::day_of_year) || spec.includes(FeatureRow::seasonal) ||
        spec.includes(FeatureRow::planting_month) || spec.includes(FeatureRow::planting_year)) {
        std::vector<double> doy(n), s(n), c(n), pm(n), py(n);
        for (std::size_t t = 0; t < n; ++t) {
            const Date d = run.date(t);
            doy[t] = day_of_year(d);
            const auto sc = seasonal_encoding(day_of_year(d), spec.seasonal_period);
            s[t] = sc.sin_component;
            c[t] = sc.cos_component;
            pm[t] = month_of(d) == run.key.planting_month ? 1.0 : 0.0;
            py[t] = year_of(d) == run.key.planting_year ? 1.0 : 0.0;
        }
        if (spec.includes(FeatureRow::day_of_year))
            put_column(doy);
        if (spec.includes(FeatureRow::seasonal)) {
            put_column(s);
            put_column(c);
        }
        if (spec.includes(FeatureRow::planting_month))
            put_column(pm);
        if (spec.includes(FeatureRow::planting_year))
            put_column(py);
    }

    if (spec.includes(FeatureRow::time_since_cane))
        put_column(time_since_event(crop_flags("cane_planted", &CropCalendar::cane_planted), spec.time_since_cap));
    if (spec.includes(FeatureRow::time_since_cowpea))
        put_column(
            time_since_event(crop_flags("cowpea_planted", &CropCalendar::cowpea_planted), spec.time_since_cap));
    if (spec.includes(FeatureRow::time_since_fertiliser))
        put_column(time_since_event(flags_from(driver(2)), spec.time_since_cap));
    if (spec.includes(FeatureRow::time_since_millmud))
        put_column(time_since_event(flags_from(driver(3)), spec.time_since_cap));
    if (spec.includes(FeatureRow::cane_in))
        put_flags(crop_flags("cane_in", &CropCalendar::cane_in));
    if (spec.includes(FeatureRow::cowpea_in))
        put_flags(crop_flags("cowpea_in", &CropCalendar::cowpea_in));
    if (spec.includes(FeatureRow::persistent_fertiliser))
        put_column(persistent_value(driver(2)));
    if (spec.includes(FeatureRow::persistent_millmud))
        put_column(persistent_value(driver(3)));

    const FeatureRow raw[] = {FeatureRow::rainfall, FeatureRow::evaporation, FeatureRow::fertiliser,
                              FeatureRow::millmud};
    for (std::size_t v = 0; v < 4; ++v)
        if (spec.includes(raw[v]))
            put_column(driver(v));

    const FeatureRow smoothed[] = {FeatureRow::smoothed_rainfall, FeatureRow::smoothed_evaporation,
                                   FeatureRow::smoothed_fertiliser, FeatureRow::smoothed_millmud};
    for (std::size_t v = 0; v < 4; ++v)
        if (spec.includes(smoothed[v]))
            for (double a : spec.smoothing_alphas)
                put_column(exp_smooth(driver(v), a));

    return table;
}

} // namespace emu
