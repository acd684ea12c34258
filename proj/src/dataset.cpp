#include "emu/dataset.hpp"

#include "emu/error.hpp"
#include "emu/log.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>

namespace emu {

std::optional<std::size_t> output_index(const std::string& name) {
    for (std::size_t k = 0; k < kNumOutputs; ++k)
        if (name == kOutputNames[k])
            return k;
    return std::nullopt;
}

// ============================================================================
// ScenarioKey
// ============================================================================

void ScenarioKey::validate() const {
    if (planting_month < 1 || planting_month > 12)
        throw Error(ErrorKind::InvalidScenario,
                    "planting_month " + std::to_string(planting_month) + " outside 1..12");
    auto check = [](const std::string& v, const char* what) {
        if (v.empty())
            throw Error(ErrorKind::InvalidScenario, std::string(what) + " is empty");
    };
    check(soil_type, "soil_type");
    check(meteorology_id, "meteorology_id");
    check(conductivity, "conductivity");
    for (const auto& m : management)
        check(m, "management");
}

namespace {

// Categorical ids may be given as JSON strings or non-negative integers.
std::string category_from_json(const nlohmann::json& v, const char* field) {
    if (v.is_string())
        return v.get<std::string>();
    if (v.is_number_integer() && v.get<long long>() >= 0)
        return std::to_string(v.get<long long>());
    throw Error(ErrorKind::InvalidScenario,
                std::string(field) + " must be a string or non-negative integer");
}

} // namespace

void to_json(nlohmann::json& j, const ScenarioKey& key) {
    j = nlohmann::json{{"soil_type", key.soil_type},
                       {"management", key.management},
                       {"meteorology_id", key.meteorology_id},
                       {"planting_month", key.planting_month},
                       {"planting_year", key.planting_year},
                       {"conductivity", key.conductivity}};
}

void from_json(const nlohmann::json& j, ScenarioKey& key) {
    key.soil_type = category_from_json(j.at("soil_type"), "soil_type");
    const auto& m = j.at("management");
    if (!m.is_array() || m.size() != 4)
        throw Error(ErrorKind::InvalidScenario, "management must list 4 categories");
    for (std::size_t i = 0; i < 4; ++i)
        key.management[i] = category_from_json(m[i], "management");
    key.meteorology_id = category_from_json(j.at("meteorology_id"), "meteorology_id");
    key.planting_month = j.at("planting_month").get<int>();
    key.planting_year = j.at("planting_year").get<int>();
    key.conductivity = category_from_json(j.at("conductivity"), "conductivity");
    key.validate();
}

// ============================================================================
// ModelRun
// ============================================================================

const std::vector<double>& ModelRun::forcing(const std::string& name) const {
    auto it = forcings.find(name);
    if (it == forcings.end())
        throw Error(ErrorKind::MissingForcing, name);
    return it->second;
}

ModelRun ModelRun::slice(std::size_t begin, std::size_t count) const {
    ModelRun out;
    out.id = id;
    out.key = key;
    out.start = date(begin);
    auto cut = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                   v.begin() + static_cast<std::ptrdiff_t>(begin + count));
    };
    for (const auto& [name, series] : forcings)
        out.forcings[name] = cut(series);
    for (std::size_t k = 0; k < kNumOutputs; ++k)
        out.outputs[k] = cut(outputs[k]);
    return out;
}

void ModelRun::validate() const {
    const std::size_t n = num_days();
    for (std::size_t k = 0; k < kNumOutputs; ++k) {
        if (outputs[k].size() != n)
            throw Error(ErrorKind::LengthMismatch, std::string("output ") + kOutputNames[k]);
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(outputs[k][i]))
                throw Error(ErrorKind::NonFiniteValue,
                            "row " + std::to_string(i + 1) + ", column " + kOutputNames[k]);
            if (outputs[k][i] < 0.0)
                throw Error(ErrorKind::NegativeOutput,
                            "row " + std::to_string(i + 1) + ", column " + kOutputNames[k]);
        }
    }
    for (const auto& [name, series] : forcings) {
        if (series.size() != n)
            throw Error(ErrorKind::LengthMismatch, "forcing " + name);
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(series[i]))
                throw Error(ErrorKind::NonFiniteValue,
                            "row " + std::to_string(i + 1) + ", column " + name);
    }
}

// ============================================================================
// Schema
// ============================================================================

RunSchema RunSchema::identity(const std::vector<std::string>& forcing_names) {
    RunSchema s;
    for (const auto& name : forcing_names)
        s.columns[name] = name;
    for (const char* name : kOutputNames)
        s.columns[name] = name;
    return s;
}

void to_json(nlohmann::json& j, const RunSchema& schema) {
    j = nlohmann::json{{"date_column", schema.date_column},
                       {"columns", schema.columns},
                       {"missing_tokens", schema.missing_tokens},
                       {"lenient", schema.lenient}};
    if (schema.scenario)
        j["scenario"] = *schema.scenario;
}

void from_json(const nlohmann::json& j, RunSchema& schema) {
    static const std::vector<std::string> known = {"date_column", "columns", "missing_tokens",
                                                   "lenient", "scenario"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end())
            throw Error(ErrorKind::InvalidConfig, "unknown schema key '" + k + "'");
    schema = RunSchema{};
    if (j.contains("date_column"))
        schema.date_column = j["date_column"].get<std::string>();
    schema.columns = j.at("columns").get<std::map<std::string, std::string>>();
    if (j.contains("missing_tokens"))
        schema.missing_tokens = j["missing_tokens"].get<std::vector<std::string>>();
    if (j.contains("lenient"))
        schema.lenient = j["lenient"].get<bool>();
    if (j.contains("scenario"))
        schema.scenario = j["scenario"].get<ScenarioKey>();
}

// ============================================================================
// CSV
// ============================================================================

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        std::string_view field = line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t'))
            field.remove_prefix(1);
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t'))
            field.remove_suffix(1);
        out.push_back(field);
        if (comma == std::string_view::npos)
            break;
        pos = comma + 1;
    }
    return out;
}

std::string cell_error(std::size_t row, const std::string& column) {
    return "row " + std::to_string(row) + ", column " + column;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

ModelRun parse_run_csv(const std::string& text, const std::string& run_id, const ScenarioKey& key,
                       const RunSchema& schema) {
    std::vector<std::string_view> lines;
    {
        std::string_view all(text);
        std::size_t pos = 0;
        while (pos < all.size()) {
            std::size_t nl = all.find('\n', pos);
            if (nl == std::string_view::npos)
                nl = all.size();
            std::string_view line = all.substr(pos, nl - pos);
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (!line.empty())
                lines.push_back(line);
            pos = nl + 1;
        }
    }
    if (lines.empty())
        throw Error(ErrorKind::ParseError, run_id + ": empty file");

    const auto header = split_fields(lines[0]);
    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t c = 0; c < header.size(); ++c)
            if (header[c] == name)
                return c;
        throw Error(ErrorKind::MissingColumn, name);
    };

    const std::size_t date_col = find_column(schema.date_column);
    struct Mapped {
        std::string logical;
        std::string header;
        std::size_t col;
        std::optional<std::size_t> output;
    };
    std::vector<Mapped> mapped;
    for (const char* name : kOutputNames)
        if (!schema.columns.count(name))
            throw Error(ErrorKind::MissingColumn, name);
    for (const auto& [logical, head] : schema.columns)
        mapped.push_back({logical, head, find_column(head), output_index(logical)});

    ModelRun run;
    run.id = run_id;
    run.key = key;
    const std::size_t n = lines.size() - 1;
    for (auto& m : mapped) {
        if (m.output)
            run.outputs[*m.output].reserve(n);
        else
            run.forcings[m.logical].reserve(n);
    }

    std::optional<Date> prev;
    for (std::size_t r = 1; r <= n; ++r) {
        const auto fields = split_fields(lines[r]);
        if (fields.size() != header.size())
            throw Error(ErrorKind::ParseError, run_id + ": row " + std::to_string(r) + " has " +
                                                   std::to_string(fields.size()) + " fields, expected " +
                                                   std::to_string(header.size()));
        const Date d = parse_date(fields[date_col]);
        if (!prev)
            run.start = d;
        else if (days_between(*prev, d) != 1)
            throw Error(ErrorKind::NonContiguousDates, format_date(d));
        prev = d;

        for (auto& m : mapped) {
            const std::string_view cell = fields[m.col];
            const bool missing = std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(),
                                           cell) != schema.missing_tokens.end();
            double value = 0.0;
            if (missing)
                throw Error(ErrorKind::NonFiniteValue, cell_error(r, m.header));
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
                // from_chars rejects "inf"/"nan" spellings with a sign; treat all unparseable as non-finite
                throw Error(ErrorKind::NonFiniteValue, cell_error(r, m.header));
            }
            if (!std::isfinite(value))
                throw Error(ErrorKind::NonFiniteValue, cell_error(r, m.header));
            if (m.output) {
                if (value < 0.0) {
                    if (!schema.lenient)
                        throw Error(ErrorKind::NegativeOutput, cell_error(r, m.header));
                    log_warn(run_id + ": clamping negative " + m.header + " on row " + std::to_string(r));
                    value = 0.0;
                }
                run.outputs[*m.output].push_back(value);
            } else {
                run.forcings[m.logical].push_back(value);
            }
        }
    }
    if (n == 0)
        throw Error(ErrorKind::ParseError, run_id + ": no data rows");
    run.validate();
    return run;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    auto p = csv_path;
    p.replace_extension(".scenario.json");
    return p;
}

ModelRun load_run(const std::filesystem::path& path, const RunSchema& schema) {
    ScenarioKey key;
    if (schema.scenario) {
        key = *schema.scenario;
    } else {
        const auto side = sidecar_path(path);
        key = nlohmann::json::parse(read_file(side)).get<ScenarioKey>();
    }
    key.validate();
    return parse_run_csv(read_file(path), path.stem().string(), key, schema);
}

std::string format_run_csv(const ModelRun& run, const RunSchema& schema) {
    std::string out = schema.date_column;
    std::vector<const std::vector<double>*> series;
    for (const auto& [logical, head] : schema.columns) {
        if (auto k = output_index(logical))
            series.push_back(&run.outputs[*k]);
        else
            series.push_back(&run.forcing(logical));
        out += ',';
        out += head;
    }
    out += '\n';
    for (std::size_t i = 0; i < run.num_days(); ++i) {
        out += format_date(run.date(i));
        for (const auto* s : series) {
            out += ',';
            out += format_double((*s)[i]);
        }
        out += '\n';
    }
    return out;
}

void write_run(const ModelRun& run, const std::filesystem::path& path, const RunSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    out << format_run_csv(run, schema);
    if (!schema.scenario) {
        std::ofstream side(sidecar_path(path), std::ios::binary);
        side << nlohmann::json(run.key).dump(2) << '\n';
    }
}

std::vector<ModelRun> load_runs(const std::filesystem::path& dir, const RunSchema& schema) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorKind::NoRuns, "no run directory " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<ModelRun> runs(files.size());
    std::vector<std::exception_ptr> errors(files.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < files.size(); ++i) {
        try {
            runs[i] = load_run(files[i], schema);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);
    return runs;
}

// ============================================================================
// Splits
// ============================================================================

void SplitSpec::validate() const {
    for (const auto* r : {&train, &validation, &test})
        if (r->last < r->first)
            throw Error(ErrorKind::InvalidSplit, "range ends before it starts");
    if (!(train.last < validation.first) || !(validation.last < test.first))
        throw Error(ErrorKind::InvalidSplit, "ranges must be disjoint and ordered train < validation < test");
}

namespace {

nlohmann::json range_json(const DateRange& r) { return {format_date(r.first), format_date(r.last)}; }

DateRange range_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2)
        throw Error(ErrorKind::InvalidConfig, "date range must be [first, last]");
    return {parse_date(j[0].get<std::string>()), parse_date(j[1].get<std::string>())};
}

} // namespace

void to_json(nlohmann::json& j, const SplitSpec& spec) {
    j = nlohmann::json{{"train", range_json(spec.train)},
                       {"validation", range_json(spec.validation)},
                       {"test", range_json(spec.test)}};
}

void from_json(const nlohmann::json& j, SplitSpec& spec) {
    for (const auto& [k, v] : j.items())
        if (k != "train" && k != "validation" && k != "test")
            throw Error(ErrorKind::InvalidConfig, "unknown split key '" + k + "'");
    spec = SplitSpec{};
    if (j.contains("train"))
        spec.train = range_from_json(j["train"]);
    if (j.contains("validation"))
        spec.validation = range_from_json(j["validation"]);
    if (j.contains("test"))
        spec.test = range_from_json(j["test"]);
    spec.validate();
}

const char* to_string(SplitPart part) {
    switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::validation: return "validation";
    case SplitPart::test: return "test";
    }
    return "?";
}

SplitPart parse_split_part(const std::string& name) {
    if (name == "train")
        return SplitPart::train;
    if (name == "validation")
        return SplitPart::validation;
    if (name == "test")
        return SplitPart::test;
    throw Error(ErrorKind::InvalidConfig, "unknown split '" + name + "'");
}

IndexRange index_range(const Date& start, std::size_t n, const DateRange& range) {
    const std::int64_t first = std::max<std::int64_t>(0, days_between(start, range.first));
    const std::int64_t last = std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1,
                                                     days_between(start, range.last));
    if (n == 0 || last < first)
        return {};
    return {static_cast<std::size_t>(first), static_cast<std::size_t>(last) + 1};
}

const IndexRange& SplitIndices::operator[](SplitPart p) const {
    switch (p) {
    case SplitPart::train: return train;
    case SplitPart::validation: return validation;
    case SplitPart::test: return test;
    }
    return train;
}

SplitIndices split_indices(const ModelRun& run, const SplitSpec& spec, bool strict) {
    spec.validate();
    SplitIndices s{index_range(run.start, run.num_days(), spec.train),
                   index_range(run.start, run.num_days(), spec.validation),
                   index_range(run.start, run.num_days(), spec.test)};
    if (strict) {
        for (SplitPart p : {SplitPart::train, SplitPart::validation, SplitPart::test})
            if (s[p].empty())
                throw Error(ErrorKind::EmptySlice, to_string(p));
    }
    return s;
}

RunSplit split_run(const ModelRun& run, const SplitSpec& spec, bool strict) {
    const SplitIndices idx = split_indices(run, spec, strict);
    if (idx.train.empty() && idx.validation.empty() && idx.test.empty())
        throw Error(ErrorKind::EmptySlice, "run does not intersect any range");
    auto part = [&](const IndexRange& r) -> std::optional<ModelRun> {
        if (r.empty())
            return std::nullopt;
        return run.slice(r.begin, r.size());
    };
    return {part(idx.train), part(idx.validation), part(idx.test)};
}

} // namespace emu
