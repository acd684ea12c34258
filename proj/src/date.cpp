#include "emu/date.hpp"

#include "emu/error.hpp"

#include <charconv>
#include <cstdio>

namespace emu {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::NonContiguousDates: return "NonContiguousDates";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::NegativeOutput: return "NegativeOutput";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::MissingForcing: return "MissingForcing";
    case ErrorKind::UnknownCategory: return "UnknownCategory";
    case ErrorKind::ConstantVariable: return "ConstantVariable";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooShort: return "TooShort";
    case ErrorKind::DateMismatch: return "DateMismatch";
    case ErrorKind::Empty: return "Empty";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::MissingCache: return "MissingCache";
    case ErrorKind::RunTooShort: return "RunTooShort";
    case ErrorKind::NoTrainingData: return "NoTrainingData";
    case ErrorKind::DivergedLoss: return "DivergedLoss";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::BundleVersionMismatch: return "BundleVersionMismatch";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoRuns: return "NoRuns";
    case ErrorKind::UnknownCluster: return "UnknownCluster";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

namespace {

int parse_field(std::string_view text, std::string_view whole) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw Error(ErrorKind::ParseError, "bad date '" + std::string(whole) + "'");
    return value;
}

} // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw Error(ErrorKind::ParseError, "bad date '" + std::string(text) + "'");
    const int y = parse_field(text.substr(0, 4), text);
    const int m = parse_field(text.substr(5, 2), text);
    const int d = parse_field(text.substr(8, 2), text);
    Date date = make_date(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
    if (!date.ok())
        throw Error(ErrorKind::ParseError, "invalid calendar date '" + std::string(text) + "'");
    return date;
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

int day_of_year(const Date& d) {
    const Date jan1{d.year(), std::chrono::January, std::chrono::day{1}};
    return static_cast<int>(days_between(jan1, d)) + 1;
}

} // namespace emu
