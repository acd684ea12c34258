/**
 * @file error.hpp
 * @brief Error type shared by every module
 */
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emu {

enum class ErrorKind {
    // dataset
    MissingColumn,
    NonContiguousDates,
    NonFiniteValue,
    NegativeOutput,
    InvalidScenario,
    EmptySlice,
    InvalidSplit,
    ParseError,
    // features
    AlphaOutOfRange,
    MissingForcing,
    UnknownCategory,
    // scaling
    ConstantVariable,
    UnknownVariable,
    // clustering / eval
    LengthMismatch,
    TooShort,
    DateMismatch,
    Empty,
    // nn
    DimensionMismatch,
    MissingCache,
    // training
    RunTooShort,
    NoTrainingData,
    DivergedLoss,
    EmptyGrid,
    // pipeline
    BundleVersionMismatch,
    InvalidConfig,
    NoRuns,
    UnknownCluster,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind. The message holds the detail
/// (row, column, date...) in human-readable form.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
          kind_(kind), detail_(detail) {}

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorKind kind_;
    std::string detail_;
};

} // namespace emu
