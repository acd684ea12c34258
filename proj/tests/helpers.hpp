#pragma once

#include "emu/dataset.hpp"
#include "emu/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <random>
#include <string>

namespace test {

/// Run of `n` days from `start` with the given outputs generated by `f(k, t)`.
template <typename F>
emu::ModelRun make_run(const std::string& id, emu::Date start, std::size_t n, F f) {
    emu::ModelRun run;
    run.id = id;
    run.key.soil_type = "1";
    run.key.management = {"1", "1", "1", "1"};
    run.key.meteorology_id = "m";
    run.key.planting_month = 9;
    run.key.planting_year = 1970;
    run.key.conductivity = "1";
    run.start = start;
    for (std::size_t k = 0; k < emu::kNumOutputs; ++k) {
        run.outputs[k].resize(n);
        for (std::size_t t = 0; t < n; ++t)
            run.outputs[k][t] = f(k, t);
    }
    for (const char* name : {"rainfall", "evaporation", "fertiliser", "millmud"})
        run.forcings[name].assign(n, 0.0);
    return run;
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("emu_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace test

#define CHECK_ERROR_KIND(expr, expected_kind)                                                                          \
    do {                                                                                                               \
        bool thrown_ = false;                                                                                          \
        try {                                                                                                          \
            (void)(expr);                                                                                              \
        } catch (const emu::Error& e_) {                                                                               \
            thrown_ = true;                                                                                            \
            CHECK_MESSAGE(e_.kind() == (expected_kind), e_.what());                                                    \
        }                                                                                                              \
        CHECK_MESSAGE(thrown_, #expr " did not throw");                                                                \
    } while (0)
