/**
 * @file bundle.hpp
 * @brief Model bundles: a JSON manifest plus a raw float64 weight file
 *
 * The manifest records the network spec, parameter layout, scaler, feature
 * context, training config and log. Weights are little-endian float64 in
 * the order of param_layout(); their FNV-1a 64 checksum is stored in the
 * manifest.
 */
#pragma once

#include "emu/training.hpp"

#include <filesystem>
#include <string>

namespace emu {

inline constexpr int kBundleFormatVersion = 1;

struct BundlePaths {
    std::filesystem::path manifest; ///< <dir>/<name>.json
    std::filesystem::path weights;  ///< <dir>/<name>.bin
};

BundlePaths bundle_paths(const std::filesystem::path& dir, const std::string& name);

BundlePaths save_bundle(const TrainedModel& model, const std::filesystem::path& dir, const std::string& name);

/// Throws BundleVersionMismatch on a format, layout or checksum mismatch.
TrainedModel load_bundle(const std::filesystem::path& manifest);

std::string fnv1a64_hex(std::string_view bytes);

} // namespace emu
