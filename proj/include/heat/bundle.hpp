#pragma once

// Model bundle: the fitted composition (priors, residual nets,
// standardizations, beta) in one versioned container.
//
//   "HEATBNDL" | u32 version=1 | u32 section_count
//   then per section: u32 tag | u64 length | payload | u32 crc32(payload)
//
// Sections: one CONF (JSON: beta, standardize flag, scorer names/sources,
// free-form metadata), then PRIO, RNET, STDZ for each scorer in order.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "heat/compose.hpp"

namespace heat {

inline constexpr std::uint32_t kBundleVersion = 1;

struct Bundle {
    Composition composition;
    std::vector<std::string> names;  // one per scorer
    std::string metadata_json = "{}";
};

std::vector<std::uint8_t> encode_bundle(const Bundle& bundle);
// Fully validates before returning; never yields a partial bundle.
Bundle decode_bundle(std::span<const std::uint8_t> bytes);

void save_bundle(const std::filesystem::path& path, const Bundle& bundle);
Bundle load_bundle(const std::filesystem::path& path);

// Human-readable summary (used by `heat inspect`).
std::string describe_bundle(const Bundle& bundle);

}  // namespace heat
