#pragma once

#include <cmath>
#include <string>

#include "heat/compose.hpp"
#include "heat/error.hpp"
#include "json.hpp"

namespace heat::detail {

// beta is a number or one of the strings "inf", "+inf", "-inf".
inline double beta_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return kBetaMax;
        if (s == "-inf") return kBetaMin;
        fail(ErrorCode::ConfigError, "beta must be a number, \"inf\" or \"-inf\" (got \"" + s + "\")");
    }
    fail(ErrorCode::ConfigError, "beta must be a number, \"inf\" or \"-inf\"");
}

inline nlohmann::json beta_to_json(double beta) {
    if (beta == kBetaMax) return "inf";
    if (beta == kBetaMin) return "-inf";
    return beta;
}

inline std::string beta_label(double beta) {
    if (beta == kBetaMax) return "inf";
    if (beta == kBetaMin) return "-inf";
    return nlohmann::json(beta).dump();
}

}  // namespace heat::detail
