#pragma once

// Standardization of hybrid energies and their beta-composition
//   E = (1/beta) * log sum_k exp(beta * E_k)
// with beta = 0 taken as the plain sum and beta = +/-inf as max/min.

#include <limits>
#include <span>
#include <vector>

#include "heat/residual.hpp"

namespace heat {

inline constexpr double kBetaMax = std::numeric_limits<double>::infinity();
inline constexpr double kBetaMin = -std::numeric_limits<double>::infinity();

// Population mean/std of a set of train energies.
Standardization fit_standardization(std::span<const double> energies);
// Same, over the hybrid energies of the rows of train_features.
Standardization fit_standardization(const HybridScorer& scorer, const Matrix& train_features);

// Composition of already-standardized energies.
double compose_energies(std::span<const double> energies, double beta);

struct Composition {
    std::vector<HybridScorer> scorers;
    double beta = 0.0;
    bool standardize = true;
};

// inputs[k] is the feature vector scorer k consumes.
double heat_score(const Composition& comp, std::span<const std::span<const double>> inputs);
double heat_score(const Composition& comp, const std::vector<Vector>& inputs);

}  // namespace heat
