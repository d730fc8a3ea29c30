#include "heat/compose.hpp"

#include <algorithm>
#include <cmath>

namespace heat {

Standardization fit_standardization(std::span<const double> energies) {
    require(!energies.empty(), ErrorCode::EmptyDataset, "standardization needs train energies");
    require(all_finite(energies), ErrorCode::NonFiniteValue, "non-finite train energy");
    double mean = 0.0;
    for (double e : energies) mean += e;
    mean /= static_cast<double>(energies.size());
    double ss = 0.0;
    for (double e : energies) ss += (e - mean) * (e - mean);
    const double sd = std::sqrt(ss / static_cast<double>(energies.size()));
    require(sd > 1e-12, ErrorCode::DegenerateEnergies, "train energies are (numerically) constant");
    return {mean, sd};
}

Standardization fit_standardization(const HybridScorer& scorer, const Matrix& train_features) {
    std::vector<double> energies(train_features.rows());
    for (std::size_t i = 0; i < train_features.rows(); ++i) energies[i] = scorer.energy(train_features.row(i));
    return fit_standardization(energies);
}

double compose_energies(std::span<const double> energies, double beta) {
    require(!energies.empty(), ErrorCode::MismatchedScorerCount, "composition of zero energies");
    require(!std::isnan(beta), ErrorCode::InvalidSpec, "beta is NaN");
    if (beta == 0.0) {
        double s = 0.0;
        for (double e : energies) s += e;
        return s;
    }
    if (beta == kBetaMax) return *std::max_element(energies.begin(), energies.end());
    if (beta == kBetaMin) return *std::min_element(energies.begin(), energies.end());
    std::vector<double> scaled(energies.size());
    for (std::size_t k = 0; k < energies.size(); ++k) scaled[k] = beta * energies[k];
    return logsumexp(scaled) / beta;
}

double heat_score(const Composition& comp, std::span<const std::span<const double>> inputs) {
    require(!comp.scorers.empty(), ErrorCode::MismatchedScorerCount, "composition has no scorers");
    require(inputs.size() == comp.scorers.size(), ErrorCode::MismatchedScorerCount,
            "got " + std::to_string(inputs.size()) + " inputs for " + std::to_string(comp.scorers.size()) +
                " scorers");
    std::vector<double> energies(comp.scorers.size());
    for (std::size_t k = 0; k < comp.scorers.size(); ++k) {
        const HybridScorer& s = comp.scorers[k];
        const double e = s.energy(inputs[k]);
        if (comp.standardize) {
            require(s.standardization().has_value(), ErrorCode::NotStandardized,
                    "scorer " + std::to_string(k) + " has no standardization");
            energies[k] = s.standardization()->apply(e);
        } else {
            energies[k] = e;
        }
    }
    return compose_energies(energies, comp.beta);
}

double heat_score(const Composition& comp, const std::vector<Vector>& inputs) {
    std::vector<std::span<const double>> views(inputs.begin(), inputs.end());
    return heat_score(comp, views);
}

}  // namespace heat
