#pragma once

// Hybrid energy E^h = E_q + E_theta: a prior scorer refined by a residual
// energy net trained by maximum likelihood with Langevin negatives and a
// quadratic control term that keeps the residual close to zero.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "heat/ebm_net.hpp"
#include "heat/priors.hpp"

namespace heat {

enum class ChainInit : std::uint8_t {
    Proposal = 0,  // z0 drawn from the prior's proposal sampler
    Data = 1,      // z0 drawn from the training features (contrastive divergence)
};

struct SgldConfig {
    std::size_t steps = 20;
    double step_size_start = 1e-4;
    double step_size_end = 1e-5;
    double noise_start = 5e-3;
    double noise_end = 5e-4;
    std::uint64_t seed = 0;
    ChainInit init = ChainInit::Proposal;
    // Max L2 norm of the energy gradient per step; 0 disables clipping.
    double grad_clip = 0.0;
    // Worker threads for the chains of one batch. Results do not depend on it.
    std::size_t threads = 1;

    void validate() const;
    double step_size(std::size_t t) const;
    double noise(std::size_t t) const;
};

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    double lambda = 10.0;
    double input_noise_std = 1e-4;
    double lr = 5e-6;
    std::size_t hidden_dim = 1024;
    std::size_t depth = 6;
    std::uint64_t seed = 0;

    void validate() const;
};

// Which view of a sample a scorer consumes: the pooled feature vector or the
// std-pooled feature volume.
enum class FeatureSource : std::uint8_t { Pooled = 0, StdPooled = 1 };

struct Standardization {
    double mean = 0.0;
    double std = 1.0;

    double apply(double energy) const noexcept { return (energy - mean) / std; }
    friend bool operator==(const Standardization&, const Standardization&) = default;
};

class HybridScorer {
public:
    HybridScorer() = default;
    HybridScorer(PriorPtr prior, EnergyNet residual, FeatureSource source = FeatureSource::Pooled);
    // A hybrid whose residual is freshly zero-initialized.
    static HybridScorer with_zero_residual(PriorPtr prior, const NetShape& shape, std::uint64_t seed,
                                           FeatureSource source = FeatureSource::Pooled);

    const PriorScorer& prior() const noexcept { return *prior_; }
    const PriorPtr& prior_ptr() const noexcept { return prior_; }
    const EnergyNet& residual() const noexcept { return residual_; }
    FeatureSource source() const noexcept { return source_; }
    std::size_t dim() const noexcept { return prior_->dim(); }

    const std::optional<Standardization>& standardization() const noexcept { return standardization_; }
    void set_standardization(Standardization s);

    double prior_energy(std::span<const double> z) const { return prior_->energy(z); }
    double residual_energy(std::span<const double> z) const { return residual_.energy(z); }
    // E_q(z) + E_theta(z), unstandardized.
    double energy(std::span<const double> z) const;
    double energy_and_grad(std::span<const double> z, std::span<double> grad) const;

private:
    PriorPtr prior_;
    EnergyNet residual_;
    FeatureSource source_ = FeatureSource::Pooled;
    std::optional<Standardization> standardization_;
};

double hybrid_energy(const HybridScorer& scorer, std::span<const double> z);

// Runs cfg.steps Langevin updates
//   z <- z - (eta_t / 2) grad E^h(z) + sigma_t * w_t
// on every row of init. The noise of chain i comes from the stream
// (cfg.seed, "sgld", batch_index, i).
Matrix sgld_evolve(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                   Matrix init, std::uint64_t batch_index = 0);

// n chains initialized from the proposal (or from rows of data when
// cfg.init == ChainInit::Data) and evolved by sgld_evolve.
Matrix sgld_sample(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                   std::size_t n, std::uint64_t batch_index = 0, const Matrix* data = nullptr);
Matrix sgld_sample(const HybridScorer& scorer, const SgldConfig& cfg, std::size_t n,
                   std::uint64_t batch_index = 0, const Matrix* data = nullptr);

struct EpochStats {
    std::size_t epoch = 0;
    double mean_pos_energy = 0.0;  // residual energy of positives
    double mean_neg_energy = 0.0;  // residual energy of negatives
    double mle = 0.0;
    double control = 0.0;
    double total = 0.0;
};

struct TrainResult {
    HybridScorer scorer;
    std::vector<EpochStats> history;
};

TrainResult train_residual(const Matrix& features, PriorPtr prior, const SgldConfig& sgld,
                           const TrainConfig& train, FeatureSource source = FeatureSource::Pooled);

}  // namespace heat
