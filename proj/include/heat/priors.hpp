#pragma once

// Closed-form prior energies E_q over the feature space: a class-conditional
// Gaussian mixture with shared covariance (also used on std-pooled features),
// the energy of classifier logits, and a flat prior used by the pure-EBM
// baseline. Every prior exposes its energy, the energy gradient for Langevin
// sampling and a proposal sampler that seeds the chains.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "heat/ebm_net.hpp"
#include "heat/linalg.hpp"
#include "heat/rng.hpp"

namespace heat {

enum class PriorKind : std::uint8_t { Gmm = 0, EnergyLogits = 1, Flat = 2 };

std::string_view to_string(PriorKind kind) noexcept;

class PriorScorer {
public:
    virtual ~PriorScorer() = default;

    virtual PriorKind kind() const noexcept = 0;
    virtual std::size_t dim() const noexcept = 0;
    virtual double energy(std::span<const double> z) const = 0;
    virtual Vector grad(std::span<const double> z) const = 0;
    virtual double energy_and_grad(std::span<const double> z, std::span<double> grad) const;
    // n x dim matrix of chain initializations.
    virtual Matrix propose(Rng& rng, std::size_t n) const = 0;
};

using PriorPtr = std::shared_ptr<const PriorScorer>;

class GmmPrior final : public PriorScorer {
public:
    // means: C x d; cov: d x d shared covariance (factored with the jitter policy).
    GmmPrior(Matrix means, const Matrix& cov, double temperature, double jitter = 0.0);
    GmmPrior(Matrix means, CholeskyFactor factor, double temperature);

    PriorKind kind() const noexcept override { return PriorKind::Gmm; }
    std::size_t dim() const noexcept override { return means_.cols(); }
    std::size_t class_count() const noexcept { return means_.rows(); }
    const Matrix& means() const noexcept { return means_; }
    const CholeskyFactor& factor() const noexcept { return factor_; }
    double temperature() const noexcept { return temperature_; }

    // -(1/T) * logsumexp_c(-0.5 * mahalanobis_sq(z, mu_c))
    double energy(std::span<const double> z) const override;
    Vector grad(std::span<const double> z) const override;
    double energy_and_grad(std::span<const double> z, std::span<double> grad) const override;
    // Uniform class, then mu_c + sqrt(T) * L * eps.
    Matrix propose(Rng& rng, std::size_t n) const override;

private:
    void init();
    // Whitened distances u - L^{-1} mu_c for every class.
    double whitened(std::span<const double> z, Vector& u, Vector& log_weights) const;

    Matrix means_;
    CholeskyFactor factor_;
    double temperature_ = 1.0;
    Matrix whitened_means_;  // rows L^{-1} mu_c
};

// Class means and the shared covariance of label-centered features (n-1
// normalization over all samples). Every class needs at least two samples.
GmmPrior fit_gmm(const Matrix& features, std::span<const int> labels, double temperature,
                 double jitter = 0.0);

struct LogitHead {
    Matrix weight;  // C x d
    Vector bias;    // C

    std::size_t dim() const noexcept { return weight.cols(); }
    std::size_t class_count() const noexcept { return weight.rows(); }
    Vector logits(std::span<const double> z) const;

    friend bool operator==(const LogitHead&, const LogitHead&) = default;
};

// -logsumexp(W z + b)
double el_energy(const LogitHead& head, std::span<const double> z);
// -W^T softmax(W z + b)
Vector el_grad(const LogitHead& head, std::span<const double> z);

struct LogitTrainConfig {
    std::size_t epochs = 300;
    double lr = 0.05;
};

// Multinomial logistic regression by full-batch Adam from a zero start.
LogitHead train_logit_head(const Matrix& features, std::span<const int> labels,
                           const LogitTrainConfig& config = {});

// Energy-logits prior. The logit energy is not directly sampleable, so chains
// start from a diagonal Gaussian fitted to the training features.
class LogitPrior final : public PriorScorer {
public:
    explicit LogitPrior(LogitHead head);
    LogitPrior(LogitHead head, Vector proposal_mean, Vector proposal_std);

    static LogitPrior fit(LogitHead head, const Matrix& train_features);

    PriorKind kind() const noexcept override { return PriorKind::EnergyLogits; }
    std::size_t dim() const noexcept override { return head_.dim(); }
    const LogitHead& head() const noexcept { return head_; }
    bool has_proposal() const noexcept { return !proposal_mean_.empty(); }
    const Vector& proposal_mean() const noexcept { return proposal_mean_; }
    const Vector& proposal_std() const noexcept { return proposal_std_; }

    double energy(std::span<const double> z) const override { return el_energy(head_, z); }
    Vector grad(std::span<const double> z) const override { return el_grad(head_, z); }
    Matrix propose(Rng& rng, std::size_t n) const override;

private:
    LogitHead head_;
    Vector proposal_mean_;
    Vector proposal_std_;
};

// Zero energy everywhere with a uniform-box proposal. Paired with a residual
// net it is a plain EBM with no prior term.
class FlatPrior final : public PriorScorer {
public:
    FlatPrior(Vector low, Vector high);
    // Bounding box of the features, widened by padding * range on every side.
    static FlatPrior fit_box(const Matrix& features, double padding = 0.25);

    PriorKind kind() const noexcept override { return PriorKind::Flat; }
    std::size_t dim() const noexcept override { return low_.size(); }
    const Vector& low() const noexcept { return low_; }
    const Vector& high() const noexcept { return high_; }

    double energy(std::span<const double> z) const override;
    Vector grad(std::span<const double> z) const override;
    Matrix propose(Rng& rng, std::size_t n) const override;

private:
    Vector low_;
    Vector high_;
};

struct StdPoolConfig {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t volume_size() const noexcept { return channels * height * width; }
    friend bool operator==(const StdPoolConfig&, const StdPoolConfig&) = default;
};

// Per-channel population standard deviation over the spatial positions of a
// channel-major (C, H, W) volume.
Vector std_pool(std::span<const double> volume, const StdPoolConfig& cfg);

// Row-wise std_pool of an n x (C*H*W) matrix of volumes.
Matrix std_pool_rows(const Matrix& volumes, const StdPoolConfig& cfg);

}  // namespace heat
