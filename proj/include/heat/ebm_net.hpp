#pragma once

// Residual energy network: an MLP R^d -> R with hand-written reverse mode for
// both the input gradient (needed by Langevin sampling) and the parameter
// gradient (needed by training), plus the Adam optimizer that trains it.

#include <cstdint>
#include <span>
#include <vector>

#include "heat/linalg.hpp"

namespace heat {

enum class Activation : std::uint8_t { LeakyRelu = 0, Identity = 1 };

inline constexpr double kLeakySlope = 0.2;

// weight is (out x in): y = weight * x + bias.
struct DenseLayer {
    Matrix weight;
    Vector bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Parameters and parameter-shaped gradients share this representation.
using NetParameters = std::vector<DenseLayer>;

NetParameters zeros_like(const NetParameters& params);
std::size_t parameter_count(const NetParameters& params);

struct NetShape {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 1024;
    // Number of linear layers; 1 means a single input_dim -> 1 map.
    std::size_t depth = 6;
};

class EnergyNet;
class AdamState;
void adam_step(EnergyNet& net, AdamState& state, const NetParameters& grads);

class EnergyNet {
public:
    EnergyNet() = default;
    // Validates that layer dimensions chain and end in a single output.
    EnergyNet(NetParameters layers, Activation activation);

    // Hidden layers get He-uniform init from the seed; the output layer is all
    // zeros so the network is identically zero until trained.
    static EnergyNet create(const NetShape& shape, std::uint64_t seed,
                            Activation activation = Activation::LeakyRelu);

    std::size_t input_dim() const noexcept;
    std::size_t hidden_dim() const noexcept;
    std::size_t depth() const noexcept { return layers_.size(); }
    Activation activation() const noexcept { return activation_; }
    const NetParameters& layers() const noexcept { return layers_; }

    double energy(std::span<const double> z) const;
    Vector grad_input(std::span<const double> z) const;
    // Energy and its input gradient from one forward/backward pass.
    double energy_and_grad_input(std::span<const double> z, std::span<double> grad) const;
    // Row-wise energy_and_grad_input over a batch; matches the per-row call bitwise.
    void energy_and_grad_input_batch(const Matrix& z, std::span<double> energies, Matrix& grads) const;
    // grad += coeff * dE(z)/dtheta; returns E(z).
    double accumulate_param_grad(std::span<const double> z, double coeff,
                                 NetParameters& grad) const;
    // One pass for two targets: grad += coeff * dE/dtheta and
    // energy_grad += energy_coeff * E(z) * dE/dtheta (skipped when that factor is 0).
    double accumulate_param_grad(std::span<const double> z, double coeff, NetParameters& grad,
                                 double energy_coeff, NetParameters& energy_grad) const;

    friend bool operator==(const EnergyNet& a, const EnergyNet& b) {
        return a.activation_ == b.activation_ && a.layers_ == b.layers_;
    }

private:
    friend void adam_step(EnergyNet&, AdamState&, const NetParameters&);

    struct Trace {
        std::vector<Vector> inputs;       // input to each layer
        std::vector<Vector> preacts;      // pre-activation output of each layer
    };

    double forward(std::span<const double> z, Trace* trace) const;
    void refresh_transposed();

    NetParameters layers_;
    // (in x out) copies of each weight for the forward pass; always mirrors layers_.
    std::vector<Matrix> transposed_;
    Activation activation_ = Activation::LeakyRelu;
};

struct LossGradient {
    NetParameters grad;
    double mle = 0.0;        // mean E(pos) - mean E(neg)
    double control = 0.0;    // mean of E^2 over pos and neg together
    double total = 0.0;      // mle + lambda * control
    double mean_pos = 0.0;
    double mean_neg = 0.0;
};

// Gradient of the maximum-likelihood contrastive loss plus lambda times the
// residual control term, for positives (rows of pos) and sampler negatives
// (rows of neg). The control term (E^h - E_q)^2 equals E_theta^2 so the prior
// energies are not needed here.
LossGradient grad_params(const EnergyNet& net, const Matrix& pos, const Matrix& neg, double lambda);

struct AdamConfig {
    double lr = 5e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    AdamState() = default;
    AdamState(const EnergyNet& net, const AdamConfig& config);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t step_count() const noexcept { return step_; }
    const NetParameters& first_moment() const noexcept { return m_; }
    const NetParameters& second_moment() const noexcept { return v_; }

private:
    friend void adam_step(EnergyNet&, AdamState&, const NetParameters&);

    AdamConfig config_;
    NetParameters m_;
    NetParameters v_;
    std::uint64_t step_ = 0;
};

// Elementwise bias-corrected Adam update of a flat parameter block; step is the
// 1-based step number after incrementing.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamConfig& config, std::uint64_t step);

// One bias-corrected Adam update of net in place.
void adam_step(EnergyNet& net, AdamState& state, const NetParameters& grads);

}  // namespace heat
