#include "heat/ebm_net.hpp"

#include <cmath>
#include <cstring>

#include "heat/rng.hpp"

namespace heat {

namespace {

double activate(Activation act, double a) noexcept {
    if (act == Activation::Identity) return a;
    return a > 0.0 ? a : kLeakySlope * a;
}

double activate_slope(Activation act, double a) noexcept {
    if (act == Activation::Identity) return 1.0;
    return a > 0.0 ? 1.0 : kLeakySlope;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    const std::size_t n = y.size();
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

NetParameters zeros_like(const NetParameters& params) {
    NetParameters out;
    out.reserve(params.size());
    for (const auto& l : params)
        out.push_back({Matrix(l.weight.rows(), l.weight.cols()), Vector(l.bias.size(), 0.0)});
    return out;
}

std::size_t parameter_count(const NetParameters& params) {
    std::size_t n = 0;
    for (const auto& l : params) n += l.weight.data().size() + l.bias.size();
    return n;
}

EnergyNet::EnergyNet(NetParameters layers, Activation activation)
    : layers_(std::move(layers)), activation_(activation) {
    require(!layers_.empty(), ErrorCode::ShapeMismatch, "energy net needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        require(layer.weight.rows() == layer.bias.size(), ErrorCode::ShapeMismatch,
                "layer " + std::to_string(l) + ": bias length does not match weight rows");
        require(layer.weight.cols() > 0, ErrorCode::ShapeMismatch, "layer with zero inputs");
        require(all_finite(layer.bias), ErrorCode::NonFiniteValue, "non-finite bias");
        if (l > 0)
            require(layer.weight.cols() == layers_[l - 1].weight.rows(), ErrorCode::ShapeMismatch,
                    "layer " + std::to_string(l) + " does not chain with the previous layer");
    }
    require(layers_.back().weight.rows() == 1, ErrorCode::ShapeMismatch,
            "final layer must have a single output");
    refresh_transposed();
}

EnergyNet EnergyNet::create(const NetShape& shape, std::uint64_t seed, Activation activation) {
    require(shape.depth >= 1, ErrorCode::InvalidSpec, "depth must be >= 1");
    require(shape.input_dim >= 1, ErrorCode::InvalidSpec, "input_dim must be >= 1");
    require(shape.depth == 1 || shape.hidden_dim >= 1, ErrorCode::InvalidSpec, "hidden_dim must be >= 1");

    NetParameters layers;
    std::size_t fan_in = shape.input_dim;
    for (std::size_t l = 0; l < shape.depth; ++l) {
        const bool last = l + 1 == shape.depth;
        const std::size_t fan_out = last ? 1 : shape.hidden_dim;
        Matrix w(fan_out, fan_in);
        if (!last) {
            Rng rng = Rng::derive(seed, "net-init", {l});
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
            for (double& v : w.data()) v = rng.uniform(-bound, bound);
        }
        layers.push_back({std::move(w), Vector(fan_out, 0.0)});
        fan_in = fan_out;
    }
    return EnergyNet(std::move(layers), activation);
}

std::size_t EnergyNet::input_dim() const noexcept {
    return layers_.empty() ? 0 : layers_.front().weight.cols();
}

std::size_t EnergyNet::hidden_dim() const noexcept {
    return layers_.size() < 2 ? 0 : layers_.front().weight.rows();
}

void EnergyNet::refresh_transposed() {
    transposed_.clear();
    transposed_.reserve(layers_.size());
    for (const auto& l : layers_) transposed_.push_back(l.weight.transpose());
}

double EnergyNet::forward(std::span<const double> z, Trace* trace) const {
    require(z.size() == input_dim(), ErrorCode::DimensionMismatch,
            "energy net expects dim " + std::to_string(input_dim()) + ", got " +
                std::to_string(z.size()));
    Vector x(z.begin(), z.end());
    const std::size_t last = layers_.size() - 1;
    for (std::size_t l = 0; l <= last; ++l) {
        const Matrix& wt = transposed_[l];
        Vector y = layers_[l].bias;
        for (std::size_t i = 0; i < x.size(); ++i) axpy(x[i], wt.row(i), y);
        if (trace) {
            trace->inputs.push_back(std::move(x));
            trace->preacts.push_back(y);
        }
        if (l == last) return y[0];
        x = std::move(y);
        for (double& v : x) v = activate(activation_, v);
    }
    return 0.0;  // unreachable
}

double EnergyNet::energy(std::span<const double> z) const { return forward(z, nullptr); }

Vector EnergyNet::grad_input(std::span<const double> z) const {
    Vector g(z.size());
    energy_and_grad_input(z, g);
    return g;
}

double EnergyNet::energy_and_grad_input(std::span<const double> z, std::span<double> grad) const {
    require(grad.size() == z.size(), ErrorCode::DimensionMismatch, "gradient buffer size");
    Trace trace;
    const double e = forward(z, &trace);
    Vector g_out{1.0};
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Matrix& w = layers_[l].weight;
        Vector g_in(w.cols(), 0.0);
        for (std::size_t o = 0; o < w.rows(); ++o) axpy(g_out[o], w.row(o), g_in);
        if (l > 0) {
            const Vector& pre = trace.preacts[l - 1];
            for (std::size_t i = 0; i < g_in.size(); ++i) g_in[i] *= activate_slope(activation_, pre[i]);
        }
        g_out = std::move(g_in);
    }
    std::copy(g_out.begin(), g_out.end(), grad.begin());
    return e;
}

namespace {

using V4 = double __attribute__((vector_size(32)));

V4 load4(const double* p) noexcept {
    V4 v = {0.0, 0.0, 0.0, 0.0};
    if (p) std::memcpy(&v, p, sizeof v);
    return v;
}

// out row b = init + sum_i in(b, i) * m.row(i), accumulated in index order.
// in is batch x n_in and out is batch x m.cols(), both row-major. Blocks of 4
// rows x 8 outputs stay in registers across the whole i loop.
void batched_rows(const double* in, std::size_t batch, std::size_t n_in, const Matrix& m,
                  std::span<const double> init, double* out) {
    constexpr std::size_t kRows = 4;
    constexpr std::size_t kCols = 8;
    const std::size_t n_out = m.cols();
    const double* w = m.data().data();
    auto start = [&](std::size_t j) { return init.empty() ? 0.0 : init[j]; };

    std::size_t b = 0;
    for (; b + kRows <= batch; b += kRows) {
        const double* x = in + b * n_in;
        std::size_t j0 = 0;
        for (; j0 + kCols <= n_out; j0 += kCols) {
            V4 acc[kRows][2];
            const V4 s0 = load4(init.empty() ? nullptr : init.data() + j0);
            const V4 s1 = load4(init.empty() ? nullptr : init.data() + j0 + 4);
            for (std::size_t r = 0; r < kRows; ++r) {
                acc[r][0] = s0;
                acc[r][1] = s1;
            }
            for (std::size_t i = 0; i < n_in; ++i) {
                const V4 w0 = load4(w + i * n_out + j0);
                const V4 w1 = load4(w + i * n_out + j0 + 4);
                for (std::size_t r = 0; r < kRows; ++r) {
                    const double a = x[r * n_in + i];
                    acc[r][0] += a * w0;
                    acc[r][1] += a * w1;
                }
            }
            for (std::size_t r = 0; r < kRows; ++r) {
                std::memcpy(out + (b + r) * n_out + j0, &acc[r][0], sizeof(V4));
                std::memcpy(out + (b + r) * n_out + j0 + 4, &acc[r][1], sizeof(V4));
            }
        }
        for (std::size_t r = 0; r < kRows; ++r)
            for (std::size_t j = j0; j < n_out; ++j) {
                double acc = start(j);
                for (std::size_t i = 0; i < n_in; ++i) acc += x[r * n_in + i] * w[i * n_out + j];
                out[(b + r) * n_out + j] = acc;
            }
    }
    for (; b < batch; ++b) {
        const double* x = in + b * n_in;
        for (std::size_t j = 0; j < n_out; ++j) {
            double acc = start(j);
            for (std::size_t i = 0; i < n_in; ++i) acc += x[i] * w[i * n_out + j];
            out[b * n_out + j] = acc;
        }
    }
}

// Activation buffers reused across calls on the same thread.
struct BatchWorkspace {
    std::vector<std::vector<double>> inputs;   // input to each layer
    std::vector<std::vector<double>> preacts;  // pre-activation output of each layer
    std::vector<double> g_a, g_b;
};

}  // namespace

void EnergyNet::energy_and_grad_input_batch(const Matrix& z, std::span<double> energies, Matrix& grads) const {
    require(z.cols() == input_dim(), ErrorCode::DimensionMismatch,
            "energy net expects dim " + std::to_string(input_dim()) + ", got " + std::to_string(z.cols()));
    require(energies.size() == z.rows() && grads.rows() == z.rows() && grads.cols() == z.cols(),
            ErrorCode::DimensionMismatch, "batch output buffers");
    const std::size_t batch = z.rows();
    const std::size_t depth = layers_.size();

    thread_local BatchWorkspace ws;
    ws.inputs.resize(depth);
    ws.preacts.resize(depth);
    ws.inputs[0].assign(z.data().begin(), z.data().end());
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t n_in = layers_[l].weight.cols();
        const std::size_t n_out = layers_[l].weight.rows();
        ws.preacts[l].resize(batch * n_out);
        batched_rows(ws.inputs[l].data(), batch, n_in, transposed_[l], layers_[l].bias, ws.preacts[l].data());
        if (l + 1 < depth) {
            auto& x = ws.inputs[l + 1];
            x.resize(batch * n_out);
            for (std::size_t i = 0; i < x.size(); ++i) x[i] = activate(activation_, ws.preacts[l][i]);
        }
    }
    for (std::size_t b = 0; b < batch; ++b) energies[b] = ws.preacts.back()[b];

    ws.g_a.assign(batch, 1.0);
    for (std::size_t l = depth; l-- > 0;) {
        const Matrix& w = layers_[l].weight;
        ws.g_b.resize(batch * w.cols());
        batched_rows(ws.g_a.data(), batch, w.rows(), w, {}, ws.g_b.data());
        if (l > 0) {
            const auto& pre = ws.preacts[l - 1];
            for (std::size_t i = 0; i < ws.g_b.size(); ++i) ws.g_b[i] *= activate_slope(activation_, pre[i]);
        }
        std::swap(ws.g_a, ws.g_b);
    }
    std::copy(ws.g_a.begin(), ws.g_a.end(), grads.data().begin());
}

double EnergyNet::accumulate_param_grad(std::span<const double> z, double coeff,
                                        NetParameters& grad) const {
    require(grad.size() == layers_.size(), ErrorCode::ShapeMismatch, "gradient buffer layers");
    return accumulate_param_grad(z, coeff, grad, 0.0, grad);
}

double EnergyNet::accumulate_param_grad(std::span<const double> z, double coeff, NetParameters& grad,
                                        double energy_coeff, NetParameters& energy_grad) const {
    require(grad.size() == layers_.size() && energy_grad.size() == layers_.size(), ErrorCode::ShapeMismatch,
            "gradient buffer layers");
    Trace trace;
    const double e = forward(z, &trace);
    const double coeff2 = energy_coeff * e;
    Vector g_out{1.0};
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const Matrix& w = layers_[l].weight;
        const Vector& input = trace.inputs[l];
        for (std::size_t o = 0; o < w.rows(); ++o) {
            const double go = coeff * g_out[o];
            axpy(go, input, grad[l].weight.row(o));
            grad[l].bias[o] += go;
        }
        if (coeff2 != 0.0) {
            for (std::size_t o = 0; o < w.rows(); ++o) {
                const double go = coeff2 * g_out[o];
                axpy(go, input, energy_grad[l].weight.row(o));
                energy_grad[l].bias[o] += go;
            }
        }
        if (l == 0) break;
        Vector g_in(w.cols(), 0.0);
        for (std::size_t o = 0; o < w.rows(); ++o) axpy(g_out[o], w.row(o), g_in);
        const Vector& pre = trace.preacts[l - 1];
        for (std::size_t i = 0; i < g_in.size(); ++i) g_in[i] *= activate_slope(activation_, pre[i]);
        g_out = std::move(g_in);
    }
    return e;
}

namespace {

void add_scaled(NetParameters& dst, const NetParameters& src, double alpha) {
    for (std::size_t l = 0; l < dst.size(); ++l) {
        axpy(alpha, src[l].weight.data(), dst[l].weight.data());
        axpy(alpha, src[l].bias, dst[l].bias);
    }
}

}  // namespace

LossGradient grad_params(const EnergyNet& net, const Matrix& pos, const Matrix& neg, double lambda) {
    require(pos.rows() > 0 && neg.rows() > 0, ErrorCode::EmptyBatch, "positive and negative batches must be non-empty");
    require(pos.cols() == net.input_dim() && neg.cols() == net.input_dim(), ErrorCode::DimensionMismatch,
            "batch dimension does not match the net");
    require(lambda >= 0.0, ErrorCode::InvalidSpec, "lambda must be >= 0");

    const double n_pos = static_cast<double>(pos.rows());
    const double n_neg = static_cast<double>(neg.rows());
    const double n_all = n_pos + n_neg;

    // The two halves of the contrastive term are accumulated separately so
    // identical batches cancel exactly.
    NetParameters g_pos = zeros_like(net.layers());
    NetParameters g_neg = zeros_like(net.layers());
    LossGradient out;
    out.grad = zeros_like(net.layers());

    // The control term needs (2 lambda / n) * E * dE/dtheta, which the same
    // pass delivers into out.grad.
    const double scale = 2.0 * lambda / n_all;
    std::vector<double> e_pos(pos.rows());
    std::vector<double> e_neg(neg.rows());
    for (std::size_t i = 0; i < pos.rows(); ++i)
        e_pos[i] = net.accumulate_param_grad(pos.row(i), 1.0 / n_pos, g_pos, scale, out.grad);
    for (std::size_t i = 0; i < neg.rows(); ++i)
        e_neg[i] = net.accumulate_param_grad(neg.row(i), 1.0 / n_neg, g_neg, scale, out.grad);

    double sum_pos = 0.0, sum_neg = 0.0, sum_sq = 0.0;
    for (double e : e_pos) {
        sum_pos += e;
        sum_sq += e * e;
    }
    for (double e : e_neg) {
        sum_neg += e;
        sum_sq += e * e;
    }
    out.mean_pos = sum_pos / n_pos;
    out.mean_neg = sum_neg / n_neg;
    out.mle = out.mean_pos - out.mean_neg;
    out.control = sum_sq / n_all;
    out.total = out.mle + lambda * out.control;

    add_scaled(out.grad, g_pos, 1.0);
    add_scaled(out.grad, g_neg, -1.0);
    return out;
}

AdamState::AdamState(const EnergyNet& net, const AdamConfig& config)
    : config_(config), m_(zeros_like(net.layers())), v_(zeros_like(net.layers())) {
    require(config.lr >= 0.0 && config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 &&
                config.beta2 < 1.0 && config.eps > 0.0,
            ErrorCode::InvalidSpec, "invalid Adam hyper-parameters");
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, const AdamConfig& c, std::uint64_t step) {
    require(grads.size() == params.size() && m.size() == params.size() && v.size() == params.size(),
            ErrorCode::DimensionMismatch, "Adam: buffer size mismatch");
    const double t = static_cast<double>(step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grads[i];
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grads[i] * grads[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        params[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

void adam_step(EnergyNet& net, AdamState& state, const NetParameters& grads) {
    require(grads.size() == net.layers_.size() && state.m_.size() == net.layers_.size(),
            ErrorCode::DimensionMismatch, "Adam: layer count mismatch");
    for (std::size_t l = 0; l < grads.size(); ++l)
        require(grads[l].weight.rows() == net.layers_[l].weight.rows() &&
                    grads[l].weight.cols() == net.layers_[l].weight.cols() &&
                    grads[l].bias.size() == net.layers_[l].bias.size(),
                ErrorCode::DimensionMismatch, "Adam: gradient shape mismatch at layer " + std::to_string(l));

    const AdamConfig& c = state.config_;
    state.step_ += 1;
    for (std::size_t l = 0; l < grads.size(); ++l) {
        adam_update(net.layers_[l].weight.data(), grads[l].weight.data(), state.m_[l].weight.data(),
                    state.v_[l].weight.data(), c, state.step_);
        adam_update(net.layers_[l].bias, grads[l].bias, state.m_[l].bias, state.v_[l].bias, c,
                    state.step_);
    }
    net.refresh_transposed();
}

}  // namespace heat
