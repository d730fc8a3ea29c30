#include "heat/residual.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

namespace heat {

void SgldConfig::validate() const {
    require(step_size_start >= 0.0 && step_size_end >= 0.0 && noise_start >= 0.0 && noise_end >= 0.0,
            ErrorCode::InvalidSpec, "SGLD step sizes and noise scales must be >= 0");
    require(step_size_end <= step_size_start && noise_end <= noise_start, ErrorCode::InvalidSpec,
            "SGLD schedules must decay (end <= start)");
    require(grad_clip >= 0.0, ErrorCode::InvalidSpec, "grad_clip must be >= 0");
}

namespace {

double lerp_schedule(double start, double end, std::size_t t, std::size_t steps) {
    if (steps <= 1) return start;
    const double frac = static_cast<double>(t) / static_cast<double>(steps - 1);
    return start + (end - start) * frac;
}

}  // namespace

double SgldConfig::step_size(std::size_t t) const {
    return lerp_schedule(step_size_start, step_size_end, t, steps);
}

double SgldConfig::noise(std::size_t t) const { return lerp_schedule(noise_start, noise_end, t, steps); }

void TrainConfig::validate() const {
    require(epochs >= 1, ErrorCode::InvalidSpec, "epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::InvalidSpec, "batch_size must be >= 1");
    require(lambda >= 0.0, ErrorCode::InvalidSpec, "lambda must be >= 0");
    require(input_noise_std >= 0.0, ErrorCode::InvalidSpec, "input_noise_std must be >= 0");
    require(lr >= 0.0, ErrorCode::InvalidSpec, "lr must be >= 0");
    require(depth >= 1, ErrorCode::InvalidSpec, "depth must be >= 1");
}

HybridScorer::HybridScorer(PriorPtr prior, EnergyNet residual, FeatureSource source)
    : prior_(std::move(prior)), residual_(std::move(residual)), source_(source) {
    require(prior_ != nullptr, ErrorCode::NotFitted, "hybrid scorer needs a prior");
    require(prior_->dim() == residual_.input_dim(), ErrorCode::DimensionMismatch,
            "prior dim " + std::to_string(prior_->dim()) + " != residual input dim " +
                std::to_string(residual_.input_dim()));
}

HybridScorer HybridScorer::with_zero_residual(PriorPtr prior, const NetShape& shape,
                                              std::uint64_t seed, FeatureSource source) {
    NetShape s = shape;
    s.input_dim = prior->dim();
    return HybridScorer(prior, EnergyNet::create(s, seed), source);
}

void HybridScorer::set_standardization(Standardization s) {
    require(s.std > 0.0 && std::isfinite(s.std) && std::isfinite(s.mean), ErrorCode::DegenerateEnergies,
            "standardization std must be positive and finite");
    standardization_ = s;
}

double HybridScorer::energy(std::span<const double> z) const {
    return prior_->energy(z) + residual_.energy(z);
}

double HybridScorer::energy_and_grad(std::span<const double> z, std::span<double> grad) const {
    const double eq = prior_->energy_and_grad(z, grad);
    Vector gr(z.size());
    const double er = residual_.energy_and_grad_input(z, gr);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gr[i];
    return eq + er;
}

double hybrid_energy(const HybridScorer& scorer, std::span<const double> z) { return scorer.energy(z); }

namespace {

// Initializes (when draw_init is set) and evolves chain rows [begin, end).
// Each chain draws from its own stream in a fixed order, so the result does not
// depend on how rows are grouped.
void run_chains(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                Matrix& chains, bool draw_init, const Matrix* data, std::uint64_t batch_index,
                std::size_t begin, std::size_t end) {
    const std::size_t d = chains.cols();
    const std::size_t m = end - begin;
    std::vector<Rng> rngs;
    rngs.reserve(m);
    Matrix z(m, d);
    for (std::size_t i = 0; i < m; ++i) {
        rngs.push_back(Rng::derive(cfg.seed, "sgld", {batch_index, begin + i}));
        auto row = z.row(i);
        if (!draw_init) {
            std::copy(chains.row(begin + i).begin(), chains.row(begin + i).end(), row.begin());
        } else if (cfg.init == ChainInit::Data) {
            const auto src = data->row(static_cast<std::size_t>(rngs[i].below(data->rows())));
            std::copy(src.begin(), src.end(), row.begin());
        } else {
            const Matrix z0 = prior.propose(rngs[i], 1);
            std::copy(z0.row(0).begin(), z0.row(0).end(), row.begin());
        }
    }

    Vector gq(d), er(m);
    Matrix gr(m, d);
    for (std::size_t t = 0; t < cfg.steps; ++t) {
        residual.energy_and_grad_input_batch(z, er, gr);
        const double half_eta = 0.5 * cfg.step_size(t);
        const double sigma = cfg.noise(t);
        for (std::size_t i = 0; i < m; ++i) {
            auto row = z.row(i);
            const double eq = prior.energy_and_grad(row, gq);
            if (!std::isfinite(eq + er[i]))
                fail(ErrorCode::NonFiniteValue, "SGLD chain " + std::to_string(begin + i) +
                                                    " reached a non-finite energy at step " + std::to_string(t));
            for (std::size_t k = 0; k < d; ++k) gq[k] += gr(i, k);
            if (cfg.grad_clip > 0.0) {
                const double norm = std::sqrt(squared_norm(gq));
                if (norm > cfg.grad_clip)
                    for (double& g : gq) g *= cfg.grad_clip / norm;
            }
            for (std::size_t k = 0; k < d; ++k) row[k] = row[k] - half_eta * gq[k] + sigma * rngs[i].normal();
        }
    }
    for (std::size_t i = 0; i < m; ++i) std::copy(z.row(i).begin(), z.row(i).end(), chains.row(begin + i).begin());
}

Matrix run_sgld(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                Matrix chains, bool draw_init, const Matrix* data, std::uint64_t batch_index) {
    cfg.validate();
    require(residual.input_dim() == prior.dim(), ErrorCode::DimensionMismatch,
            "prior and residual disagree on dimension");
    require(chains.cols() == prior.dim(), ErrorCode::DimensionMismatch, "chain dimension");
    if (draw_init && cfg.init == ChainInit::Data)
        require(data != nullptr && data->rows() > 0 && data->cols() == prior.dim(), ErrorCode::EmptyDataset,
                "data-initialized chains need training features");

    const std::size_t n = chains.rows();
    const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, n));
    if (workers == 1) {
        run_chains(prior, residual, cfg, chains, draw_init, data, batch_index, 0, n);
        return chains;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t per = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * per;
        const std::size_t end = std::min(n, begin + per);
        pool.emplace_back([&, w, begin, end] {
            try {
                run_chains(prior, residual, cfg, chains, draw_init, data, batch_index, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return chains;
}

}  // namespace

Matrix sgld_evolve(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                   Matrix init, std::uint64_t batch_index) {
    return run_sgld(prior, residual, cfg, std::move(init), false, nullptr, batch_index);
}

Matrix sgld_sample(const PriorScorer& prior, const EnergyNet& residual, const SgldConfig& cfg,
                   std::size_t n, std::uint64_t batch_index, const Matrix* data) {
    return run_sgld(prior, residual, cfg, Matrix(n, prior.dim()), true, data, batch_index);
}

Matrix sgld_sample(const HybridScorer& scorer, const SgldConfig& cfg, std::size_t n,
                   std::uint64_t batch_index, const Matrix* data) {
    return sgld_sample(scorer.prior(), scorer.residual(), cfg, n, batch_index, data);
}

TrainResult train_residual(const Matrix& features, PriorPtr prior, const SgldConfig& sgld,
                           const TrainConfig& train, FeatureSource source) {
    sgld.validate();
    train.validate();
    require(prior != nullptr, ErrorCode::NotFitted, "train_residual needs a fitted prior");
    require(features.rows() > 0, ErrorCode::EmptyDataset, "no training features");
    require(features.cols() == prior->dim(), ErrorCode::DimensionMismatch,
            "features have dim " + std::to_string(features.cols()) + " but the prior expects " +
                std::to_string(prior->dim()));

    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    EnergyNet net = EnergyNet::create({d, train.hidden_dim, train.depth}, mix_seed(train.seed, "residual-net", {}));
    AdamState adam(net, AdamConfig{.lr = train.lr});

    TrainResult result;
    std::vector<std::size_t> order(n);
    std::uint64_t global_batch = 0;
    for (std::size_t epoch = 0; epoch < train.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle = Rng::derive(train.seed, "shuffle", {epoch});
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        EpochStats stats;
        stats.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += train.batch_size, ++global_batch, ++batches) {
            const std::size_t m = std::min(train.batch_size, n - start);
            Matrix pos(m, d);
            Rng noise = Rng::derive(train.seed, "input-noise", {global_batch});
            for (std::size_t r = 0; r < m; ++r) {
                auto src = features.row(order[start + r]);
                auto dst = pos.row(r);
                for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] + train.input_noise_std * noise.normal();
            }
            const Matrix neg = sgld_sample(*prior, net, sgld, m, global_batch, &features);
            LossGradient loss = grad_params(net, pos, neg, train.lambda);
            if (!std::isfinite(loss.total) || !std::isfinite(loss.mle) || !std::isfinite(loss.control))
                fail(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch) +
                                                   ", batch " + std::to_string(batches));
            for (const auto& layer : loss.grad)
                require(all_finite(layer.weight.data()) && all_finite(layer.bias), ErrorCode::NonFiniteLoss,
                        "non-finite parameter gradient at epoch " + std::to_string(epoch));
            adam_step(net, adam, loss.grad);

            stats.mean_pos_energy += loss.mean_pos;
            stats.mean_neg_energy += loss.mean_neg;
            stats.mle += loss.mle;
            stats.control += loss.control;
            stats.total += loss.total;
        }
        const double b = static_cast<double>(batches);
        stats.mean_pos_energy /= b;
        stats.mean_neg_energy /= b;
        stats.mle /= b;
        stats.control /= b;
        stats.total /= b;
        result.history.push_back(stats);
    }
    result.scorer = HybridScorer(std::move(prior), std::move(net), source);
    return result;
}

}  // namespace heat
