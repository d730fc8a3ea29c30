#include "heat/priors.hpp"

#include <algorithm>
#include <cmath>

namespace heat {

std::string_view to_string(PriorKind kind) noexcept {
    switch (kind) {
        case PriorKind::Gmm: return "gmm";
        case PriorKind::EnergyLogits: return "el";
        case PriorKind::Flat: return "flat";
    }
    return "unknown";
}

double PriorScorer::energy_and_grad(std::span<const double> z, std::span<double> g) const {
    const Vector gz = grad(z);
    require(g.size() == gz.size(), ErrorCode::DimensionMismatch, "gradient buffer size");
    std::copy(gz.begin(), gz.end(), g.begin());
    return energy(z);
}

// ---------------------------------------------------------------------------
// GMM

GmmPrior::GmmPrior(Matrix means, const Matrix& cov, double temperature, double jitter)
    : GmmPrior(std::move(means), cholesky(cov, jitter), temperature) {}

GmmPrior::GmmPrior(Matrix means, CholeskyFactor factor, double temperature)
    : means_(std::move(means)), factor_(std::move(factor)), temperature_(temperature) {
    init();
}

void GmmPrior::init() {
    require(means_.rows() >= 1, ErrorCode::InvalidSpec, "GMM needs at least one class");
    require(means_.cols() == factor_.dim(), ErrorCode::DimensionMismatch,
            "GMM means and covariance disagree on dimension");
    require(temperature_ > 0.0 && std::isfinite(temperature_), ErrorCode::InvalidSpec,
            "GMM temperature must be > 0");
    whitened_means_ = Matrix(means_.rows(), means_.cols());
    for (std::size_t c = 0; c < means_.rows(); ++c) {
        const Vector y = factor_.solve_lower(means_.row(c));
        std::copy(y.begin(), y.end(), whitened_means_.row(c).begin());
    }
}

double GmmPrior::whitened(std::span<const double> z, Vector& u, Vector& log_weights) const {
    require(z.size() == dim(), ErrorCode::DimensionMismatch,
            "GMM expects dim " + std::to_string(dim()) + ", got " + std::to_string(z.size()));
    u = factor_.solve_lower(z);
    log_weights.assign(class_count(), 0.0);
    for (std::size_t c = 0; c < class_count(); ++c) {
        auto y = whitened_means_.row(c);
        double m = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double d = u[i] - y[i];
            m += d * d;
        }
        log_weights[c] = -0.5 * m;
    }
    return -logsumexp(log_weights) / temperature_;
}

double GmmPrior::energy(std::span<const double> z) const {
    Vector u, a;
    return whitened(z, u, a);
}

Vector GmmPrior::grad(std::span<const double> z) const {
    Vector g(dim());
    energy_and_grad(z, g);
    return g;
}

double GmmPrior::energy_and_grad(std::span<const double> z, std::span<double> g) const {
    require(g.size() == dim(), ErrorCode::DimensionMismatch, "gradient buffer size");
    Vector u, a;
    const double e = whitened(z, u, a);
    const Vector w = softmax(a);
    Vector s(dim(), 0.0);
    for (std::size_t c = 0; c < class_count(); ++c) {
        auto y = whitened_means_.row(c);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] += w[c] * (u[i] - y[i]);
    }
    const Vector x = factor_.solve_upper(s);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] / temperature_;
    return e;
}

Matrix GmmPrior::propose(Rng& rng, std::size_t n) const {
    const std::size_t d = dim();
    const double scale = std::sqrt(temperature_);
    const Matrix& l = factor_.lower();
    Matrix out(n, d);
    Vector eps(d);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t c = static_cast<std::size_t>(rng.below(class_count()));
        for (double& e : eps) e = rng.normal();
        auto row = out.row(s);
        auto mu = means_.row(c);
        for (std::size_t i = 0; i < d; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k <= i; ++k) v += l(i, k) * eps[k];
            row[i] = mu[i] + scale * v;
        }
    }
    return out;
}

GmmPrior fit_gmm(const Matrix& features, std::span<const int> labels, double temperature,
                 double jitter) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    require(n > 0, ErrorCode::EmptyDataset, "cannot fit a GMM on an empty feature set");
    require(labels.size() == n, ErrorCode::ShapeMismatch, "one label per feature row required");

    int max_label = -1;
    for (int y : labels) {
        require(y >= 0, ErrorCode::InvalidSpec, "negative class label");
        max_label = std::max(max_label, y);
    }
    const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

    std::vector<std::size_t> counts(classes, 0);
    Matrix means(classes, d);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        counts[c] += 1;
        auto mu = means.row(c);
        auto x = features.row(i);
        for (std::size_t j = 0; j < d; ++j) mu[j] += x[j];
    }
    for (std::size_t c = 0; c < classes; ++c) {
        require(counts[c] >= 2, ErrorCode::ClassTooSmall,
                "class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                    " samples; at least 2 are needed");
        for (double& v : means.row(c)) v /= static_cast<double>(counts[c]);
    }

    Matrix cov(d, d);
    Vector centered(d);
    for (std::size_t i = 0; i < n; ++i) {
        auto x = features.row(i);
        auto mu = means.row(static_cast<std::size_t>(labels[i]));
        for (std::size_t j = 0; j < d; ++j) centered[j] = x[j] - mu[j];
        for (std::size_t r = 0; r < d; ++r) {
            const double cr = centered[r];
            auto crow = cov.row(r);
            for (std::size_t c = 0; c <= r; ++c) crow[c] += cr * centered[c];
        }
    }
    const double denom = static_cast<double>(n - 1);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c <= r; ++c) {
            cov(r, c) /= denom;
            cov(c, r) = cov(r, c);
        }
    return GmmPrior(std::move(means), cov, temperature, jitter);
}

// ---------------------------------------------------------------------------
// Energy logits

Vector LogitHead::logits(std::span<const double> z) const {
    require(z.size() == dim(), ErrorCode::DimensionMismatch,
            "logit head expects dim " + std::to_string(dim()) + ", got " + std::to_string(z.size()));
    Vector out = matvec(weight, z);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += bias[c];
    return out;
}

double el_energy(const LogitHead& head, std::span<const double> z) {
    return -logsumexp(head.logits(z));
}

Vector el_grad(const LogitHead& head, std::span<const double> z) {
    const Vector p = softmax(head.logits(z));
    Vector g = matvec_transposed(head.weight, p);
    for (double& v : g) v = -v;
    return g;
}

LogitHead train_logit_head(const Matrix& features, std::span<const int> labels,
                           const LogitTrainConfig& config) {
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    require(n > 0, ErrorCode::EmptyDataset, "cannot train a logit head on no data");
    require(labels.size() == n, ErrorCode::ShapeMismatch, "one label per feature row required");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    require(max_label >= 0, ErrorCode::InvalidSpec, "labels must be non-negative");
    const std::size_t classes = static_cast<std::size_t>(max_label) + 1;

    LogitHead head{Matrix(classes, d), Vector(classes, 0.0)};
    AdamConfig adam{.lr = config.lr};
    std::vector<double> m_w(classes * d, 0.0), v_w(classes * d, 0.0);
    std::vector<double> m_b(classes, 0.0), v_b(classes, 0.0);
    Matrix gw(classes, d);
    Vector gb(classes);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::fill(gw.data().begin(), gw.data().end(), 0.0);
        std::fill(gb.begin(), gb.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = features.row(i);
            Vector p = softmax(head.logits(x));
            p[static_cast<std::size_t>(labels[i])] -= 1.0;
            for (std::size_t c = 0; c < classes; ++c) {
                const double pc = p[c] / static_cast<double>(n);
                auto grow = gw.row(c);
                for (std::size_t j = 0; j < d; ++j) grow[j] += pc * x[j];
                gb[c] += pc;
            }
        }
        adam_update(head.weight.data(), gw.data(), m_w, v_w, adam, epoch);
        adam_update(head.bias, gb, m_b, v_b, adam, epoch);
    }
    return head;
}

LogitPrior::LogitPrior(LogitHead head) : head_(std::move(head)) {
    require(head_.weight.rows() == head_.bias.size() && head_.weight.rows() >= 1,
            ErrorCode::ShapeMismatch, "logit head weight/bias shapes disagree");
}

LogitPrior::LogitPrior(LogitHead head, Vector proposal_mean, Vector proposal_std)
    : LogitPrior(std::move(head)) {
    require(proposal_mean.size() == dim() && proposal_std.size() == dim(),
            ErrorCode::DimensionMismatch, "proposal moments must match the head dimension");
    require(std::all_of(proposal_std.begin(), proposal_std.end(), [](double s) { return s >= 0.0; }),
            ErrorCode::InvalidSpec, "proposal std must be >= 0");
    proposal_mean_ = std::move(proposal_mean);
    proposal_std_ = std::move(proposal_std);
}

LogitPrior LogitPrior::fit(LogitHead head, const Matrix& train_features) {
    const std::size_t n = train_features.rows();
    const std::size_t d = train_features.cols();
    require(n > 0, ErrorCode::EmptyDataset, "proposal needs training features");
    Vector mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mean[j] += train_features(i, j);
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = train_features(i, j) - mean[j];
            var[j] += c * c;
        }
    Vector sd(d);
    for (std::size_t j = 0; j < d; ++j) sd[j] = std::sqrt(var[j] / static_cast<double>(n));
    return LogitPrior(std::move(head), std::move(mean), std::move(sd));
}

Matrix LogitPrior::propose(Rng& rng, std::size_t n) const {
    require(has_proposal(), ErrorCode::NotFitted, "logit prior has no fitted proposal distribution");
    Matrix out(n, dim());
    for (std::size_t s = 0; s < n; ++s) {
        auto row = out.row(s);
        for (std::size_t j = 0; j < dim(); ++j) row[j] = proposal_mean_[j] + proposal_std_[j] * rng.normal();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Flat

FlatPrior::FlatPrior(Vector low, Vector high) : low_(std::move(low)), high_(std::move(high)) {
    require(!low_.empty() && low_.size() == high_.size(), ErrorCode::DimensionMismatch,
            "box bounds must be non-empty and of equal length");
    for (std::size_t i = 0; i < low_.size(); ++i)
        require(low_[i] <= high_[i], ErrorCode::InvalidSpec, "box low bound exceeds high bound");
}

FlatPrior FlatPrior::fit_box(const Matrix& features, double padding) {
    require(features.rows() > 0, ErrorCode::EmptyDataset, "box needs at least one feature row");
    const std::size_t d = features.cols();
    Vector lo(features.row(0).begin(), features.row(0).end());
    Vector hi = lo;
    for (std::size_t i = 1; i < features.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            lo[j] = std::min(lo[j], features(i, j));
            hi[j] = std::max(hi[j], features(i, j));
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double pad = padding * (hi[j] - lo[j]);
        lo[j] -= pad;
        hi[j] += pad;
    }
    return FlatPrior(std::move(lo), std::move(hi));
}

double FlatPrior::energy(std::span<const double> z) const {
    require(z.size() == dim(), ErrorCode::DimensionMismatch, "flat prior dimension");
    return 0.0;
}

Vector FlatPrior::grad(std::span<const double> z) const {
    require(z.size() == dim(), ErrorCode::DimensionMismatch, "flat prior dimension");
    return Vector(dim(), 0.0);
}

Matrix FlatPrior::propose(Rng& rng, std::size_t n) const {
    Matrix out(n, dim());
    for (std::size_t s = 0; s < n; ++s) {
        auto row = out.row(s);
        for (std::size_t j = 0; j < dim(); ++j) row[j] = rng.uniform(low_[j], high_[j]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// std pooling

Vector std_pool(std::span<const double> volume, const StdPoolConfig& cfg) {
    require(cfg.height * cfg.width > 0 && cfg.channels > 0, ErrorCode::InvalidSpec,
            "std-pool layout must be non-empty");
    require(volume.size() == cfg.volume_size(), ErrorCode::DimensionMismatch,
            "volume length " + std::to_string(volume.size()) + " != C*H*W = " +
                std::to_string(cfg.volume_size()));
    const std::size_t hw = cfg.height * cfg.width;
    Vector out(cfg.channels);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
        const auto ch = volume.subspan(c * hw, hw);
        // Shifting by the first value keeps a constant channel at exactly zero.
        const double shift = ch[0];
        double mean = 0.0;
        for (double v : ch) mean += v - shift;
        mean /= static_cast<double>(hw);
        double ss = 0.0;
        for (double v : ch) ss += (v - shift - mean) * (v - shift - mean);
        out[c] = std::sqrt(ss / static_cast<double>(hw));
    }
    return out;
}

Matrix std_pool_rows(const Matrix& volumes, const StdPoolConfig& cfg) {
    Matrix out(volumes.rows(), cfg.channels);
    for (std::size_t i = 0; i < volumes.rows(); ++i) {
        const Vector s = std_pool(volumes.row(i), cfg);
        std::copy(s.begin(), s.end(), out.row(i).begin());
    }
    return out;
}

}  // namespace heat
