#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "heat/priors.hpp"
#include "support.hpp"

using namespace heat;
using namespace heat::test;

namespace {

// One-sample Kolmogorov-Smirnov statistic against N(mu, sd^2).
double ks_normal(std::vector<double> xs, double mu, double sd) {
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = 0.5 * std::erfc(-(xs[i] - mu) / (sd * std::sqrt(2.0)));
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
    }
    return d;
}

GmmPrior random_gmm(Rng& rng, std::size_t classes, std::size_t d, double temperature) {
    return GmmPrior(random_matrix(rng, classes, d, 3.0), random_spd(rng, d), temperature);
}

}  // namespace

TEST_CASE("single-class GMM energy is half the squared distance") {
    const GmmPrior g(Matrix::from_rows({{1.0, 2.0}}), Matrix::identity(2), 1.0);
    CHECK(g.energy(Vector{1.0, 2.0}) == doctest::Approx(0.0));
    CHECK(g.energy(Vector{4.0, 6.0}) == doctest::Approx(12.5));
    const GmmPrior hot(Matrix::from_rows({{1.0, 2.0}}), Matrix::identity(2), 1000.0);
    CHECK(hot.energy(Vector{4.0, 6.0}) == doctest::Approx(12.5 / 1000.0));
}

TEST_CASE("two symmetric classes at the midpoint") {
    // -logsumexp(-1/2, -1/2) = 1/2 - log 2
    const GmmPrior g(Matrix::from_rows({{-1.0, 0.0}, {1.0, 0.0}}), Matrix::identity(2), 1.0);
    CHECK(g.energy(Vector{0.0, 0.0}) == doctest::Approx(0.5 - std::log(2.0)));
    for (double v : g.grad(Vector{0.0, 0.0})) CHECK(v == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("GMM energy against an explicit 2x2 inverse") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix s = random_spd(rng, 2);
        const Matrix means = random_matrix(rng, 3, 2);
        const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
        const double i00 = s(1, 1) / det, i11 = s(0, 0) / det, i01 = -s(0, 1) / det;
        const GmmPrior g(means, s, 2.5);
        const Vector z = random_vector(rng, 2);
        Vector terms;
        for (std::size_t c = 0; c < 3; ++c) {
            const double dx = z[0] - means(c, 0), dy = z[1] - means(c, 1);
            terms.push_back(-0.5 * (i00 * dx * dx + 2 * i01 * dx * dy + i11 * dy * dy));
        }
        double m = *std::max_element(terms.begin(), terms.end()), acc = 0.0;
        for (double t : terms) acc += std::exp(t - m);
        CHECK(g.energy(z) == doctest::Approx(-(m + std::log(acc)) / 2.5).epsilon(1e-12));
    }
}

TEST_CASE("GMM gradient matches central differences") {
    Rng rng(3);
    for (double t : {1.0, 7.0, 1000.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            const GmmPrior g = random_gmm(rng, 3, 4, t);
            const Vector z = random_vector(rng, 4, 2.0);
            const Vector grad = g.grad(z);
            const Vector fd = central_diff([&](std::span<const double> x) { return g.energy(x); }, z, 1e-5);
            for (std::size_t k = 0; k < z.size(); ++k) CHECK(close(grad[k], fd[k], 1e-6, 1e-9 / t));
            Vector g2(4);
            CHECK(g.energy_and_grad(z, g2) == doctest::Approx(g.energy(z)).epsilon(1e-15));
            for (std::size_t k = 0; k < 4; ++k) CHECK(g2[k] == doctest::Approx(grad[k]).epsilon(1e-14));
        }
    }
}

TEST_CASE("GMM energy is invariant under a joint rotation") {
    Rng rng(4);
    const double th = 1.1;
    const Matrix rot = Matrix::from_rows({{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}});
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix means = random_matrix(rng, 3, 2, 3.0);
        const Matrix cov = random_spd(rng, 2);
        const GmmPrior a(means, cov, 1.0);
        const GmmPrior b(matmul(means, rot.transpose()), matmul(matmul(rot, cov), rot.transpose()), 1.0);
        const Vector z = random_vector(rng, 2, 2.0);
        CHECK(b.energy(matvec(rot, z)) == doctest::Approx(a.energy(z)).epsilon(1e-10));
    }
}

TEST_CASE("fit_gmm: class means and n-1 shared covariance by hand") {
    const Matrix x = Matrix::from_rows({{0, 0}, {2, 0}, {10, 0}, {10, 2}});
    const std::vector<int> y{0, 0, 1, 1};
    const GmmPrior g = fit_gmm(x, y, 1.0);
    CHECK(g.class_count() == 2);
    CHECK(g.means() == Matrix::from_rows({{1, 0}, {10, 1}}));
    // Centered rows (-1,0), (1,0), (0,-1), (0,1): scatter diag(2, 2) over n-1 = 3.
    const Matrix cov = g.factor().reconstruct();
    CHECK(cov(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(cov(1, 1) == doctest::Approx(2.0 / 3.0));
    CHECK(cov(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("fit_gmm rejects tiny classes and bad labels") {
    const Matrix x = Matrix::from_rows({{0, 0}, {2, 0}, {10, 0}});
    CHECK_HEAT_ERROR(fit_gmm(x, std::vector<int>{0, 0, 1}, 1.0), ErrorCode::ClassTooSmall);
    CHECK_HEAT_ERROR(fit_gmm(x, std::vector<int>{0, 0}, 1.0), ErrorCode::ShapeMismatch);
    CHECK_HEAT_ERROR(fit_gmm(x, std::vector<int>{0, -1, 0}, 1.0), ErrorCode::InvalidSpec);
    CHECK_HEAT_ERROR(fit_gmm(Matrix(0, 2), std::vector<int>{}, 1.0), ErrorCode::EmptyDataset);
    CHECK_HEAT_ERROR(GmmPrior(Matrix::from_rows({{0, 0}}), Matrix::identity(2), 0.0), ErrorCode::InvalidSpec);
}

TEST_CASE("GMM proposals follow the temperature-widened mixture") {
    // One class at (1, -2) with covariance diag(1, 4) and T = 4: marginals are
    // N(1, 4) and N(-2, 16).
    const GmmPrior g(Matrix::from_rows({{1.0, -2.0}}), Matrix::from_rows({{1, 0}, {0, 4}}), 4.0);
    Rng rng(5);
    const Matrix s = g.propose(rng, 4000);
    std::vector<double> a(s.rows()), b(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
        a[i] = s(i, 0);
        b[i] = s(i, 1);
    }
    // 1% critical value of the KS statistic is about 1.63 / sqrt(n).
    const double crit = 1.63 / std::sqrt(4000.0);
    CHECK(ks_normal(a, 1.0, 2.0) < crit);
    CHECK(ks_normal(b, -2.0, 4.0) < crit);
}

TEST_CASE("GMM proposals pick classes uniformly") {
    const GmmPrior g(Matrix::from_rows({{-50.0}, {50.0}}), Matrix::identity(1), 1.0);
    Rng rng(6);
    const Matrix s = g.propose(rng, 2000);
    int left = 0;
    for (std::size_t i = 0; i < s.rows(); ++i) left += s(i, 0) < 0.0;
    CHECK(std::abs(left - 1000) < 5 * 23);  // binomial std ~ 22.4
}

TEST_CASE("energy-logits: hand values and gradient") {
    // W = I, b = 0: E(z) = -log(e^{z0} + e^{z1})
    const LogitHead head{Matrix::identity(2), Vector{0.0, 0.0}};
    CHECK(el_energy(head, Vector{0.0, 0.0}) == doctest::Approx(-std::log(2.0)));
    CHECK(el_energy(head, Vector{1.0, 1.0}) == doctest::Approx(-1.0 - std::log(2.0)));
    const Vector g = el_grad(head, Vector{0.0, 0.0});
    CHECK(g[0] == doctest::Approx(-0.5));
    CHECK(g[1] == doctest::Approx(-0.5));

    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const LogitHead h{random_matrix(rng, 4, 3), random_vector(rng, 4)};
        const Vector z = random_vector(rng, 3, 2.0);
        const Vector grad = el_grad(h, z);
        const Vector fd = central_diff([&](std::span<const double> x) { return el_energy(h, x); }, z, 1e-5);
        for (std::size_t k = 0; k < 3; ++k) CHECK(close(grad[k], fd[k], 1e-6, 1e-9));
    }
}

TEST_CASE("logit head training separates two clusters") {
    Rng rng(8);
    Matrix x(200, 2);
    std::vector<int> y(200);
    for (std::size_t i = 0; i < 200; ++i) {
        y[i] = static_cast<int>(i % 2);
        x(i, 0) = (y[i] ? 3.0 : -3.0) + rng.normal();
        x(i, 1) = rng.normal();
    }
    const LogitHead head = train_logit_head(x, y);
    int correct = 0;
    for (std::size_t i = 0; i < 200; ++i) {
        const Vector l = head.logits(x.row(i));
        correct += (l[1] > l[0]) == (y[i] == 1);
    }
    CHECK(correct >= 195);
    CHECK_HEAT_ERROR(train_logit_head(Matrix(0, 2), std::vector<int>{}), ErrorCode::EmptyDataset);
}

TEST_CASE("logit prior proposal uses the population moments") {
    const LogitHead head{Matrix::identity(2), Vector{0.0, 0.0}};
    Rng first(1);
    CHECK_HEAT_ERROR(LogitPrior(head).propose(first, 3), ErrorCode::NotFitted);
    const Matrix x = Matrix::from_rows({{0, 10}, {2, 10}, {4, 10}});
    const LogitPrior p = LogitPrior::fit(head, x);
    CHECK(p.proposal_mean() == Vector{2.0, 10.0});
    CHECK(p.proposal_std()[0] == doctest::Approx(std::sqrt(8.0 / 3.0)));
    CHECK(p.proposal_std()[1] == 0.0);
    Rng rng(2);
    const Matrix s = p.propose(rng, 10);
    for (std::size_t i = 0; i < 10; ++i) CHECK(s(i, 1) == 10.0);
}

TEST_CASE("flat prior is zero with a padded uniform box") {
    const Matrix x = Matrix::from_rows({{0, 0}, {4, 2}});
    const FlatPrior f = FlatPrior::fit_box(x, 0.25);
    CHECK(f.low() == Vector{-1.0, -0.5});
    CHECK(f.high() == Vector{5.0, 2.5});
    CHECK(f.energy(Vector{100.0, -3.0}) == 0.0);
    for (double g : f.grad(Vector{1.0, 1.0})) CHECK(g == 0.0);
    Rng rng(3);
    const Matrix s = f.propose(rng, 500);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        CHECK(s(i, 0) >= -1.0);
        CHECK(s(i, 0) < 5.0);
        CHECK(s(i, 1) >= -0.5);
        CHECK(s(i, 1) < 2.5);
    }
    CHECK_HEAT_ERROR(FlatPrior(Vector{1.0}, Vector{0.0}), ErrorCode::InvalidSpec);
}

TEST_CASE("std pooling: population std per channel") {
    const StdPoolConfig cfg{2, 2, 2};
    // channel 0: 1 2 3 4 -> std sqrt(1.25); channel 1 constant -> exactly 0
    const Vector vol{1, 2, 3, 4, 7, 7, 7, 7};
    const Vector s = std_pool(vol, cfg);
    CHECK(s[0] == doctest::Approx(std::sqrt(1.25)));
    CHECK(s[1] == 0.0);
    const Vector big{1e9 + 0.1, 1e9 + 0.1, 1e9 + 0.1, 1e9 + 0.1, 0, 0, 0, 0};
    CHECK(std_pool(big, cfg)[0] == 0.0);
    CHECK_HEAT_ERROR(std_pool(Vector{1, 2, 3}, cfg), ErrorCode::DimensionMismatch);
}

TEST_CASE("std pooling is shift invariant and scales with the data") {
    Rng rng(9);
    const StdPoolConfig cfg{3, 4, 5};
    for (int trial = 0; trial < 10; ++trial) {
        Vector v = random_vector(rng, cfg.volume_size());
        const Vector base = std_pool(v, cfg);
        Vector shifted = v, scaled = v;
        for (double& x : shifted) x += 17.0;
        for (double& x : scaled) x *= -3.0;
        const Vector a = std_pool(shifted, cfg), b = std_pool(scaled, cfg);
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(a[c] == doctest::Approx(base[c]).epsilon(1e-12));
            CHECK(b[c] == doctest::Approx(3.0 * base[c]).epsilon(1e-12));
        }
    }
    const Matrix rows = random_matrix(rng, 6, cfg.volume_size());
    const Matrix pooled = std_pool_rows(rows, cfg);
    CHECK(pooled.rows() == 6);
    CHECK(pooled.cols() == 3);
    CHECK(Vector(pooled.row(4).begin(), pooled.row(4).end()) == std_pool(rows.row(4), cfg));
}
