#pragma once

// Helpers shared by the test binaries: random inputs, an independent MLP
// oracle written without the library's kernels, and central differences.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "heat/ebm_net.hpp"
#include "heat/error.hpp"
#include "heat/linalg.hpp"
#include "heat/rng.hpp"

namespace heat::test {

// CHECK_THROWS_AS plus a check on the carried code.
#define CHECK_HEAT_ERROR(expr, expected_code)                          \
    do {                                                               \
        bool heat_threw_ = false;                                      \
        try {                                                          \
            (void)(expr);                                              \
        } catch (const ::heat::Error& heat_e_) {                       \
            heat_threw_ = true;                                        \
            CHECK_MESSAGE(heat_e_.code() == (expected_code), heat_e_.what()); \
        }                                                              \
        CHECK_MESSAGE(heat_threw_, "expected a heat::Error from " #expr); \
    } while (0)

inline Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline Vector random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
    Vector v(n);
    for (double& x : v) x = scale * rng.normal();
    return v;
}

// Random symmetric positive-definite matrix A A^T / d + 0.5 I.
inline Matrix random_spd(Rng& rng, std::size_t d) {
    const Matrix a = random_matrix(rng, d, d);
    Matrix s(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) acc += a(i, k) * a(j, k);
            s(i, j) = acc / static_cast<double>(d) + (i == j ? 0.5 : 0.0);
        }
    return s;
}

// A net with every layer random, including the output layer (EnergyNet::create
// zeroes it).
inline EnergyNet random_net(Rng& rng, std::size_t in, std::size_t hidden, std::size_t depth,
                            Activation act = Activation::LeakyRelu) {
    NetParameters layers;
    std::size_t fan_in = in;
    for (std::size_t l = 0; l < depth; ++l) {
        const std::size_t fan_out = l + 1 == depth ? 1 : hidden;
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        layers.push_back({random_matrix(rng, fan_out, fan_in, scale), random_vector(rng, fan_out, 0.1)});
        fan_in = fan_out;
    }
    return EnergyNet(std::move(layers), act);
}

struct OracleForward {
    double energy = 0.0;
    // Smallest |pre-activation| of any hidden unit: distance to a kink.
    double min_abs_preact = INFINITY;
};

// Straightforward y = W x + b evaluation from the raw parameters.
inline OracleForward oracle_forward(const NetParameters& layers, Activation act, std::span<const double> z) {
    OracleForward out;
    std::vector<double> x(z.begin(), z.end());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weight;
        std::vector<double> y(w.rows());
        for (std::size_t o = 0; o < w.rows(); ++o) {
            double acc = layers[l].bias[o];
            for (std::size_t i = 0; i < w.cols(); ++i) acc += w(o, i) * x[i];
            y[o] = acc;
        }
        if (l + 1 == layers.size()) {
            out.energy = y[0];
            return out;
        }
        for (double& v : y) {
            out.min_abs_preact = std::min(out.min_abs_preact, std::abs(v));
            if (act == Activation::LeakyRelu && v < 0.0) v *= kLeakySlope;
        }
        x = std::move(y);
    }
    return out;
}

// Central difference of f along every coordinate of x.
inline Vector central_diff(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                           double h) {
    Vector g(x.size());
    Vector xp(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = xp[i];
        xp[i] = orig + h;
        const double fp = f(xp);
        xp[i] = orig - h;
        const double fm = f(xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline bool close(double got, double want, double rel, double abs_tol) {
    return std::abs(got - want) <= abs_tol + rel * std::abs(want);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("heat_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace heat::test
