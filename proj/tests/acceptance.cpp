// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "heat/bundle.hpp"
#include "heat/compose.hpp"
#include "heat/data.hpp"
#include "heat/eval.hpp"
#include "heat/pipeline.hpp"
#include "support.hpp"

using namespace heat;
using namespace heat::test;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

const fs::path kConfig = fs::path(HEAT_SOURCE_DIR) / "configs" / "synthetic.json";
const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Gradients against central differences

Verdict gradient_suite() {
    const auto start = Clock::now();
    Rng rng(101);
    std::size_t pairs = 0, failures = 0;
    double worst_net = 0.0;  // max of |g - fd| / (1e-8 + 1e-5 |fd|)
    const double h = 1e-6;

    for (std::size_t depth = 2; depth <= 6; ++depth) {
        for (int trial = 0; trial < 12; ++trial) {
            const std::size_t in = 2 + rng.below(4);
            const Activation act = trial % 4 == 3 ? Activation::Identity : Activation::LeakyRelu;
            const EnergyNet net = random_net(rng, in, 12, depth, act);
            // Keep every hidden unit well away from the kink so the net is
            // linear within the difference step.
            Vector z;
            do {
                z = random_vector(rng, in, 1.5);
            } while (oracle_forward(net.layers(), act, z).min_abs_preact < 1e-3);

            auto check = [&](double got, double fd) {
                const double ratio = std::abs(got - fd) / (1e-8 + 1e-5 * std::abs(fd));
                worst_net = std::max(worst_net, ratio);
                if (ratio > 1.0) ++failures;
            };

            const Vector gi = net.grad_input(z);
            const Vector fdi = central_diff(
                [&](std::span<const double> x) { return oracle_forward(net.layers(), act, x).energy; }, z, h);
            for (std::size_t k = 0; k < in; ++k) check(gi[k], fdi[k]);

            NetParameters grad = zeros_like(net.layers());
            net.accumulate_param_grad(z, 1.0, grad);
            NetParameters params = net.layers();
            auto fd_param = [&](double& slot) {
                const double orig = slot;
                slot = orig + h;
                const double fp = oracle_forward(params, act, z).energy;
                slot = orig - h;
                const double fm = oracle_forward(params, act, z).energy;
                slot = orig;
                return (fp - fm) / (2.0 * h);
            };
            for (std::size_t l = 0; l < params.size(); ++l) {
                auto& w = params[l].weight;
                for (std::size_t r = 0; r < w.rows(); ++r)
                    for (std::size_t c = 0; c < w.cols(); ++c) check(grad[l].weight(r, c), fd_param(w(r, c)));
                for (std::size_t r = 0; r < params[l].bias.size(); ++r)
                    check(grad[l].bias[r], fd_param(params[l].bias[r]));
            }
            ++pairs;
        }
    }

    // Priors: max |g - fd| over the gradient, relative to max |fd|.
    double worst_prior = 0.0;
    auto prior_check = [&](const PriorScorer& p, std::span<const double> z) {
        const Vector g = p.grad(z);
        const Vector fd = central_diff([&](std::span<const double> x) { return p.energy(x); }, z, 1e-5);
        double err = 0.0, scale = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
            err = std::max(err, std::abs(g[k] - fd[k]));
            scale = std::max(scale, std::abs(fd[k]));
        }
        worst_prior = std::max(worst_prior, scale > 0.0 ? err / scale : (err > 0.0 ? INFINITY : 0.0));
    };
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t d = 2 + rng.below(5);
        const double temps[] = {1.0, 10.0, 1000.0};
        const GmmPrior gmm(random_matrix(rng, 3, d, 3.0), random_spd(rng, d), temps[trial % 3]);
        prior_check(gmm, random_vector(rng, d, 3.0));
        const LogitPrior el(LogitHead{random_matrix(rng, 4, d), random_vector(rng, 4)});
        prior_check(el, random_vector(rng, d, 2.0));
        const FlatPrior flat(Vector(d, -1.0), Vector(d, 1.0));
        prior_check(flat, random_vector(rng, d));
    }

    const double secs = seconds_since(start);
    const bool pass = pairs >= 50 && failures == 0 && worst_prior <= 1e-6 && secs < 30.0;
    return {pass, fmt("%zu nets, worst net error %.3g of tolerance, worst prior rel error %.3g, %.1fs", pairs,
                      worst_net, worst_prior, secs)};
}

// ---------------------------------------------------------------------------
// 2. A fresh hybrid equals its prior

Verdict zero_residual_identity() {
    Rng rng(202);
    const std::size_t d = 4;
    std::vector<PriorPtr> priors{
        std::make_shared<GmmPrior>(random_matrix(rng, 3, d, 2.0), random_spd(rng, d), 1e3),
        std::make_shared<LogitPrior>(LogitHead{random_matrix(rng, 3, d), random_vector(rng, 3)}),
        std::make_shared<FlatPrior>(Vector(d, -1.0), Vector(d, 1.0)),
    };
    std::size_t checked = 0, mismatches = 0;
    for (const auto& p : priors) {
        const HybridScorer h = HybridScorer::with_zero_residual(p, {d, 64, 6}, rng.next_u64());
        for (int i = 0; i < 1000; ++i) {
            const Vector z = random_vector(rng, d, 5.0);
            const double a = h.energy(z), b = p->energy(z);
            if (std::memcmp(&a, &b, sizeof a) != 0) ++mismatches;
            ++checked;
        }
    }
    return {mismatches == 0, fmt("%zu points over 3 priors, %zu mismatches", checked, mismatches)};
}

// ---------------------------------------------------------------------------
// 3. Metrics against exhaustive oracles

double oracle_auroc(const ScoredSets& s) {
    // Twice the pair credit, counted in integers.
    std::uint64_t twice = 0;
    for (double o : s.ood_scores)
        for (double i : s.id_scores) twice += o > i ? 2 : (o == i ? 1 : 0);
    return static_cast<double>(twice) /
           (2.0 * static_cast<double>(s.id_scores.size()) * static_cast<double>(s.ood_scores.size()));
}

std::size_t count_le(const std::vector<double>& v, double t) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [t](double x) { return x <= t; }));
}

double oracle_fpr(const ScoredSets& s, double tpr) {
    double tau = INFINITY;
    const double n = static_cast<double>(s.id_scores.size());
    for (double t : s.id_scores)
        if (static_cast<double>(count_le(s.id_scores, t)) / n >= tpr) tau = std::min(tau, t);
    return static_cast<double>(count_le(s.ood_scores, tau)) / static_cast<double>(s.ood_scores.size());
}

double oracle_aupr_in(const ScoredSets& s) {
    std::set<double> thresholds(s.id_scores.begin(), s.id_scores.end());
    thresholds.insert(s.ood_scores.begin(), s.ood_scores.end());
    const double n_id = static_cast<double>(s.id_scores.size());
    std::size_t tp_prev = 0;
    double area = 0.0;
    for (double t : thresholds) {
        const std::size_t tp = count_le(s.id_scores, t), fp = count_le(s.ood_scores, t);
        area += static_cast<double>(tp - tp_prev) / n_id * (static_cast<double>(tp) / static_cast<double>(tp + fp));
        tp_prev = tp;
    }
    return area;
}

Verdict metric_oracles() {
    Rng rng(303);
    std::size_t mismatches = 0, tie_heavy = 0;
    for (int trial = 0; trial < 100; ++trial) {
        ScoredSets s;
        const std::size_t n_id = 1 + rng.below(200), n_ood = 1 + rng.below(200);
        const bool ties = trial % 2 == 0;
        tie_heavy += ties;
        const double shift = 2.0 * rng.normal();
        auto draw = [&](double mu) { return ties ? std::round(2.0 * (mu + rng.normal())) : mu + rng.normal(); };
        for (std::size_t i = 0; i < n_id; ++i) s.id_scores.push_back(draw(0.0));
        for (std::size_t i = 0; i < n_ood; ++i) s.ood_scores.push_back(draw(shift));
        mismatches += auroc(s) != oracle_auroc(s);
        mismatches += fpr_at_tpr(s, 0.95) != oracle_fpr(s, 0.95);
        mismatches += aupr_in(s) != oracle_aupr_in(s);
    }
    return {mismatches == 0, fmt("100 set pairs (%zu tie-heavy), %zu exact mismatches", tie_heavy, mismatches)};
}

// ---------------------------------------------------------------------------
// 4. Composition regimes

Verdict composition_regimes() {
    Rng rng(404);
    std::size_t sum_bad = 0, soft_bad = 0, mono_bad = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t k = 2 + rng.below(4);
        const Vector e = random_vector(rng, k, 2.0);
        double sum = 0.0;
        for (double x : e) sum += x;
        sum_bad += std::abs(compose_energies(e, 0.0) - sum) > 1e-12;
        const double mx = *std::max_element(e.begin(), e.end()), mn = *std::min_element(e.begin(), e.end());
        const double slack = std::log(static_cast<double>(k)) / 50.0;
        soft_bad += std::abs(compose_energies(e, 50.0) - mx) > slack;
        soft_bad += std::abs(compose_energies(e, -50.0) - mn) > slack;

        Vector triple = random_vector(rng, 3, 2.0);
        Vector raised = triple;
        raised[rng.below(3)] += std::abs(rng.normal());
        for (double beta : {kBetaMin, -50.0, -1.0, 0.0, 1.0, 50.0, kBetaMax})
            mono_bad += compose_energies(raised, beta) < compose_energies(triple, beta);
    }
    return {sum_bad + soft_bad + mono_bad == 0,
            fmt("1000 draws: sum violations %zu, soft max/min violations %zu, monotonicity violations %zu", sum_bad,
                soft_bad, mono_bad)};
}

// ---------------------------------------------------------------------------
// Pipeline-based criteria

PipelineConfig base_config() {
    PipelineConfig cfg = load_pipeline_config(kConfig);
    cfg.report.clear();
    cfg.bundle.clear();
    return cfg;
}

PriorSpec gmm_spec(const PipelineConfig& cfg) {
    for (const auto& p : cfg.priors)
        if (p.type == PriorType::Gmm) return p;
    PriorSpec p;
    p.name = default_prior_name(PriorType::Gmm);
    return p;
}

const MetricRow& row_for(const PipelineResult& r, const std::string& method, const std::string& tag) {
    for (const auto& row : r.rows)
        if (row.method == method && row.tag == tag) return row;
    throw std::runtime_error("no row " + method + "/" + tag);
}

double average_auroc(const PipelineResult& r, const std::string& method) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& row : r.rows)
        if (row.method == method) {
            s += row.metrics.auroc;
            ++n;
        }
    return s / static_cast<double>(n);
}

Verdict near_gain_over_gmm() {
    const auto start = Clock::now();
    PipelineConfig cfg = base_config();
    const PriorSpec gmm = gmm_spec(cfg);
    cfg.priors = {gmm};
    const std::string heat_name = "HEAT-" + gmm.name;
    double gain = 0.0, min_far = 1.0;
    std::string per_seed;
    for (std::uint64_t seed : kSeeds) {
        cfg.seed = seed;
        const PipelineResult r = run_pipeline(cfg);
        const double near_gmm = row_for(r, gmm.name, "near").metrics.auroc;
        const double near_heat = row_for(r, heat_name, "near").metrics.auroc;
        gain += near_heat - near_gmm;
        min_far = std::min({min_far, row_for(r, gmm.name, "far").metrics.auroc,
                            row_for(r, heat_name, "far").metrics.auroc});
        per_seed += fmt(" %+.4f", near_heat - near_gmm);
    }
    gain /= static_cast<double>(kSeeds.size());
    const double secs = seconds_since(start);
    return {gain >= 0.0 && min_far >= 0.99 && secs < 120.0,
            fmt("mean near gain %+.5f (per seed:%s), min far AUROC %.4f, %.1fs", gain, per_seed.c_str(), min_far,
                secs)};
}

Verdict low_data_vs_ebm() {
    const auto start = Clock::now();
    PipelineConfig cfg = base_config();
    const PriorSpec gmm = gmm_spec(cfg);
    PriorSpec flat;
    flat.type = PriorType::Flat;
    flat.name = default_prior_name(PriorType::Flat);
    flat.compose = false;
    cfg.priors = {gmm, flat};
    cfg.data_fraction = 0.1;
    double heat = 0.0, ebm = 0.0;
    for (std::uint64_t seed : kSeeds) {
        cfg.seed = seed;
        const PipelineResult r = run_pipeline(cfg);
        heat += average_auroc(r, "HEAT-" + gmm.name);
        ebm += average_auroc(r, flat.name);
    }
    heat /= static_cast<double>(kSeeds.size());
    ebm /= static_cast<double>(kSeeds.size());
    const double secs = seconds_since(start);
    return {heat >= ebm && secs < 120.0,
            fmt("10%% data: HEAT-%s mean AUROC %.4f vs EBM %.4f, %.1fs", gmm.name.c_str(), heat, ebm, secs)};
}

Verdict lambda_regime(PipelineResult& kept) {
    PipelineConfig cfg = base_config();
    cfg.priors = {gmm_spec(cfg)};
    cfg.train.lambda = 1e6;
    const PipelineResult stiff = run_pipeline(cfg);
    cfg.train.lambda = 10.0;
    kept = run_pipeline(cfg);
    const double a = stiff.residual_deviation, b = kept.residual_deviation;
    return {a <= 0.05 && b > a, fmt("mean |E_h - E_q| / std(E_q): %.4g at lambda=1e6, %.4g at lambda=10", a, b)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = "env -u HEAT_SEED '" + std::string(HEAT_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism(const fs::path& dir) {
    for (const char* run : {"a", "b"}) {
        const int code = run_cli("run --quiet --config '" + kConfig.string() + "' --report '" +
                                 (dir / (std::string(run) + ".csv")).string() + "' --bundle '" +
                                 (dir / (std::string(run) + ".heatb")).string() + "'");
        if (code != 0) return {false, fmt("heat run exited with %d", code)};
    }
    const std::string ra = slurp(dir / "a.csv"), rb = slurp(dir / "b.csv");
    const std::string ba = slurp(dir / "a.heatb"), bb = slurp(dir / "b.heatb");
    const bool pass = !ra.empty() && !ba.empty() && ra == rb && ba == bb;
    return {pass, fmt("reports %s (%zu bytes), bundles %s (%zu bytes)", ra == rb ? "identical" : "DIFFER", ra.size(),
                      ba == bb ? "identical" : "DIFFER", ba.size())};
}

std::vector<double> bundle_scores(const Bundle& b, const FeatureSet& fs) {
    const Matrix pooled = fs.has_volumes() ? fs.std_pooled() : Matrix();
    std::vector<double> out;
    for (std::size_t i = 0; i < fs.n(); ++i) {
        std::vector<std::span<const double>> in;
        for (const auto& s : b.composition.scorers)
            in.push_back(s.source() == FeatureSource::StdPooled ? pooled.row(i) : fs.features().row(i));
        out.push_back(heat_score(b.composition, in));
    }
    return out;
}

std::vector<double> pooled_energies(const Bundle& b, const FeatureSet& fs) {
    std::vector<double> out;
    for (const auto& s : b.composition.scorers)
        if (s.source() == FeatureSource::Pooled)
            for (std::size_t i = 0; i < fs.n(); ++i) out.push_back(s.energy(fs.features().row(i)));
    return out;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

FeatureSet as_f32(const FeatureSet& fs) {
    auto narrow = [](Matrix m) {
        for (double& v : m.data()) v = static_cast<double>(static_cast<float>(v));
        return m;
    };
    std::optional<std::vector<int>> labels;
    if (fs.has_labels()) labels = fs.labels();
    std::optional<VolumeSet> vols;
    if (fs.has_volumes()) vols = VolumeSet{fs.volumes().layout, narrow(fs.volumes().volumes)};
    return FeatureSet(narrow(fs.features()), labels, vols);
}

Verdict round_trip(const fs::path& dir, const PipelineResult& trained) {
    const PipelineConfig cfg = base_config();
    SyntheticSpec spec = *cfg.id_train.synthetic;
    spec.n = 300;
    spec.seed = 909;
    const FeatureSet fs = as_f32(generate(spec));
    std::vector<std::string> broken;

    // Feature files.
    const Bundle cli_bundle = load_bundle(dir / "a.heatb");
    save_features(dir / "f.feat", fs);
    if (!same_bits(bundle_scores(cli_bundle, load_features(dir / "f.feat")), bundle_scores(cli_bundle, fs)))
        broken.push_back("binary features");
    const FeatureSet wide = generate(spec);
    save_features(dir / "f.csv", wide);
    if (!same_bits(pooled_energies(cli_bundle, load_features(dir / "f.csv")), pooled_energies(cli_bundle, wide)))
        broken.push_back("csv features");

    // Bundles: the in-memory result of training and the file written by the CLI.
    save_bundle(dir / "trained.heatb", trained.bundle);
    if (!same_bits(bundle_scores(load_bundle(dir / "trained.heatb"), fs), bundle_scores(trained.bundle, fs)))
        broken.push_back("trained bundle");
    save_bundle(dir / "again.heatb", cli_bundle);
    if (!same_bits(bundle_scores(load_bundle(dir / "again.heatb"), fs), bundle_scores(cli_bundle, fs)) ||
        slurp(dir / "again.heatb") != slurp(dir / "a.heatb"))
        broken.push_back("cli bundle");

    std::string detail = "binary and csv features, trained and cli bundles, 300 samples";
    if (!broken.empty()) {
        detail = "broken:";
        for (const auto& b : broken) detail += " " + b;
    }
    return {broken.empty(), detail};
}

}  // namespace

int main() {
    const fs::path dir = fs::temp_directory_path() / "heat_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    int failed = 0;
    auto report = [&](int id, const char* name, const std::function<Verdict()>& fn) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        failed += !v.pass;
        std::printf("criterion %d: %s  %s: %s\n", id, v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
    };

    PipelineResult trained;
    report(1, "gradient suite", gradient_suite);
    report(2, "zero-residual identity", zero_residual_identity);
    report(3, "metric oracle equivalence", metric_oracles);
    report(4, "composition regimes", composition_regimes);
    report(5, "residual gain over GMM (5 seeds)", near_gain_over_gmm);
    report(6, "HEAT-GMM vs pure EBM at 10% data (5 seeds)", low_data_vs_ebm);
    report(7, "lambda regime", [&] { return lambda_regime(trained); });
    report(8, "determinism of heat run", [&] { return determinism(dir); });
    report(9, "round trips", [&] { return round_trip(dir, trained); });
    std::printf("%d of 9 criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
