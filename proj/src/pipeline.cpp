#include "heat/pipeline.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bytes.hpp"
#include "json_util.hpp"

namespace heat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
    fail(ErrorCode::ConfigError, where + ": " + what);
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) config_fail(where, "expected an object");
    for (const auto& [key, _] : obj.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) config_fail(where, "unknown key '" + key + "'");
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        config_fail(where + "." + key, "has the wrong type");
    }
}

Vector get_vector(const json& j, const std::string& where) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) config_fail(where, "expected a number or an array of numbers");
    Vector v;
    for (const auto& x : j) {
        if (!x.is_number()) config_fail(where, "expected numbers");
        v.push_back(x.get<double>());
    }
    return v;
}

SyntheticSpec parse_synthetic(const json& j, const std::string& where, bool& explicit_seed) {
    check_keys(j,
               {"kind", "centers", "spacing", "stds", "noise_std", "ring_center", "radius", "box_low", "box_high",
                "n", "seed", "volume_hw", "dim"},
               where);
    SyntheticSpec s;
    try {
        s.kind = synthetic_kind_from_string(get_or<std::string>(j, "kind", "gmm-clusters", where));
    } catch (const Error& e) {
        config_fail(where + ".kind", e.message());
    }
    s.dim = get_or<std::size_t>(j, "dim", 2, where);
    if (j.contains("centers")) {
        const json& c = j.at("centers");
        if (c.is_number_unsigned()) {
            s.centers = default_centers(c.get<std::size_t>(), s.dim, get_or<double>(j, "spacing", 6.0, where));
        } else if (c.is_array()) {
            for (std::size_t i = 0; i < c.size(); ++i)
                s.centers.push_back(get_vector(c[i], where + ".centers[" + std::to_string(i) + "]"));
        } else {
            config_fail(where + ".centers", "expected a count or a list of points");
        }
    }
    if (j.contains("stds")) s.stds = get_vector(j.at("stds"), where + ".stds");
    s.noise_std = get_or<double>(j, "noise_std", 0.0, where);
    if (j.contains("ring_center")) s.ring_center = get_vector(j.at("ring_center"), where + ".ring_center");
    s.radius = get_or<double>(j, "radius", 1.0, where);
    if (j.contains("box_low")) s.box_low = get_vector(j.at("box_low"), where + ".box_low");
    if (j.contains("box_high")) s.box_high = get_vector(j.at("box_high"), where + ".box_high");
    s.n = get_or<std::size_t>(j, "n", 0, where);
    explicit_seed = j.contains("seed");
    s.seed = get_or<std::uint64_t>(j, "seed", 0, where);
    s.volume_hw = get_or<std::size_t>(j, "volume_hw", 0, where);
    try {
        s.validate();
    } catch (const Error& e) {
        config_fail(where, e.message());
    }
    return s;
}

DataSource parse_source(const json& j, const fs::path& base, const std::string& where) {
    DataSource src;
    if (j.is_string()) {
        fs::path p = j.get<std::string>();
        src.path = p.is_absolute() || base.empty() ? p : base / p;
        return src;
    }
    check_keys(j, {"path", "synthetic"}, where);
    if (j.contains("path") == j.contains("synthetic")) config_fail(where, "give exactly one of 'path' or 'synthetic'");
    if (j.contains("path")) return parse_source(j.at("path"), base, where + ".path");
    src.synthetic = parse_synthetic(j.at("synthetic"), where + ".synthetic", src.explicit_seed);
    return src;
}

PriorType prior_type_from_string(const std::string& s, const std::string& where) {
    if (s == "gmm") return PriorType::Gmm;
    if (s == "gmm_std") return PriorType::GmmStd;
    if (s == "el") return PriorType::EnergyLogits;
    if (s == "flat") return PriorType::Flat;
    config_fail(where, "unknown prior type '" + s + "' (expected gmm, gmm_std, el or flat)");
}

PriorSpec parse_prior(const json& j, const fs::path& base, const std::string& where) {
    if (j.is_string()) return parse_prior(json{{"type", j}}, base, where);
    check_keys(j, {"type", "name", "temperature", "jitter", "logit_epochs", "logit_lr", "logit_head", "box_padding",
                   "compose"},
               where);
    if (!j.contains("type")) config_fail(where, "missing 'type'");
    PriorSpec p;
    p.type = prior_type_from_string(get_or<std::string>(j, "type", "", where), where + ".type");
    p.name = get_or<std::string>(j, "name", default_prior_name(p.type), where);
    p.temperature = get_or<double>(j, "temperature", p.temperature, where);
    p.jitter = get_or<double>(j, "jitter", p.jitter, where);
    p.logit.epochs = get_or<std::size_t>(j, "logit_epochs", p.logit.epochs, where);
    p.logit.lr = get_or<double>(j, "logit_lr", p.logit.lr, where);
    if (j.contains("logit_head")) {
        fs::path h = get_or<std::string>(j, "logit_head", "", where);
        p.logit_head = h.is_absolute() || base.empty() ? h : base / h;
    }
    p.box_padding = get_or<double>(j, "box_padding", p.box_padding, where);
    p.compose = get_or<bool>(j, "compose", p.type != PriorType::Flat, where);
    return p;
}

void parse_sgld(const json& j, SgldConfig& s) {
    const std::string where = "sgld";
    check_keys(j, {"steps", "step_size", "noise", "init", "grad_clip", "threads"}, where);
    s.steps = get_or<std::size_t>(j, "steps", s.steps, where);
    auto pair = [&](const char* key, double& a, double& b) {
        if (!j.contains(key)) return;
        Vector v = get_vector(j.at(key), where + "." + key);
        if (v.size() == 1) v.push_back(v[0]);
        if (v.size() != 2) config_fail(where + "." + key, "expected [start, end]");
        a = v[0];
        b = v[1];
    };
    pair("step_size", s.step_size_start, s.step_size_end);
    pair("noise", s.noise_start, s.noise_end);
    const auto init = get_or<std::string>(j, "init", "proposal", where);
    if (init == "proposal")
        s.init = ChainInit::Proposal;
    else if (init == "data")
        s.init = ChainInit::Data;
    else
        config_fail(where + ".init", "expected 'proposal' or 'data'");
    s.grad_clip = get_or<double>(j, "grad_clip", s.grad_clip, where);
    s.threads = get_or<std::size_t>(j, "threads", s.threads, where);
}

void parse_train(const json& j, TrainConfig& t) {
    const std::string where = "train";
    check_keys(j, {"epochs", "batch_size", "lambda", "lr", "input_noise_std", "hidden_dim", "depth"}, where);
    t.epochs = get_or<std::size_t>(j, "epochs", t.epochs, where);
    t.batch_size = get_or<std::size_t>(j, "batch_size", t.batch_size, where);
    t.lambda = get_or<double>(j, "lambda", t.lambda, where);
    t.lr = get_or<double>(j, "lr", t.lr, where);
    t.input_noise_std = get_or<double>(j, "input_noise_std", t.input_noise_std, where);
    t.hidden_dim = get_or<std::size_t>(j, "hidden_dim", t.hidden_dim, where);
    t.depth = get_or<std::size_t>(j, "depth", t.depth, where);
}

template <class Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, e);
    }
}

FeatureSet load_source(const DataSource& src, std::uint64_t seed, const std::string& role) {
    if (src.path) return load_features(*src.path);
    SyntheticSpec spec = *src.synthetic;
    if (!src.explicit_seed) spec.seed = mix_seed(seed, "data:" + role, {});
    return generate(spec);
}

std::vector<int> labels_or_zero(const FeatureSet& fs) {
    return fs.has_labels() ? fs.labels() : std::vector<int>(fs.n(), 0);
}

LogitHead load_logit_head(const fs::path& path) {
    const auto bytes = detail::read_file(path);
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end());
        const auto& w = j.at("weight");
        const auto& b = j.at("bias");
        require(w.is_array() && !w.empty(), ErrorCode::ParseError, "weight must be a non-empty matrix");
        const std::size_t c = w.size(), d = w[0].size();
        Matrix weight(c, d);
        for (std::size_t r = 0; r < c; ++r) {
            require(w[r].size() == d, ErrorCode::ShapeMismatch, "ragged weight matrix");
            for (std::size_t k = 0; k < d; ++k) weight(r, k) = w[r][k].get<double>();
        }
        Vector bias = b.get<Vector>();
        require(bias.size() == c, ErrorCode::ShapeMismatch, "bias length differs from the class count");
        return {std::move(weight), std::move(bias)};
    } catch (const json::exception& e) {
        fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_metric(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

std::string_view to_string(PriorType type) noexcept {
    switch (type) {
        case PriorType::Gmm: return "gmm";
        case PriorType::GmmStd: return "gmm_std";
        case PriorType::EnergyLogits: return "el";
        case PriorType::Flat: return "flat";
    }
    return "?";
}

std::string default_prior_name(PriorType type) {
    switch (type) {
        case PriorType::Gmm: return "GMM";
        case PriorType::GmmStd: return "GMM_std";
        case PriorType::EnergyLogits: return "EL";
        case PriorType::Flat: return "EBM";
    }
    return "?";
}

void PipelineConfig::validate() const {
    if (!id_train.path && !id_train.synthetic) config_fail("data", "no ID training data");
    if (ood.empty()) config_fail("data.ood", "at least one OOD set is required");
    if (priors.empty()) config_fail("priors", "the scorer list is empty");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) config_fail("data.train_fraction", "must lie in (0, 1)");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0)) config_fail("data.data_fraction", "must lie in (0, 1]");
    if (std::isnan(beta)) config_fail("beta", "is NaN");
    std::set<std::string> names;
    bool any_composed = false;
    for (const auto& p : priors) {
        if (!names.insert(p.name).second) config_fail("priors", "duplicate prior name '" + p.name + "'");
        if (p.type != PriorType::Flat && !(p.temperature > 0.0)) config_fail("priors." + p.name, "temperature must be > 0");
        if (p.jitter < 0.0) config_fail("priors." + p.name, "jitter must be >= 0");
        any_composed = any_composed || p.compose;
    }
    if (!any_composed) config_fail("priors", "no prior takes part in the composition");
    std::set<std::string> ood_names;
    for (const auto& o : ood) {
        if (o.name.empty()) config_fail("data.ood", "every OOD set needs a name");
        if (!ood_names.insert(o.name).second) config_fail("data.ood", "duplicate OOD set name '" + o.name + "'");
        if (o.tag != "near" && o.tag != "mid" && o.tag != "far")
            config_fail("data.ood." + o.name, "tag must be near, mid or far (got '" + o.tag + "')");
    }
    try {
        sgld.validate();
        train.validate();
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, e.message());
    }
}

PipelineConfig parse_pipeline_config(const json& j, const fs::path& base) {
    check_keys(j, {"name", "seed", "data", "priors", "sgld", "train", "beta", "standardize", "outputs"}, "config");
    PipelineConfig cfg;
    cfg.name = get_or<std::string>(j, "name", cfg.name, "config");
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, "config");

    if (!j.contains("data")) config_fail("config", "missing 'data'");
    const json& d = j.at("data");
    check_keys(d, {"id", "id_train", "id_test", "train_fraction", "data_fraction", "ood"}, "data");
    if (d.contains("id") == d.contains("id_train")) config_fail("data", "give exactly one of 'id' or 'id_train'");
    if (d.contains("id")) {
        if (d.contains("id_test")) config_fail("data", "'id' is split automatically; use id_train/id_test instead");
        cfg.id_train = parse_source(d.at("id"), base, "data.id");
    } else {
        cfg.id_train = parse_source(d.at("id_train"), base, "data.id_train");
        if (d.contains("id_test")) cfg.id_test = parse_source(d.at("id_test"), base, "data.id_test");
    }
    cfg.train_fraction = get_or<double>(d, "train_fraction", cfg.train_fraction, "data");
    cfg.data_fraction = get_or<double>(d, "data_fraction", cfg.data_fraction, "data");
    if (d.contains("ood")) {
        const json& o = d.at("ood");
        if (!o.is_array()) config_fail("data.ood", "expected a list");
        for (std::size_t i = 0; i < o.size(); ++i) {
            const std::string where = "data.ood[" + std::to_string(i) + "]";
            check_keys(o[i], {"name", "tag", "source"}, where);
            if (!o[i].contains("source")) config_fail(where, "missing 'source'");
            OodSource s;
            s.name = get_or<std::string>(o[i], "name", "ood" + std::to_string(i), where);
            s.tag = get_or<std::string>(o[i], "tag", "", where);
            s.source = parse_source(o[i].at("source"), base, where + ".source");
            cfg.ood.push_back(std::move(s));
        }
    }

    if (j.contains("priors")) {
        const json& p = j.at("priors");
        if (!p.is_array()) config_fail("priors", "expected a list");
        for (std::size_t i = 0; i < p.size(); ++i)
            cfg.priors.push_back(parse_prior(p[i], base, "priors[" + std::to_string(i) + "]"));
    } else {
        for (auto t : {PriorType::Gmm, PriorType::GmmStd, PriorType::EnergyLogits})
            cfg.priors.push_back(parse_prior(json{{"type", std::string(to_string(t))}}, base, "priors"));
    }
    if (j.contains("sgld")) parse_sgld(j.at("sgld"), cfg.sgld);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    if (j.contains("beta")) cfg.beta = detail::beta_from_json(j.at("beta"));
    cfg.standardize = get_or<bool>(j, "standardize", cfg.standardize, "config");

    cfg.report = base.empty() ? fs::path("report.csv") : base / "report.csv";
    cfg.bundle = base.empty() ? fs::path("model.heatb") : base / "model.heatb";
    if (j.contains("outputs")) {
        const json& out = j.at("outputs");
        check_keys(out, {"report", "bundle"}, "outputs");
        auto resolve = [&](const char* key, fs::path& dst) {
            if (!out.contains(key)) return;
            fs::path p = get_or<std::string>(out, key, "", "outputs");
            dst = p.is_absolute() || base.empty() ? p : base / p;
        };
        resolve("report", cfg.report);
        resolve("bundle", cfg.bundle);
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::vector<std::uint8_t> bytes;
    try {
        bytes = detail::read_file(path);
    } catch (const Error& e) {
        fail(ErrorCode::ConfigError, e.message());
    }
    json j;
    try {
        j = json::parse(bytes.begin(), bytes.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        fail(ErrorCode::ConfigError, path.string() + ": " + e.what());
    }
    return parse_pipeline_config(j, path.parent_path());
}

void apply_env_overrides(PipelineConfig& cfg) {
    const char* env = std::getenv("HEAT_SEED");
    if (env == nullptr || *env == '\0') return;
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (errno != 0 || *end != '\0' || *env == '-')
        fail(ErrorCode::ConfigError, "HEAT_SEED must be a non-negative integer (got '" + std::string(env) + "')");
    cfg.seed = v;
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const ProgressFn& progress) {
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    in_stage("config", [&] { cfg.validate(); });

    // Load everything and check it against the priors before any fitting.
    FeatureSet train, test;
    std::vector<FeatureSet> ood_sets;
    in_stage("load", [&] {
        FeatureSet id = load_source(cfg.id_train, cfg.seed, "id_train");
        if (cfg.id_test) {
            train = std::move(id);
            test = load_source(*cfg.id_test, cfg.seed, "id_test");
        } else {
            auto [a, b] = split(id, cfg.train_fraction, mix_seed(cfg.seed, "split", {}));
            train = std::move(a);
            test = std::move(b);
        }
        if (cfg.data_fraction < 1.0) train = split(train, cfg.data_fraction, mix_seed(cfg.seed, "data-fraction", {})).first;
        for (const auto& o : cfg.ood) ood_sets.push_back(load_source(o.source, cfg.seed, "ood:" + o.name));

        const std::size_t d = train.d();
        require(test.d() == d, ErrorCode::ShapeMismatch, "ID test features have a different dimension");
        for (std::size_t i = 0; i < ood_sets.size(); ++i)
            require(ood_sets[i].d() == d, ErrorCode::ShapeMismatch,
                    "OOD set '" + cfg.ood[i].name + "' has a different dimension");
        for (const auto& p : cfg.priors) {
            if (p.type == PriorType::GmmStd) {
                const auto layout = train.has_volumes() ? train.volumes().layout : StdPoolConfig{};
                auto check = [&](const FeatureSet& fs, const std::string& what) {
                    require(fs.has_volumes() && fs.volumes().layout == layout, ErrorCode::ShapeMismatch,
                            p.name + " needs feature volumes with one layout; missing or different in " + what);
                };
                check(train, "the ID train set");
                check(test, "the ID test set");
                for (std::size_t i = 0; i < ood_sets.size(); ++i) check(ood_sets[i], "OOD set '" + cfg.ood[i].name + "'");
            }
            if (p.type == PriorType::EnergyLogits && !p.logit_head)
                require(train.has_labels() && train.class_count() >= 2, ErrorCode::ConfigError,
                        p.name + " needs labeled ID training data with at least two classes (or a logit_head file)");
        }
        say("loaded " + std::to_string(train.n()) + " train / " + std::to_string(test.n()) + " test ID samples, " +
            std::to_string(ood_sets.size()) + " OOD sets");
    });

    PipelineResult result;
    for (const auto& o : cfg.ood) {
        result.ood_names.push_back(o.name);
        result.ood_tags.push_back(o.tag);
    }
    result.bundle.composition.beta = cfg.beta;
    result.bundle.composition.standardize = cfg.standardize;
    result.bundle.metadata_json = json{{"experiment", cfg.name}, {"seed", cfg.seed}}.dump();

    double deviation_sum = 0.0;
    std::size_t deviation_count = 0;
    for (std::size_t k = 0; k < cfg.priors.size(); ++k) {
        const PriorSpec& p = cfg.priors[k];
        const bool pooled_std = p.type == PriorType::GmmStd;
        const FeatureSource source = pooled_std ? FeatureSource::StdPooled : FeatureSource::Pooled;
        auto view = [&](const FeatureSet& fs) { return pooled_std ? fs.std_pooled() : fs.features(); };
        const Matrix train_x = view(train);

        PriorPtr prior = in_stage("fit:" + p.name, [&]() -> PriorPtr {
            say("fitting prior " + p.name);
            switch (p.type) {
                case PriorType::Gmm:
                case PriorType::GmmStd:
                    return std::make_shared<GmmPrior>(fit_gmm(train_x, labels_or_zero(train), p.temperature, p.jitter));
                case PriorType::EnergyLogits: {
                    LogitHead head = p.logit_head ? load_logit_head(*p.logit_head)
                                                  : train_logit_head(train_x, train.labels(), p.logit);
                    require(head.dim() == train_x.cols(), ErrorCode::ShapeMismatch,
                            "logit head dimension differs from the features");
                    return std::make_shared<LogitPrior>(LogitPrior::fit(std::move(head), train_x));
                }
                case PriorType::Flat:
                    return std::make_shared<FlatPrior>(FlatPrior::fit_box(train_x, p.box_padding));
            }
            return nullptr;
        });

        SgldConfig sgld = cfg.sgld;
        sgld.seed = mix_seed(cfg.seed, "sgld", {k});
        TrainConfig tc = cfg.train;
        tc.seed = mix_seed(cfg.seed, "train", {k});
        TrainResult trained = in_stage("train:" + p.name, [&] {
            say("training residual for " + p.name);
            return train_residual(train_x, prior, sgld, tc, source);
        });
        HybridScorer& scorer = trained.scorer;
        result.histories.emplace_back(p.name, trained.history);

        ScorerEnergies en;
        en.name = p.name;
        en.composed = p.compose;
        in_stage("score:" + p.name, [&] {
            auto score = [&](const FeatureSet& fs, std::vector<double>& prior_e, std::vector<double>& hybrid_e) {
                const Matrix x = view(fs);
                prior_e.resize(x.rows());
                hybrid_e.resize(x.rows());
                for (std::size_t i = 0; i < x.rows(); ++i) {
                    prior_e[i] = scorer.prior_energy(x.row(i));
                    hybrid_e[i] = scorer.energy(x.row(i));
                }
                require(all_finite(hybrid_e), ErrorCode::NonFiniteValue, "non-finite energy while scoring");
            };
            score(test, en.id_prior, en.id_hybrid);
            en.ood_prior.resize(ood_sets.size());
            en.ood_hybrid.resize(ood_sets.size());
            for (std::size_t i = 0; i < ood_sets.size(); ++i) score(ood_sets[i], en.ood_prior[i], en.ood_hybrid[i]);
        });

        if (p.type != PriorType::Flat) {
            const double mu = mean_of(en.id_prior);
            double ss = 0.0, dev = 0.0;
            for (std::size_t i = 0; i < en.id_prior.size(); ++i) {
                ss += (en.id_prior[i] - mu) * (en.id_prior[i] - mu);
                dev += std::abs(en.id_hybrid[i] - en.id_prior[i]);
            }
            const double sd = std::sqrt(ss / static_cast<double>(en.id_prior.size()));
            if (sd > 0.0) {
                deviation_sum += dev / static_cast<double>(en.id_prior.size()) / sd;
                ++deviation_count;
            }
        }

        in_stage("score:" + p.name, [&] {
            for (std::size_t i = 0; i < ood_sets.size(); ++i) {
                if (p.type != PriorType::Flat)
                    result.rows.push_back({p.name, cfg.ood[i].name, cfg.ood[i].tag, evaluate({en.id_prior, en.ood_prior[i]})});
            }
            const std::string hybrid_name = p.type == PriorType::Flat ? p.name : "HEAT-" + p.name;
            for (std::size_t i = 0; i < ood_sets.size(); ++i)
                result.rows.push_back({hybrid_name, cfg.ood[i].name, cfg.ood[i].tag, evaluate({en.id_hybrid, en.ood_hybrid[i]})});
        });

        if (p.compose) {
            in_stage("standardize", [&] {
                scorer.set_standardization(fit_standardization(scorer, train_x));
            });
            result.bundle.composition.scorers.push_back(std::move(scorer));
            result.bundle.names.push_back(p.name);
        }
        result.energies.push_back(std::move(en));
    }
    result.residual_deviation = deviation_count ? deviation_sum / static_cast<double>(deviation_count) : 0.0;

    in_stage("compose", [&] {
        auto heat_rows = compose_rows(result, cfg.beta, cfg.standardize);
        result.rows.insert(result.rows.end(), heat_rows.begin(), heat_rows.end());
    });
    return result;
}

std::vector<MetricRow> compose_rows(const PipelineResult& result, double beta, bool standardize) {
    std::vector<const ScorerEnergies*> parts;
    for (const auto& e : result.energies)
        if (e.composed) parts.push_back(&e);
    const auto& scorers = result.bundle.composition.scorers;
    require(parts.size() == scorers.size(), ErrorCode::MismatchedScorerCount, "energies and scorers disagree");

    auto compose_set = [&](auto&& energy_of, std::size_t n) {
        std::vector<double> out(n), e(parts.size());
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < parts.size(); ++k) {
                const double raw = energy_of(*parts[k])[i];
                e[k] = standardize ? scorers[k].standardization()->apply(raw) : raw;
            }
            out[i] = compose_energies(e, beta);
        }
        return out;
    };
    const std::size_t n_id = parts.front()->id_hybrid.size();
    const auto id = compose_set([](const ScorerEnergies& s) -> const std::vector<double>& { return s.id_hybrid; }, n_id);

    std::vector<MetricRow> rows;
    for (std::size_t i = 0; i < result.ood_names.size(); ++i) {
        const auto ood = compose_set(
            [i](const ScorerEnergies& s) -> const std::vector<double>& { return s.ood_hybrid[i]; },
            parts.front()->ood_hybrid[i].size());
        rows.push_back({"HEAT", result.ood_names[i], result.ood_tags[i], evaluate({id, ood})});
    }
    return rows;
}

std::string format_report(const std::vector<MetricRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const MetricRow*>> by_method;
    for (const auto& r : rows) {
        if (!by_method.count(r.method)) order.push_back(r.method);
        by_method[r.method].push_back(&r);
    }
    std::ostringstream os;
    os << "method,ood_set,tag,fpr95,auroc,aupr_in\n";
    for (const auto& m : order) {
        DetectionMetrics avg{};
        for (const MetricRow* r : by_method[m]) {
            os << r->method << ',' << r->ood_set << ',' << r->tag << ',' << format_metric(r->metrics.fpr95) << ','
               << format_metric(r->metrics.auroc) << ',' << format_metric(r->metrics.aupr_in) << '\n';
            avg.fpr95 += r->metrics.fpr95;
            avg.auroc += r->metrics.auroc;
            avg.aupr_in += r->metrics.aupr_in;
        }
        const double n = static_cast<double>(by_method[m].size());
        os << m << ",average,all," << format_metric(avg.fpr95 / n) << ',' << format_metric(avg.auroc / n) << ','
           << format_metric(avg.aupr_in / n) << '\n';
    }
    return os.str();
}

SweepParameter sweep_parameter_from_string(std::string_view name) {
    if (name == "lambda") return SweepParameter::Lambda;
    if (name == "beta") return SweepParameter::Beta;
    if (name == "data-fraction") return SweepParameter::DataFraction;
    fail(ErrorCode::ConfigError, "unknown sweep parameter '" + std::string(name) +
                                     "' (expected lambda, beta or data-fraction)");
}

std::string_view to_string(SweepParameter p) noexcept {
    switch (p) {
        case SweepParameter::Lambda: return "lambda";
        case SweepParameter::Beta: return "beta";
        case SweepParameter::DataFraction: return "data-fraction";
    }
    return "?";
}

std::string run_sweep(const PipelineConfig& base, SweepParameter parameter, const std::vector<double>& values,
                      const ProgressFn& progress) {
    require(!values.empty(), ErrorCode::ConfigError, "sweep needs at least one value");
    // Validate every point up front so a bad value fails before any training.
    std::vector<PipelineConfig> configs;
    for (double v : values) {
        PipelineConfig c = base;
        switch (parameter) {
            case SweepParameter::Lambda: c.train.lambda = v; break;
            case SweepParameter::Beta: c.beta = v; break;
            case SweepParameter::DataFraction: c.data_fraction = v; break;
        }
        c.validate();
        configs.push_back(std::move(c));
    }

    std::vector<std::string> methods;
    std::ostringstream body;
    auto emit = [&](double value, const std::vector<MetricRow>& rows, double deviation) {
        std::vector<std::string> order;
        std::map<std::string, DetectionMetrics> sums;
        std::map<std::string, std::size_t> counts;
        for (const auto& r : rows) {
            if (!counts.count(r.method)) order.push_back(r.method);
            auto& s = sums[r.method];
            s.fpr95 += r.metrics.fpr95;
            s.auroc += r.metrics.auroc;
            s.aupr_in += r.metrics.aupr_in;
            ++counts[r.method];
        }
        if (methods.empty()) methods = order;
        auto avg = [&](const std::string& m, double DetectionMetrics::*field) {
            return sums[m].*field / static_cast<double>(counts[m]);
        };
        body << to_string(parameter) << ',' << format_number(value) << ','
             << format_metric(avg("HEAT", &DetectionMetrics::fpr95)) << ','
             << format_metric(avg("HEAT", &DetectionMetrics::auroc)) << ','
             << format_metric(avg("HEAT", &DetectionMetrics::aupr_in)) << ',' << format_metric(deviation);
        for (const auto& m : methods)
            if (m != "HEAT") body << ',' << format_metric(avg(m, &DetectionMetrics::auroc));
        body << '\n';
    };

    if (parameter == SweepParameter::Beta) {
        // beta only enters the composition, so one fit serves every value.
        if (progress) progress("fitting once for the beta sweep");
        const PipelineResult r = run_pipeline(base, progress);
        for (double v : values) {
            std::vector<MetricRow> rows;
            for (const auto& row : r.rows)
                if (row.method != "HEAT") rows.push_back(row);
            auto heat_rows = compose_rows(r, v, base.standardize);
            rows.insert(rows.end(), heat_rows.begin(), heat_rows.end());
            emit(v, rows, r.residual_deviation);
        }
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (progress) progress(std::string(to_string(parameter)) + " = " + format_number(values[i]));
            const PipelineResult r = run_pipeline(configs[i], progress);
            emit(values[i], r.rows, r.residual_deviation);
        }
    }

    std::ostringstream os;
    os << "parameter,value,fpr95,auroc,aupr_in,residual_deviation";
    for (const auto& m : methods)
        if (m != "HEAT") os << ",auroc_" << m;
    os << '\n' << body.str();
    return os.str();
}

}  // namespace heat
