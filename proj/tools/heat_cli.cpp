// heat: command-line front end.
//
//   heat gen     --kind gmm-clusters --centers 3 --n 3000 --seed 7 --out id.feat
//   heat run     --config configs/synthetic.json
//   heat fit     --config configs/synthetic.json --bundle model.heatb
//   heat eval    --id id_scores.txt --ood ood_scores.txt
//   heat eval    --bundle model.heatb --id test.feat --ood far.feat
//   heat sweep   --config configs/synthetic.json --param lambda --values 0.1,1,10,100,1e6
//   heat inspect model.heatb
//
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "heat/bundle.hpp"
#include "heat/compose.hpp"
#include "heat/data.hpp"
#include "heat/eval.hpp"
#include "heat/pipeline.hpp"

namespace {

using namespace heat;
namespace fs = std::filesystem;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

bool is_usage_error(ErrorCode code) {
    return code == ErrorCode::ConfigError || code == ErrorCode::InvalidSpec;
}

struct GenArgs {
    std::string kind = "gmm-clusters";
    std::size_t centers = 3;
    double spacing = 6.0;
    std::vector<double> stds{1.0};
    double noise = 0.0;
    double radius = 1.0;
    std::vector<double> ring_center;
    std::vector<double> box_low, box_high;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::size_t dim = 2;
    std::size_t volume_hw = 0;
    std::string out;
    std::string format;
};

int cmd_gen(const GenArgs& a) {
    SyntheticSpec spec;
    spec.kind = synthetic_kind_from_string(a.kind);
    spec.dim = a.dim;
    if (spec.kind == SyntheticKind::GmmClusters || spec.kind == SyntheticKind::BetweenModes)
        spec.centers = default_centers(a.centers, a.dim, a.spacing);
    spec.stds = a.stds;
    spec.noise_std = a.noise;
    spec.radius = a.radius;
    spec.ring_center = a.ring_center;
    spec.box_low = a.box_low;
    spec.box_high = a.box_high;
    spec.n = a.n;
    spec.seed = a.seed;
    spec.volume_hw = a.volume_hw;
    spec.validate();

    FeatureFormat format = format_for_path(a.out);
    if (a.format == "csv") format = FeatureFormat::Csv;
    if (a.format == "binary") format = FeatureFormat::Binary;
    const FeatureSet fs = generate(spec);
    save_features(a.out, fs, format);
    std::cerr << "wrote " << fs.n() << " x " << fs.d() << " features to " << a.out << "\n";
    return 0;
}

PipelineConfig load_config(const std::string& path, const std::string& report, const std::string& bundle) {
    PipelineConfig cfg = load_pipeline_config(path);
    apply_env_overrides(cfg);
    if (!report.empty()) cfg.report = report;
    if (!bundle.empty()) cfg.bundle = bundle;
    return cfg;
}

ProgressFn progress_printer(bool quiet) {
    if (quiet) return {};
    return [](const std::string& msg) { std::cerr << "[heat] " << msg << "\n"; };
}

int cmd_run(const std::string& config, const std::string& report, const std::string& bundle, bool quiet,
            bool write_report) {
    const PipelineConfig cfg = load_config(config, report, bundle);
    const PipelineResult result = run_pipeline(cfg, progress_printer(quiet));
    try {
        save_bundle(cfg.bundle, result.bundle);
        if (write_report) write_text_atomic(cfg.report, format_report(result.rows));
    } catch (const Error& e) {
        throw StageError("write", e);
    }
    if (write_report) {
        std::cout << format_report(result.rows);
        std::cerr << "report: " << cfg.report.string() << "\n";
    }
    std::cerr << "bundle: " << cfg.bundle.string() << "\n";
    return 0;
}

struct EvalArgs {
    std::string id, ood, bundle, out;
    double tpr = 0.95;
};

std::vector<double> bundle_scores(const Bundle& b, const FeatureSet& fs) {
    const auto& comp = b.composition;
    const bool needs_std = std::any_of(comp.scorers.begin(), comp.scorers.end(),
                                       [](const HybridScorer& s) { return s.source() == FeatureSource::StdPooled; });
    const Matrix pooled_std = needs_std ? fs.std_pooled() : Matrix();
    std::vector<double> scores(fs.n());
    std::vector<std::span<const double>> inputs(comp.scorers.size());
    for (std::size_t i = 0; i < fs.n(); ++i) {
        for (std::size_t k = 0; k < comp.scorers.size(); ++k)
            inputs[k] = comp.scorers[k].source() == FeatureSource::StdPooled ? pooled_std.row(i) : fs.features().row(i);
        scores[i] = heat_score(comp, inputs);
    }
    return scores;
}

int cmd_eval(const EvalArgs& a) {
    if (!(a.tpr > 0.0 && a.tpr <= 1.0)) fail(ErrorCode::ConfigError, "--tpr must lie in (0, 1]");
    ScoredSets sets;
    if (a.bundle.empty()) {
        sets.id_scores = load_scores(a.id);
        sets.ood_scores = load_scores(a.ood);
    } else {
        const Bundle b = load_bundle(a.bundle);
        sets.id_scores = bundle_scores(b, load_features(a.id));
        sets.ood_scores = bundle_scores(b, load_features(a.ood));
    }
    const double fpr = fpr_at_tpr(sets, a.tpr);
    const double auc = auroc(sets);
    const double aupr = aupr_in(sets);
    char line[160];
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f\n", fpr, auc, aupr);
    char tpr_label[32];
    std::snprintf(tpr_label, sizeof tpr_label, "fpr%g", a.tpr * 100.0);
    const std::string csv = std::string(tpr_label) + ",auroc,aupr_in\n" + line;
    if (!a.out.empty()) write_text_atomic(a.out, csv);
    std::cout << csv;
    return 0;
}

int cmd_sweep(const std::string& config, const std::string& param, const std::vector<std::string>& raw_values,
              const std::string& out, bool quiet) {
    const SweepParameter p = sweep_parameter_from_string(param);
    std::vector<double> values;
    for (const auto& s : raw_values) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || s.empty()) fail(ErrorCode::ConfigError, "sweep value '" + s + "' is not a number");
        values.push_back(v);
    }
    const PipelineConfig cfg = load_config(config, "", "");
    const std::string csv = run_sweep(cfg, p, values, progress_printer(quiet));
    if (!out.empty()) {
        try {
            write_text_atomic(out, csv);
        } catch (const Error& e) {
            throw StageError("write", e);
        }
    }
    std::cout << csv;
    return 0;
}

int cmd_inspect(const std::string& path) {
    const auto bytes = [&] {
        std::ifstream in(path, std::ios::binary);
        if (!in) fail(ErrorCode::IoError, "cannot open " + path);
        char magic[8] = {};
        in.read(magic, 8);
        return std::string(magic, static_cast<std::size_t>(in.gcount()));
    }();
    if (bytes == "HEATBNDL") {
        std::cout << describe_bundle(load_bundle(path));
        return 0;
    }
    const FeatureSet fs = load_features(path);
    std::cout << "feature set: n=" << fs.n() << " d=" << fs.d();
    if (fs.has_labels()) std::cout << " classes=" << fs.class_count();
    if (fs.has_volumes()) {
        const auto& l = fs.volumes().layout;
        std::cout << " volumes=" << l.channels << "x" << l.height << "x" << l.width;
    }
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HEAT: hybrid energy-based OOD detection in feature space"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "heat 1.0.0");

    GenArgs gen;
    auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic feature set");
    gen_cmd->add_option("--kind", gen.kind, "gmm-clusters, ring, uniform-box or between-modes")->capture_default_str();
    gen_cmd->add_option("--centers", gen.centers, "Number of cluster centers")->capture_default_str();
    gen_cmd->add_option("--spacing", gen.spacing, "Distance between default centers")->capture_default_str();
    gen_cmd->add_option("--std", gen.stds, "Cluster std (one value or one per center)")->delimiter(',');
    gen_cmd->add_option("--noise", gen.noise, "Noise std (between-modes, ring)")->capture_default_str();
    gen_cmd->add_option("--radius", gen.radius, "Ring radius")->capture_default_str();
    gen_cmd->add_option("--ring-center", gen.ring_center, "Ring center")->delimiter(',');
    gen_cmd->add_option("--box-low", gen.box_low, "Lower corner of the uniform box")->delimiter(',');
    gen_cmd->add_option("--box-high", gen.box_high, "Upper corner of the uniform box")->delimiter(',');
    gen_cmd->add_option("--n", gen.n, "Number of samples")->required();
    gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    gen_cmd->add_option("--dim", gen.dim, "Feature dimension")->capture_default_str();
    gen_cmd->add_option("--volume-hw", gen.volume_hw, "Also emit HxH feature volumes for std pooling");
    gen_cmd->add_option("--format", gen.format, "csv or binary (default: from the extension)")
        ->check(CLI::IsMember({"csv", "binary"}));
    gen_cmd->add_option("--out", gen.out, "Output feature file")->required();

    std::string config, report, bundle;
    bool quiet = false;
    auto* run_cmd = app.add_subcommand("run", "Fit, train, compose and evaluate a config end to end");
    run_cmd->add_option("--config", config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--report", report, "Override the report path");
    run_cmd->add_option("--bundle", bundle, "Override the bundle path");
    run_cmd->add_flag("--quiet", quiet, "No progress messages");

    auto* fit_cmd = app.add_subcommand("fit", "Fit priors and residuals and write the bundle only");
    fit_cmd->add_option("--config", config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("--bundle", bundle, "Override the bundle path");
    fit_cmd->add_flag("--quiet", quiet, "No progress messages");

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Detection metrics from score files, or from features and a bundle");
    eval_cmd->add_option("--id", ev.id, "ID scores (or features with --bundle)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--ood", ev.ood, "OOD scores (or features with --bundle)")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--bundle", ev.bundle, "Score feature files with this bundle")->check(CLI::ExistingFile);
    eval_cmd->add_option("--tpr", ev.tpr, "True positive rate of the FPR threshold")->capture_default_str();
    eval_cmd->add_option("--out", ev.out, "Also write the metrics CSV here");

    std::string param, sweep_out;
    std::vector<std::string> values;
    auto* sweep_cmd = app.add_subcommand("sweep", "Re-run a config over values of one parameter");
    sweep_cmd->add_option("--config", config, "Base pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sweep_cmd->add_option("--param", param, "lambda, beta or data-fraction")
        ->required()
        ->check(CLI::IsMember({"lambda", "beta", "data-fraction"}));
    sweep_cmd->add_option("--values", values, "Comma-separated values (inf and -inf allowed)")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--out", sweep_out, "Sweep CSV path");
    sweep_cmd->add_flag("--quiet", quiet, "No progress messages");

    std::string inspect_path;
    auto* inspect_cmd = app.add_subcommand("inspect", "Describe a bundle or a feature file");
    inspect_cmd->add_option("path", inspect_path, "Bundle or feature file")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (*gen_cmd) return cmd_gen(gen);
        if (*run_cmd) return cmd_run(config, report, bundle, quiet, true);
        if (*fit_cmd) return cmd_run(config, "", bundle, quiet, false);
        if (*eval_cmd) return cmd_eval(ev);
        if (*sweep_cmd) return cmd_sweep(config, param, values, sweep_out, quiet);
        if (*inspect_cmd) return cmd_inspect(inspect_path);
    } catch (const StageError& e) {
        std::cerr << "heat " << command << ": " << to_string(e.code()) << " in stage '" << e.stage() << "': " << e.detail() << "\n";
        return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
    } catch (const Error& e) {
        std::cerr << "heat " << command << ": " << to_string(e.code()) << " in stage '" << command << "': " << e.message() << "\n";
        return is_usage_error(e.code()) ? kExitUsage : kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "heat " << command << ": error in stage '" << command << "': " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
