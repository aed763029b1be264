#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "timex/errors.hpp"
#include "timex/evaluation.hpp"
#include "timex/heatmap.hpp"
#include "timex/parallel.hpp"
#include "timex/pipeline.hpp"
#include "timex/protocol.hpp"
#include "timex/report_io.hpp"
#include "timex/subprocess.hpp"
#include "timex/synthetic.hpp"

namespace fs = std::filesystem;
using namespace tix;

namespace {

constexpr int kUsageError = 1;
constexpr int kRunError = 2;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

DatasetFormat resolve_format(const std::string& format, const fs::path& path) {
    if (format == "binary") return DatasetFormat::binary;
    if (format == "csv") return DatasetFormat::csv_long;
    return fs::is_directory(path) ? DatasetFormat::csv_long : DatasetFormat::binary;
}

Task parse_task(const std::string& text) { return task_from_string(text); }

struct AnalyzeOptions {
    std::string data;
    std::string format = "auto";
    std::string model_cmd;
    std::string builtin;
    std::size_t model_processes = 1;
    std::string profile;
    double gamma = 0.99;
    double fdr = 0.1;
    std::size_t permutations = 50;
    std::uint64_t seed = 0;
    std::size_t batch_size = 256;
    std::size_t jobs = default_parallelism();
    std::string groups;
    std::string out;
    std::string heatmap;
    bool timing = false;
    int timeout_ms = 10000;
};

int run_analyze(const AnalyzeOptions& o, const CLI::App& cmd) {
    AnalysisConfig config;
    config.gamma = o.gamma;
    config.q = o.fdr;
    config.permutations = o.permutations;
    if (o.profile == "mimic") {
        if (cmd.count("--gamma") == 0) config.gamma = 0.95;
        if (cmd.count("--permutations") == 0) config.permutations = 200;
    }
    config.seed = o.seed;
    config.batch_size = o.batch_size;
    config.parallelism = std::max<std::size_t>(1, o.jobs);
    if (!o.groups.empty()) config.feature_groups = load_groups(o.groups);
    config.validate();

    const TemporalDataset dataset = load_dataset(o.data, resolve_format(o.format, o.data));

    std::vector<ModelHandle> handles;
    if (!o.builtin.empty()) {
        handles.push_back(make_synthetic_model(load_model_spec(o.builtin)));
    } else {
        const std::size_t n = std::max<std::size_t>(1, o.model_processes);
        for (std::size_t h = 0; h < n; ++h) {
            handles.push_back(spawn_external_model_shell(o.model_cmd, std::chrono::milliseconds(o.timeout_ms)));
        }
    }
    struct Shutdown {
        std::vector<ModelHandle>& handles;
        ~Shutdown() {
            for (auto& h : handles) {
                try {
                    h.shutdown();
                } catch (...) {
                }
            }
        }
    } shutdown{handles};

    ModelPool pool(handles);
    const AnalysisReport report = analyze(pool, dataset, config);
    const std::string json = results_to_json(report, o.timing);
    if (o.out.empty()) {
        std::cout << json;
    } else {
        write_text(o.out, json);
    }
    if (!o.heatmap.empty()) write_text(o.heatmap, render_heatmap_svg(report));
    std::size_t important = 0;
    for (const auto& f : report.features) important += f.important ? 1 : 0;
    std::cerr << important << " of " << report.features.size() << " features important; "
              << report.model_evaluations << " model evaluations\n";
    return 0;
}

struct SimulateOptions {
    BenchmarkConfig bench;
    std::string task = "cls";
    std::string out_dir;
    bool csv = false;
};

int run_simulate(SimulateOptions o) {
    o.bench.task = parse_task(o.task);
    if (o.bench.relevant > o.bench.features) throw ConfigError("--relevant cannot exceed --features");
    const Benchmark b = make_benchmark(o.bench);
    fs::create_directories(o.out_dir);
    const fs::path dir(o.out_dir);
    if (o.csv) {
        save_dataset(b.dataset, dir / "data", DatasetFormat::csv_long);
    } else {
        save_dataset(b.dataset, dir / "data.tds", DatasetFormat::binary);
    }
    write_text(dir / "ground_truth.json", ground_truth_to_json(b.model));
    write_text(dir / "model.json", model_spec_to_json(b.model));
    std::cerr << "beta " << b.model.beta << "; wrote " << dir.string() << '\n';
    return 0;
}

struct EvaluateOptions {
    SuiteConfig suite;
    std::string task = "cls";
    std::vector<std::string> methods{"TIME", "TIME-n", "PERM", "PERM-f"};
    std::string out;
    bool no_timing = false;
};

int run_evaluate(EvaluateOptions o) {
    o.suite.benchmark.task = parse_task(o.task);
    if (o.suite.benchmark.relevant > o.suite.benchmark.features) {
        throw ConfigError("--relevant cannot exceed --features");
    }
    o.suite.methods.clear();
    for (const auto& m : o.methods) {
        try {
            o.suite.methods.push_back(method_from_string(m));
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    const SuiteResult result = run_suite(o.suite);
    for (const auto& rep : result.replicates) {
        if (!rep.ok) std::cerr << "replicate " << rep.index << " failed: " << rep.error << '\n';
    }
    if (result.failed > 0) std::cerr << result.failed << " replicate(s) excluded\n";
    const std::string csv = suite_to_csv(result, !o.no_timing);
    if (o.out.empty()) {
        std::cout << csv;
    } else {
        write_text(o.out, csv);
    }
    return 0;
}

int run_render(const std::string& results, const std::string& out) {
    const AnalysisReport report = read_results(results);
    const std::string svg = render_heatmap_svg(report);
    if (out.empty()) {
        std::cout << svg;
    } else {
        write_text(out, svg);
    }
    return 0;
}

int run_serve(const std::string& builtin) {
    const ModelHandle model = make_synthetic_model(load_model_spec(builtin));
    std::ios::sync_with_stdio(false);
    return protocol::serve(model.get(), std::cin, std::cout);
}

int run_conformance(const std::string& model_cmd, int timeout_ms) {
    const auto checks = protocol::run_conformance("/bin/sh", {"-c", "exec " + model_cmd},
                                                  std::chrono::milliseconds(timeout_ms));
    bool all = true;
    for (const auto& c : checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << ": " << c.detail;
        std::cout << '\n';
        all = all && c.passed;
    }
    return all ? 0 : kRunError;
}

}  // namespace

int main(int argc, char** argv) {
    std::signal(SIGPIPE, SIG_IGN);
    CLI::App app{"Temporal permutation importance for black-box time-series models"};
    app.require_subcommand(1);

    AnalyzeOptions ao;
    auto* analyze_cmd = app.add_subcommand("analyze", "Explain a model on a dataset");
    analyze_cmd->add_option("--data", ao.data, "Dataset: TDS1 file or CSV directory")->required();
    analyze_cmd->add_option("--format", ao.format, "auto, binary or csv")
        ->check(CLI::IsMember({"auto", "binary", "csv"}));
    auto* cmd_opt = analyze_cmd->add_option("--model-cmd", ao.model_cmd, "Command serving the model protocol");
    auto* builtin_opt = analyze_cmd->add_option("--builtin", ao.builtin, "Synthetic model spec (JSON)");
    cmd_opt->excludes(builtin_opt);
    analyze_cmd->add_option("--model-processes", ao.model_processes, "Model processes to run side by side")
        ->check(CLI::PositiveNumber);
    analyze_cmd->add_option("--profile", ao.profile, "Preset: mimic (gamma 0.95, 200 permutations)")
        ->check(CLI::IsMember({"mimic"}));
    analyze_cmd->add_option("--gamma", ao.gamma, "Window localization parameter");
    analyze_cmd->add_option("--fdr", ao.fdr, "FDR level");
    analyze_cmd->add_option("--permutations", ao.permutations, "Permutation rounds per test");
    analyze_cmd->add_option("--seed", ao.seed, "Seed");
    analyze_cmd->add_option("--batch-size", ao.batch_size, "Instances per model call");
    analyze_cmd->add_option("--jobs", ao.jobs, "Worker threads");
    analyze_cmd->add_option("--groups", ao.groups, "Feature-group hierarchy (JSON)");
    analyze_cmd->add_option("--out", ao.out, "Results JSON (stdout when omitted)");
    analyze_cmd->add_option("--heatmap", ao.heatmap, "Also write an SVG heatmap");
    analyze_cmd->add_flag("--timing", ao.timing, "Include wall time in the results");
    analyze_cmd->add_option("--timeout-ms", ao.timeout_ms, "Model startup and shutdown timeout");

    SimulateOptions so;
    auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset, ground truth and model");
    simulate_cmd->add_option("--instances", so.bench.instances)->check(CLI::Range(2, 1 << 30));
    simulate_cmd->add_option("--features", so.bench.features)->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--timesteps", so.bench.timesteps)->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--relevant", so.bench.relevant);
    simulate_cmd->add_option("--task", so.task)->check(CLI::IsMember({"cls", "reg", "classification", "regression"}));
    simulate_cmd->add_option("--target-metric", so.bench.target_metric, "Accuracy (cls) or R^2 (reg) to tune for");
    simulate_cmd->add_option("--seed", so.bench.seed);
    simulate_cmd->add_option("--fraction-categorical", so.bench.fraction_categorical)->check(CLI::Range(0.0, 1.0));
    simulate_cmd->add_option("--fraction-trend", so.bench.fraction_trend)->check(CLI::Range(0.0, 1.0));
    simulate_cmd->add_option("--out-dir", so.out_dir)->required();
    simulate_cmd->add_flag("--csv", so.csv, "Write the dataset as a CSV directory");

    EvaluateOptions eo;
    eo.suite.parallelism = 1;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Run the synthetic benchmark suite");
    evaluate_cmd->add_option("--replicates", eo.suite.replicates)->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--methods", eo.methods, "TIME, TIME-n, PERM, PERM-f")->delimiter(',');
    evaluate_cmd->add_option("--instances", eo.suite.benchmark.instances)->check(CLI::Range(2, 1 << 30));
    evaluate_cmd->add_option("--features", eo.suite.benchmark.features)->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--timesteps", eo.suite.benchmark.timesteps)->check(CLI::PositiveNumber);
    evaluate_cmd->add_option("--relevant", eo.suite.benchmark.relevant);
    evaluate_cmd->add_option("--task", eo.task)->check(CLI::IsMember({"cls", "reg", "classification", "regression"}));
    evaluate_cmd->add_option("--target-metric", eo.suite.benchmark.target_metric);
    evaluate_cmd->add_option("--permutations", eo.suite.analysis.permutations);
    evaluate_cmd->add_option("--gamma", eo.suite.analysis.gamma);
    evaluate_cmd->add_option("--fdr", eo.suite.analysis.q);
    evaluate_cmd->add_option("--seed", eo.suite.seed);
    evaluate_cmd->add_option("--jobs", eo.suite.parallelism, "Replicates run side by side");
    evaluate_cmd->add_option("--out", eo.out, "CSV output (stdout when omitted)");
    evaluate_cmd->add_flag("--no-timing", eo.no_timing, "Write NA for runtimes");

    std::string results_path;
    std::string svg_out;
    auto* render_cmd = app.add_subcommand("render", "Render a results document as an SVG heatmap");
    render_cmd->add_option("--results", results_path)->required();
    render_cmd->add_option("--out", svg_out, "SVG output (stdout when omitted)");

    std::string serve_builtin;
    auto* serve_cmd = app.add_subcommand("serve", "Serve a synthetic model over the stdio protocol");
    serve_cmd->add_option("--builtin", serve_builtin, "Synthetic model spec (JSON)")->required();

    std::string conformance_cmd;
    int conformance_timeout = 10000;
    auto* conformance = app.add_subcommand("conformance", "Check an external model against the protocol");
    conformance->add_option("--model-cmd", conformance_cmd)->required();
    conformance->add_option("--timeout-ms", conformance_timeout);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsageError;
    }

    try {
        if (*analyze_cmd) {
            if (ao.model_cmd.empty() && ao.builtin.empty()) {
                std::cerr << "analyze: one of --model-cmd or --builtin is required\n" << analyze_cmd->help();
                return kUsageError;
            }
            return run_analyze(ao, *analyze_cmd);
        }
        if (*simulate_cmd) return run_simulate(so);
        if (*evaluate_cmd) return run_evaluate(eo);
        if (*render_cmd) return run_render(results_path, svg_out);
        if (*serve_cmd) return run_serve(serve_builtin);
        if (*conformance) return run_conformance(conformance_cmd, conformance_timeout);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const AnalysisError& e) {
        std::cerr << "analysis failed at " << e.node_id() << ": " << e.what() << '\n';
        return kRunError;
    } catch (const ProtocolError& e) {
        std::cerr << "protocol error: " << e.what();
        if (!e.raw().empty()) std::cerr << " (received: " << e.raw() << ')';
        std::cerr << '\n';
        return kRunError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRunError;
    }
    return kUsageError;
}
