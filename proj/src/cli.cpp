#include "hseg/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hseg/analysis.hpp"
#include "hseg/metrics.hpp"
#include "hseg/model_zoo.hpp"
#include "hseg/pgm_io.hpp"
#include "hseg/pipeline_sim.hpp"

namespace hseg {

namespace {

namespace fs = std::filesystem;

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ConfigError("cannot open '" + path + "'");
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f)
        throw ExecError("cannot open '" + out_path + "' for writing");
    f << text;
}

ModelConfig load_model_config(const std::string& path) {
    return parse_model_config(slurp(path));
}

std::vector<ModelConfig> load_suite(const std::string& path) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(slurp(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("suite file is not valid JSON: ") + e.what());
    }
    const nlohmann::json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("configs"))
            throw ConfigError("suite object needs a 'configs' array");
        list = &doc.at("configs");
    }
    if (!list->is_array())
        throw ConfigError("suite must be an array of model configs");
    std::vector<ModelConfig> out;
    for (const auto& item : *list)
        out.push_back(parse_model_config(item.dump()));
    return out;
}

struct BuildArgs {
    std::string model, weights, summary_out;
};

int cmd_build(const BuildArgs& a) {
    const ModelConfig cfg = load_model_config(a.model);
    const Graph g = build_model(cfg);
    if (!a.weights.empty()) {
        std::ofstream f(a.weights, std::ios::binary);
        if (!f)
            throw ExecError("cannot open '" + a.weights + "' for writing");
        save_weights(f, g.weights());
    }
    emit(graph_summary(g), a.summary_out);
    return 0;
}

struct AnalyzeArgs {
    std::string model, out;
};

int cmd_analyze(const AnalyzeArgs& a) {
    const ModelConfig cfg = load_model_config(a.model);
    BuildOptions opts;
    opts.init_weights = false;
    const Graph g = build_model(cfg, opts);
    emit(cost_report_csv(analyze(g)), a.out);
    return 0;
}

struct AblateArgs {
    std::string suite, out;
};

int cmd_ablate(const AblateArgs& a) {
    const std::vector<ModelConfig> configs = load_suite(a.suite);
    emit(ablation_csv(ablation_report(configs)), a.out);
    return 0;
}

struct InferArgs {
    std::string model, weights, in, out;
    std::string layout = "reference";
    bool fuse = false;
};

int cmd_infer(const InferArgs& a) {
    ModelConfig cfg = load_model_config(a.model);
    const ImageU8 img = read_pnm_file(a.in);
    if (img.h % 32 != 0 || img.w % 32 != 0)
        throw ConfigError("input image " + std::to_string(img.w) + "x" + std::to_string(img.h) +
                          " is not divisible by 32");

    Graph g;
    BuildOptions opts;
    opts.init_weights = false; // weights come from the file
    const int input = g.add_input(Shape{1, img.h, img.w, 3});
    const EncoderTaps taps = build_encoder(g, cfg, input, opts);
    const int mask_id = build_decoder(g, cfg, taps, opts);
    g.mark_output(mask_id);
    g.validate();
    {
        std::ifstream f(a.weights, std::ios::binary);
        if (!f)
            throw ExecError("cannot open weight file '" + a.weights + "'");
        load_weights(f, g.weights());
    }
    if (a.fuse)
        g = fuse_mrt(g);

    PlanProfile profile;
    if (a.layout == "reference")
        profile = PlanProfile::Reference;
    else if (a.layout == "packed")
        profile = PlanProfile::Packed;
    else
        throw ConfigError("unknown layout profile '" + a.layout + "'");
    const LayoutPlan plan = plan_layouts(g, profile);

    const LogicalTensor x = image_to_tensor(img, cfg.norm_mean, cfg.norm_std);
    const std::vector<LogicalTensor> outputs = execute(g, {x}, &plan);
    const Shape os = outputs.at(0).shape();
    Mask mask = make_mask(os.h, os.w);
    for (int y = 0; y < os.h; ++y)
        for (int xw = 0; xw < os.w; ++xw)
            mask.at(y, xw) = outputs[0].get(0, y, xw, 0);
    write_pgm_file(a.out, mask_to_image(mask));
    return 0;
}

struct EvalArgs {
    std::string pred, gt, out;
    int tolerance = -1;
};

int cmd_eval(const EvalArgs& a) {
    if (!fs::is_directory(a.pred) || !fs::is_directory(a.gt))
        throw ConfigError("--pred and --gt must be directories");
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(a.pred))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm")
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty())
        throw ConfigError("no .pgm predictions in '" + a.pred + "'");

    std::vector<MaskPair> pairs(names.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(names.size()); ++i) {
        const fs::path gt_path = fs::path(a.gt) / names[static_cast<size_t>(i)];
        if (!fs::exists(gt_path))
            continue; // checked below; cannot throw across omp boundary
        const ImageU8 p = read_pnm_file((fs::path(a.pred) / names[static_cast<size_t>(i)]).string());
        const ImageU8 g = read_pnm_file(gt_path.string());
        pairs[static_cast<size_t>(i)] = {mask_from_image(p), mask_from_image(g)};
    }
    for (size_t i = 0; i < names.size(); ++i)
        if (pairs[i].gt.h == 0)
            throw ConfigError("missing ground truth for '" + names[i] + "'");

    const MetricsReport report = evaluate_pairs(pairs, a.tolerance);
    std::ostringstream os;
    os << report.csv() << report.str() << "\n";
    emit(os.str(), a.out);
    return 0;
}

struct PipelineArgs {
    std::string scenario, out;
    bool csv = false;
    int frames = -1;
    std::string sweep_param;
    std::string sweep_values;
};

int cmd_pipeline(const PipelineArgs& a) {
    const Scenario scenario = parse_scenario(slurp(a.scenario));
    std::ostringstream os;
    if (!a.sweep_param.empty()) {
        std::vector<std::string> values;
        std::stringstream ss(a.sweep_values);
        std::string item;
        while (std::getline(ss, item, ','))
            values.push_back(item);
        if (values.empty())
            throw ConfigError("--values must list at least one value");
        const std::vector<SimReport> reports = sweep(scenario.configs.front(), a.sweep_param, values);
        os << (a.csv ? compare_csv(reports) : compare_table(reports));
    } else if (scenario.configs.size() == 1) {
        const SimReport r = simulate(scenario.configs.front(), a.frames);
        os << (a.csv ? compare_csv({r}) : compare_table({r}));
    } else {
        const std::vector<SimReport> reports = compare(scenario.configs, a.frames);
        os << (a.csv ? compare_csv(reports) : compare_table(reports));
    }
    emit(os.str(), a.out);
    return 0;
}

struct TrainToyArgs {
    int steps = 200;
    uint64_t seed = 1;
    double lr = -1.0;
    int size = 32;
};

int cmd_train_toy(const TrainToyArgs& a) {
    ToyConfig cfg;
    cfg.steps = a.steps;
    cfg.seed = a.seed;
    cfg.image_size = a.size;
    if (a.lr > 0.0)
        cfg.lr = static_cast<float>(a.lr);
    const ToyResult result = train_toy(cfg);
    char line[96];
    const int stride = std::max(1, a.steps / 10);
    for (size_t i = 0; i < result.losses.size(); i += static_cast<size_t>(stride)) {
        std::snprintf(line, sizeof(line), "step %4zu  loss %.6f\n", i, result.losses[i]);
        std::cout << line;
    }
    std::snprintf(line, sizeof(line), "final mIoU %.4f after %d steps (seed %llu)\n",
                  result.final_miou, a.steps, static_cast<unsigned long long>(a.seed));
    std::cout << line;
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"edge segmentation engine: model zoo, analysis, inference and pipeline simulation"};
    app.require_subcommand(1);

    BuildArgs build_args;
    CLI::App* build = app.add_subcommand("build", "build a model, emit graph summary and weights");
    build->add_option("--model", build_args.model, "model config JSON")->required();
    build->add_option("--weights", build_args.weights, "output weight file");
    build->add_option("--out", build_args.summary_out, "summary output path (default stdout)");

    AnalyzeArgs analyze_args;
    CLI::App* analyze = app.add_subcommand("analyze", "per-node parameter/MAC report");
    analyze->add_option("--model", analyze_args.model, "model config JSON")->required();
    analyze->add_option("--out", analyze_args.out, "output path (default stdout)");

    AblateArgs ablate_args;
    CLI::App* ablate = app.add_subcommand("ablate", "cost table over a suite of configs");
    ablate->add_option("--suite", ablate_args.suite, "suite JSON (array of model configs)")->required();
    ablate->add_option("--out", ablate_args.out, "output CSV path (default stdout)");

    InferArgs infer_args;
    CLI::App* infer = app.add_subcommand("infer", "run segmentation on a PGM/PPM image");
    infer->add_option("--model", infer_args.model, "model config JSON")->required();
    infer->add_option("--weights", infer_args.weights, "weight file")->required();
    infer->add_option("--in", infer_args.in, "input image (P5/P6)")->required();
    infer->add_option("--out", infer_args.out, "output mask PGM")->required();
    infer->add_option("--layout", infer_args.layout, "layout plan: reference|packed");
    infer->add_flag("--fuse", infer_args.fuse, "apply multi-output 1x1 fusion before executing");

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "mIoU / J / F over prediction and gt directories");
    eval->add_option("--pred", eval_args.pred, "directory of predicted masks")->required();
    eval->add_option("--gt", eval_args.gt, "directory of ground-truth masks")->required();
    eval->add_option("--tolerance", eval_args.tolerance, "boundary tolerance px (default 0.8% of diagonal)");
    eval->add_option("--out", eval_args.out, "output path (default stdout)");

    PipelineArgs pipeline_args;
    CLI::App* pipeline = app.add_subcommand("pipeline", "simulate heterogeneous pipeline scenarios");
    pipeline->add_option("--scenario", pipeline_args.scenario, "scenario JSON")->required();
    pipeline->add_option("--out", pipeline_args.out, "output path (default stdout)");
    pipeline->add_flag("--csv", pipeline_args.csv, "CSV instead of aligned table");
    pipeline->add_option("--frames", pipeline_args.frames, "override frame count");
    pipeline->add_option("--sweep", pipeline_args.sweep_param, "sweep parameter name");
    pipeline->add_option("--values", pipeline_args.sweep_values, "comma-separated sweep values");

    TrainToyArgs toy_args;
    CLI::App* toy = app.add_subcommand("train-toy", "gradient-check training demo on synthetic disks");
    toy->add_option("--steps", toy_args.steps, "gradient steps");
    toy->add_option("--seed", toy_args.seed, "RNG seed");
    toy->add_option("--lr", toy_args.lr, "learning rate");
    toy->add_option("--size", toy_args.size, "image size");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (build->parsed())
            return cmd_build(build_args);
        if (analyze->parsed())
            return cmd_analyze(analyze_args);
        if (ablate->parsed())
            return cmd_ablate(ablate_args);
        if (infer->parsed())
            return cmd_infer(infer_args);
        if (eval->parsed())
            return cmd_eval(eval_args);
        if (pipeline->parsed())
            return cmd_pipeline(pipeline_args);
        if (toy->parsed())
            return cmd_train_toy(toy_args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

int run_cli(int argc, const char* const* argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i)
        args.emplace_back(argv[i]);
    return run_cli(args);
}

} // namespace hseg
