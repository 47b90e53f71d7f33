#include "bact/bact.hpp"
#include "bact/service.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

namespace fs = std::filesystem;
using namespace bact;

namespace
{

struct CommonOptions
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> budget_pct;
    std::optional<std::string> strategy;
    std::optional<std::string> video_strategy;
    std::optional<std::string> acq_fn;
    std::optional<int> rounds;
    std::string data;
    std::string out = "results";
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config, "JSON experiment config")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o.seed, "experiment seed (also seeds synthetic data)");
    cmd->add_option("--budget-pct", o.budget_pct, "label budget as a percentage of training frames");
    cmd->add_option("--strategy", o.strategy, "clip selection: bact|random|entropy|equidistant|split_random|split_entropy|coreset");
    cmd->add_option("--video-strategy", o.video_strategy, "video selection: uncertainty|random");
    cmd->add_option("--acq-fn", o.acq_fn, "entropy|bald|power_bald|jsd|variation_ratio");
    cmd->add_option("--rounds", o.rounds, "number of rounds");
    cmd->add_option("--data", o.data, "dataset root (features/, groundTruth/, mapping.txt); synthetic when omitted");
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_flag("-q,--quiet", o.quiet, "suppress progress output");
}

ExperimentConfig resolve(const CommonOptions& o)
{
    ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
    if (o.seed) {
        cfg.loop.seed = *o.seed;
        cfg.synthetic.seed = *o.seed;
    }
    if (o.budget_pct)
        cfg.loop.budget_pct = *o.budget_pct;
    if (o.strategy)
        cfg.loop.clip_strategy = parse_clip_strategy(*o.strategy);
    if (o.video_strategy)
        cfg.loop.video_strategy = parse_video_strategy(*o.video_strategy);
    if (o.acq_fn)
        cfg.loop.acquisition.kind = parse_acquisition(*o.acq_fn);
    if (o.rounds)
        cfg.loop.rounds = *o.rounds;
    if (!o.data.empty())
        cfg.data_path = o.data;
    return cfg;
}

json experiment_meta(const ExperimentConfig& cfg, const Dataset& ds, const LoopConfig& resolved)
{
    json data = {{"videos", ds.videos.size()},
                 {"train_videos", ds.train_ids.size()},
                 {"test_videos", ds.test_ids.size()},
                 {"classes", ds.class_names},
                 {"train_frames", ds.total_frames(ds.train_ids)}};
    if (cfg.data_path)
        data["path"] = *cfg.data_path;
    else
        data["synthetic"] = to_json(cfg.synthetic);
    json j = to_json(resolved);
    j["data"] = data;
    return j;
}

void print_round(const RoundHistory& h)
{
    std::printf("round %d  labels %zu -> %zu  acc %.2f  edit %.2f", h.round, h.labeled_before, h.labeled_after,
                h.report.accuracy, h.report.edit);
    for (const auto& [t, s] : h.report.f1)
        std::printf("  F1@%g %.2f", t, s.f1);
    if (!h.stop_reason.empty())
        std::printf("  [%s]", h.stop_reason.c_str());
    std::printf("\n");
    std::fflush(stdout);
}

ExperimentHooks make_hooks(const CommonOptions& o, const std::string& checkpoint_dir, const std::function<void(const RoundHistory&)>& extra = {})
{
    ExperimentHooks hooks;
    hooks.on_round = [&o, checkpoint_dir, extra](const RoundHistory& h, const LoopState&, const ModelState& m) {
        if (!o.quiet)
            print_round(h);
        if (!checkpoint_dir.empty()) {
            fs::create_directories(checkpoint_dir);
            save_checkpoint(m, fs::path(checkpoint_dir) / ("round_" + std::to_string(h.round) + ".ckpt"));
        }
        if (extra)
            extra(h);
    };
    return hooks;
}

int cmd_run(const CommonOptions& o, bool checkpoints)
{
    const auto cfg = resolve(o);
    const Dataset ds = load_experiment_data(cfg);
    const LoopConfig loop = resolve_config(cfg.loop, ds);
    OracleAnnotator oracle(ds, loop.oracle_noise, derive_seed(loop.seed, "oracle"));
    const auto history =
        run_experiment(ds, loop, oracle, make_hooks(o, checkpoints ? (fs::path(o.out) / "checkpoints").string() : ""));
    if (history.empty()) {
        std::cerr << "no rounds were run\n";
        return 0;
    }
    export_results(history, o.out, experiment_meta(cfg, ds, loop));
    if (!o.quiet)
        std::cout << "wrote " << (fs::path(o.out) / "history.json").string() << "\n";
    return 0;
}

int cmd_sweep(const CommonOptions& o)
{
    const auto cfg = resolve(o);
    const Dataset ds = load_experiment_data(cfg);
    const LoopConfig base = resolve_config(cfg.loop, ds);
    const auto configs = expand_grid(base, cfg.sweep);
    if (!o.quiet)
        std::cout << configs.size() << " configurations\n";
    const auto rows = sweep(ds, base, cfg.sweep);
    export_sweep(rows, o.out);
    if (!o.quiet)
        std::cout << "wrote " << rows.size() << " rows to " << (fs::path(o.out) / "sweep.csv").string() << "\n";
    return 0;
}

int cmd_serve(const CommonOptions& o, const std::string& host, int port, const std::string& experiment)
{
    const auto cfg = resolve(o);
    const Dataset ds = load_experiment_data(cfg);
    const LoopConfig loop = resolve_config(cfg.loop, ds);

    AnnotationHub hub(ds.class_names);
    hub.register_experiment(experiment, &ds);
    httplib::Server server;
    install_routes(server, hub);
    if (!server.bind_to_port(host, port))
        throw Error("cannot bind " + host + ":" + std::to_string(port));
    std::thread http([&] { server.listen_after_bind(); });
    std::cout << "serving experiment '" << experiment << "' on http://" << host << ":" << port << "\n" << std::flush;

    std::vector<RoundHistory> done;
    const json meta = experiment_meta(cfg, ds, loop);
    HumanAnnotator annotator(hub, experiment);
    int status = 0;
    try {
        const auto history = run_experiment(ds, loop, annotator, make_hooks(o, "", [&](const RoundHistory& h) {
                                                done.push_back(h);
                                                hub.set_history(experiment, history_to_json(done, meta));
                                            }));
        if (!history.empty()) {
            hub.set_history(experiment, history_to_json(history, meta));
            export_results(history, o.out, meta);
        }
        std::cout << "experiment finished; history stays available until interrupted\n" << std::flush;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        status = 1;
        server.stop();
    }
    http.join();
    return status;
}

int cmd_eval(const std::string& data, const std::string& checkpoint, const std::string& split, const std::string& out)
{
    const Dataset ds = load_dataset(data);
    const ModelState m = load_checkpoint(checkpoint);
    std::vector<std::string> ids = split == "train" ? ds.train_ids : split == "all" ? std::vector<std::string>{} : ds.test_ids;
    if (split == "all")
        for (const auto& v : ds.videos)
            ids.push_back(v.id);
    const auto report = evaluate_model(m, ds, ids, EvalOptions{});
    const std::string text = to_json(report).dump(2) + "\n";
    if (out.empty())
        std::cout << text;
    else
        detail::write_file_atomic(out, text);
    return 0;
}

int cmd_gen(const std::string& config, std::optional<std::uint64_t> seed, const std::string& out, bool csv)
{
    ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_config(config);
    if (seed)
        cfg.synthetic.seed = *seed;
    const Dataset ds = generate_synthetic(cfg.synthetic);
    save_dataset(ds, out, csv);
    std::int64_t frames = 0;
    for (const auto& v : ds.videos)
        frames += v.length();
    std::cout << "wrote " << ds.videos.size() << " videos (" << frames << " frames) to " << out << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Clip-budgeted active learning for temporal action segmentation"};
    app.require_subcommand(1);

    CommonOptions run_opts, sweep_opts, serve_opts;
    bool checkpoints = false;
    auto* run = app.add_subcommand("run", "run one active-learning experiment with a simulated annotator");
    add_common(run, run_opts);
    run->add_flag("--checkpoint", checkpoints, "save a model checkpoint per round under <out>/checkpoints");

    auto* sw = app.add_subcommand("sweep", "run every configuration of the config's sweep grid");
    add_common(sw, sweep_opts);

    std::string host = "127.0.0.1", experiment = "exp";
    int port = 8080;
    auto* serve = app.add_subcommand("serve", "run an experiment whose labels come from the HTTP annotation API");
    add_common(serve, serve_opts);
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
    serve->add_option("--experiment", experiment, "experiment id exposed by the API");

    std::string eval_data, eval_ckpt, eval_split = "test", eval_out;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    ev->add_option("--data", eval_data, "dataset root")->required();
    ev->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required()->check(CLI::ExistingFile);
    ev->add_option("--split", eval_split, "test|train|all")->check(CLI::IsMember({"test", "train", "all"}));
    ev->add_option("--out", eval_out, "write the metric report here instead of stdout");

    std::string gen_config, gen_out = "data";
    std::optional<std::uint64_t> gen_seed;
    bool gen_csv = false;
    auto* gen = app.add_subcommand("gen-data", "write a synthetic benchmark in the dataset directory layout");
    gen->add_option("--config", gen_config, "JSON config (its synthetic section is used)")->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "dataset root");
    gen->add_flag("--csv", gen_csv, "write features as CSV instead of binary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            set_quiet(run_opts.quiet);
            return cmd_run(run_opts, checkpoints);
        }
        if (*sw) {
            set_quiet(sweep_opts.quiet);
            return cmd_sweep(sweep_opts);
        }
        if (*serve)
            return cmd_serve(serve_opts, host, port, experiment);
        if (*ev)
            return cmd_eval(eval_data, eval_ckpt, eval_split, eval_out);
        if (*gen)
            return cmd_gen(gen_config, gen_seed, gen_out, gen_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
