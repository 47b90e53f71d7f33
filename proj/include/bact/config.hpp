#pragma once

#include "bact/al_loop.hpp"
#include "bact/dataset.hpp"
#include "bact/dataset_io.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

namespace bact
{

using nlohmann::json;

/// Everything a `bact` invocation needs. When `data_path` is unset the
/// dataset is generated from `synthetic`.
struct ExperimentConfig
{
    std::optional<std::string> data_path;
    SyntheticConfig synthetic;
    LoopConfig loop;
    SweepGrid sweep;
    bool sweep_weight_grid = false; // expand `sweep.weights` to the full grid
};

namespace detail
{

inline void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        throw ValidationError("config: section '" + section + "' must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.contains(key))
            throw ValidationError("config: unknown key '" + key + "' in section '" + section + "'");
}

template<typename T>
void read(const json& j, const char* key, T& out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

template<typename T>
void read(const json& j, const char* key, std::optional<T>& out)
{
    if (!j.contains(key) || j.at(key).is_null())
        return;
    T v{};
    read(j, key, v);
    out = v;
}

inline AcquisitionFn acquisition_from_json(const json& j)
{
    if (j.is_string())
        return {parse_acquisition(j.get<std::string>())};
    check_keys(j, "acquisition function", {"function", "power_beta"});
    AcquisitionFn fn;
    std::string name = to_string(fn.kind);
    read(j, "function", name);
    fn.kind = parse_acquisition(name);
    read(j, "power_beta", fn.power_beta);
    return fn;
}

inline json acquisition_to_json(const AcquisitionFn& fn)
{
    json j = {{"function", to_string(fn.kind)}};
    if (fn.kind == AcquisitionKind::PowerBald)
        j["power_beta"] = fn.power_beta;
    return j;
}

inline ScoreWeights weights_from_json(const json& j)
{
    check_keys(j, "weights", {"alpha", "beta", "gamma"});
    double a = 0.2, b = 0.3, g = 0.5;
    read(j, "alpha", a);
    read(j, "beta", b);
    read(j, "gamma", g);
    return {a, b, g};
}

inline json weights_to_json(const ScoreWeights& w)
{
    return {{"alpha", w.alpha()}, {"beta", w.beta()}, {"gamma", w.gamma()}};
}

} // namespace detail

inline json to_json(const SyntheticConfig& c)
{
    return {{"num_videos", c.num_videos},       {"test_fraction", c.test_fraction}, {"num_classes", c.num_classes},
            {"feature_dim", c.feature_dim},     {"min_segment", c.min_segment},     {"max_segment", c.max_segment},
            {"mean_frames", c.mean_frames},     {"noise", c.noise},                 {"transition_width", c.transition_width},
            {"separation", c.separation},       {"seed", c.seed}};
}

inline SyntheticConfig synthetic_from_json(const json& j, SyntheticConfig c = {})
{
    detail::check_keys(j, "synthetic",
                       {"num_videos", "test_fraction", "num_classes", "feature_dim", "min_segment", "max_segment",
                        "mean_frames", "noise", "transition_width", "separation", "seed"});
    detail::read(j, "num_videos", c.num_videos);
    detail::read(j, "test_fraction", c.test_fraction);
    detail::read(j, "num_classes", c.num_classes);
    detail::read(j, "feature_dim", c.feature_dim);
    detail::read(j, "min_segment", c.min_segment);
    detail::read(j, "max_segment", c.max_segment);
    detail::read(j, "mean_frames", c.mean_frames);
    detail::read(j, "noise", c.noise);
    detail::read(j, "transition_width", c.transition_width);
    detail::read(j, "separation", c.separation);
    detail::read(j, "seed", c.seed);
    c.validate();
    return c;
}

inline json to_json(const PredictorConfig& c)
{
    return {{"context_radius", c.context_radius}, {"dropout", c.dropout},       {"mc_samples", c.mc_samples},
            {"learning_rate", c.learning_rate},   {"epochs", c.epochs},         {"batch_size", c.batch_size},
            {"weight_decay", c.weight_decay}};
}

inline PredictorConfig predictor_from_json(const json& j, PredictorConfig c = {})
{
    detail::check_keys(j, "predictor",
                       {"context_radius", "dropout", "mc_samples", "learning_rate", "epochs", "batch_size",
                        "weight_decay"});
    detail::read(j, "context_radius", c.context_radius);
    detail::read(j, "dropout", c.dropout);
    detail::read(j, "mc_samples", c.mc_samples);
    detail::read(j, "learning_rate", c.learning_rate);
    detail::read(j, "epochs", c.epochs);
    detail::read(j, "batch_size", c.batch_size);
    detail::read(j, "weight_decay", c.weight_decay);
    c.validate();
    return c;
}

inline json to_json(const EvalOptions& e)
{
    return {{"thresholds", e.thresholds}, {"edit_per_video", e.edit_per_video}, {"f1_pooled", e.f1_pooled}};
}

inline EvalOptions eval_from_json(const json& j, EvalOptions e = {})
{
    detail::check_keys(j, "eval", {"thresholds", "edit_per_video", "f1_pooled"});
    detail::read(j, "thresholds", e.thresholds);
    detail::read(j, "edit_per_video", e.edit_per_video);
    detail::read(j, "f1_pooled", e.f1_pooled);
    for (double t : e.thresholds)
        require(t > 0.0 && t < 1.0, "eval thresholds must lie in (0,1)");
    return e;
}

/// The loop section with acquisition, predictor and eval folded in, as
/// persisted next to results.
inline json to_json(const LoopConfig& c)
{
    json loop = {{"rounds", c.rounds},
                 {"budget", c.budget},
                 {"queries_per_round", c.queries_per_round},
                 {"clips_per_video", c.clips_per_video},
                 {"clip_length", c.clip_length},
                 {"init_videos", c.init_videos},
                 {"init_clips", c.init_clips},
                 {"video_strategy", to_string(c.video_strategy)},
                 {"clip_strategy", to_string(c.clip_strategy)},
                 {"suppress_nearby", c.suppress_nearby},
                 {"oracle_noise", c.oracle_noise},
                 {"seed", c.seed}};
    if (c.budget_pct)
        loop["budget_pct"] = *c.budget_pct;
    if (c.query_pct)
        loop["query_pct"] = *c.query_pct;
    json acq = detail::acquisition_to_json(c.acquisition);
    acq["weights"] = detail::weights_to_json(c.weights);
    return {{"loop", loop}, {"acquisition", acq}, {"predictor", to_json(c.predictor)}, {"eval", to_json(c.eval)}};
}

inline ExperimentConfig parse_config(const json& j)
{
    detail::check_keys(j, "root", {"data", "synthetic", "loop", "acquisition", "predictor", "eval", "sweep"});
    ExperimentConfig cfg;
    if (j.contains("data")) {
        const auto& d = j.at("data");
        detail::check_keys(d, "data", {"path"});
        detail::read(d, "path", cfg.data_path);
    }
    if (j.contains("synthetic"))
        cfg.synthetic = synthetic_from_json(j.at("synthetic"));

    LoopConfig& L = cfg.loop;
    if (j.contains("loop")) {
        const auto& l = j.at("loop");
        detail::check_keys(l, "loop",
                           {"rounds", "budget", "budget_pct", "queries_per_round", "query_pct", "clips_per_video",
                            "clip_length", "init_videos", "init_clips", "video_strategy", "clip_strategy",
                            "suppress_nearby", "oracle_noise", "seed"});
        detail::read(l, "rounds", L.rounds);
        detail::read(l, "budget", L.budget);
        detail::read(l, "budget_pct", L.budget_pct);
        detail::read(l, "queries_per_round", L.queries_per_round);
        detail::read(l, "query_pct", L.query_pct);
        detail::read(l, "clips_per_video", L.clips_per_video);
        detail::read(l, "clip_length", L.clip_length);
        detail::read(l, "init_videos", L.init_videos);
        detail::read(l, "init_clips", L.init_clips);
        detail::read(l, "suppress_nearby", L.suppress_nearby);
        detail::read(l, "oracle_noise", L.oracle_noise);
        detail::read(l, "seed", L.seed);
        std::string vs = to_string(L.video_strategy), cs = to_string(L.clip_strategy);
        detail::read(l, "video_strategy", vs);
        detail::read(l, "clip_strategy", cs);
        L.video_strategy = parse_video_strategy(vs);
        L.clip_strategy = parse_clip_strategy(cs);
    }
    if (j.contains("acquisition")) {
        json a = j.at("acquisition");
        detail::check_keys(a, "acquisition", {"function", "power_beta", "weights"});
        if (a.contains("weights")) {
            L.weights = detail::weights_from_json(a.at("weights"));
            a.erase("weights");
        }
        L.acquisition = detail::acquisition_from_json(a);
    }
    if (j.contains("predictor"))
        L.predictor = predictor_from_json(j.at("predictor"));
    if (j.contains("eval"))
        L.eval = eval_from_json(j.at("eval"));

    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::check_keys(s, "sweep",
                           {"weight_grid", "weights", "clip_lengths", "acquisitions", "clip_strategies",
                            "video_strategies", "seeds"});
        detail::read(s, "weight_grid", cfg.sweep_weight_grid);
        if (s.contains("weights"))
            for (const auto& w : s.at("weights"))
                cfg.sweep.weights.push_back(detail::weights_from_json(w));
        detail::read(s, "clip_lengths", cfg.sweep.clip_lengths);
        if (s.contains("acquisitions"))
            for (const auto& a : s.at("acquisitions"))
                cfg.sweep.acquisitions.push_back(detail::acquisition_from_json(a));
        if (s.contains("clip_strategies"))
            for (const auto& c : s.at("clip_strategies"))
                cfg.sweep.clip_strategies.push_back(parse_clip_strategy(c.get<std::string>()));
        if (s.contains("video_strategies"))
            for (const auto& v : s.at("video_strategies"))
                cfg.sweep.video_strategies.push_back(parse_video_strategy(v.get<std::string>()));
        detail::read(s, "seeds", cfg.sweep.seeds);
        if (cfg.sweep_weight_grid)
            cfg.sweep.weights = weight_grid();
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + ": " + e.what());
    }
    return parse_config(j);
}

inline Dataset load_experiment_data(const ExperimentConfig& cfg)
{
    if (cfg.data_path)
        return load_dataset(*cfg.data_path);
    return generate_synthetic(cfg.synthetic);
}

} // namespace bact
