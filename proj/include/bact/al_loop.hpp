#pragma once

#include "bact/acquisition.hpp"
#include "bact/annotator.hpp"
#include "bact/labeled_set.hpp"
#include "bact/metrics.hpp"
#include "bact/predictor.hpp"
#include "bact/uncertainty.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bact
{

enum class VideoStrategy
{
    Uncertainty,
    Random,
};

inline std::string to_string(VideoStrategy s) { return s == VideoStrategy::Uncertainty ? "uncertainty" : "random"; }

inline VideoStrategy parse_video_strategy(std::string_view s)
{
    if (s == "uncertainty")
        return VideoStrategy::Uncertainty;
    if (s == "random")
        return VideoStrategy::Random;
    throw ValidationError("unknown video strategy '" + std::string(s) + "' (expected uncertainty|random)");
}

struct LoopConfig
{
    int rounds = 4;
    std::int64_t budget = 150;        // labeled frames; see budget_pct
    std::optional<double> budget_pct; // percent of training frames, overrides `budget`
    int queries_per_round = 6;
    std::optional<double> query_pct; // percent of training videos, overrides `queries_per_round`
    int clips_per_video = 5;
    int clip_length = 20;
    int init_videos = 6;
    int init_clips = 5;
    VideoStrategy video_strategy = VideoStrategy::Uncertainty;
    ClipStrategy clip_strategy = ClipStrategy::Bact;
    AcquisitionFn acquisition;
    ScoreWeights weights;
    bool suppress_nearby = true;
    double oracle_noise = 0.0;
    PredictorConfig predictor;
    EvalOptions eval;
    std::uint64_t seed = 0;

    std::int64_t query_cost() const { return static_cast<std::int64_t>(queries_per_round) * clips_per_video; }

    void validate() const
    {
        require(rounds >= 0, "rounds must be >= 0");
        require(queries_per_round >= 1, "queries_per_round must be >= 1");
        require(clips_per_video >= 1, "clips_per_video must be >= 1");
        require(clip_length >= 0, "clip_length must be >= 0");
        require(init_videos >= 1, "init_videos must be >= 1");
        require(init_clips >= 1, "init_clips must be >= 1");
        require(budget >= static_cast<std::int64_t>(init_videos) * init_clips,
                "budget is too small for the initial labels (" + std::to_string(budget) + " < " +
                    std::to_string(init_videos * init_clips) + ")");
        require(oracle_noise >= 0.0 && oracle_noise <= 1.0, "oracle_noise must lie in [0,1]");
        acquisition.validate();
        predictor.validate();
    }
};

/// Replaces percentage-valued knobs by absolute counts for this dataset.
/// Percentages are floored; the query count is at least one.
inline LoopConfig resolve_config(LoopConfig cfg, const Dataset& ds)
{
    if (cfg.budget_pct) {
        require(*cfg.budget_pct > 0.0, "budget_pct must be > 0");
        cfg.budget = static_cast<std::int64_t>(std::floor(*cfg.budget_pct / 100.0 *
                                                          static_cast<double>(ds.total_frames(ds.train_ids))));
        cfg.budget_pct.reset();
    }
    if (cfg.query_pct) {
        require(*cfg.query_pct > 0.0, "query_pct must be > 0");
        cfg.queries_per_round =
            std::max(1, static_cast<int>(std::floor(*cfg.query_pct / 100.0 * static_cast<double>(ds.train_ids.size()))));
        cfg.query_pct.reset();
    }
    return cfg;
}

struct LoopState
{
    std::vector<std::string> labeled_videos;   // D_L, sorted
    std::vector<std::string> unlabeled_videos; // D_U, sorted
    LabeledIndexSet labeled;                   // Omega_L
    std::size_t initial_labels = 0;
    int rounds_done = 0;
    std::string stop_reason; // empty while running
};

struct RoundHistory
{
    int round = 0; // 1-based
    std::size_t labeled_before = 0;
    std::size_t labeled_after = 0;
    std::vector<std::string> queried_videos;
    std::vector<ClipQuery> queries;
    std::vector<int> acquired_labels; // parallel to queries; -1 when unanswered
    MetricReport report;
    double final_train_loss = 0;
    double wall_seconds = 0; // not part of the persisted history
    std::string stop_reason; // set on the last entry only
};

namespace detail
{

inline std::set<int> answered_frames(const std::vector<AnnotationResponse>& responses, const std::string& video)
{
    std::set<int> out;
    for (const auto& r : responses)
        if (r.video == video)
            out.insert(r.frame);
    return out;
}

// Validates the responses against the queries and returns the updated
// labeled set plus per-query labels. Throws without side effects.
inline std::pair<LabeledIndexSet, std::vector<int>> apply_responses(const Dataset& ds, const LabeledIndexSet& current,
                                                                    const std::vector<ClipQuery>& queries,
                                                                    const std::vector<AnnotationResponse>& responses)
{
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (std::size_t i = 0; i < queries.size(); ++i)
        if (!index.emplace(std::pair{queries[i].video, queries[i].center}, i).second)
            throw Error("duplicate query for frame " + std::to_string(queries[i].center) + " of '" + queries[i].video + "'");
    LabeledIndexSet next = current;
    std::vector<int> labels(queries.size(), -1);
    for (const auto& r : responses) {
        const auto it = index.find({r.video, r.frame});
        if (it == index.end())
            throw Error("annotation for unrequested frame " + std::to_string(r.frame) + " of '" + r.video + "'");
        if (r.label < 0 || r.label >= ds.num_classes())
            throw Error("annotation label " + std::to_string(r.label) + " out of range");
        if (labels[it->second] != -1)
            throw Error("duplicate annotation for frame " + std::to_string(r.frame) + " of '" + r.video + "'");
        labels[it->second] = r.label;
        next.insert({r.video, r.frame, r.label, queries[it->second].interval});
    }
    return {std::move(next), std::move(labels)};
}

inline void erase_sorted(std::vector<std::string>& v, const std::string& x)
{
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it != v.end() && *it == x)
        v.erase(it);
}

inline void insert_sorted(std::vector<std::string>& v, const std::string& x)
{
    const auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x)
        v.insert(it, x);
}

} // namespace detail

/// Seeds D_L with `init_videos` random training videos, each labeled at
/// `init_clips` split-random frames, and puts the rest of the training
/// split in D_U.
inline LoopState init_pools(const Dataset& ds, const LoopConfig& cfg, Annotator& annotator)
{
    cfg.validate();
    require(cfg.init_videos <= static_cast<int>(ds.train_ids.size()),
            "init_videos exceeds the training split (" + std::to_string(ds.train_ids.size()) + " videos)");
    std::vector<std::string> pool = ds.train_ids;
    std::sort(pool.begin(), pool.end());
    Rng rng(derive_seed(cfg.seed, "init_pools"));
    std::shuffle(pool.begin(), pool.end(), rng);

    LoopState st;
    std::vector<ClipQuery> queries;
    for (int i = 0; i < cfg.init_videos; ++i) {
        const auto& v = ds.at(pool[static_cast<std::size_t>(i)]);
        auto qs = baseline_select_clips(ClipStrategy::SplitRandom, v.id, v.length(), {}, cfg.init_clips, cfg.clip_length,
                                        derive_seed(cfg.seed, "init_clips"));
        queries.insert(queries.end(), qs.begin(), qs.end());
        st.labeled_videos.push_back(v.id);
    }
    st.unlabeled_videos.assign(pool.begin() + cfg.init_videos, pool.end());
    std::sort(st.labeled_videos.begin(), st.labeled_videos.end());
    std::sort(st.unlabeled_videos.begin(), st.unlabeled_videos.end());

    auto [labeled, labels] = detail::apply_responses(ds, st.labeled, queries, annotator.annotate(queries, 0));
    st.labeled = std::move(labeled);
    st.initial_labels = st.labeled.size();
    if (static_cast<std::int64_t>(st.labeled.size()) > cfg.budget)
        throw ValidationError("initial labels exceed the budget");
    return st;
}

inline MetricReport evaluate_model(const ModelState& m, const Dataset& ds, std::span<const std::string> ids,
                                   const EvalOptions& opt)
{
    LabelsById preds, gts;
    for (const auto& id : ids) {
        const auto& v = ds.at(id);
        if (!v.gt_labels)
            throw Error("evaluation video '" + id + "' has no ground truth");
        preds[id] = predict_probs(m, v).argmax();
        gts[id] = *v.gt_labels;
    }
    if (gts.empty())
        return {};
    return evaluate(preds, gts, opt);
}

struct RoundOutcome
{
    RoundHistory history;
    ModelState model;
};

/// One iteration: train on Omega_L, evaluate on the test split, then (when
/// the budget guard and pool allow) select videos, select clips, annotate
/// and transfer the queried videos. `state` is only modified on success.
inline RoundOutcome run_round(const Dataset& ds, const LoopConfig& cfg, LoopState& state, Annotator& annotator)
{
    const auto started = std::chrono::steady_clock::now();
    const int round = state.rounds_done + 1;
    RoundOutcome out;
    RoundHistory& h = out.history;
    h.round = round;

    PredictorConfig pcfg = cfg.predictor;
    pcfg.seed = derive_seed(cfg.seed, "train", static_cast<std::uint64_t>(round));
    out.model = train(ds, state.labeled, pcfg);
    const ModelState& model = out.model;
    h.final_train_loss = model.loss_trace.back();
    h.report = evaluate_model(model, ds, ds.test_ids, cfg.eval);
    h.labeled_before = h.labeled_after = state.labeled.size();

    const auto finish = [&](std::string reason) {
        h.stop_reason = reason;
        h.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        state.rounds_done = round;
        state.stop_reason = std::move(reason);
        return std::move(out);
    };
    if (static_cast<std::int64_t>(state.labeled.size()) + cfg.query_cost() > cfg.budget)
        return finish("budget");
    if (state.unlabeled_videos.empty())
        return finish("pool_exhausted");

    const int S = cfg.predictor.mc_samples;
    const auto mc_seed = [&](const std::string& id) { return derive_seed(cfg.seed, "mc", static_cast<std::uint64_t>(round), id); };
    std::map<std::string, FrameProbs> means;
    std::map<std::string, std::vector<double>> entropies;
    const auto score_video = [&](const VideoRecord& v) {
        const auto samples = mc_sample(model, v, S, mc_seed(v.id));
        entropies[v.id] = frame_uncertainties(samples, {AcquisitionKind::Entropy}, 0);
        means.emplace(v.id, mean_probs(samples));
        return samples;
    };

    // Stage 1: which videos.
    if (cfg.video_strategy == VideoStrategy::Uncertainty) {
        std::vector<VideoScore> scores;
        for (const auto& id : state.unlabeled_videos) {
            const auto samples = score_video(ds.at(id));
            const auto u = cfg.acquisition.kind == AcquisitionKind::Entropy
                               ? entropies[id]
                               : frame_uncertainties(samples, cfg.acquisition, derive_seed(cfg.seed, "acq", id));
            scores.push_back({id, video_score(u)});
        }
        h.queried_videos = select_videos(std::move(scores), cfg.queries_per_round);
    } else {
        auto pool = state.unlabeled_videos;
        Rng rng(derive_seed(cfg.seed, "video_pick", static_cast<std::uint64_t>(round)));
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(cfg.queries_per_round)));
        h.queried_videos = pool;
    }

    // Stage 2: which frames inside each queried video.
    const bool needs_probs = cfg.clip_strategy == ClipStrategy::Bact || cfg.clip_strategy == ClipStrategy::Entropy ||
                             cfg.clip_strategy == ClipStrategy::SplitEntropy;
    for (const auto& id : h.queried_videos) {
        const auto& v = ds.at(id);
        if (needs_probs && !means.contains(id))
            score_video(v);
        const auto clip_seed = derive_seed(cfg.seed, "clip_pick", static_cast<std::uint64_t>(round));
        std::vector<ClipQuery> qs;
        switch (cfg.clip_strategy) {
        case ClipStrategy::Bact:
            qs = bact_select_clips(means.at(id), entropies.at(id),
                                   {cfg.clips_per_video, cfg.clip_length, cfg.weights, cfg.suppress_nearby}, clip_seed);
            break;
        case ClipStrategy::Coreset: {
            const auto existing = state.labeled.frames_of(id);
            std::vector<int> seeds;
            for (int f : existing)
                seeds.push_back(f - 1);
            for (int idx : coreset_select(v.features, seeds, cfg.clips_per_video))
                qs.push_back({id, idx + 1, clip_interval(idx + 1, cfg.clip_length, v.length()), "coreset", std::nullopt});
            break;
        }
        default: {
            const std::vector<double> none;
            const auto& u = needs_probs ? entropies.at(id) : none;
            qs = baseline_select_clips(cfg.clip_strategy, id, v.length(), u, cfg.clips_per_video, cfg.clip_length,
                                       clip_seed, state.labeled.frames_of(id));
        }
        }
        if (static_cast<int>(qs.size()) < cfg.clips_per_video)
            warn("video '" + id + "' yielded " + std::to_string(qs.size()) + " of " +
                 std::to_string(cfg.clips_per_video) + " clips");
        for (auto& q : qs)
            if (!state.labeled.contains(q.video, q.center))
                h.queries.push_back(std::move(q));
    }

    auto [labeled, labels] = detail::apply_responses(ds, state.labeled, h.queries, annotator.annotate(h.queries, round));
    if (static_cast<std::int64_t>(labeled.size()) > cfg.budget)
        throw Error("internal: labeled set exceeds budget");

    // Commit.
    state.labeled = std::move(labeled);
    for (const auto& id : h.queried_videos) {
        detail::erase_sorted(state.unlabeled_videos, id);
        detail::insert_sorted(state.labeled_videos, id);
    }
    h.acquired_labels = std::move(labels);
    h.labeled_after = state.labeled.size();
    h.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    state.rounds_done = round;
    return out;
}

struct ExperimentHooks
{
    std::function<void(const LoopState&)> on_init;
    std::function<void(const RoundHistory&, const LoopState&, const ModelState&)> on_round;
};

inline std::vector<RoundHistory> run_experiment(const Dataset& ds, LoopConfig cfg, Annotator& annotator,
                                                const ExperimentHooks& hooks = {})
{
    cfg = resolve_config(std::move(cfg), ds);
    cfg.validate();
    ds.validate();
    std::vector<RoundHistory> history;
    if (cfg.rounds == 0)
        return history;
    require(!ds.test_ids.empty(), "dataset has an empty test split");
    LoopState state = init_pools(ds, cfg, annotator);
    if (hooks.on_init)
        hooks.on_init(state);
    for (int r = 1; r <= cfg.rounds; ++r) {
        auto outcome = run_round(ds, cfg, state, annotator);
        history.push_back(std::move(outcome.history));
        if (hooks.on_round)
            hooks.on_round(history.back(), state, outcome.model);
        if (!state.stop_reason.empty())
            break;
    }
    if (history.back().stop_reason.empty()) {
        history.back().stop_reason = "rounds_done";
        state.stop_reason = "rounds_done";
    }
    return history;
}

inline std::vector<RoundHistory> run_experiment_with_oracle(const Dataset& ds, const LoopConfig& cfg)
{
    OracleAnnotator oracle(ds, cfg.oracle_noise, derive_seed(cfg.seed, "oracle"));
    return run_experiment(ds, cfg, oracle);
}

/// The boundary-weight grid: alpha, beta in {0.0..0.4}, gamma in
/// {0.0..0.6} in steps of 0.1, keeping only rows with alpha+beta+gamma = 1.
inline std::vector<ScoreWeights> weight_grid()
{
    std::vector<ScoreWeights> out;
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; b <= 4; ++b)
            for (int g = 0; g <= 6; ++g)
                if (a + b + g == 10)
                    out.emplace_back(a / 10.0, b / 10.0, g / 10.0);
    return out;
}

struct SweepGrid
{
    std::vector<ScoreWeights> weights;
    std::vector<int> clip_lengths;
    std::vector<AcquisitionFn> acquisitions;
    std::vector<ClipStrategy> clip_strategies;
    std::vector<VideoStrategy> video_strategies;
    std::vector<std::uint64_t> seeds;
};

struct SweepRow
{
    LoopConfig config;
    MetricReport final_report;
    int rounds_run = 0;
    std::size_t labels_used = 0;
};

/// Cartesian product of the non-empty axes; an empty axis keeps the base value.
inline std::vector<LoopConfig> expand_grid(const LoopConfig& base, const SweepGrid& grid)
{
    std::vector<LoopConfig> configs{base};
    const auto axis = [&](const auto& values, auto apply) {
        if (values.empty())
            return;
        std::vector<LoopConfig> next;
        for (const auto& c : configs)
            for (const auto& v : values) {
                LoopConfig n = c;
                apply(n, v);
                next.push_back(std::move(n));
            }
        configs = std::move(next);
    };
    axis(grid.weights, [](LoopConfig& c, const ScoreWeights& w) { c.weights = w; });
    axis(grid.clip_lengths, [](LoopConfig& c, int l) { c.clip_length = l; });
    axis(grid.acquisitions, [](LoopConfig& c, const AcquisitionFn& a) { c.acquisition = a; });
    axis(grid.clip_strategies, [](LoopConfig& c, ClipStrategy s) { c.clip_strategy = s; });
    axis(grid.video_strategies, [](LoopConfig& c, VideoStrategy s) { c.video_strategy = s; });
    axis(grid.seeds, [](LoopConfig& c, std::uint64_t s) { c.seed = s; });
    return configs;
}

inline std::vector<SweepRow> sweep(const Dataset& ds, const LoopConfig& base, const SweepGrid& grid)
{
    std::vector<SweepRow> rows;
    for (auto& cfg : expand_grid(base, grid)) {
        const auto history = run_experiment_with_oracle(ds, cfg);
        SweepRow row;
        row.config = std::move(cfg);
        row.rounds_run = static_cast<int>(history.size());
        if (!history.empty()) {
            row.final_report = history.back().report;
            row.labels_used = history.back().labeled_after;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace bact
