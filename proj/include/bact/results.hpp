#pragma once

#include "bact/al_loop.hpp"
#include "bact/config.hpp"
#include "bact/dataset_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace bact
{

inline constexpr int kHistorySchemaVersion = 1;

namespace detail
{

inline std::string fmt_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

} // namespace detail

/// "f1_10" for 0.10, "f1_25" for 0.25; other thresholds keep their digits.
inline std::string f1_key(double threshold)
{
    const double pct = threshold * 100.0;
    if (std::abs(pct - std::round(pct)) < 1e-9)
        return "f1_" + std::to_string(static_cast<int>(std::lround(pct)));
    return "f1_" + detail::fmt_double(pct);
}

inline json to_json(const MetricReport& m)
{
    json j = {{"acc", m.accuracy}, {"edit", m.edit}};
    json by_threshold = json::array();
    for (const auto& [t, s] : m.f1) {
        j[f1_key(t)] = s.f1;
        by_threshold.push_back({{"threshold", t}, {"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}});
    }
    json per_class = json::array();
    for (const auto& [c, s] : m.per_class)
        per_class.push_back({{"class", c}, {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}});
    j["f1_detail"] = by_threshold;
    j["per_class"] = per_class;
    j["frames_evaluated"] = m.frames_evaluated;
    return j;
}

inline MetricReport metric_report_from_json(const json& j)
{
    MetricReport m;
    m.accuracy = j.at("acc").get<double>();
    m.edit = j.at("edit").get<double>();
    m.frames_evaluated = j.at("frames_evaluated").get<std::int64_t>();
    for (const auto& e : j.at("f1_detail"))
        m.f1[e.at("threshold").get<double>()] = {e.at("f1").get<double>(), e.at("precision").get<double>(),
                                                  e.at("recall").get<double>()};
    for (const auto& e : j.at("per_class"))
        m.per_class[e.at("class").get<int>()] = {e.at("precision").get<double>(), e.at("recall").get<double>(),
                                                 e.at("f1").get<double>()};
    return m;
}

inline std::string metric_csv_header(const MetricReport& m)
{
    std::string out = "acc,edit";
    for (const auto& [t, _] : m.f1)
        out += ',' + f1_key(t);
    return out;
}

inline std::string metric_csv_row(const MetricReport& m)
{
    std::string out = detail::fmt_double(m.accuracy) + ',' + detail::fmt_double(m.edit);
    for (const auto& [_, s] : m.f1)
        out += ',' + detail::fmt_double(s.f1);
    return out;
}

inline json to_json(const ClipQuery& q)
{
    json j = {{"video", q.video},
              {"frame", q.center},
              {"clip", {q.interval.lo, q.interval.hi}},
              {"strategy", q.strategy}};
    if (q.components)
        j["score"] = {{"u_local", q.components->u_local},
                      {"gap", q.components->gap},
                      {"grad", q.components->grad},
                      {"s_bau", q.components->s_bau}};
    return j;
}

inline ClipQuery clip_query_from_json(const json& j)
{
    ClipQuery q;
    q.video = j.at("video").get<std::string>();
    q.center = j.at("frame").get<int>();
    q.interval = {j.at("clip").at(0).get<int>(), j.at("clip").at(1).get<int>()};
    q.strategy = j.at("strategy").get<std::string>();
    if (j.contains("score")) {
        const auto& s = j.at("score");
        q.components = ScoreComponents{s.at("u_local").get<double>(), s.at("gap").get<double>(),
                                       s.at("grad").get<double>(), s.at("s_bau").get<double>()};
    }
    return q;
}

/// One history entry without wall time, so that identical runs serialise
/// identically.
inline json to_json(const RoundHistory& h)
{
    json queries = json::array();
    for (std::size_t i = 0; i < h.queries.size(); ++i) {
        json q = to_json(h.queries[i]);
        q["label"] = i < h.acquired_labels.size() ? h.acquired_labels[i] : -1;
        queries.push_back(std::move(q));
    }
    json j = {{"round", h.round},
              {"labeled_before", h.labeled_before},
              {"labeled_after", h.labeled_after},
              {"train_loss", h.final_train_loss},
              {"metrics", to_json(h.report)},
              {"queried_videos", h.queried_videos},
              {"queries", queries}};
    if (!h.stop_reason.empty())
        j["stop_reason"] = h.stop_reason;
    return j;
}

inline RoundHistory round_history_from_json(const json& j)
{
    RoundHistory h;
    h.round = j.at("round").get<int>();
    h.labeled_before = j.at("labeled_before").get<std::size_t>();
    h.labeled_after = j.at("labeled_after").get<std::size_t>();
    h.final_train_loss = j.at("train_loss").get<double>();
    h.report = metric_report_from_json(j.at("metrics"));
    h.queried_videos = j.at("queried_videos").get<std::vector<std::string>>();
    for (const auto& q : j.at("queries")) {
        h.queries.push_back(clip_query_from_json(q));
        h.acquired_labels.push_back(q.at("label").get<int>());
    }
    if (j.contains("stop_reason"))
        h.stop_reason = j.at("stop_reason").get<std::string>();
    return h;
}

inline json history_to_json(const std::vector<RoundHistory>& history, const json& experiment = json::object())
{
    json rounds = json::array();
    for (const auto& h : history)
        rounds.push_back(to_json(h));
    return {{"schema_version", kHistorySchemaVersion}, {"experiment", experiment}, {"rounds", rounds}};
}

inline std::vector<RoundHistory> history_from_json(const json& j)
{
    const int version = j.at("schema_version").get<int>();
    if (version != kHistorySchemaVersion)
        throw ValidationError("unsupported history schema version " + std::to_string(version));
    std::vector<RoundHistory> out;
    for (const auto& r : j.at("rounds"))
        out.push_back(round_history_from_json(r));
    return out;
}

inline std::string history_csv(const std::vector<RoundHistory>& history)
{
    std::string out = "round,labeled_before,labeled_after,acquired," +
                      metric_csv_header(history.empty() ? MetricReport{} : history.front().report) +
                      ",train_loss,stop_reason\n";
    for (const auto& h : history)
        out += std::to_string(h.round) + ',' + std::to_string(h.labeled_before) + ',' + std::to_string(h.labeled_after) +
               ',' + std::to_string(h.labeled_after - h.labeled_before) + ',' + metric_csv_row(h.report) + ',' +
               detail::fmt_double(h.final_train_loss) + ',' + h.stop_reason + '\n';
    return out;
}

/// Writes history.json, history.csv, selections/round_<r>.json and
/// timings.json under `dir`. Only timings.json depends on wall time.
inline void export_results(const std::vector<RoundHistory>& history, const std::filesystem::path& dir,
                           const json& experiment = json::object())
{
    if (history.empty())
        throw ValidationError("export_results: empty history");
    namespace fs = std::filesystem;
    fs::create_directories(dir / "selections");
    detail::write_file_atomic(dir / "history.json", history_to_json(history, experiment).dump(2) + "\n");
    detail::write_file_atomic(dir / "history.csv", history_csv(history));
    json timings = json::array();
    for (const auto& h : history) {
        json sel = {{"round", h.round}, {"queried_videos", h.queried_videos}, {"queries", to_json(h)["queries"]}};
        detail::write_file_atomic(dir / "selections" / ("round_" + std::to_string(h.round) + ".json"), sel.dump(2) + "\n");
        timings.push_back({{"round", h.round}, {"wall_seconds", h.wall_seconds}});
    }
    detail::write_file_atomic(dir / "timings.json", json{{"rounds", timings}}.dump(2) + "\n");
}

inline std::vector<RoundHistory> read_history(const std::filesystem::path& file)
{
    try {
        return history_from_json(json::parse(detail::read_file(file)));
    } catch (const json::exception& e) {
        throw ValidationError("cannot parse " + file.string() + ": " + e.what());
    }
}

inline json to_json(const SweepRow& r)
{
    return {{"config", to_json(r.config)},
            {"rounds_run", r.rounds_run},
            {"labels_used", r.labels_used},
            {"metrics", to_json(r.final_report)}};
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = "alpha,beta,gamma,clip_length,acquisition,video_strategy,clip_strategy,seed,rounds_run,"
                      "labels_used," +
                      metric_csv_header(rows.empty() ? MetricReport{} : rows.front().final_report) + '\n';
    for (const auto& r : rows) {
        const auto& c = r.config;
        out += detail::fmt_double(c.weights.alpha()) + ',' + detail::fmt_double(c.weights.beta()) + ',' +
               detail::fmt_double(c.weights.gamma()) + ',' + std::to_string(c.clip_length) + ',' +
               to_string(c.acquisition.kind) + ',' + to_string(c.video_strategy) + ',' + to_string(c.clip_strategy) +
               ',' + std::to_string(c.seed) + ',' + std::to_string(r.rounds_run) + ',' + std::to_string(r.labels_used) +
               ',' + metric_csv_row(r.final_report) + '\n';
    }
    return out;
}

inline void export_sweep(const std::vector<SweepRow>& rows, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back(to_json(r));
    detail::write_file_atomic(dir / "sweep.json", json{{"schema_version", kHistorySchemaVersion}, {"rows", arr}}.dump(2) + "\n");
    detail::write_file_atomic(dir / "sweep.csv", sweep_csv(rows));
}

} // namespace bact
