#pragma once

#include "bact/dataset.hpp"

#include <array>
#include <map>
#include <vector>

namespace bact
{

struct OverlapScore
{
    double f1 = 0;
    double precision = 0;
    double recall = 0;

    friend bool operator==(const OverlapScore&, const OverlapScore&) = default;
};

struct ClassScore
{
    double precision = 0;
    double recall = 0;
    double f1 = 0;

    friend bool operator==(const ClassScore&, const ClassScore&) = default;
};

/// All values are percentages in [0, 100].
struct MetricReport
{
    double accuracy = 0;
    double edit = 0;
    std::map<double, OverlapScore> f1;
    std::map<int, ClassScore> per_class;
    std::int64_t frames_evaluated = 0;

    double f1_at(double threshold) const
    {
        const auto it = f1.find(threshold);
        return it == f1.end() ? 0.0 : it->second.f1;
    }

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

struct EvalOptions
{
    std::vector<double> thresholds = {0.10, 0.25, 0.50};
    /// true: Edit is the mean of per-video scores. false: pooled distance over pooled length.
    bool edit_per_video = true;
    /// true: F1 TP/FP/FN are pooled over videos. false: per-video F1 averaged.
    bool f1_pooled = true;
};

namespace detail
{

inline void check_pair(std::span<const int> pred, std::span<const int> gt, const char* who)
{
    if (pred.size() != gt.size())
        throw ValidationError(std::string(who) + ": prediction and ground truth lengths differ");
    if (pred.empty())
        throw ValidationError(std::string(who) + ": empty label sequence");
}

inline int levenshtein(std::span<const int> a, std::span<const int> b)
{
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = static_cast<int>(j);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline std::vector<int> transcript(std::span<const int> labels)
{
    std::vector<int> out;
    for (const auto& s : segments_from_labels(labels))
        out.push_back(s.label);
    return out;
}

struct OverlapCounts
{
    int tp = 0;
    int fp = 0;
    int fn = 0;
};

// Greedy matching in prediction order: each predicted segment takes the
// same-class ground-truth segment of highest IoU; it is a hit iff that IoU
// reaches the threshold and the segment has not been consumed yet.
inline OverlapCounts overlap_counts(std::span<const int> pred, std::span<const int> gt, double threshold,
                                    std::vector<std::pair<int, int>>* matches = nullptr)
{
    const auto ps = segments_from_labels(pred);
    const auto gs = segments_from_labels(gt);
    std::vector<bool> used(gs.size(), false);
    OverlapCounts c;
    for (std::size_t j = 0; j < ps.size(); ++j) {
        double best = 0;
        int best_idx = -1;
        for (std::size_t g = 0; g < gs.size(); ++g) {
            if (gs[g].label != ps[j].label)
                continue;
            const int inter = std::min(ps[j].end, gs[g].end) - std::max(ps[j].start, gs[g].start) + 1;
            const int uni = std::max(ps[j].end, gs[g].end) - std::min(ps[j].start, gs[g].start) + 1;
            const double iou = inter > 0 ? static_cast<double>(inter) / uni : 0.0;
            if (iou > best) {
                best = iou;
                best_idx = static_cast<int>(g);
            }
        }
        if (best_idx >= 0 && best >= threshold && !used[static_cast<std::size_t>(best_idx)]) {
            used[static_cast<std::size_t>(best_idx)] = true;
            ++c.tp;
            if (matches)
                matches->emplace_back(static_cast<int>(j), best_idx);
        } else {
            ++c.fp;
        }
    }
    c.fn = static_cast<int>(gs.size()) - c.tp;
    return c;
}

inline OverlapScore overlap_score(const OverlapCounts& c)
{
    OverlapScore s;
    if (c.tp == 0)
        return s;
    s.precision = 100.0 * c.tp / (c.tp + c.fp);
    s.recall = 100.0 * c.tp / (c.tp + c.fn);
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

} // namespace detail

inline double frame_accuracy(std::span<const int> pred, std::span<const int> gt)
{
    detail::check_pair(pred, gt, "frame_accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        hits += pred[i] == gt[i];
    return 100.0 * static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Normalised segmental Levenshtein similarity of the two transcripts.
inline double edit_score(std::span<const int> pred, std::span<const int> gt)
{
    if (pred.empty() || gt.empty())
        throw ValidationError("edit_score: empty label sequence");
    const auto p = detail::transcript(pred);
    const auto g = detail::transcript(gt);
    const double d = detail::levenshtein(p, g);
    const double score = 100.0 * (1.0 - d / static_cast<double>(std::max(p.size(), g.size())));
    return std::max(0.0, score);
}

inline OverlapScore f1_at_overlap(std::span<const int> pred, std::span<const int> gt, double threshold)
{
    detail::check_pair(pred, gt, "f1_at_overlap");
    if (!(threshold > 0.0 && threshold < 1.0))
        throw ValidationError("f1_at_overlap: threshold must lie in (0,1)");
    return detail::overlap_score(detail::overlap_counts(pred, gt, threshold));
}

using LabelsById = std::map<std::string, Labels>;

inline MetricReport evaluate(const LabelsById& preds, const LabelsById& gts, const EvalOptions& opt = {})
{
    if (preds.size() != gts.size())
        throw ValidationError("evaluate: prediction and ground-truth video sets differ");
    for (double th : opt.thresholds)
        if (!(th > 0.0 && th < 1.0))
            throw ValidationError("evaluate: thresholds must lie in (0,1)");

    MetricReport r;
    std::int64_t hits = 0;
    double edit_sum = 0;
    double dist_sum = 0;
    double len_sum = 0;
    std::map<double, detail::OverlapCounts> pooled;
    std::map<double, OverlapScore> averaged;
    std::map<int, std::array<std::int64_t, 3>> cls; // tp, predicted, actual

    for (const auto& [id, gt] : gts) {
        const auto it = preds.find(id);
        if (it == preds.end())
            throw ValidationError("evaluate: no prediction for video '" + id + "'");
        const auto& pred = it->second;
        detail::check_pair(pred, gt, "evaluate");

        for (std::size_t i = 0; i < gt.size(); ++i) {
            hits += pred[i] == gt[i];
            ++cls[gt[i]][2];
            ++cls[pred[i]][1];
            if (pred[i] == gt[i])
                ++cls[gt[i]][0];
        }
        r.frames_evaluated += static_cast<std::int64_t>(gt.size());

        edit_sum += edit_score(pred, gt);
        const auto p = detail::transcript(pred);
        const auto g = detail::transcript(gt);
        dist_sum += detail::levenshtein(p, g);
        len_sum += static_cast<double>(std::max(p.size(), g.size()));

        for (double th : opt.thresholds) {
            const auto c = detail::overlap_counts(pred, gt, th);
            auto& acc = pooled[th];
            acc.tp += c.tp;
            acc.fp += c.fp;
            acc.fn += c.fn;
            const auto s = detail::overlap_score(c);
            auto& avg = averaged[th];
            avg.f1 += s.f1;
            avg.precision += s.precision;
            avg.recall += s.recall;
        }
    }

    const double n = static_cast<double>(gts.size());
    if (r.frames_evaluated > 0)
        r.accuracy = 100.0 * static_cast<double>(hits) / static_cast<double>(r.frames_evaluated);
    if (!gts.empty())
        r.edit = opt.edit_per_video ? edit_sum / n : std::max(0.0, 100.0 * (1.0 - dist_sum / len_sum));
    for (double th : opt.thresholds) {
        if (opt.f1_pooled) {
            r.f1[th] = detail::overlap_score(pooled[th]);
        } else {
            auto s = averaged[th];
            if (n > 0) {
                s.f1 /= n;
                s.precision /= n;
                s.recall /= n;
            }
            r.f1[th] = s;
        }
    }
    for (const auto& [c, counts] : cls) {
        ClassScore s;
        if (counts[1] > 0)
            s.precision = 100.0 * static_cast<double>(counts[0]) / static_cast<double>(counts[1]);
        if (counts[2] > 0)
            s.recall = 100.0 * static_cast<double>(counts[0]) / static_cast<double>(counts[2]);
        if (s.precision + s.recall > 0)
            s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
        r.per_class[c] = s;
    }
    return r;
}

} // namespace bact
