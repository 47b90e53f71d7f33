#pragma once

#include "bact/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace bact
{

/// Default scoring half-window used when the clip length is 0.
inline constexpr int kFallbackScoringHalfWidth = 10;

enum class ClipStrategy
{
    Bact,
    Random,
    Entropy,
    Equidistant,
    SplitRandom,
    SplitEntropy,
    Coreset,
};

inline std::string to_string(ClipStrategy s)
{
    switch (s) {
    case ClipStrategy::Bact:
        return "bact";
    case ClipStrategy::Random:
        return "random";
    case ClipStrategy::Entropy:
        return "entropy";
    case ClipStrategy::Equidistant:
        return "equidistant";
    case ClipStrategy::SplitRandom:
        return "split_random";
    case ClipStrategy::SplitEntropy:
        return "split_entropy";
    case ClipStrategy::Coreset:
        return "coreset";
    }
    return "bact";
}

inline ClipStrategy parse_clip_strategy(std::string_view s)
{
    for (auto k : {ClipStrategy::Bact, ClipStrategy::Random, ClipStrategy::Entropy, ClipStrategy::Equidistant,
                   ClipStrategy::SplitRandom, ClipStrategy::SplitEntropy, ClipStrategy::Coreset})
        if (to_string(k) == s)
            return k;
    throw ValidationError("unknown clip strategy '" + std::string(s) +
                          "' (expected bact|random|entropy|equidistant|split_random|split_entropy|coreset)");
}

/// Fusion weights for the boundary score; normalised to sum to one.
class ScoreWeights
{
public:
    ScoreWeights() : ScoreWeights(0.2, 0.3, 0.5) {}

    ScoreWeights(double alpha, double beta, double gamma)
    {
        require(alpha >= 0 && beta >= 0 && gamma >= 0, "score weights must be non-negative");
        const double sum = alpha + beta + gamma;
        require(sum > 0, "score weights must not all be zero");
        alpha_ = alpha / sum;
        beta_ = beta / sum;
        gamma_ = gamma / sum;
    }

    double alpha() const { return alpha_; }
    double beta() const { return beta_; }
    double gamma() const { return gamma_; }

    friend bool operator==(const ScoreWeights&, const ScoreWeights&) = default;

private:
    double alpha_ = 0.2;
    double beta_ = 0.3;
    double gamma_ = 0.5;
};

struct BoundaryCandidate
{
    std::string video;
    int frame = 2; // first frame of the new predicted segment, 1-based
    int video_length = 2;
    double u_local = 0;
    double gap = 0;
    double grad = 0;
    bool grad_defined = true;
    double s_bau = 0;
};

struct ScoreComponents
{
    double u_local = 0;
    double gap = 0;
    double grad = 0;
    double s_bau = 0;

    friend bool operator==(const ScoreComponents&, const ScoreComponents&) = default;
};

/// A request to label the center frame of a clip.
struct ClipQuery
{
    std::string video;
    int center = 1;
    Interval interval;
    std::string strategy;
    std::optional<ScoreComponents> components;

    int labeled_frame() const { return center; }
    friend bool operator==(const ClipQuery&, const ClipQuery&) = default;
};

inline std::vector<int> detect_boundaries(std::span<const int> labels)
{
    if (labels.empty())
        throw ValidationError("detect_boundaries: empty label sequence");
    std::vector<int> out;
    for (std::size_t t = 1; t < labels.size(); ++t)
        if (labels[t] != labels[t - 1])
            out.push_back(static_cast<int>(t) + 1);
    return out;
}

/// [b - w, b + w] intersected with [1, T].
inline Interval boundary_window(int b, int w, int T)
{
    require(T >= 1 && b >= 1 && b <= T, "boundary_window: center outside [1, T]");
    require(w >= 0, "boundary_window: negative half-width");
    return {std::max(1, b - w), std::min(T, b + w)};
}

/// Clip around `center` with half-width floor(clip_length / 2).
inline Interval clip_interval(int center, int clip_length, int T) { return boundary_window(center, clip_length / 2, T); }

inline int scoring_half_width(int clip_length) { return clip_length > 0 ? clip_length / 2 : kFallbackScoringHalfWidth; }

inline double local_uncertainty(std::span<const double> u, Interval w)
{
    require(w.lo >= 1 && w.hi <= static_cast<int>(u.size()) && w.lo <= w.hi, "local_uncertainty: window outside video");
    double s = 0;
    for (int t = w.lo; t <= w.hi; ++t)
        s += u[static_cast<std::size_t>(t - 1)];
    return s / w.length();
}

/// Top-1 minus top-2 probability.
template<typename Row>
    requires requires(const Row& r) { r.size(); r(0); }
double confidence_gap(const Row& p)
{
    require(p.size() >= 2, "confidence_gap: need at least two classes");
    double top1 = -1;
    double top2 = -1;
    for (Eigen::Index c = 0; c < p.size(); ++c) {
        const double v = p(c);
        if (v > top1) {
            top2 = top1;
            top1 = v;
        } else if (v > top2) {
            top2 = v;
        }
    }
    return std::clamp(top1 - top2, 0.0, 1.0);
}

inline double confidence_gap(std::span<const double> p)
{
    return confidence_gap(Eigen::Map<const Eigen::RowVectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

struct GradientResult
{
    double value = 0;
    bool defined = false; // false when the window holds no adjacent pair
};

/// Mean L2 distance between consecutive probability rows inside the window.
inline GradientResult temporal_gradient(const ProbMatrix& probs, Interval w)
{
    require(w.lo >= 1 && w.hi <= probs.rows() && w.lo <= w.hi, "temporal_gradient: window outside video");
    if (w.length() < 2)
        return {};
    double s = 0;
    for (int t = w.lo; t < w.hi; ++t)
        s += (probs.row(t) - probs.row(t - 1)).norm();
    return {s / (w.length() - 1), true};
}

inline double boundary_score(double u_local, double gap, double grad, const ScoreWeights& w)
{
    return w.alpha() * u_local + w.beta() * (1.0 - gap) + w.gamma() * grad;
}

/// Scores every predicted boundary of one video. `mean` is the MC-mean
/// prediction and `u` its per-frame uncertainty.
inline std::vector<BoundaryCandidate> score_boundaries(const FrameProbs& mean, std::span<const double> u,
                                                       int clip_length, const ScoreWeights& weights)
{
    require(static_cast<Eigen::Index>(u.size()) == mean.probs.rows(), "score_boundaries: uncertainty length mismatch");
    const int T = mean.length();
    const int w = scoring_half_width(clip_length);
    std::vector<BoundaryCandidate> out;
    for (int b : detect_boundaries(mean.argmax())) {
        BoundaryCandidate c;
        c.video = mean.video;
        c.frame = b;
        c.video_length = T;
        const Interval win = boundary_window(b, w, T);
        c.u_local = local_uncertainty(u, win);
        c.gap = confidence_gap(mean.probs.row(b - 1));
        const auto g = temporal_gradient(mean.probs, win);
        c.grad = g.value;
        c.grad_defined = g.defined;
        c.s_bau = boundary_score(c.u_local, c.gap, c.grad, weights);
        out.push_back(std::move(c));
    }
    return out;
}

/// The min(K, |cands|) highest-scoring candidates (ties: smaller frame,
/// then video id). With `min_separation` > 0, a candidate closer than that
/// to an already selected one in the same video is skipped.
inline std::vector<ClipQuery> select_top_k_boundaries(std::vector<BoundaryCandidate> cands, int K, int clip_length,
                                                      int min_separation = 0)
{
    require(K >= 1, "select_top_k_boundaries: K must be >= 1");
    std::sort(cands.begin(), cands.end(), [](const BoundaryCandidate& a, const BoundaryCandidate& b) {
        if (a.s_bau != b.s_bau)
            return a.s_bau > b.s_bau;
        if (a.frame != b.frame)
            return a.frame < b.frame;
        return a.video < b.video;
    });
    std::vector<ClipQuery> out;
    for (const auto& c : cands) {
        if (static_cast<int>(out.size()) >= K)
            break;
        const bool crowded = std::any_of(out.begin(), out.end(), [&](const ClipQuery& q) {
            return q.video == c.video && std::abs(q.center - c.frame) < min_separation;
        });
        if (crowded)
            continue;
        ClipQuery q;
        q.video = c.video;
        q.center = c.frame;
        q.interval = clip_interval(c.frame, clip_length, c.video_length);
        q.strategy = to_string(ClipStrategy::Bact);
        q.components = ScoreComponents{c.u_local, c.gap, c.grad, c.s_bau};
        out.push_back(std::move(q));
    }
    return out;
}

namespace detail
{

// Spans of the four-way split, 1-based inclusive; may be empty when T < 4.
inline std::vector<Interval> quarter_spans(int T)
{
    std::vector<Interval> spans;
    for (int s = 0; s < 4; ++s)
        spans.push_back({s * T / 4 + 1, (s + 1) * T / 4});
    return spans;
}

// Highest-u unchosen frame in `range`, preferring frames at least `sep`
// away from every chosen frame. Ties go to the smaller frame.
inline std::optional<int> best_frame(std::span<const double> u, Interval range, const std::set<int>& chosen, int sep)
{
    for (int pass = 0; pass < 2; ++pass) {
        std::optional<int> best;
        for (int t = range.lo; t <= range.hi; ++t) {
            if (chosen.contains(t))
                continue;
            if (pass == 0 && sep > 0) {
                const auto it = chosen.lower_bound(t - sep + 1);
                if (it != chosen.end() && *it < t + sep)
                    continue;
            }
            if (!best || u[static_cast<std::size_t>(t - 1)] > u[static_cast<std::size_t>(*best - 1)])
                best = t;
        }
        if (best)
            return best;
    }
    return std::nullopt;
}

inline std::optional<int> random_frame(Interval range, const std::set<int>& chosen, Rng& rng)
{
    std::vector<int> free;
    for (int t = range.lo; t <= range.hi; ++t)
        if (!chosen.contains(t))
            free.push_back(t);
    if (free.empty())
        return std::nullopt;
    return free[std::uniform_int_distribution<std::size_t>(0, free.size() - 1)(rng)];
}

} // namespace detail

/// Baseline clip selectors. Frames in `exclude` are never returned and count
/// as already chosen for the entropy separation rule. `u` is only read by
/// the entropy-driven strategies.
inline std::vector<ClipQuery> baseline_select_clips(ClipStrategy strategy, const std::string& video, int T,
                                                    std::span<const double> u, int K, int clip_length,
                                                    std::uint64_t seed, std::span<const int> exclude = {})
{
    require(K >= 1, "baseline_select_clips: K must be >= 1");
    require(T >= 1, "baseline_select_clips: empty video");
    require(clip_length >= 0, "baseline_select_clips: negative clip length");
    const bool needs_u = strategy == ClipStrategy::Entropy || strategy == ClipStrategy::SplitEntropy;
    require(!needs_u || static_cast<int>(u.size()) == T, "baseline_select_clips: uncertainty length mismatch");

    std::set<int> chosen(exclude.begin(), exclude.end());
    const int available = T - static_cast<int>(chosen.size());
    if (K > available) {
        warn("requested " + std::to_string(K) + " clips from '" + video + "' but only " + std::to_string(available) +
             " frames are available; clamping");
        K = std::max(0, available);
    }
    Rng rng(derive_seed(seed, "clips", video));
    std::vector<int> centers;
    const auto take = [&](std::optional<int> t) {
        if (t) {
            centers.push_back(*t);
            chosen.insert(*t);
        }
        return t.has_value();
    };

    switch (strategy) {
    case ClipStrategy::Random:
        while (static_cast<int>(centers.size()) < K && take(detail::random_frame({1, T}, chosen, rng))) {}
        break;
    case ClipStrategy::Entropy:
        while (static_cast<int>(centers.size()) < K && take(detail::best_frame(u, {1, T}, chosen, clip_length))) {}
        break;
    case ClipStrategy::Equidistant: {
        int prev = 0;
        for (int i = 1; i <= K; ++i) {
            int t = std::max(1, static_cast<int>(std::floor((i - 0.5) * T / K)));
            t = std::max(t, prev + 1);
            while (chosen.contains(t) && t < T)
                ++t;
            if (t > T || chosen.contains(t))
                break;
            take(t);
            prev = t;
        }
        break;
    }
    case ClipStrategy::SplitRandom:
    case ClipStrategy::SplitEntropy: {
        const auto spans = detail::quarter_spans(T);
        int misses = 0;
        for (std::size_t s = 0; static_cast<int>(centers.size()) < K && misses < 4; s = (s + 1) % 4) {
            const Interval span = spans[s];
            if (span.length() == 0) {
                ++misses;
                continue;
            }
            const auto pick = strategy == ClipStrategy::SplitRandom
                                  ? detail::random_frame(span, chosen, rng)
                                  : detail::best_frame(u, span, chosen, clip_length);
            misses = take(pick) ? 0 : misses + 1;
        }
        break;
    }
    case ClipStrategy::Bact:
    case ClipStrategy::Coreset:
        throw ValidationError("baseline_select_clips: '" + to_string(strategy) + "' is not a baseline selector");
    }

    std::vector<ClipQuery> out;
    for (int c : centers)
        out.push_back({video, c, clip_interval(c, clip_length, T), to_string(strategy), std::nullopt});
    return out;
}

/// Greedy k-center: repeatedly adds the point farthest from its nearest
/// selected point (ties: smaller index). Indices are 0-based rows of
/// `points`; `existing` seeds the selected set and is not returned.
template<typename Matrix>
std::vector<int> coreset_select(const Matrix& points, std::span<const int> existing, int K)
{
    require(K >= 1, "coreset_select: K must be >= 1");
    const auto n = points.rows();
    if (n == 0)
        throw ValidationError("coreset_select: no points");
    std::vector<double> dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    const auto absorb = [&](Eigen::Index c) {
        taken[static_cast<std::size_t>(c)] = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double d = (points.row(i).template cast<double>() - points.row(c).template cast<double>()).norm();
            dist[static_cast<std::size_t>(i)] = std::min(dist[static_cast<std::size_t>(i)], d);
        }
    };
    for (int e : existing) {
        require(e >= 0 && e < n, "coreset_select: existing index out of range");
        absorb(e);
    }
    std::vector<int> out;
    while (static_cast<int>(out.size()) < K) {
        Eigen::Index best = -1;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!taken[static_cast<std::size_t>(i)] &&
                (best < 0 || dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(best)]))
                best = i;
        if (best < 0)
            break;
        absorb(best);
        out.push_back(static_cast<int>(best));
    }
    return out;
}

/// Largest distance from any point to its nearest center.
template<typename Matrix>
double covering_radius(const Matrix& points, std::span<const int> centers)
{
    double radius = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (int c : centers)
            nearest = std::min(nearest, (points.row(i).template cast<double>() - points.row(c).template cast<double>()).norm());
        radius = std::max(radius, nearest);
    }
    return radius;
}

struct BactClipParams
{
    int clips_per_video = 5;
    int clip_length = 20;
    ScoreWeights weights;
    bool suppress_nearby = true;
};

/// Stage 2 for one video: top-K boundaries by fused score, with at least
/// `clip_length` frames between picks, then split-entropy fill when the
/// video has fewer usable boundaries than K.
inline std::vector<ClipQuery> bact_select_clips(const FrameProbs& mean, std::span<const double> u,
                                                const BactClipParams& p, std::uint64_t seed)
{
    auto cands = score_boundaries(mean, u, p.clip_length, p.weights);
    const int sep = p.suppress_nearby ? std::max(p.clip_length, 1) : 0;
    auto out = select_top_k_boundaries(std::move(cands), p.clips_per_video, p.clip_length, sep);
    const int missing = p.clips_per_video - static_cast<int>(out.size());
    if (missing > 0) {
        std::vector<int> have;
        for (const auto& q : out)
            have.push_back(q.center);
        auto fill = baseline_select_clips(ClipStrategy::SplitEntropy, mean.video, mean.length(), u, missing,
                                          p.clip_length, seed, have);
        out.insert(out.end(), fill.begin(), fill.end());
    }
    return out;
}

} // namespace bact
