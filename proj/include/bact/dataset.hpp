#pragma once

#include "bact/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bact
{

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<int>;

struct VideoRecord
{
    std::string id;
    FeatureMatrix features; // T x D
    std::optional<Labels> gt_labels;

    int length() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }

    friend bool operator==(const VideoRecord& a, const VideoRecord& b)
    {
        return a.id == b.id && a.features.rows() == b.features.rows() &&
               a.features.cols() == b.features.cols() && a.features == b.features &&
               a.gt_labels == b.gt_labels;
    }
};

/// Run of identical labels; `start` and `end` are 1-based and inclusive.
struct Segment
{
    int label = 0;
    int start = 1;
    int end = 1;

    int length() const { return end - start + 1; }
    friend bool operator==(const Segment&, const Segment&) = default;
};

struct Dataset
{
    std::vector<VideoRecord> videos;
    std::vector<std::string> class_names;
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;

    int num_classes() const { return static_cast<int>(class_names.size()); }

    const VideoRecord* find(std::string_view id) const
    {
        for (const auto& v : videos)
            if (v.id == id)
                return &v;
        return nullptr;
    }

    const VideoRecord& at(std::string_view id) const
    {
        if (const auto* v = find(id))
            return *v;
        throw Error("unknown video id '" + std::string(id) + "'");
    }

    std::int64_t total_frames(std::span<const std::string> ids) const
    {
        std::int64_t n = 0;
        for (const auto& id : ids)
            n += at(id).length();
        return n;
    }

    /// Throws ValidationError on the first violated invariant.
    void validate() const
    {
        const int C = num_classes();
        std::vector<std::string> seen;
        for (const auto& v : videos) {
            require(v.length() >= 1, "video '" + v.id + "' has no frames");
            require(v.dim() >= 1, "video '" + v.id + "' has zero feature dimension");
            seen.push_back(v.id);
            if (v.gt_labels) {
                require(static_cast<int>(v.gt_labels->size()) == v.length(),
                        "video '" + v.id + "': label count differs from frame count");
                for (int y : *v.gt_labels)
                    require(y >= 0 && y < C, "video '" + v.id + "': label out of range");
            }
        }
        std::sort(seen.begin(), seen.end());
        require(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), "duplicate video id");
        for (const auto* split : {&train_ids, &test_ids})
            for (const auto& id : *split)
                require(find(id) != nullptr, "split references unknown video '" + id + "'");
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Run-length encodes a label sequence.
inline std::vector<Segment> segments_from_labels(std::span<const int> labels)
{
    if (labels.empty())
        throw ValidationError("segments_from_labels: empty label sequence");
    std::vector<Segment> segs;
    int start = 0;
    const int n = static_cast<int>(labels.size());
    for (int t = 1; t <= n; ++t) {
        if (t == n || labels[t] != labels[start]) {
            segs.push_back({labels[start], start + 1, t});
            start = t;
        }
    }
    return segs;
}

inline Labels labels_from_segments(std::span<const Segment> segs)
{
    Labels out;
    for (const auto& s : segs)
        out.insert(out.end(), static_cast<std::size_t>(s.length()), s.label);
    return out;
}

struct SyntheticConfig
{
    int num_videos = 80;
    double test_fraction = 0.25;
    int num_classes = 6;
    int feature_dim = 16;
    int min_segment = 30;
    int max_segment = 90;
    int mean_frames = 500;
    double noise = 1.0;
    int transition_width = 8;
    double separation = 3.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(num_videos >= 0, "num_videos must be >= 0");
        require(test_fraction >= 0.0 && test_fraction <= 1.0, "test_fraction must lie in [0,1]");
        require(num_classes >= 2, "num_classes must be >= 2");
        require(feature_dim >= 1, "feature_dim must be >= 1");
        require(min_segment >= 1 && min_segment <= max_segment, "need 1 <= min_segment <= max_segment");
        require(mean_frames >= 1, "mean_frames must be >= 1");
        require(noise >= 0.0, "noise must be >= 0");
        require(transition_width >= 0, "transition_width must be >= 0");
        require(separation >= 0.0, "separation must be >= 0");
    }
};

namespace detail
{

// Mixing weight of the next segment's mean for a frame at signed offset
// `x` from a boundary that sits between two frames.
inline double blend_weight(double x, int width)
{
    if (width <= 0)
        return x > 0 ? 1.0 : 0.0;
    return std::clamp(0.5 + x / (2.0 * width), 0.0, 1.0);
}

} // namespace detail

/// Seeded synthetic segmentation benchmark.
///
/// Each video samples a transcript from a Markov chain that never repeats
/// the current class, segment lengths uniform in [min_segment, max_segment],
/// and a frame count uniform in [0.8, 1.2] x mean_frames (last segment is
/// truncated). Frame features are the class mean plus isotropic Gaussian
/// noise; within `transition_width` frames of a true boundary the mean is
/// linearly blended between the two neighbouring classes.
inline Dataset generate_synthetic(const SyntheticConfig& cfg)
{
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "synthetic"));
    const int C = cfg.num_classes;
    const int D = cfg.feature_dim;

    Dataset ds;
    for (int c = 0; c < C; ++c)
        ds.class_names.push_back("action_" + std::to_string(c));

    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXd means(C, D);
    for (int c = 0; c < C; ++c) {
        Eigen::VectorXd z(D);
        for (int d = 0; d < D; ++d)
            z(d) = gauss(rng);
        if (const double n = z.norm(); n > 0)
            z /= n;
        means.row(c) = z.transpose() * cfg.separation;
    }

    const int lo_frames = std::max(1, static_cast<int>(std::lround(0.8 * cfg.mean_frames)));
    const int hi_frames = std::max(lo_frames, static_cast<int>(std::lround(1.2 * cfg.mean_frames)));
    const int num_test = static_cast<int>(std::lround(cfg.test_fraction * cfg.num_videos));
    const int num_train = cfg.num_videos - num_test;

    for (int i = 0; i < cfg.num_videos; ++i) {
        VideoRecord v;
        char name[32];
        std::snprintf(name, sizeof(name), "vid_%04d", i);
        v.id = name;

        const int T = std::uniform_int_distribution<int>(lo_frames, hi_frames)(rng);
        Labels labels;
        labels.reserve(static_cast<std::size_t>(T));
        int cls = std::uniform_int_distribution<int>(0, C - 1)(rng);
        while (static_cast<int>(labels.size()) < T) {
            const int len = std::uniform_int_distribution<int>(cfg.min_segment, cfg.max_segment)(rng);
            const int take = std::min(len, T - static_cast<int>(labels.size()));
            labels.insert(labels.end(), static_cast<std::size_t>(take), cls);
            const int shift = std::uniform_int_distribution<int>(1, C - 1)(rng);
            cls = (cls + shift) % C;
        }

        const auto segs = segments_from_labels(labels);
        v.features.resize(T, D);
        std::size_t k = 0; // segment containing t
        for (int t = 1; t <= T; ++t) {
            while (segs[k].end < t)
                ++k;
            // Nearest boundary: either the start of segment k or its end.
            Eigen::RowVectorXd mean = means.row(segs[k].label);
            const double to_start = t - (segs[k].start - 0.5);
            const double to_end = (segs[k].end + 0.5) - t;
            if (k > 0 && to_start <= to_end && to_start < cfg.transition_width) {
                const double w = detail::blend_weight(to_start, cfg.transition_width);
                mean = (1.0 - w) * means.row(segs[k - 1].label) + w * means.row(segs[k].label);
            } else if (k + 1 < segs.size() && to_end < cfg.transition_width) {
                const double w = detail::blend_weight(-to_end, cfg.transition_width);
                mean = (1.0 - w) * means.row(segs[k].label) + w * means.row(segs[k + 1].label);
            }
            for (int d = 0; d < D; ++d)
                v.features(t - 1, d) = static_cast<float>(mean(d) + cfg.noise * gauss(rng));
        }
        v.gt_labels = std::move(labels);
        (i < num_train ? ds.train_ids : ds.test_ids).push_back(v.id);
        ds.videos.push_back(std::move(v));
    }
    return ds;
}

} // namespace bact
