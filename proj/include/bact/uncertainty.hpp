#pragma once

#include "bact/predictor.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bact
{

inline constexpr double kLogEps = 1e-12;

enum class AcquisitionKind
{
    Entropy,
    Bald,
    PowerBald,
    Jsd,
    VariationRatio,
};

struct AcquisitionFn
{
    AcquisitionKind kind = AcquisitionKind::Entropy;
    double power_beta = 1.0; // coldness; only used by PowerBald

    void validate() const
    {
        if (kind == AcquisitionKind::PowerBald)
            require(power_beta > 0.0, "power_bald requires beta > 0");
    }
};

inline std::string to_string(AcquisitionKind k)
{
    switch (k) {
    case AcquisitionKind::Entropy:
        return "entropy";
    case AcquisitionKind::Bald:
        return "bald";
    case AcquisitionKind::PowerBald:
        return "power_bald";
    case AcquisitionKind::Jsd:
        return "jsd";
    case AcquisitionKind::VariationRatio:
        return "variation_ratio";
    }
    return "entropy";
}

inline AcquisitionKind parse_acquisition(std::string_view s)
{
    for (auto k : {AcquisitionKind::Entropy, AcquisitionKind::Bald, AcquisitionKind::PowerBald, AcquisitionKind::Jsd,
                   AcquisitionKind::VariationRatio})
        if (to_string(k) == s)
            return k;
    throw ValidationError("unknown acquisition function '" + std::string(s) +
                          "' (expected entropy|bald|power_bald|jsd|variation_ratio)");
}

struct VideoScore
{
    std::string video;
    double score = 0;
};

namespace detail
{

template<typename Row>
double entropy_unchecked(const Row& p)
{
    double h = 0;
    for (Eigen::Index c = 0; c < p.size(); ++c)
        if (p(c) > 0)
            h -= p(c) * std::log(p(c));
    return std::max(0.0, h);
}

} // namespace detail

/// Shannon entropy in nats; 0 log 0 is taken as 0.
template<typename Row>
    requires requires(const Row& r) { r.sum(); }
double predictive_entropy(const Row& p)
{
    if (std::abs(p.sum() - 1.0) > 1e-6)
        throw ValidationError("predictive_entropy: probability row does not sum to 1");
    return detail::entropy_unchecked(p);
}

inline double predictive_entropy(std::span<const double> p)
{
    return predictive_entropy(Eigen::Map<const Eigen::RowVectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
}

/// Per-frame acquisition scores from S Monte Carlo samples of one video.
/// PowerBald draws its Gumbel noise from a stream seeded per frame.
inline std::vector<double> frame_uncertainties(std::span<const FrameProbs> samples, const AcquisitionFn& fn,
                                               std::uint64_t seed = 0)
{
    fn.validate();
    if (samples.empty())
        throw ValidationError("frame_uncertainties: no samples");
    const FrameProbs mean = mean_probs(samples);
    const auto T = mean.probs.rows();
    const auto C = mean.probs.cols();
    const double S = static_cast<double>(samples.size());
    std::vector<double> u(static_cast<std::size_t>(T));

    for (Eigen::Index t = 0; t < T; ++t) {
        const auto pbar = mean.probs.row(t);
        double value = 0;
        switch (fn.kind) {
        case AcquisitionKind::Entropy:
            value = predictive_entropy(pbar);
            break;
        case AcquisitionKind::Bald:
        case AcquisitionKind::PowerBald: {
            double expected = 0;
            for (const auto& s : samples)
                expected += detail::entropy_unchecked(s.probs.row(t));
            value = predictive_entropy(pbar) - expected / S;
            if (fn.kind == AcquisitionKind::PowerBald) {
                Rng rng(derive_seed(seed, "power_bald", static_cast<std::uint64_t>(t)));
                const double e = std::uniform_real_distribution<double>(std::numeric_limits<double>::min(), 1.0)(rng);
                const double gumbel = -std::log(-std::log(e));
                value = std::log(std::max(value, 0.0) + kLogEps) + gumbel / fn.power_beta;
            }
            break;
        }
        case AcquisitionKind::Jsd: {
            const std::size_t n = samples.size();
            if (n < 2)
                break;
            double total = 0;
            Eigen::RowVectorXd mid(C);
            for (std::size_t a = 0; a < n; ++a)
                for (std::size_t b = a + 1; b < n; ++b) {
                    const auto pa = samples[a].probs.row(t);
                    const auto pb = samples[b].probs.row(t);
                    mid = 0.5 * (pa + pb);
                    total += detail::entropy_unchecked(mid) -
                             0.5 * (detail::entropy_unchecked(pa) + detail::entropy_unchecked(pb));
                }
            value = total / (0.5 * static_cast<double>(n * (n - 1)));
            break;
        }
        case AcquisitionKind::VariationRatio: {
            std::vector<int> votes(static_cast<std::size_t>(C), 0);
            for (const auto& s : samples) {
                Eigen::Index c = 0;
                s.probs.row(t).maxCoeff(&c);
                ++votes[static_cast<std::size_t>(c)];
            }
            value = 1.0 - *std::max_element(votes.begin(), votes.end()) / S;
            break;
        }
        }
        u[static_cast<std::size_t>(t)] = value;
    }
    return u;
}

/// Mean pooling of frame scores.
inline double video_score(std::span<const double> u)
{
    if (u.empty())
        throw ValidationError("video_score: empty frame scores");
    double s = 0;
    for (double x : u)
        s += x;
    return s / static_cast<double>(u.size());
}

/// The min(N_q, pool) highest-scoring ids; ties go to the smaller id.
/// Returned in selection order.
inline std::vector<std::string> select_videos(std::vector<VideoScore> scores, int count)
{
    require(count >= 1, "select_videos: N_q must be >= 1");
    if (scores.empty())
        throw ValidationError("select_videos: empty pool");
    std::sort(scores.begin(), scores.end(), [](const VideoScore& a, const VideoScore& b) {
        if (a.score != b.score)
            return a.score > b.score;
        return a.video < b.video;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < scores.size() && static_cast<int>(i) < count; ++i)
        out.push_back(scores[i].video);
    return out;
}

} // namespace bact
