#pragma once

#include "bact/acquisition.hpp"
#include "bact/dataset.hpp"

#include <chrono>
#include <string>
#include <vector>

namespace bact
{

struct AnnotationResponse
{
    std::string session;
    std::string video;
    int frame = 1;
    int label = 0;
    std::string annotator; // "oracle" | "human"
    std::int64_t timestamp_ms = 0;
};

inline std::int64_t now_ms()
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
        .count();
}

/// Source of labels for a round's queries. Implementations may answer a
/// subset (e.g. a cancelled human session) and throw to abort the round.
class Annotator
{
public:
    virtual ~Annotator() = default;
    virtual std::vector<AnnotationResponse> annotate(const std::vector<ClipQuery>& queries, int round) = 0;
};

/// Ground-truth label at the query center. With probability `noise` the
/// answer is replaced by a uniformly drawn different class; the draw is
/// seeded by (seed, video, frame) so repeated queries get the same answer.
inline AnnotationResponse oracle_annotate(const Dataset& ds, const ClipQuery& q, double noise = 0.0,
                                          std::uint64_t seed = 0)
{
    require(noise >= 0.0 && noise <= 1.0, "oracle noise must lie in [0,1]");
    const auto& v = ds.at(q.video);
    if (!v.gt_labels)
        throw Error("oracle: video '" + v.id + "' has no ground truth");
    if (q.center < 1 || q.center > v.length())
        throw Error("oracle: frame " + std::to_string(q.center) + " outside video '" + v.id + "'");
    int label = (*v.gt_labels)[static_cast<std::size_t>(q.center - 1)];
    const int C = ds.num_classes();
    if (noise > 0.0 && C >= 2) {
        Rng rng(derive_seed(seed, "oracle", q.video, static_cast<std::uint64_t>(q.center)));
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < noise) {
            const int shift = std::uniform_int_distribution<int>(1, C - 1)(rng);
            label = (label + shift) % C;
        }
    }
    return {"", q.video, q.center, label, "oracle", now_ms()};
}

class OracleAnnotator : public Annotator
{
public:
    explicit OracleAnnotator(const Dataset& ds, double noise = 0.0, std::uint64_t seed = 0)
        : ds_(ds), noise_(noise), seed_(seed)
    {
    }

    std::vector<AnnotationResponse> annotate(const std::vector<ClipQuery>& queries, int) override
    {
        std::vector<AnnotationResponse> out;
        out.reserve(queries.size());
        for (const auto& q : queries)
            out.push_back(oracle_annotate(ds_, q, noise_, seed_));
        return out;
    }

private:
    const Dataset& ds_;
    double noise_;
    std::uint64_t seed_;
};

} // namespace bact
