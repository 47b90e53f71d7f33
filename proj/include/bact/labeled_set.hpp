#pragma once

#include "bact/common.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bact
{

/// One acquired label. `context` is the clip the frame was queried with;
/// when absent the whole video is available as unlabeled context.
struct LabeledFrame
{
    std::string video;
    int frame = 1; // 1-based
    int label = 0;
    std::optional<Interval> context;

    friend bool operator==(const LabeledFrame&, const LabeledFrame&) = default;
};

/// The set of (video, frame) pairs with acquired labels. Insertion is
/// exactly-once per pair; iteration order is (video id, frame).
class LabeledIndexSet
{
public:
    using Key = std::pair<std::string, int>;

    bool contains(const std::string& video, int frame) const { return items_.contains({video, frame}); }

    /// Throws if the pair is already present.
    void insert(LabeledFrame f)
    {
        Key key{f.video, f.frame};
        if (items_.contains(key))
            throw Error("frame " + std::to_string(f.frame) + " of '" + f.video + "' is already labeled");
        items_.emplace(std::move(key), std::move(f));
    }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    std::size_t count_video(const std::string& video) const
    {
        std::size_t n = 0;
        for (auto it = items_.lower_bound({video, 0}); it != items_.end() && it->first.first == video; ++it)
            ++n;
        return n;
    }

    std::vector<int> frames_of(const std::string& video) const
    {
        std::vector<int> out;
        for (auto it = items_.lower_bound({video, 0}); it != items_.end() && it->first.first == video; ++it)
            out.push_back(it->first.second);
        return out;
    }

    std::vector<LabeledFrame> entries() const
    {
        std::vector<LabeledFrame> out;
        out.reserve(items_.size());
        for (const auto& [k, v] : items_)
            out.push_back(v);
        return out;
    }

    const LabeledFrame* find(const std::string& video, int frame) const
    {
        const auto it = items_.find({video, frame});
        return it == items_.end() ? nullptr : &it->second;
    }

    friend bool operator==(const LabeledIndexSet&, const LabeledIndexSet&) = default;

private:
    std::map<Key, LabeledFrame> items_;
};

} // namespace bact
