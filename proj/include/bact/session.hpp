#pragma once

#include "bact/annotator.hpp"
#include "bact/dataset.hpp"

#include <json.hpp>

#include <algorithm>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bact
{

/// An error that maps onto an HTTP status.
class ServiceError : public Error
{
public:
    ServiceError(int status, std::string code, const std::string& detail)
        : Error(detail), status_(status), code_(std::move(code))
    {
    }
    int status() const { return status_; }
    const std::string& code() const { return code_; }

private:
    int status_;
    std::string code_;
};

/// What an annotator sees for one query. The heat strip holds the clip's
/// feature rows min-max scaled to 0..255; no labels are ever attached.
struct AnnotationRequest
{
    std::string session;
    ClipQuery query;
    std::vector<std::vector<std::uint8_t>> heat_strip;
    std::vector<float> center_features;
};

inline std::vector<std::vector<std::uint8_t>> render_heat_strip(const VideoRecord& v, Interval clip)
{
    const int lo = std::clamp(clip.lo, 1, v.length());
    const int hi = std::clamp(clip.hi, lo, v.length());
    const auto block = v.features.middleRows(lo - 1, hi - lo + 1);
    const float mn = block.minCoeff();
    const float mx = block.maxCoeff();
    const float scale = mx > mn ? 255.0f / (mx - mn) : 0.0f;
    std::vector<std::vector<std::uint8_t>> out(static_cast<std::size_t>(block.rows()));
    for (Eigen::Index r = 0; r < block.rows(); ++r)
        for (Eigen::Index c = 0; c < block.cols(); ++c)
            out[static_cast<std::size_t>(r)].push_back(
                static_cast<std::uint8_t>(std::lround((block(r, c) - mn) * scale)));
    return out;
}

/// Meeting point between running experiments and human annotators. An
/// experiment publishes a round's queries and blocks; clients open a
/// session on it, fetch pending requests and submit labels. The round
/// resumes when every query is answered or the session is cancelled.
class AnnotationHub
{
public:
    explicit AnnotationHub(std::vector<std::string> class_names) : class_names_(std::move(class_names)) {}

    const std::vector<std::string>& class_names() const { return class_names_; }

    /// The dataset is used only to render display context.
    void register_experiment(const std::string& experiment, const Dataset* ds)
    {
        std::lock_guard lock(mu_);
        experiments_[experiment].data = ds;
    }

    std::vector<std::string> experiments() const
    {
        std::lock_guard lock(mu_);
        std::vector<std::string> out;
        for (const auto& [id, _] : experiments_)
            out.push_back(id);
        return out;
    }

    // Experiment side --------------------------------------------------

    /// Publishes `queries` and waits for answers. Returns the answered
    /// subset in query order.
    std::vector<AnnotationResponse> await_round(const std::string& experiment, int round,
                                                const std::vector<ClipQuery>& queries)
    {
        std::unique_lock lock(mu_);
        if (queries.empty())
            return {};
        auto& exp = experiments_[experiment];
        const std::string id = session_id(experiment, round);
        if (sessions_.contains(id))
            throw Error("round " + std::to_string(round) + " of '" + experiment + "' was already published");
        Session s;
        s.experiment = experiment;
        s.round = round;
        s.queries = queries;
        std::sort(s.queries.begin(), s.queries.end(), [](const ClipQuery& a, const ClipQuery& b) {
            return std::pair(a.video, a.center) < std::pair(b.video, b.center);
        });
        for (std::size_t i = 1; i < s.queries.size(); ++i)
            if (s.queries[i].video == s.queries[i - 1].video && s.queries[i].center == s.queries[i - 1].center)
                throw Error("duplicate query for frame " + std::to_string(s.queries[i].center) + " of '" +
                            s.queries[i].video + "'");
        sessions_.emplace(id, std::move(s));
        exp.outstanding = id;
        cv_.notify_all();

        cv_.wait(lock, [&] {
            const auto& cur = sessions_.at(id);
            return stopping_ || cur.cancelled || cur.answers.size() == cur.queries.size();
        });
        auto& done = sessions_.at(id);
        done.closed = true;
        exp.outstanding.reset();
        std::vector<AnnotationResponse> out;
        for (const auto& q : queries) {
            const auto it = done.answers.find({q.video, q.center});
            if (it != done.answers.end())
                out.push_back(it->second);
        }
        cv_.notify_all();
        return out;
    }

    void set_history(const std::string& experiment, nlohmann::json history)
    {
        std::lock_guard lock(mu_);
        experiments_[experiment].history = std::move(history);
    }

    /// Wakes every waiting experiment as if its session had been cancelled.
    void shutdown()
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
        cv_.notify_all();
    }

    /// Blocks until `experiment` has an open round or `timeout` elapses.
    bool wait_for_round(const std::string& experiment, std::chrono::milliseconds timeout)
    {
        std::unique_lock lock(mu_);
        return cv_.wait_for(lock, timeout, [&] {
            const auto it = experiments_.find(experiment);
            return it != experiments_.end() && it->second.outstanding.has_value();
        });
    }

    // Client side ------------------------------------------------------

    /// Idempotent: every call during one round returns the same id.
    std::string create_session(const std::string& experiment)
    {
        std::lock_guard lock(mu_);
        const auto it = experiments_.find(experiment);
        if (it == experiments_.end())
            throw ServiceError(404, "unknown_experiment", "no experiment '" + experiment + "'");
        if (!it->second.outstanding)
            throw ServiceError(409, "no outstanding queries", "experiment '" + experiment + "' is not waiting for labels");
        auto& s = sessions_.at(*it->second.outstanding);
        s.opened = true;
        return *it->second.outstanding;
    }

    /// Unanswered requests ordered by (video, frame).
    std::vector<AnnotationRequest> pending(const std::string& session) const
    {
        std::lock_guard lock(mu_);
        const Session& s = find_session(session);
        std::vector<AnnotationRequest> out;
        if (s.closed)
            return out;
        const Dataset* ds = experiments_.at(s.experiment).data;
        for (const auto& q : s.queries) {
            if (s.answers.contains({q.video, q.center}))
                continue;
            AnnotationRequest r{session, q, {}, {}};
            if (ds) {
                if (const auto* v = ds->find(q.video)) {
                    r.heat_strip = render_heat_strip(*v, q.interval);
                    const auto row = v->features.row(q.center - 1);
                    r.center_features.assign(row.data(), row.data() + row.size());
                }
            }
            out.push_back(std::move(r));
        }
        return out;
    }

    struct Progress
    {
        std::string experiment;
        int round = 0;
        std::size_t total = 0;
        std::size_t answered = 0;
        bool closed = false;
    };

    Progress progress(const std::string& session) const
    {
        std::lock_guard lock(mu_);
        const Session& s = find_session(session);
        return {s.experiment, s.round, s.queries.size(), s.answers.size(), s.closed};
    }

    /// Records one label. Returns the number of requests still pending.
    std::size_t submit(const std::string& session, const std::string& video, int frame, int label,
                       const std::string& annotator = "human")
    {
        std::lock_guard lock(mu_);
        Session& s = find_session(session);
        if (label < 0 || label >= static_cast<int>(class_names_.size()))
            throw ServiceError(400, "invalid_class", "class id " + std::to_string(label) + " is not in 0.." +
                                                         std::to_string(class_names_.size() - 1));
        const std::pair key{video, frame};
        const bool requested = std::any_of(s.queries.begin(), s.queries.end(), [&](const ClipQuery& q) {
            return q.video == video && q.center == frame;
        });
        if (!requested)
            throw ServiceError(404, "unknown_request",
                               "frame " + std::to_string(frame) + " of '" + video + "' was not requested");
        if (s.answers.contains(key))
            throw ServiceError(409, "duplicate", "frame " + std::to_string(frame) + " of '" + video + "' is already labeled");
        if (s.closed || s.cancelled)
            throw ServiceError(409, "session_closed", "session '" + session + "' no longer accepts labels");
        s.answers.emplace(key, AnnotationResponse{session, video, frame, label, annotator, now_ms()});
        cv_.notify_all();
        return s.queries.size() - s.answers.size();
    }

    /// Drops the unanswered requests; answered ones are still charged.
    std::size_t cancel(const std::string& session)
    {
        std::lock_guard lock(mu_);
        Session& s = find_session(session);
        if (s.closed)
            throw ServiceError(409, "session_closed", "session '" + session + "' is already closed");
        s.cancelled = true;
        cv_.notify_all();
        return s.answers.size();
    }

    std::optional<nlohmann::json> history(const std::string& experiment) const
    {
        std::lock_guard lock(mu_);
        const auto it = experiments_.find(experiment);
        if (it == experiments_.end())
            return std::nullopt;
        return it->second.history;
    }

private:
    struct Session
    {
        std::string experiment;
        int round = 0;
        std::vector<ClipQuery> queries; // sorted by (video, frame)
        std::map<std::pair<std::string, int>, AnnotationResponse> answers;
        bool opened = false;
        bool cancelled = false;
        bool closed = false;
    };

    struct Experiment
    {
        const Dataset* data = nullptr;
        std::optional<std::string> outstanding;
        nlohmann::json history = nlohmann::json::object();
    };

    static std::string session_id(const std::string& experiment, int round)
    {
        return experiment + "-r" + std::to_string(round);
    }

    const Session& find_session(const std::string& id) const
    {
        const auto it = sessions_.find(id);
        if (it == sessions_.end() || !it->second.opened)
            throw ServiceError(404, "unknown_session", "no session '" + id + "'");
        return it->second;
    }

    Session& find_session(const std::string& id)
    {
        return const_cast<Session&>(std::as_const(*this).find_session(id));
    }

    std::vector<std::string> class_names_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<std::string, Experiment> experiments_;
    std::map<std::string, Session> sessions_;
    bool stopping_ = false;
};

/// Annotator that routes every round through an AnnotationHub.
class HumanAnnotator : public Annotator
{
public:
    HumanAnnotator(AnnotationHub& hub, std::string experiment) : hub_(hub), experiment_(std::move(experiment)) {}

    std::vector<AnnotationResponse> annotate(const std::vector<ClipQuery>& queries, int round) override
    {
        return hub_.await_round(experiment_, round, queries);
    }

private:
    AnnotationHub& hub_;
    std::string experiment_;
};

} // namespace bact
