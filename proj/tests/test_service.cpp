#include "bact/bact.hpp"
#include "bact/service.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <future>
#include <thread>

using namespace bact;
using namespace std::chrono_literals;

namespace
{

Dataset small_data()
{
    SyntheticConfig c;
    c.num_videos = 10;
    c.num_classes = 3;
    c.feature_dim = 4;
    c.mean_frames = 100;
    c.min_segment = 10;
    c.max_segment = 40;
    c.seed = 3;
    return generate_synthetic(c);
}

std::vector<ClipQuery> some_queries(const Dataset& ds)
{
    std::vector<ClipQuery> qs;
    for (int t : {5, 25, 45})
        qs.push_back({ds.train_ids[0], t, clip_interval(t, 10, ds.at(ds.train_ids[0]).length()), "random", std::nullopt});
    qs.push_back({ds.train_ids[1], 9, clip_interval(9, 10, ds.at(ds.train_ids[1]).length()), "random", std::nullopt});
    return qs;
}

int truth(const Dataset& ds, const std::string& video, int frame)
{
    return (*ds.at(video).gt_labels)[static_cast<std::size_t>(frame - 1)];
}

int expect_status(const std::function<void()>& f)
{
    try {
        f();
    } catch (const ServiceError& e) {
        return e.status();
    }
    return 200;
}

class Server
{
public:
    explicit Server(AnnotationHub& hub)
    {
        install_routes(server_, hub);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Server()
    {
        server_.stop();
        thread_.join();
    }
    httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expected)
{
    auto res = c.Post(path, body.dump(), "application/json");
    EXPECT_TRUE(res) << path;
    if (!res)
        return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
}

json get(httplib::Client& c, const std::string& path, int expected)
{
    auto res = c.Get(path);
    EXPECT_TRUE(res) << path;
    if (!res)
        return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
}

} // namespace

// ---------------------------------------------------------------- hub

TEST(Hub, RoundLifecycle)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("e", &ds);
    EXPECT_EQ(expect_status([&] { hub.create_session("e"); }), 409);
    EXPECT_EQ(expect_status([&] { hub.create_session("nope"); }), 404);

    const auto qs = some_queries(ds);
    auto fut = std::async(std::launch::async, [&] { return hub.await_round("e", 1, qs); });
    ASSERT_TRUE(hub.wait_for_round("e", 5s));
    const auto sid = hub.create_session("e");
    EXPECT_EQ(hub.create_session("e"), sid);

    const auto pend = hub.pending(sid);
    ASSERT_EQ(pend.size(), qs.size());
    for (std::size_t i = 1; i < pend.size(); ++i)
        EXPECT_LT(std::pair(pend[i - 1].query.video, pend[i - 1].query.center),
                  std::pair(pend[i].query.video, pend[i].query.center));
    for (const auto& r : pend) {
        EXPECT_EQ(r.heat_strip.size(), static_cast<std::size_t>(r.query.interval.hi - r.query.interval.lo + 1));
        EXPECT_EQ(r.center_features.size(), 4u);
    }

    EXPECT_EQ(expect_status([&] { hub.submit(sid, qs[0].video, qs[0].center, 3); }), 400);
    EXPECT_EQ(expect_status([&] { hub.submit(sid, qs[0].video, 2, 0); }), 404);
    EXPECT_EQ(expect_status([&] { hub.submit("bogus", qs[0].video, qs[0].center, 0); }), 404);
    EXPECT_EQ(hub.submit(sid, qs[2].video, qs[2].center, 1), 3u);
    EXPECT_EQ(expect_status([&] { hub.submit(sid, qs[2].video, qs[2].center, 2); }), 409);
    EXPECT_EQ(hub.progress(sid).answered, 1u);
    for (std::size_t i : {0u, 1u, 3u})
        hub.submit(sid, qs[i].video, qs[i].center, truth(ds, qs[i].video, qs[i].center));

    const auto answers = fut.get();
    ASSERT_EQ(answers.size(), qs.size());
    for (std::size_t i = 0; i < qs.size(); ++i) {
        EXPECT_EQ(answers[i].video, qs[i].video);
        EXPECT_EQ(answers[i].frame, qs[i].center);
        EXPECT_EQ(answers[i].annotator, "human");
    }
    EXPECT_EQ(answers[2].label, 1);
    EXPECT_TRUE(hub.progress(sid).closed);
    EXPECT_TRUE(hub.pending(sid).empty());
    EXPECT_EQ(expect_status([&] { hub.create_session("e"); }), 409);
    EXPECT_EQ(expect_status([&] { hub.cancel(sid); }), 409);
}

TEST(Hub, CancelReturnsAnsweredSubset)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("e", &ds);
    const auto qs = some_queries(ds);
    auto fut = std::async(std::launch::async, [&] { return hub.await_round("e", 2, qs); });
    ASSERT_TRUE(hub.wait_for_round("e", 5s));
    const auto sid = hub.create_session("e");
    hub.submit(sid, qs[1].video, qs[1].center, 0);
    EXPECT_EQ(hub.cancel(sid), 1u);
    const auto answers = fut.get();
    ASSERT_EQ(answers.size(), 1u);
    EXPECT_EQ(answers[0].frame, qs[1].center);
    EXPECT_EQ(expect_status([&] { hub.submit(sid, qs[0].video, qs[0].center, 0); }), 409);
}

TEST(Hub, ShutdownReleasesWaiter)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("e", &ds);
    const auto qs = some_queries(ds);
    auto fut = std::async(std::launch::async, [&] { return hub.await_round("e", 1, qs); });
    ASSERT_TRUE(hub.wait_for_round("e", 5s));
    hub.shutdown();
    EXPECT_TRUE(fut.get().empty());
}

TEST(Hub, HeatStripScaling)
{
    VideoRecord v;
    v.id = "v";
    v.features = FeatureMatrix(3, 2);
    v.features << 0, 1, 2, 3, 4, 5;
    const auto strip = render_heat_strip(v, {2, 3});
    ASSERT_EQ(strip.size(), 2u);
    EXPECT_EQ(strip[0][0], 0);
    EXPECT_EQ(strip[1][1], 255);
}

// ---------------------------------------------------------------- http

TEST(Http, ClassesAndErrors)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("e", &ds);
    Server srv(hub);
    auto c = srv.client();

    const auto classes = get(c, "/classes", 200);
    ASSERT_EQ(classes.at("classes").size(), ds.class_names.size());
    EXPECT_EQ(classes.at("classes")[0].at("id"), 0);
    EXPECT_EQ(classes.at("classes")[0].at("name"), ds.class_names[0]);

    EXPECT_EQ(post(c, "/sessions", {{"experiment", "nope"}}, 404).at("error"), "unknown_experiment");
    post(c, "/sessions", {{"experiment", "e"}}, 409);
    post(c, "/sessions", {{"wrong", 1}}, 400);
    get(c, "/sessions/none/pending", 404);
    post(c, "/sessions/none/labels", {{"video", "x"}, {"frame", 1}, {"label", 0}}, 404);
    get(c, "/experiments/nope/history", 404);
    auto bad = c.Post("/sessions", "{not json", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
}

TEST(Http, AnnotatesFullExperiment)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("exp", &ds);
    Server srv(hub);
    auto c = srv.client();

    LoopConfig cfg;
    cfg.rounds = 2;
    cfg.queries_per_round = 2;
    cfg.clips_per_video = 3;
    cfg.init_videos = 2;
    cfg.init_clips = 2;
    cfg.budget = 100;
    cfg.predictor.epochs = 3;
    cfg.predictor.mc_samples = 2;

    ExperimentHooks hooks;
    std::vector<RoundHistory> done;
    hooks.on_round = [&](const RoundHistory& h, const LoopState&, const ModelState&) {
        done.push_back(h);
        hub.set_history("exp", history_to_json(done));
    };
    HumanAnnotator annotator(hub, "exp");
    auto fut = std::async(std::launch::async, [&] { return run_experiment(ds, cfg, annotator, hooks); });

    std::vector<std::size_t> session_sizes;
    for (int round = 0; round <= cfg.rounds; ++round) {
        ASSERT_TRUE(hub.wait_for_round("exp", 60s)) << "round " << round;
        const auto created = post(c, "/sessions", {{"experiment", "exp"}}, 200);
        const std::string sid = created.at("session");
        EXPECT_EQ(created.at("round"), round);
        EXPECT_EQ(post(c, "/sessions", {{"experiment", "exp"}}, 200).at("session"), sid);

        const auto pend = get(c, "/sessions/" + sid + "/pending", 200);
        const auto& items = pend.at("pending");
        EXPECT_EQ(pend.at("class_names").size(), ds.class_names.size());
        session_sizes.push_back(items.size());
        ASSERT_FALSE(items.empty());
        for (const auto& it : items) {
            for (const char* k : {"label", "gt", "gt_label", "truth"})
                EXPECT_FALSE(it.contains(k)) << k;
            EXPECT_FALSE(it.at("context").contains("label"));
            EXPECT_EQ(it.at("request_id"), it.at("video").get<std::string>() + "@" + std::to_string(it.at("frame").get<int>()));
            EXPECT_EQ(it.at("context").at("center_features").size(), 4u);
        }
        const auto& first = items[0];
        post(c, "/sessions/" + sid + "/labels", {{"video", first.at("video")}, {"frame", first.at("frame")}, {"label", 99}}, 400);

        std::size_t remaining = items.size();
        for (std::size_t i = 0; i < items.size(); ++i) {
            const auto& it = items[i];
            const std::string video = it.at("video");
            const int frame = it.at("frame");
            const auto r = post(c, "/sessions/" + sid + "/labels",
                                {{"video", video}, {"frame", frame}, {"label", truth(ds, video, frame)}}, 200);
            EXPECT_EQ(r.at("remaining"), --remaining);
            if (i == 0 && items.size() > 1) {
                const auto dup = post(c, "/sessions/" + sid + "/labels",
                                      {{"video", video}, {"frame", frame}, {"label", truth(ds, video, frame)}}, 409);
                EXPECT_EQ(dup.at("error"), "duplicate");
                EXPECT_EQ(get(c, "/sessions/" + sid + "/pending", 200).at("answered"), 1);
            }
        }
        // The round is over once the experiment picks up the answers.
        while (!hub.progress(sid).closed)
            std::this_thread::sleep_for(5ms);
        post(c, "/sessions/" + sid + "/labels", {{"video", first.at("video")}, {"frame", first.at("frame")}, {"label", 0}}, 409);
        EXPECT_TRUE(get(c, "/sessions/" + sid + "/pending", 200).at("pending").empty());
    }

    const auto history = fut.get();
    ASSERT_EQ(history.size(), 2u);
    EXPECT_EQ(history[0].labeled_before, session_sizes[0]);
    for (std::size_t r = 0; r < history.size(); ++r) {
        EXPECT_EQ(history[r].labeled_after - history[r].labeled_before, session_sizes[r + 1]);
        for (int label : history[r].acquired_labels)
            EXPECT_GE(label, 0);
    }
    const auto h = get(c, "/experiments/exp/history", 200);
    EXPECT_EQ(h.at("rounds").size(), 2u);
    post(c, "/sessions", {{"experiment", "exp"}}, 409);
}

TEST(Http, CancelChargesOnlyAnsweredLabels)
{
    const auto ds = small_data();
    AnnotationHub hub(ds.class_names);
    hub.register_experiment("exp", &ds);
    Server srv(hub);
    auto c = srv.client();

    LoopConfig cfg;
    cfg.rounds = 1;
    cfg.queries_per_round = 2;
    cfg.clips_per_video = 3;
    cfg.init_videos = 2;
    cfg.init_clips = 2;
    cfg.budget = 100;
    cfg.predictor.epochs = 3;
    cfg.predictor.mc_samples = 2;
    HumanAnnotator annotator(hub, "exp");
    auto fut = std::async(std::launch::async, [&] { return run_experiment(ds, cfg, annotator); });

    for (int round = 0; round <= 1; ++round) {
        ASSERT_TRUE(hub.wait_for_round("exp", 60s));
        const std::string sid = post(c, "/sessions", {{"experiment", "exp"}}, 200).at("session");
        const auto items = get(c, "/sessions/" + sid + "/pending", 200).at("pending");
        const std::size_t answer = round == 0 ? items.size() : 2;
        for (std::size_t i = 0; i < answer; ++i) {
            const std::string video = items[i].at("video");
            const int frame = items[i].at("frame");
            post(c, "/sessions/" + sid + "/labels", {{"video", video}, {"frame", frame}, {"label", truth(ds, video, frame)}}, 200);
        }
        if (round == 1) {
            EXPECT_EQ(post(c, "/sessions/" + sid + "/cancel", json::object(), 200).at("answered"), 2);
        }
    }
    const auto history = fut.get();
    ASSERT_EQ(history.size(), 1u);
    EXPECT_EQ(history[0].labeled_after - history[0].labeled_before, 2u);
    EXPECT_EQ(std::count(history[0].acquired_labels.begin(), history[0].acquired_labels.end(), -1),
              static_cast<long>(history[0].queries.size()) - 2);
}
