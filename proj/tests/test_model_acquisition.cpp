#include "bact/acquisition.hpp"
#include "bact/labeled_set.hpp"
#include "bact/metrics.hpp"
#include "bact/predictor.hpp"
#include "bact/uncertainty.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

using namespace bact;

namespace
{

ProbMatrix random_stochastic(std::mt19937_64& rng, int T, int C)
{
    std::gamma_distribution<double> g(1.0, 1.0);
    ProbMatrix p(T, C);
    for (int t = 0; t < T; ++t) {
        for (int c = 0; c < C; ++c)
            p(t, c) = g(rng) + 1e-9;
        p.row(t) /= p.row(t).sum();
    }
    return p;
}

FrameProbs probs_from(std::initializer_list<std::initializer_list<double>> rows, std::string id = "v")
{
    const auto T = static_cast<Eigen::Index>(rows.size());
    const auto C = static_cast<Eigen::Index>(rows.begin()->size());
    FrameProbs f{std::move(id), ProbMatrix(T, C)};
    Eigen::Index t = 0;
    for (const auto& r : rows) {
        Eigen::Index c = 0;
        for (double x : r)
            f.probs(t, c++) = x;
        ++t;
    }
    return f;
}

Dataset separable_dataset()
{
    SyntheticConfig c;
    c.num_videos = 6;
    c.num_classes = 3;
    c.feature_dim = 4;
    c.mean_frames = 80;
    c.min_segment = 10;
    c.max_segment = 30;
    c.noise = 0;
    c.transition_width = 0;
    c.separation = 5;
    c.seed = 4;
    return generate_synthetic(c);
}

LabeledIndexSet label_every(const Dataset& ds, int stride)
{
    LabeledIndexSet s;
    for (const auto& id : ds.train_ids) {
        const auto& v = ds.at(id);
        for (int t = 1; t <= v.length(); t += stride)
            s.insert({id, t, (*v.gt_labels)[static_cast<std::size_t>(t - 1)], std::nullopt});
    }
    return s;
}

} // namespace

// ---------------------------------------------------------------- predictor

TEST(Predictor, ZeroWeightsGiveUniformRowsAndLogCLoss)
{
    const auto ds = separable_dataset();
    const ModelState m = ModelState::zeros({}, 4, 3);
    const auto p = predict_probs(m, ds.videos.front());
    EXPECT_TRUE((p.probs.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);

    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, m.input_dim() + 1);
    X.col(m.input_dim()).setOnes();
    const std::vector<int> y = {0, 1, 2, 0, 1};
    EXPECT_NEAR(softmax_loss_and_gradient(m.weights, X, y, 0.0).loss, std::log(3.0), 1e-12);
}

TEST(Predictor, AnalyticGradientMatchesFiniteDifferences)
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const int C = 3, D = 4, rows = 5;
        Eigen::MatrixXd W(D + 1, C), X(rows, D + 1);
        for (Eigen::Index i = 0; i < W.size(); ++i)
            W.data()[i] = 0.5 * n(rng);
        for (Eigen::Index i = 0; i < X.size(); ++i)
            X.data()[i] = n(rng);
        X.col(D).setOnes();
        std::vector<int> y(rows);
        for (auto& v : y)
            v = static_cast<int>(rng() % C);
        const double wd = 1e-3;
        const auto g = softmax_loss_and_gradient(W, X, y, wd).gradient;
        double worst = 0;
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            const double h = 1e-6;
            Eigen::MatrixXd a = W, b = W;
            a.data()[i] += h;
            b.data()[i] -= h;
            const double fd =
                (softmax_loss_and_gradient(a, X, y, wd).loss - softmax_loss_and_gradient(b, X, y, wd).loss) / (2 * h);
            const double an = g.data()[i];
            worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8}));
        }
        EXPECT_LT(worst, 1e-5) << "trial " << trial;
    }
}

TEST(Predictor, LearnsSeparableSynthetic)
{
    const auto ds = separable_dataset();
    PredictorConfig cfg;
    cfg.seed = 1;
    const auto m = train(ds, label_every(ds, 3), cfg);
    ASSERT_FALSE(m.loss_trace.empty());
    for (double l : m.loss_trace)
        EXPECT_TRUE(std::isfinite(l));
    EXPECT_LE(m.loss_trace.back(), m.loss_trace.front());
    EXPECT_LT(m.loss_trace.back(), 0.1) << "first " << m.loss_trace.front();
    for (const auto& v : ds.videos)
        EXPECT_GE(frame_accuracy(predict_probs(m, v).argmax(), *v.gt_labels), 95.0) << v.id;
}

TEST(Predictor, FitsSingleLabel)
{
    const auto ds = separable_dataset();
    LabeledIndexSet s;
    s.insert({ds.train_ids[0], 1, 2, std::nullopt});
    s.insert({ds.train_ids[0], 5, 2, std::nullopt});
    PredictorConfig cfg;
    cfg.learning_rate = 0.5;
    cfg.epochs = 300;
    const auto m = train(ds, s, cfg);
    EXPECT_LT(m.loss_trace.back(), 0.05);
    const auto pred = predict_probs(m, ds.at(ds.train_ids[0])).argmax();
    EXPECT_EQ(pred[0], 2);
    EXPECT_EQ(pred[4], 2);
}

TEST(Predictor, TrainErrors)
{
    const auto ds = separable_dataset();
    EXPECT_THROW(train(ds, {}, {}), ValidationError);
    LabeledIndexSet s;
    s.insert({ds.train_ids[0], 100000, 0, std::nullopt});
    EXPECT_THROW(train(ds, s, {}), ValidationError);
}

TEST(Predictor, DeterministicGivenSeed)
{
    const auto ds = separable_dataset();
    PredictorConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 9;
    const auto a = train(ds, label_every(ds, 7), cfg);
    const auto b = train(ds, label_every(ds, 7), cfg);
    EXPECT_EQ(a.weights, b.weights);
    EXPECT_EQ(predict_probs(a, ds.videos[0]).probs, predict_probs(a, ds.videos[0]).probs);
}

TEST(Predictor, DimensionMismatchRejected)
{
    const auto ds = separable_dataset();
    const ModelState m = ModelState::zeros({}, 7, 3);
    EXPECT_THROW(predict_probs(m, ds.videos[0]), ValidationError);
    EXPECT_THROW(mc_sample(m, ds.videos[0], 2, 0), ValidationError);
}

TEST(Predictor, McSamplingBehaviour)
{
    const auto ds = separable_dataset();
    PredictorConfig cfg;
    cfg.epochs = 10;
    auto m = train(ds, label_every(ds, 5), cfg);
    const auto& v = ds.videos[0];

    const auto a = mc_sample(m, v, 4, 3), b = mc_sample(m, v, 4, 3);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].probs, b[i].probs);
    EXPECT_NE(a[0].probs, a[1].probs);
    for (const auto& s : a)
        EXPECT_LT((s.probs.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);

    m.config.dropout = 0;
    const auto det = predict_probs(m, v);
    for (const auto& s : mc_sample(m, v, 3, 5))
        EXPECT_EQ(s.probs, det.probs);
}

TEST(Predictor, McMeanIsSelfConsistent)
{
    const auto ds = separable_dataset();
    PredictorConfig cfg;
    cfg.epochs = 10;
    const auto m = train(ds, label_every(ds, 5), cfg);
    VideoRecord v = ds.videos[0];
    v.features.conservativeResize(40, Eigen::NoChange);
    const int S = 1000;
    const auto a = mc_sample(m, v, S, 1), b = mc_sample(m, v, S, 2);
    const auto ma = mean_probs(a), mb = mean_probs(b);
    ProbMatrix var = ProbMatrix::Zero(ma.probs.rows(), ma.probs.cols());
    for (const auto& s : a)
        var.array() += (s.probs - ma.probs).array().square();
    var /= S - 1;
    const ProbMatrix se = (2.0 * var / S).array().sqrt();
    // Entries of one row move together, so count frames rather than entries.
    int outside = 0;
    for (Eigen::Index t = 0; t < se.rows(); ++t)
        outside += ((ma.probs.row(t) - mb.probs.row(t)).array().abs() > 3 * se.row(t).array() + 1e-12).any();
    EXPECT_LE(outside, static_cast<int>(0.05 * static_cast<double>(se.rows())) + 1);
}

TEST(Predictor, MeanProbs)
{
    const auto a = probs_from({{0.2, 0.8}}), b = probs_from({{0.4, 0.6}});
    const std::vector<FrameProbs> both = {a, b};
    const auto m = mean_probs(both);
    EXPECT_NEAR(m.probs(0, 0), 0.3, 1e-15);
    EXPECT_NEAR(m.probs(0, 1), 0.7, 1e-15);
    EXPECT_EQ(mean_probs(std::vector<FrameProbs>{a}).probs, a.probs);
    EXPECT_THROW(mean_probs(std::vector<FrameProbs>{}), ValidationError);
    EXPECT_THROW(mean_probs(std::vector<FrameProbs>{a, probs_from({{0.5, 0.5}, {0.5, 0.5}})}), ValidationError);

    std::mt19937_64 rng(3);
    std::vector<FrameProbs> many;
    for (int i = 0; i < 50; ++i)
        many.push_back({"v", random_stochastic(rng, 6, 4)});
    const auto mm = mean_probs(many);
    for (int t = 0; t < 6; ++t)
        for (int c = 0; c < 4; ++c) {
            double s = 0;
            for (const auto& f : many)
                s += f.probs(t, c);
            EXPECT_NEAR(mm.probs(t, c), s / 50, 1e-12);
        }
}

TEST(Predictor, CheckpointRoundTrip)
{
    const auto ds = separable_dataset();
    PredictorConfig cfg;
    cfg.epochs = 3;
    const auto m = train(ds, label_every(ds, 9), cfg);
    const auto path = std::filesystem::temp_directory_path() / "bact_ckpt_test.bin";
    save_checkpoint(m, path);
    const auto back = load_checkpoint(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.weights, m.weights);
    EXPECT_EQ(back.config.context_radius, m.config.context_radius);
    EXPECT_EQ(predict_probs(back, ds.videos[0]).probs, predict_probs(m, ds.videos[0]).probs);
}

// ---------------------------------------------------------------- uncertainty

TEST(Entropy, Examples)
{
    EXPECT_NEAR(predictive_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-12);
    EXPECT_EQ(predictive_entropy(std::vector<double>{0, 1, 0}), 0.0);
    const double h = -(0.5 * std::log(0.5) + 0.3 * std::log(0.3) + 0.2 * std::log(0.2));
    EXPECT_NEAR(predictive_entropy(std::vector<double>{0.5, 0.3, 0.2}), h, 1e-12);
    EXPECT_NEAR(h, 1.0297, 1e-4);
    EXPECT_THROW(predictive_entropy(std::vector<double>{0.5, 0.6}), ValidationError);
}

TEST(Entropy, BoundsOnRandomRows)
{
    std::mt19937_64 rng(2);
    const auto p = random_stochastic(rng, 200, 5);
    for (int t = 0; t < 200; ++t) {
        const double h = predictive_entropy(p.row(t));
        EXPECT_GE(h, 0);
        EXPECT_LE(h, std::log(5.0) + 1e-12);
    }
}

TEST(Acquisition, IdenticalSamplesHaveNoDisagreement)
{
    std::mt19937_64 rng(8);
    const FrameProbs s{"v", random_stochastic(rng, 30, 4)};
    const std::vector<FrameProbs> same(5, s);
    for (auto k : {AcquisitionKind::Bald, AcquisitionKind::Jsd, AcquisitionKind::VariationRatio})
        for (double u : frame_uncertainties(same, {k}))
            EXPECT_NEAR(u, 0.0, 1e-9) << to_string(k);
}

TEST(Acquisition, TwoOpposedSamples)
{
    const std::vector<FrameProbs> s = {probs_from({{1, 0}}), probs_from({{0, 1}})};
    EXPECT_NEAR(frame_uncertainties(s, {AcquisitionKind::Bald})[0], std::log(2.0), 1e-12);
    EXPECT_NEAR(frame_uncertainties(s, {AcquisitionKind::VariationRatio})[0], 0.5, 1e-12);
    EXPECT_NEAR(frame_uncertainties(s, {AcquisitionKind::Jsd})[0], std::log(2.0), 1e-12);
}

TEST(Acquisition, BaldAndJsdProperties)
{
    std::mt19937_64 rng(12);
    std::vector<FrameProbs> s;
    for (int i = 0; i < 6; ++i)
        s.push_back({"v", random_stochastic(rng, 40, 3)});
    const auto bald = frame_uncertainties(s, {AcquisitionKind::Bald});
    const auto ent = frame_uncertainties(s, {AcquisitionKind::Entropy});
    const auto jsd = frame_uncertainties(s, {AcquisitionKind::Jsd});
    auto rev = s;
    std::reverse(rev.begin(), rev.end());
    const auto jsd_rev = frame_uncertainties(rev, {AcquisitionKind::Jsd});
    const auto bald_rev = frame_uncertainties(rev, {AcquisitionKind::Bald});
    for (std::size_t t = 0; t < bald.size(); ++t) {
        EXPECT_GE(bald[t], -1e-9);
        EXPECT_LE(bald[t], ent[t] + 1e-12);
        EXPECT_NEAR(jsd[t], jsd_rev[t], 1e-12);
        EXPECT_NEAR(bald[t], bald_rev[t], 1e-12);
    }
}

TEST(Acquisition, PowerBaldIsSeeded)
{
    std::mt19937_64 rng(13);
    std::vector<FrameProbs> s;
    for (int i = 0; i < 4; ++i)
        s.push_back({"v", random_stochastic(rng, 20, 3)});
    const AcquisitionFn fn{AcquisitionKind::PowerBald, 1.0};
    EXPECT_EQ(frame_uncertainties(s, fn, 5), frame_uncertainties(s, fn, 5));
    EXPECT_NE(frame_uncertainties(s, fn, 5), frame_uncertainties(s, fn, 6));
    EXPECT_THROW(frame_uncertainties(s, {AcquisitionKind::PowerBald, 0.0}), ValidationError);
    EXPECT_THROW(frame_uncertainties(std::vector<FrameProbs>{}, {}), ValidationError);
}

TEST(Acquisition, NamesRoundTrip)
{
    for (auto k : {AcquisitionKind::Entropy, AcquisitionKind::Bald, AcquisitionKind::PowerBald, AcquisitionKind::Jsd,
                   AcquisitionKind::VariationRatio})
        EXPECT_EQ(parse_acquisition(to_string(k)), k);
    EXPECT_THROW(parse_acquisition("nope"), ValidationError);
}

TEST(VideoScore, MeanPooling)
{
    EXPECT_DOUBLE_EQ(video_score(std::vector<double>(17, 0.5)), 0.5);
    EXPECT_DOUBLE_EQ(video_score(std::vector<double>{0, 1}), 0.5);
    EXPECT_THROW(video_score(std::vector<double>{}), ValidationError);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0, 3);
    std::vector<double> x(1000);
    for (auto& v : x)
        v = u(rng);
    EXPECT_NEAR(video_score(x), std::accumulate(x.begin(), x.end(), 0.0) / 1000.0, 1e-12);
}

TEST(SelectVideos, ExamplesAndSortOracle)
{
    EXPECT_EQ(select_videos({{"a", 0.9}, {"b", 0.1}}, 1), std::vector<std::string>{"a"});
    EXPECT_EQ(select_videos({{"a", 0.9}, {"b", 0.1}}, 5).size(), 2u);
    EXPECT_EQ(select_videos({{"b", 0.5}, {"a", 0.5}}, 1), std::vector<std::string>{"a"});
    EXPECT_THROW(select_videos({}, 1), ValidationError);

    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<VideoScore> scores, shifted;
    for (int i = 0; i < 50; ++i) {
        scores.push_back({"v" + std::to_string(i), u(rng)});
        shifted.push_back({scores.back().video, std::exp(3 * scores.back().score) + 7});
    }
    auto sorted = scores;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.score > b.score; });
    std::vector<std::string> expect;
    for (int i = 0; i < 5; ++i)
        expect.push_back(sorted[static_cast<std::size_t>(i)].video);
    EXPECT_EQ(select_videos(scores, 5), expect);
    EXPECT_EQ(select_videos(shifted, 5), expect);
}

// ---------------------------------------------------------------- acquisition

TEST(Boundaries, Examples)
{
    EXPECT_EQ(detect_boundaries(Labels{0, 0, 1, 1, 1, 2}), (std::vector<int>{3, 6}));
    EXPECT_TRUE(detect_boundaries(Labels(9, 4)).empty());
    EXPECT_EQ(detect_boundaries(Labels{0, 1, 0, 1}), (std::vector<int>{2, 3, 4}));
    EXPECT_THROW(detect_boundaries(Labels{}), Error);
}

TEST(Boundaries, Windows)
{
    EXPECT_EQ(boundary_window(50, 10, 100), (Interval{40, 60}));
    EXPECT_EQ(boundary_window(3, 10, 100), (Interval{1, 13}));
    EXPECT_EQ(boundary_window(98, 10, 100), (Interval{88, 100}));
    EXPECT_EQ(scoring_half_width(20), 10);
    EXPECT_EQ(scoring_half_width(0), 10);
    EXPECT_EQ(clip_interval(5, 0, 100), (Interval{5, 5}));
}

TEST(Boundaries, ClipIntervalStaysInsideVideo)
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
        const int T = 1 + static_cast<int>(rng() % 200), b = 1 + static_cast<int>(rng() % static_cast<unsigned>(T));
        const int len = static_cast<int>(rng() % 60);
        const auto c = clip_interval(b, len, T);
        EXPECT_LE(c.lo, b);
        EXPECT_GE(c.hi, b);
        EXPECT_GE(c.lo, 1);
        EXPECT_LE(c.hi, T);
        EXPECT_LE(c.hi - c.lo + 1, 2 * (len / 2) + 1);
    }
}

TEST(BoundarySignals, LocalUncertaintyAndGap)
{
    EXPECT_NEAR(local_uncertainty(std::vector<double>(10, 0.7), {2, 8}), 0.7, 1e-15);
    EXPECT_NEAR(local_uncertainty(std::vector<double>{0, 1, 1}, {1, 3}), 2.0 / 3.0, 1e-15);
    std::mt19937_64 rng(4);
    std::vector<double> u(50);
    for (auto& x : u)
        x = std::uniform_real_distribution<double>(0, 2)(rng);
    for (int i = 0; i < 50; ++i) {
        const int lo = 1 + static_cast<int>(rng() % 50), hi = lo + static_cast<int>(rng() % (51 - lo));
        double s = 0;
        for (int t = lo; t <= hi; ++t)
            s += u[static_cast<std::size_t>(t - 1)];
        EXPECT_NEAR(local_uncertainty(u, {lo, hi}), s / (hi - lo + 1), 1e-12);
    }
    EXPECT_NEAR(confidence_gap(std::vector<double>{0.5, 0.3, 0.2}), 0.2, 1e-15);
    EXPECT_EQ(confidence_gap(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0.0);
    EXPECT_EQ(confidence_gap(std::vector<double>{0, 1, 0}), 1.0);
}

TEST(BoundarySignals, TemporalGradient)
{
    ProbMatrix flat = ProbMatrix::Constant(6, 3, 1.0 / 3.0);
    EXPECT_EQ(temporal_gradient(flat, {1, 6}).value, 0.0);
    ProbMatrix p(3, 2);
    p << 1, 0, 1, 0, 0, 1;
    EXPECT_NEAR(temporal_gradient(p, {1, 3}).value, std::sqrt(2.0) / 2, 1e-15);
    EXPECT_FALSE(temporal_gradient(p, {2, 2}).defined);
    EXPECT_EQ(temporal_gradient(p, {2, 2}).value, 0.0);

    std::mt19937_64 rng(9);
    const auto r = random_stochastic(rng, 30, 4);
    double s = 0;
    for (int t = 5; t < 20; ++t) {
        double d = 0;
        for (int c = 0; c < 4; ++c)
            d += (r(t, c) - r(t - 1, c)) * (r(t, c) - r(t - 1, c));
        s += std::sqrt(d);
    }
    EXPECT_NEAR(temporal_gradient(r, {5, 20}).value, s / 15, 1e-12);
}

TEST(BoundaryScore, Fusion)
{
    EXPECT_NEAR(boundary_score(1.0, 0.4, 0.5, ScoreWeights{}), 0.63, 1e-12);
    EXPECT_EQ(boundary_score(0, 1, 0, ScoreWeights{}), 0.0);
    EXPECT_EQ(boundary_score(0.37, 0.2, 0.9, ScoreWeights{1, 0, 0}), 0.37);
    const ScoreWeights w(2, 3, 5);
    EXPECT_NEAR(w.alpha() + w.beta() + w.gamma(), 1.0, 1e-12);
    EXPECT_NEAR(w.alpha(), 0.2, 1e-15);
    EXPECT_THROW(ScoreWeights(-1, 1, 1), ValidationError);
    EXPECT_THROW(ScoreWeights(0, 0, 0), ValidationError);
    // monotone in each signal
    EXPECT_LT(boundary_score(0.1, 0.5, 0.2, w), boundary_score(0.2, 0.5, 0.2, w));
    EXPECT_GT(boundary_score(0.1, 0.4, 0.2, w), boundary_score(0.1, 0.5, 0.2, w));
    EXPECT_LT(boundary_score(0.1, 0.5, 0.2, w), boundary_score(0.1, 0.5, 0.3, w));
}

TEST(TopK, Examples)
{
    const auto cand = [](int b, double s) {
        BoundaryCandidate c;
        c.video = "v";
        c.frame = b;
        c.video_length = 100;
        c.s_bau = s;
        return c;
    };
    EXPECT_EQ(select_top_k_boundaries({cand(5, 0.1), cand(9, 0.2), cand(30, 0.3)}, 5, 20).size(), 3u);
    const auto two = select_top_k_boundaries({cand(10, 0.9), cand(40, 0.8), cand(70, 0.7)}, 2, 20);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_EQ(two[0].center, 10);
    EXPECT_EQ(two[1].center, 40);
    EXPECT_EQ(two[0].interval, (Interval{1, 20}));
    EXPECT_TRUE(select_top_k_boundaries({}, 3, 20).empty());
    // ties go to the earlier frame
    const auto tie = select_top_k_boundaries({cand(50, 0.5), cand(20, 0.5)}, 1, 20);
    EXPECT_EQ(tie[0].center, 20);
}

TEST(TopK, EqualsExhaustiveBestSubset)
{
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<BoundaryCandidate> c;
        for (int i = 0; i < 100; ++i) {
            BoundaryCandidate b;
            b.video = "v";
            b.frame = 2 + i;
            b.video_length = 200;
            b.s_bau = std::uniform_real_distribution<double>(0, 1)(rng);
            c.push_back(b);
        }
        auto sorted = c;
        std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.s_bau > b.s_bau; });
        double best = 0;
        for (int i = 0; i < 5; ++i)
            best += sorted[static_cast<std::size_t>(i)].s_bau;
        double got = 0;
        auto shifted = c;
        for (auto& b : shifted)
            b.s_bau += 3.5;
        const auto picks = select_top_k_boundaries(c, 5, 20);
        const auto picks_shifted = select_top_k_boundaries(shifted, 5, 20);
        for (std::size_t i = 0; i < picks.size(); ++i) {
            got += c[static_cast<std::size_t>(picks[i].center - 2)].s_bau;
            EXPECT_EQ(picks[i].center, picks_shifted[i].center);
        }
        EXPECT_NEAR(got, best, 1e-12);
    }
}

TEST(TopK, SeparationSuppressesNearbyPicks)
{
    std::vector<BoundaryCandidate> c;
    for (int b : {30, 35, 60}) {
        BoundaryCandidate x;
        x.video = "v";
        x.frame = b;
        x.video_length = 100;
        x.s_bau = b == 35 ? 0.9 : 0.5;
        c.push_back(x);
    }
    const auto q = select_top_k_boundaries(c, 3, 20, 20);
    ASSERT_EQ(q.size(), 2u);
    EXPECT_EQ(q[0].center, 35);
    EXPECT_EQ(q[1].center, 60);
}

TEST(Baselines, Equidistant)
{
    const auto q = baseline_select_clips(ClipStrategy::Equidistant, "v", 100, {}, 5, 20, 0);
    std::vector<int> centers;
    for (const auto& x : q)
        centers.push_back(x.center);
    EXPECT_EQ(centers, (std::vector<int>{10, 30, 50, 70, 90}));
}

TEST(Baselines, SplitEntropyPicksArgmaxPerSpan)
{
    std::vector<double> u(100, 0.0);
    u[6] = 1.0; // frame 7
    const auto q = baseline_select_clips(ClipStrategy::SplitEntropy, "v", 100, u, 4, 20, 0);
    ASSERT_EQ(q.size(), 4u);
    EXPECT_EQ(q[0].center, 7);
    for (std::size_t i = 1; i < q.size(); ++i)
        EXPECT_GE(q[i].center, 26);
}

TEST(Baselines, RandomIsSeededAndDistinct)
{
    const auto a = baseline_select_clips(ClipStrategy::Random, "v", 50, {}, 10, 20, 3);
    EXPECT_EQ(a, baseline_select_clips(ClipStrategy::Random, "v", 50, {}, 10, 20, 3));
    std::set<int> s;
    for (const auto& q : a) {
        EXPECT_TRUE(s.insert(q.center).second);
        EXPECT_LE(q.interval.lo, q.center);
        EXPECT_GE(q.interval.hi, q.center);
        EXPECT_GE(q.interval.lo, 1);
        EXPECT_LE(q.interval.hi, 50);
    }
    // K above T clamps
    EXPECT_EQ(baseline_select_clips(ClipStrategy::Random, "v", 3, {}, 10, 20, 3).size(), 3u);
}

TEST(Baselines, EntropyKeepsSeparation)
{
    std::mt19937_64 rng(5);
    std::vector<double> u(300);
    for (auto& x : u)
        x = std::uniform_real_distribution<double>(0, 1)(rng);
    const auto q = baseline_select_clips(ClipStrategy::Entropy, "v", 300, u, 5, 20, 0);
    ASSERT_EQ(q.size(), 5u);
    for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = i + 1; j < q.size(); ++j)
            EXPECT_GE(std::abs(q[i].center - q[j].center), 20);
}

TEST(Coreset, Examples)
{
    Eigen::MatrixXd p(3, 1);
    p << 0, 1, 10;
    const std::vector<int> seed = {0};
    EXPECT_EQ(coreset_select(p, seed, 1), std::vector<int>{2});
    const auto all = coreset_select(p, std::vector<int>{}, 3);
    EXPECT_EQ(std::set<int>(all.begin(), all.end()), (std::set<int>{0, 1, 2}));
    EXPECT_THROW(coreset_select(Eigen::MatrixXd(0, 2), std::vector<int>{}, 1), ValidationError);
}

TEST(Coreset, WithinTwiceOptimalRadius)
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n(0, 1);
    for (int draw = 0; draw < 40; ++draw) {
        const int N = 4 + static_cast<int>(rng() % 7), k = 1 + static_cast<int>(rng() % 3);
        Eigen::MatrixXd p(N, 2);
        for (Eigen::Index i = 0; i < p.size(); ++i)
            p.data()[i] = n(rng);
        const auto greedy = coreset_select(p, std::vector<int>{}, k);
        double opt = 1e300;
        for (unsigned mask = 0; mask < (1u << N); ++mask) {
            if (std::popcount(mask) != k)
                continue;
            std::vector<int> c;
            for (int i = 0; i < N; ++i)
                if (mask & (1u << i))
                    c.push_back(i);
            opt = std::min(opt, covering_radius(p, c));
        }
        EXPECT_LE(covering_radius(p, greedy), 2 * opt + 1e-12);
    }
}

TEST(BactClips, FillsWithSplitEntropyWhenBoundariesRunOut)
{
    ProbMatrix p(100, 2);
    for (int t = 0; t < 100; ++t)
        p.row(t) << (t < 50 ? 0.9 : 0.2), (t < 50 ? 0.1 : 0.8);
    const FrameProbs mean{"v", p};
    std::vector<double> u(100);
    for (int t = 0; t < 100; ++t)
        u[static_cast<std::size_t>(t)] = predictive_entropy(p.row(t));
    const auto q = bact_select_clips(mean, u, {}, 0);
    ASSERT_EQ(q.size(), 5u);
    EXPECT_EQ(q[0].center, 51);
    EXPECT_EQ(q[0].strategy, "bact");
    ASSERT_TRUE(q[0].components);
    EXPECT_NEAR(q[0].components->s_bau,
                boundary_score(q[0].components->u_local, q[0].components->gap, q[0].components->grad, ScoreWeights{}),
                1e-15);
    std::set<int> centers;
    for (const auto& x : q)
        EXPECT_TRUE(centers.insert(x.center).second);
    for (std::size_t i = 1; i < q.size(); ++i)
        EXPECT_EQ(q[i].strategy, "split_entropy");
}
