#pragma once

#include "bact/dataset.hpp"
#include "bact/labeled_set.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

namespace bact
{

using ProbMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PredictorConfig
{
    int context_radius = 7;
    double dropout = 0.2;
    int mc_samples = 10;
    double learning_rate = 1e-2;
    int epochs = 85;
    int batch_size = 8;
    double weight_decay = 1e-5;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(context_radius >= 0, "context_radius must be >= 0");
        require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0,1)");
        require(mc_samples >= 1, "mc_samples must be >= 1");
        require(learning_rate > 0.0, "learning_rate must be > 0");
        require(epochs >= 1, "epochs must be >= 1");
        require(batch_size >= 1, "batch_size must be >= 1");
        require(weight_decay >= 0.0, "weight_decay must be >= 0");
    }
};

/// Per-frame class probabilities of one video, T x C, rows sum to one.
struct FrameProbs
{
    std::string video;
    ProbMatrix probs;

    int length() const { return static_cast<int>(probs.rows()); }
    int num_classes() const { return static_cast<int>(probs.cols()); }

    Labels argmax() const
    {
        Labels out(static_cast<std::size_t>(probs.rows()));
        for (Eigen::Index t = 0; t < probs.rows(); ++t) {
            Eigen::Index c = 0;
            probs.row(t).maxCoeff(&c);
            out[static_cast<std::size_t>(t)] = static_cast<int>(c);
        }
        return out;
    }
};

/// Weights are laid out as [(2r+1) window blocks of D rows | bias row] x C.
struct ModelState
{
    PredictorConfig config;
    int feature_dim = 0;
    int num_classes = 0;
    Eigen::MatrixXd weights;
    std::vector<double> loss_trace;

    int input_dim() const { return (2 * config.context_radius + 1) * feature_dim; }

    static ModelState zeros(const PredictorConfig& cfg, int feature_dim, int num_classes)
    {
        ModelState m;
        m.config = cfg;
        m.feature_dim = feature_dim;
        m.num_classes = num_classes;
        m.weights = Eigen::MatrixXd::Zero(m.input_dim() + 1, num_classes);
        return m;
    }
};

namespace detail
{

inline void softmax_rows(ProbMatrix& logits)
{
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        row.array() -= row.maxCoeff();
        row = row.array().exp().matrix();
        row /= row.sum();
    }
}

/// Windowed inputs for frames [0, T) where out-of-range positions are
/// replaced by the nearest frame inside `ctx` (0-based, inclusive).
inline Eigen::RowVectorXd window_input(const FeatureMatrix& f, int t, int radius, int ctx_lo, int ctx_hi)
{
    const int D = static_cast<int>(f.cols());
    Eigen::RowVectorXd z((2 * radius + 1) * D);
    for (int k = -radius; k <= radius; ++k) {
        const int s = std::clamp(t + k, ctx_lo, ctx_hi);
        z.segment((k + radius) * D, D) = f.row(s).cast<double>();
    }
    return z;
}

inline Eigen::MatrixXd window_matrix(const FeatureMatrix& f, int radius)
{
    const int T = static_cast<int>(f.rows());
    const int D = static_cast<int>(f.cols());
    Eigen::MatrixXd Z(T, (2 * radius + 1) * D);
    for (int t = 0; t < T; ++t)
        Z.row(t) = window_input(f, t, radius, 0, T - 1);
    return Z;
}

inline void check_video(const ModelState& m, const VideoRecord& v)
{
    if (v.dim() != m.feature_dim)
        throw ValidationError("video '" + v.id + "' has feature dimension " + std::to_string(v.dim()) +
                              ", model expects " + std::to_string(m.feature_dim));
}

inline FrameProbs forward(const ModelState& m, const Eigen::MatrixXd& Z, const std::string& id, Rng* rng)
{
    const auto n = m.input_dim();
    ProbMatrix logits;
    const double p = m.config.dropout;
    if (rng && p > 0.0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::MatrixXd masked(Z.rows(), Z.cols());
        const double keep = 1.0 / (1.0 - p);
        for (Eigen::Index i = 0; i < Z.rows(); ++i)
            for (Eigen::Index j = 0; j < Z.cols(); ++j)
                masked(i, j) = unif(*rng) < p ? 0.0 : Z(i, j) * keep;
        logits = masked * m.weights.topRows(n);
    } else {
        logits = Z * m.weights.topRows(n);
    }
    logits.rowwise() += m.weights.row(n);
    softmax_rows(logits);
    return {id, std::move(logits)};
}

} // namespace detail

struct LossGradient
{
    double loss = 0;
    Eigen::MatrixXd gradient;
};

/// Mean cross-entropy of a softmax-linear model over the rows of `inputs`
/// (last column is the constant bias input) plus 0.5 * decay * |W|^2 over
/// the non-bias rows, with its exact gradient.
inline LossGradient softmax_loss_and_gradient(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& inputs,
                                              std::span<const int> labels, double weight_decay)
{
    const auto N = inputs.rows();
    require(N > 0 && static_cast<std::size_t>(N) == labels.size(), "loss: inputs and labels disagree");
    ProbMatrix probs = inputs * weights;
    detail::softmax_rows(probs);

    LossGradient out;
    for (Eigen::Index i = 0; i < N; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        out.loss -= std::log(std::max(probs(i, y), 1e-300));
        probs(i, y) -= 1.0;
    }
    out.loss /= static_cast<double>(N);
    out.gradient = inputs.transpose() * probs / static_cast<double>(N);

    const auto body = weights.rows() - 1;
    out.loss += 0.5 * weight_decay * weights.topRows(body).squaredNorm();
    out.gradient.topRows(body) += weight_decay * weights.topRows(body);
    return out;
}

/// Deterministic forward pass (dropout disabled).
inline FrameProbs predict_probs(const ModelState& m, const VideoRecord& v)
{
    detail::check_video(m, v);
    return detail::forward(m, detail::window_matrix(v.features, m.config.context_radius), v.id, nullptr);
}

/// S stochastic passes with an independent input-dropout mask per pass and frame.
inline std::vector<FrameProbs> mc_sample(const ModelState& m, const VideoRecord& v, int samples, std::uint64_t seed)
{
    require(samples >= 1, "mc_sample: need at least one sample");
    detail::check_video(m, v);
    const auto Z = detail::window_matrix(v.features, m.config.context_radius);
    std::vector<FrameProbs> out;
    out.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
        out.push_back(detail::forward(m, Z, v.id, &rng));
    }
    return out;
}

inline FrameProbs mean_probs(std::span<const FrameProbs> samples)
{
    if (samples.empty())
        throw ValidationError("mean_probs: no samples");
    FrameProbs out{samples.front().video, ProbMatrix::Zero(samples.front().probs.rows(), samples.front().probs.cols())};
    for (const auto& s : samples) {
        if (s.probs.rows() != out.probs.rows() || s.probs.cols() != out.probs.cols())
            throw ValidationError("mean_probs: sample shapes differ");
        out.probs += s.probs;
    }
    out.probs /= static_cast<double>(samples.size());
    return out;
}

/// Fits the model to the labeled frames with mini-batch gradient descent.
/// Each example sees the window [t-r, t+r] of its video, edges replicated.
inline ModelState train(const Dataset& ds, const LabeledIndexSet& labeled, const PredictorConfig& cfg)
{
    cfg.validate();
    if (labeled.empty())
        throw ValidationError("train: no labeled frames");
    const int C = ds.num_classes();
    require(C >= 1, "train: dataset has no classes");

    const auto entries = labeled.entries();
    const int D = ds.at(entries.front().video).dim();
    ModelState m = ModelState::zeros(cfg, D, C);
    const int n = m.input_dim();
    const auto N = static_cast<Eigen::Index>(entries.size());

    Eigen::MatrixXd X(N, n + 1);
    std::vector<int> y(entries.size());
    for (Eigen::Index i = 0; i < N; ++i) {
        const auto& e = entries[static_cast<std::size_t>(i)];
        const auto& v = ds.at(e.video);
        detail::check_video(m, v);
        if (e.frame < 1 || e.frame > v.length())
            throw ValidationError("train: frame " + std::to_string(e.frame) + " out of range for '" + v.id + "'");
        if (e.label < 0 || e.label >= C)
            throw ValidationError("train: label out of range for '" + v.id + "'");
        X.block(i, 0, 1, n) = detail::window_input(v.features, e.frame - 1, cfg.context_radius, 0, v.length() - 1);
        X(i, n) = 1.0;
        y[static_cast<std::size_t>(i)] = e.label;
    }

    Rng rng(derive_seed(cfg.seed, "train"));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0);
    const double keep = cfg.dropout > 0 ? 1.0 / (1.0 - cfg.dropout) : 1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        for (Eigen::Index start = 0; start < N; start += cfg.batch_size) {
            const auto B = std::min<Eigen::Index>(cfg.batch_size, N - start);
            Eigen::MatrixXd Xb(B, n + 1);
            std::vector<int> yb(static_cast<std::size_t>(B));
            for (Eigen::Index b = 0; b < B; ++b) {
                const auto src = order[static_cast<std::size_t>(start + b)];
                Xb.row(b) = X.row(src);
                yb[static_cast<std::size_t>(b)] = y[static_cast<std::size_t>(src)];
                if (cfg.dropout > 0)
                    for (int j = 0; j < n; ++j)
                        Xb(b, j) = unif(rng) < cfg.dropout ? 0.0 : Xb(b, j) * keep;
            }
            const double decay = 0.5 * cfg.weight_decay * m.weights.topRows(n).squaredNorm();
            auto lg = softmax_loss_and_gradient(m.weights, Xb, yb, cfg.weight_decay);
            m.weights -= cfg.learning_rate * lg.gradient;
            epoch_loss += (lg.loss - decay) * static_cast<double>(B);
        }
        m.loss_trace.push_back(epoch_loss / static_cast<double>(N));
    }
    return m;
}

// Checkpoint: "BACTCKPT", uint32 version, radius, D, C, rows, cols, float64
// dropout, then rows*cols float64 weights row-major. All little-endian.
inline constexpr std::array<char, 8> kCheckpointMagic = {'B', 'A', 'C', 'T', 'C', 'K', 'P', 'T'};

inline void save_checkpoint(const ModelState& m, const std::filesystem::path& path)
{
    std::string out(kCheckpointMagic.begin(), kCheckpointMagic.end());
    const auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i)
            out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    };
    const auto f64 = [&](double d) {
        std::uint64_t bits;
        std::memcpy(&bits, &d, 8);
        for (int i = 0; i < 8; ++i)
            out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    };
    u32(1);
    u32(static_cast<std::uint32_t>(m.config.context_radius));
    u32(static_cast<std::uint32_t>(m.feature_dim));
    u32(static_cast<std::uint32_t>(m.num_classes));
    u32(static_cast<std::uint32_t>(m.weights.rows()));
    u32(static_cast<std::uint32_t>(m.weights.cols()));
    f64(m.config.dropout);
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i)
        for (Eigen::Index j = 0; j < m.weights.cols(); ++j)
            f64(m.weights(i, j));
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

inline ModelState load_checkpoint(const std::filesystem::path& path, PredictorConfig cfg = {})
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    const std::string bytes = std::move(ss).str();
    std::size_t pos = 0;
    const auto need = [&](std::size_t k) {
        if (pos + k > bytes.size())
            throw Error("checkpoint truncated: " + path.string());
    };
    need(8);
    if (!std::equal(kCheckpointMagic.begin(), kCheckpointMagic.end(), bytes.begin()))
        throw Error("not a checkpoint: " + path.string());
    pos = 8;
    const auto u32 = [&] {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        return v;
    };
    const auto f64 = [&] {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    };
    if (u32() != 1)
        throw Error("unsupported checkpoint version");
    cfg.context_radius = static_cast<int>(u32());
    const int D = static_cast<int>(u32());
    const int C = static_cast<int>(u32());
    const auto rows = u32();
    const auto cols = u32();
    cfg.dropout = f64();
    ModelState m = ModelState::zeros(cfg, D, C);
    if (rows != m.weights.rows() || cols != m.weights.cols())
        throw Error("checkpoint shape does not match its header");
    for (Eigen::Index i = 0; i < m.weights.rows(); ++i)
        for (Eigen::Index j = 0; j < m.weights.cols(); ++j)
            m.weights(i, j) = f64();
    return m;
}

} // namespace bact
