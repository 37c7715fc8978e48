#pragma once

// Video encoder, cross-attention music decoder, training objectives,
// sampling and video-to-music retrieval.

#include "beatforge/align.hpp"
#include "beatforge/autodiff.hpp"
#include "beatforge/codec.hpp"
#include "beatforge/motion.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace beatforge::model {

// ---------------------------------------------------------------- encoder

struct EncoderConfig {
    std::size_t t_v = 16, height = 32, width = 32, channels = 3;
    // (time, height, width) for the patchifying stem.
    std::array<std::size_t, 3> kernel{3, 4, 4};
    std::array<std::size_t, 3> stride{2, 4, 4};
    std::array<std::size_t, 3> padding{1, 0, 0};
    std::size_t stem_width = 16;
    // One entry per stage: spatial pooling stride, output width, block count.
    std::vector<std::size_t> pools{2, 2, 2};
    std::vector<std::size_t> widths{24, 32, 32};
    std::vector<std::size_t> blocks{0, 1, 1};
    std::size_t heads = 2;

    std::size_t dim() const { return widths.empty() ? stem_width : widths.back(); }

    // 96 x 3 x 224^2 input, four stages ending at 48 x 1^2 x 768.
    static EncoderConfig full_scale();
    // 16 x 3 x 32^2 input ending at 8 x 1^2 x 32.
    static EncoderConfig toy();
};

struct StageShape {
    std::string label;
    std::size_t t, h, w, c;

    std::string str() const;  // e.g. "48x14^2x192" (or "48x14x10x192" when h != w)
    bool operator==(const StageShape&) const = default;
};

// Input, stem and per-stage output shapes from the configuration alone.
// Throws ConfigError if a pooling stride does not divide the spatial size,
// the last stage is not 1 x 1, or the stem does not halve time.
std::vector<StageShape> encoder_shape_trace(const EncoderConfig& cfg);

// im2col rows of the stem convolution: (t' h' w') x (kt kh kw C), pixels
// scaled to [-0.5, 0.5], zero padding. Depends only on the video.
Tensor stem_patches(const motion::FrameSeq& v, const EncoderConfig& cfg);

// ---------------------------------------------------------------- decoder

struct DecoderConfig {
    std::size_t vocab = 32;
    std::size_t books = 2;
    std::size_t dim = 32;
    std::size_t heads = 2;
    std::size_t layers = 2;
    std::size_t max_steps = 65;
    std::size_t ffn_mult = 4;
    bool cross_attention = true;

    // Rows of the input embedding tables: codes, then PAD, then BOS.
    std::size_t pad_row() const { return vocab; }
    std::size_t bos_row() const { return vocab + 1; }
};

struct ModelConfig {
    EncoderConfig encoder = EncoderConfig::toy();
    DecoderConfig decoder;
    std::uint64_t seed = 1;
};

// Parameters plus the forward passes. Parameters live in a ParamStore with
// stable names ("enc.*", "dec.*", "contrast.*") for checkpointing.
class Model {
public:
    explicit Model(ModelConfig cfg);

    const ModelConfig& config() const noexcept { return cfg_; }
    nn::ParamStore& params() noexcept { return params_; }
    const nn::ParamStore& params() const noexcept { return params_; }

    // (t_v/2) x d video features.
    nn::Var encode(nn::Graph& g, const Tensor& patches);
    // Per-book logits (steps x vocab) for the interleaved inputs. Step 0 sees
    // BOS; step s sees the tokens of step s-1. `prefix` holds steps x books
    // tokens (codes or PAD); only its first steps-1 rows are read.
    std::vector<nn::Var> decode(nn::Graph& g, nn::Var video, std::span<const std::uint32_t> prefix,
                                std::size_t steps);

    // Temporal mean of the video features (1 x d).
    static nn::Var pooled_video(nn::Var features);
    // sum_k mean over the book's content rows of softmax(logits_k) E_k (1 x d).
    nn::Var pooled_music(nn::Graph& g, const std::vector<nn::Var>& logits, std::size_t t_a);
    // Same pooling from hard tokens: sum_k mean_t E_k[grid(t, k)].
    Tensor pooled_music_tokens(const codec::TokenGrid& grid) const;

private:
    nn::Var attention(nn::Graph& g, const std::string& prefix, nn::Var q_in, nn::Var kv_in, std::size_t heads,
                      bool causal);
    nn::Var linear(nn::Graph& g, const std::string& name, nn::Var x);
    nn::Var norm(nn::Graph& g, const std::string& name, nn::Var x);
    nn::Var mlp(nn::Graph& g, const std::string& prefix, nn::Var x);
    void add_linear(const std::string& name, std::size_t in, std::size_t out, double gain, std::uint64_t& stream);
    void add_norm(const std::string& name, std::size_t dim);
    void add_attention(const std::string& prefix, std::size_t dim, std::uint64_t& stream);
    void add_mlp(const std::string& prefix, std::size_t dim, std::size_t hidden, std::uint64_t& stream);

    ModelConfig cfg_;
    nn::ParamStore params_;
};

ModelConfig load_model_config(const std::filesystem::path& path);
std::string model_config_json(const ModelConfig& cfg);

// ---------------------------------------------------------------- losses

// Interleaved targets (steps x books, -1 at PAD) and matching per-entry
// weights: step s, book k takes the frame weight of frame s - k, PAD gets 0.
struct StepTargets {
    std::vector<std::int32_t> targets;
    std::vector<double> weights;
};
StepTargets step_targets(const codec::InterleavedSeq& seq, std::span<const double> frame_weights);

// sum over the batch of sum_{s,k} w * -log p(target), divided by `normalizer`
// (the number of non-PAD targets in the batch).
nn::Var generative_loss(const std::vector<nn::Var>& logits, const StepTargets& t, double normalizer);

// InfoNCE over cosine similarities: rows i of video and music are positives.
nn::Var contrastive_loss(nn::Var video, nn::Var music);

// ---------------------------------------------------------------- training

struct Example {
    Tensor patches;
    codec::TokenGrid grid;
    codec::InterleavedSeq seq;
    std::vector<double> weights;  // per frame, length t_a
    VideoBeats video_beats;
};

Example make_example(const motion::FrameSeq& v, const codec::TokenGrid& grid, const align::AlignmentWeights& w,
                     const VideoBeats& pv, const EncoderConfig& cfg);

struct LossConfig {
    align::AlignConfig align;  // alpha = 0.05, delta = 3
    double beta = 0.25;
};

struct TrainConfig {
    LossConfig loss;
    std::size_t epochs = 30;
    std::size_t batch = 8;
    double lr = 3e-3;
    std::size_t warmup = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    std::size_t step = 0;
    double generative = 0.0;
    double contrastive = 0.0;
    double beat_token_accuracy = 0.0;
    double lr = 0.0;
};

std::string metrics_json(const EpochMetrics& m);

// Linear warmup over `warmup` steps, then cosine decay to zero at `total`.
double learning_rate(double base, std::size_t step, std::size_t warmup, std::size_t total);

// Adam with bias correction on every parameter that has a gradient.
class Adam {
public:
    Adam(double beta1, double beta2, double eps) : beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(nn::ParamStore& params, double lr);
    std::size_t steps() const noexcept { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

struct BatchLoss {
    double total = 0.0;
    double generative = 0.0;
    double contrastive = 0.0;
    std::size_t beat_hits = 0;
    std::size_t beat_frames = 0;
};

// Forward and backward of beta * L_c + L_g for one batch; gradients are
// accumulated into the model parameters (call zero_grad first).
BatchLoss batch_loss_and_grad(Model& model, const std::vector<const Example*>& batch, const LossConfig& cfg,
                              bool backward = true);

// Runs the full schedule. on_epoch (optional) receives each epoch's metrics.
std::vector<EpochMetrics> train(Model& model, const std::vector<Example>& data, const TrainConfig& cfg,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

// ---------------------------------------------------------------- inference

struct SamplingConfig {
    double temperature = 1.0;  // <= 1e-6 means greedy
    std::size_t top_k = 0;     // 0 keeps the full vocabulary
    std::uint64_t seed = 1;
};

codec::TokenGrid generate(Model& model, const Tensor& patches, std::size_t t_a, const SamplingConfig& cfg);

struct RetrievalResult {
    // ranking[q] lists candidate indices by decreasing similarity.
    std::vector<std::vector<std::size_t>> ranking;
    // 1-based rank of candidate q for query q.
    std::vector<std::size_t> true_rank;

    double recall_at(std::size_t k) const;
};

// Query q's true match is candidate q.
RetrievalResult retrieve(Model& model, const std::vector<Tensor>& query_patches,
                         const std::vector<codec::TokenGrid>& candidates);

// ---------------------------------------------------------------- synthetic world

struct WorldConfig {
    std::size_t clips = 200;
    std::uint64_t seed = 7;
    std::size_t frames = 16;
    double fps = 12.5;
    std::size_t size = 32;
    std::size_t square = 8;
    std::size_t genres = 8;
    std::size_t vocab = 32;
    std::size_t books = 2;
    std::size_t delta = 3;
    // Probability that a video beat carries a music beat.
    double beat_prob = 0.5;
    // Probability of one extra music beat away from every video beat.
    double offbeat_prob = 0.5;
    double token_noise = 0.1;
};

// Code 0 of book 0 is the beat token; the last code of book 1 is its accent.
inline constexpr std::uint32_t kBeatToken = 0;

struct SyntheticClip {
    std::size_t genre = 0;
    motion::FrameSeq video;
    codec::TokenGrid music;
    VideoBeats video_beats;
    BeatTrack music_beats;
};

std::vector<SyntheticClip> synthetic_world(const WorldConfig& cfg);
BeatTrack beats_from_tokens(const codec::TokenGrid& grid);

// Fraction of video-beat frames whose book-0 token is the beat token.
struct BeatRecall {
    std::size_t hits = 0;
    std::size_t video_beats = 0;
    double value() const { return video_beats == 0 ? 0.0 : static_cast<double>(hits) / video_beats; }
};
BeatRecall beat_token_recall(const codec::TokenGrid& grid, const VideoBeats& pv);

}  // namespace beatforge::model
