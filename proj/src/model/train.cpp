#include "beatforge/error.hpp"
#include "beatforge/model.hpp"
#include "beatforge/ops.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace beatforge::model {

using nn::Graph;
using nn::Var;

// ---------------------------------------------------------------- losses

StepTargets step_targets(const codec::InterleavedSeq& seq, std::span<const double> frame_weights) {
    const std::size_t t_a = seq.steps + 1 - seq.k;
    if (frame_weights.size() != t_a) {
        throw ContractError("loss weights have length " + std::to_string(frame_weights.size()) + ", expected t_a = " +
                            std::to_string(t_a));
    }
    StepTargets out;
    out.targets.resize(seq.steps * seq.k);
    out.weights.resize(seq.steps * seq.k);
    for (std::size_t s = 0; s < seq.steps; ++s) {
        for (std::size_t k = 0; k < seq.k; ++k) {
            const std::uint32_t tok = seq.at(s, k);
            const std::size_t i = s * seq.k + k;
            if (tok == seq.pad()) {
                out.targets[i] = -1;
                out.weights[i] = 0.0;
            } else {
                out.targets[i] = static_cast<std::int32_t>(tok);
                out.weights[i] = frame_weights[s - k];
            }
        }
    }
    return out;
}

Var generative_loss(const std::vector<Var>& logits, const StepTargets& t, double normalizer) {
    const std::size_t books = logits.size();
    const std::size_t steps = logits.front().value().rows();
    if (t.targets.size() != steps * books) {
        throw DimensionError("targets do not cover steps x books");
    }
    std::optional<Var> total;
    std::vector<std::int32_t> col_t(steps);
    std::vector<double> col_w(steps);
    for (std::size_t k = 0; k < books; ++k) {
        for (std::size_t s = 0; s < steps; ++s) {
            col_t[s] = t.targets[s * books + k];
            col_w[s] = t.weights[s * books + k];
        }
        const Var part = nn::cross_entropy(logits[k], col_t, col_w, normalizer);
        total = total ? nn::add(*total, part) : part;
    }
    return *total;
}

Var contrastive_loss(Var video, Var music) {
    const std::size_t b = video.value().rows();
    if (b < 2 || music.value().rows() != b) {
        throw ContractError("contrastive loss needs matching batches of at least 2 rows");
    }
    const Var sims = nn::matmul_nt(nn::normalize_rows(video), nn::normalize_rows(music));
    std::vector<std::int32_t> diag(b);
    for (std::size_t i = 0; i < b; ++i) {
        diag[i] = static_cast<std::int32_t>(i);
    }
    const std::vector<double> ones(b, 1.0);
    return nn::cross_entropy(sims, diag, ones, static_cast<double>(b));
}

// ---------------------------------------------------------------- data

Example make_example(const motion::FrameSeq& v, const codec::TokenGrid& grid, const align::AlignmentWeights& w,
                     const VideoBeats& pv, const EncoderConfig& cfg) {
    if (w.size() != grid.t_a || pv.size() != grid.t_a) {
        throw ContractError("weights and video beats must have t_a = " + std::to_string(grid.t_a) + " entries");
    }
    Example ex;
    ex.patches = stem_patches(v, cfg);
    ex.grid = grid;
    ex.seq = codec::delay_interleave(grid);
    ex.weights = w.weights;
    ex.video_beats = pv;
    return ex;
}

// ---------------------------------------------------------------- optimisation

double learning_rate(double base, std::size_t step, std::size_t warmup, std::size_t total) {
    if (step < warmup) {
        return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
    }
    if (total <= warmup) {
        return base;
    }
    const double progress = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return base * 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, progress)));
}

void Adam::step(nn::ParamStore& params, double lr) {
    auto& all = params.all();
    if (m_.empty()) {
        for (const auto& p : all) {
            m_.emplace_back(p.value.shape(), 0.0);
            v_.emplace_back(p.value.shape(), 0.0);
        }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto& p = all[i];
        if (p.grad.size() != p.value.size()) {
            continue;
        }
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / c1;
            const double vhat = v_[i][j] / c2;
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

BatchLoss batch_loss_and_grad(Model& model, const std::vector<const Example*>& batch, const LossConfig& cfg,
                              bool backward) {
    if (batch.empty()) {
        throw ContractError("empty batch");
    }
    if (!(cfg.beta >= 0.0)) {
        throw ConfigError("beta must be >= 0");
    }
    const std::size_t books = model.config().decoder.books;
    double normalizer = 0.0;
    for (const Example* ex : batch) {
        normalizer += static_cast<double>(ex->grid.t_a * books);
    }
    Graph g;
    BatchLoss out;
    std::optional<Var> gen;
    std::vector<Var> video_rows, music_rows;
    for (const Example* ex : batch) {
        const Var feats = model.encode(g, ex->patches);
        const auto logits = model.decode(g, feats, ex->seq.tokens, ex->seq.steps);
        const Var part = generative_loss(logits, step_targets(ex->seq, ex->weights), normalizer);
        gen = gen ? nn::add(*gen, part) : part;
        video_rows.push_back(Model::pooled_video(feats));
        music_rows.push_back(model.pooled_music(g, logits, ex->grid.t_a));

        const Tensor& l0 = logits[0].value();
        for (std::size_t t = 0; t < ex->grid.t_a; ++t) {
            if (!ex->video_beats.beats[t]) {
                continue;
            }
            const auto row = l0.row(t);
            const auto arg = static_cast<std::uint32_t>(std::max_element(row.begin(), row.end()) - row.begin());
            out.beat_hits += arg == ex->grid.at(t, 0);
            ++out.beat_frames;
        }
    }
    Var total = *gen;
    out.generative = gen->value().item();
    if (batch.size() >= 2) {
        const Var lc = contrastive_loss(nn::concat_rows(video_rows), nn::concat_rows(music_rows));
        out.contrastive = lc.value().item();
        if (cfg.beta > 0.0) {
            total = nn::add(total, nn::scale(lc, cfg.beta));
        }
    } else if (cfg.beta > 0.0) {
        throw ContractError("contrastive loss needs a batch of at least 2 clips");
    }
    out.total = total.value().item();
    if (backward) {
        g.backward(total);
    }
    return out;
}

std::string metrics_json(const EpochMetrics& m) {
    nlohmann::json j = {{"epoch", m.epoch},       {"step", m.step},
                        {"L_g", m.generative},    {"L_c", m.contrastive},
                        {"beat_token_accuracy", m.beat_token_accuracy}, {"lr", m.lr}};
    return j.dump();
}

std::vector<EpochMetrics> train(Model& model, const std::vector<Example>& data, const TrainConfig& cfg,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
    if (data.empty()) {
        throw ContractError("training needs a non-empty dataset");
    }
    cfg.loss.align.validate();
    if (cfg.batch == 0 || cfg.epochs == 0 || !(cfg.lr > 0.0)) {
        throw ConfigError("training needs batch >= 1, epochs >= 1 and lr > 0");
    }
    // Batches of at least 2 so every step has contrastive negatives.
    const std::size_t batch = std::min(std::max<std::size_t>(cfg.batch, 2), data.size());
    std::size_t per_epoch = data.size() / batch;
    if (per_epoch == 0) {
        per_epoch = 1;
    }
    const std::size_t total_steps = per_epoch * cfg.epochs;
    const std::size_t warmup = std::min(cfg.warmup, total_steps);

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    Adam adam(cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    std::vector<EpochMetrics> log;
    std::size_t step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::shuffle(order.begin(), order.end(), rng);
        EpochMetrics m;
        m.epoch = epoch;
        std::size_t hits = 0, frames = 0;
        for (std::size_t b = 0; b < per_epoch; ++b) {
            // The last batch absorbs the remainder.
            const std::size_t lo = b * batch;
            const std::size_t hi = b + 1 == per_epoch ? data.size() : lo + batch;
            std::vector<const Example*> items;
            for (std::size_t i = lo; i < hi; ++i) {
                items.push_back(&data[order[i]]);
            }
            model.params().zero_grad();
            const double lr = learning_rate(cfg.lr, step, warmup, total_steps);
            BatchLoss loss;
            try {
                loss = batch_loss_and_grad(model, items, cfg.loss);
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(step) + ": " + e.what());
            }
            if (!std::isfinite(loss.total)) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(step) + ": loss is not finite");
            }
            adam.step(model.params(), lr);
            ++step;
            m.generative += loss.generative / static_cast<double>(per_epoch);
            m.contrastive += loss.contrastive / static_cast<double>(per_epoch);
            hits += loss.beat_hits;
            frames += loss.beat_frames;
            m.lr = lr;
        }
        m.step = step;
        m.beat_token_accuracy = frames == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(frames);
        log.push_back(m);
        if (on_epoch) {
            on_epoch(m);
        }
    }
    return log;
}

}  // namespace beatforge::model
