#include "micro_model.hpp"

#include <cmath>
#include <random>

namespace beatforge::oracle {

using Mat = std::vector<std::vector<double>>;

namespace {

Mat to_mat(const Tensor& t) {
    Mat m(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.cols(); ++j) {
            m[i][j] = t(i, j);
        }
    }
    return m;
}

Mat linear(const model::Model& m, const std::string& name, const Mat& x) {
    const Tensor& w = m.params().at(name + ".w").value;
    const Tensor& b = m.params().at(name + ".b").value;
    Mat out(x.size(), std::vector<double>(w.cols()));
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = 0; j < w.cols(); ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < w.rows(); ++q) {
                acc += x[i][q] * w(q, j);
            }
            out[i][j] = acc + b[j];
        }
    }
    return out;
}

Mat layer_norm(const model::Model& m, const std::string& name, const Mat& x) {
    const Tensor& g = m.params().at(name + ".g").value;
    const Tensor& b = m.params().at(name + ".b").value;
    Mat out = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double n = static_cast<double>(x[i].size());
        double mean = 0.0;
        for (double v : x[i]) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x[i]) var += (v - mean) * (v - mean);
        var /= n;
        for (std::size_t j = 0; j < x[i].size(); ++j) {
            out[i][j] = (x[i][j] - mean) / std::sqrt(var + 1e-5) * g[j] + b[j];
        }
    }
    return out;
}

Mat attention(const model::Model& m, const std::string& name, const Mat& q_in, const Mat& kv_in, std::size_t heads,
              bool causal) {
    const Mat q = linear(m, name + ".q", q_in);
    const Mat k = linear(m, name + ".k", kv_in);
    const Mat v = linear(m, name + ".v", kv_in);
    const std::size_t d = q[0].size(), dh = d / heads;
    Mat joined(q.size(), std::vector<double>(d, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t i = 0; i < q.size(); ++i) {
            const std::size_t visible = causal ? i + 1 : k.size();
            std::vector<double> s(visible);
            double top = -1e300;
            for (std::size_t j = 0; j < visible; ++j) {
                double dot = 0.0;
                for (std::size_t c = 0; c < dh; ++c) dot += q[i][h * dh + c] * k[j][h * dh + c];
                s[j] = dot / std::sqrt(static_cast<double>(dh));
                top = std::max(top, s[j]);
            }
            double z = 0.0;
            for (double& x : s) {
                x = std::exp(x - top);
                z += x;
            }
            for (std::size_t j = 0; j < visible; ++j) {
                for (std::size_t c = 0; c < dh; ++c) joined[i][h * dh + c] += s[j] / z * v[j][h * dh + c];
            }
        }
    }
    return linear(m, name + ".o", joined);
}

void add_into(Mat& x, const Mat& y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] += y[i][j];
}

}  // namespace

model::ModelConfig micro_config(std::uint64_t seed) {
    model::ModelConfig cfg;
    auto& e = cfg.encoder;
    e.t_v = 4;
    e.height = 8;
    e.width = 8;
    e.channels = 3;
    e.kernel = {3, 4, 4};
    e.stride = {2, 4, 4};
    e.padding = {1, 0, 0};
    e.stem_width = 4;
    e.pools = {2};
    e.widths = {8};
    e.blocks = {1};
    e.heads = 2;
    auto& d = cfg.decoder;
    d.vocab = 5;
    d.books = 2;
    d.dim = 8;
    d.heads = 2;
    d.layers = 2;
    d.max_steps = 7;
    cfg.seed = seed;
    return cfg;
}

MicroBatch micro_batch(const model::ModelConfig& cfg, std::size_t clips, std::size_t t_a,
                       const align::AlignConfig& align, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    MicroBatch out;
    const auto& e = cfg.encoder;
    for (std::size_t c = 0; c < clips; ++c) {
        motion::FrameSeq v = motion::make_frames(e.t_v, e.height, e.width, e.channels, 12.5);
        for (auto& b : v.frames) b = static_cast<std::uint8_t>(rng() % 256);
        codec::TokenGrid grid{t_a, cfg.decoder.books, cfg.decoder.vocab,
                              std::vector<std::uint32_t>(t_a * cfg.decoder.books)};
        for (auto& tok : grid.tokens) tok = static_cast<std::uint32_t>(rng() % cfg.decoder.vocab);
        VideoBeats pv{std::vector<std::uint8_t>(t_a, 0)};
        BeatTrack pa{std::vector<std::uint8_t>(t_a, 0)};
        for (std::size_t t = 0; t < t_a; ++t) {
            pv.beats[t] = rng() % 3 == 0;
            pa.beats[t] = rng() % 3 == 0;
        }
        out.examples.push_back(model::make_example(v, grid, align::overlap_weights(pv, pa, align), pv, e));
        out.videos.push_back(std::move(v));
    }
    return out;
}

std::vector<Tensor> reference_decoder_logits(const model::Model& m, const Tensor& video,
                                             const std::vector<std::uint32_t>& prefix, std::size_t steps) {
    const auto& d = m.config().decoder;
    const Tensor& pos = m.params().at("dec.pos").value;
    Mat x(steps, std::vector<double>(d.dim));
    for (std::size_t s = 0; s < steps; ++s) {
        for (std::size_t j = 0; j < d.dim; ++j) x[s][j] = pos(s, j);
        for (std::size_t k = 0; k < d.books; ++k) {
            const Tensor& table = m.params().at("dec.embed" + std::to_string(k)).value;
            const std::size_t row = s == 0 ? d.bos_row() : prefix[(s - 1) * d.books + k];
            for (std::size_t j = 0; j < d.dim; ++j) x[s][j] += table(row, j);
        }
    }
    const Mat vid = to_mat(video);
    for (std::size_t l = 0; l < d.layers; ++l) {
        const std::string layer = "dec.l" + std::to_string(l + 1);
        const Mat n1 = layer_norm(m, layer + ".ln_self", x);
        add_into(x, attention(m, layer + ".self", n1, n1, d.heads, true));
        if (d.cross_attention) {
            add_into(x, attention(m, layer + ".cross", layer_norm(m, layer + ".ln_cross", x), vid, d.heads, false));
        }
        Mat h = linear(m, layer + ".ffn.fc1", layer_norm(m, layer + ".ln_ffn", x));
        for (auto& row : h) {
            for (double& v : row) {
                v = 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
            }
        }
        add_into(x, linear(m, layer + ".ffn.fc2", h));
    }
    x = layer_norm(m, "dec.norm", x);
    std::vector<Tensor> out;
    for (std::size_t k = 0; k < d.books; ++k) {
        const Mat l = linear(m, "dec.head" + std::to_string(k), x);
        Tensor t = Tensor::matrix(steps, d.vocab);
        for (std::size_t s = 0; s < steps; ++s)
            for (std::size_t j = 0; j < d.vocab; ++j) t(s, j) = l[s][j];
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace beatforge::oracle
