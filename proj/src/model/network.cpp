#include "beatforge/error.hpp"
#include "beatforge/model.hpp"
#include "beatforge/ops.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>

namespace beatforge::model {

using nn::Graph;
using nn::Var;

// ---------------------------------------------------------------- shapes

EncoderConfig EncoderConfig::full_scale() {
    EncoderConfig c;
    c.t_v = 96;
    c.height = 224;
    c.width = 224;
    c.channels = 3;
    c.kernel = {3, 7, 7};
    c.stride = {2, 4, 4};
    c.padding = {1, 3, 3};
    c.stem_width = 96;
    c.pools = {4, 7, 2};
    c.widths = {192, 384, 768};
    c.blocks = {2, 16, 3};
    c.heads = 8;
    return c;
}

EncoderConfig EncoderConfig::toy() { return EncoderConfig{}; }

std::string StageShape::str() const {
    const std::string spatial = h == w ? std::to_string(h) + "^2" : std::to_string(h) + "x" + std::to_string(w);
    return std::to_string(t) + "x" + (label == "input" ? std::to_string(c) + "x" + spatial
                                                        : spatial + "x" + std::to_string(c));
}

namespace {

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s, std::size_t p, const char* axis) {
    if (k == 0 || s == 0 || in + 2 * p < k) {
        throw ConfigError(std::string("stem kernel does not fit the input along ") + axis);
    }
    return (in + 2 * p - k) / s + 1;
}

}  // namespace

std::vector<StageShape> encoder_shape_trace(const EncoderConfig& cfg) {
    if (cfg.pools.size() != cfg.widths.size() || cfg.pools.size() != cfg.blocks.size()) {
        throw ConfigError("encoder pools, widths and blocks must have one entry per stage");
    }
    std::vector<StageShape> trace;
    trace.push_back({"input", cfg.t_v, cfg.height, cfg.width, cfg.channels});
    const std::size_t t = conv_out(cfg.t_v, cfg.kernel[0], cfg.stride[0], cfg.padding[0], "time");
    std::size_t h = conv_out(cfg.height, cfg.kernel[1], cfg.stride[1], cfg.padding[1], "height");
    std::size_t w = conv_out(cfg.width, cfg.kernel[2], cfg.stride[2], cfg.padding[2], "width");
    if (cfg.t_v % 2 != 0 || t != cfg.t_v / 2) {
        throw ConfigError("stem must halve time: t_v " + std::to_string(cfg.t_v) + " -> " + std::to_string(t));
    }
    trace.push_back({"stem", t, h, w, cfg.stem_width});
    for (std::size_t s = 0; s < cfg.pools.size(); ++s) {
        const std::size_t p = cfg.pools[s];
        if (p == 0 || h % p != 0 || w % p != 0) {
            throw ConfigError("stage " + std::to_string(s + 1) + " pool stride " + std::to_string(p) +
                              " does not divide " + std::to_string(h) + "x" + std::to_string(w));
        }
        h /= p;
        w /= p;
        trace.push_back({"stage" + std::to_string(s + 1), t, h, w, cfg.widths[s]});
    }
    if (h != 1 || w != 1) {
        throw ConfigError("stride product leaves " + std::to_string(h) + "x" + std::to_string(w) +
                          " spatial positions at the last stage (expected 1x1)");
    }
    return trace;
}

Tensor stem_patches(const motion::FrameSeq& v, const EncoderConfig& cfg) {
    v.validate();
    if (v.t != cfg.t_v || v.h != cfg.height || v.w != cfg.width || v.c != cfg.channels) {
        throw DimensionError("video " + std::to_string(v.t) + "x" + std::to_string(v.c) + "x" + std::to_string(v.h) +
                             "x" + std::to_string(v.w) + " does not match the encoder input " +
                             std::to_string(cfg.t_v) + "x" + std::to_string(cfg.channels) + "x" +
                             std::to_string(cfg.height) + "x" + std::to_string(cfg.width));
    }
    const auto trace = encoder_shape_trace(cfg);
    const std::size_t ot = trace[1].t, oh = trace[1].h, ow = trace[1].w;
    const auto [kt, kh, kw] = cfg.kernel;
    const std::size_t c = cfg.channels;
    Tensor out = Tensor::matrix(ot * oh * ow, kt * kh * kw * c);
    for (std::size_t ft = 0; ft < ot; ++ft) {
        for (std::size_t fy = 0; fy < oh; ++fy) {
            for (std::size_t fx = 0; fx < ow; ++fx) {
                double* row = out.data() + ((ft * oh + fy) * ow + fx) * out.cols();
                for (std::size_t a = 0; a < kt; ++a) {
                    const long long it = static_cast<long long>(ft * cfg.stride[0] + a) - static_cast<long long>(cfg.padding[0]);
                    for (std::size_t b = 0; b < kh; ++b) {
                        const long long iy = static_cast<long long>(fy * cfg.stride[1] + b) - static_cast<long long>(cfg.padding[1]);
                        for (std::size_t d = 0; d < kw; ++d) {
                            const long long ix = static_cast<long long>(fx * cfg.stride[2] + d) - static_cast<long long>(cfg.padding[2]);
                            double* dst = row + ((a * kh + b) * kw + d) * c;
                            if (it < 0 || iy < 0 || ix < 0 || it >= static_cast<long long>(v.t) ||
                                iy >= static_cast<long long>(v.h) || ix >= static_cast<long long>(v.w)) {
                                continue;
                            }
                            const std::uint8_t* src = v.frame(static_cast<std::size_t>(it)) +
                                                      (static_cast<std::size_t>(iy) * v.w + static_cast<std::size_t>(ix)) * c;
                            for (std::size_t ch = 0; ch < c; ++ch) {
                                dst[ch] = src[ch] / 255.0 - 0.5;
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- parameters

namespace {

Tensor normal(Shape shape, double stddev, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    Tensor t(std::move(shape));
    for (double& x : t.values()) {
        x = dist(rng);
    }
    return t;
}

}  // namespace

void Model::add_linear(const std::string& name, std::size_t in, std::size_t out, double gain, std::uint64_t& stream) {
    params_.add(name + ".w", normal({in, out}, gain / std::sqrt(static_cast<double>(in)), cfg_.seed * 1000003 + stream++));
    params_.add(name + ".b", Tensor({out}, 0.0));
}

void Model::add_norm(const std::string& name, std::size_t dim) {
    params_.add(name + ".g", Tensor({dim}, 1.0));
    params_.add(name + ".b", Tensor({dim}, 0.0));
}

void Model::add_attention(const std::string& prefix, std::size_t dim, std::uint64_t& stream) {
    add_linear(prefix + ".q", dim, dim, 1.0, stream);
    add_linear(prefix + ".k", dim, dim, 1.0, stream);
    add_linear(prefix + ".v", dim, dim, 1.0, stream);
    add_linear(prefix + ".o", dim, dim, 0.5, stream);
}

void Model::add_mlp(const std::string& prefix, std::size_t dim, std::size_t hidden, std::uint64_t& stream) {
    add_linear(prefix + ".fc1", dim, hidden, 1.0, stream);
    add_linear(prefix + ".fc2", hidden, dim, 0.5, stream);
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
    const EncoderConfig& e = cfg_.encoder;
    const DecoderConfig& d = cfg_.decoder;
    const auto trace = encoder_shape_trace(e);
    if (d.vocab < 2 || d.books < 1 || d.dim == 0 || d.heads == 0 || d.dim % d.heads != 0 || d.max_steps == 0) {
        throw ConfigError("decoder needs vocab >= 2, books >= 1 and dim divisible by heads");
    }
    if (e.heads == 0) {
        throw ConfigError("encoder needs at least one attention head");
    }
    for (std::size_t s = 0; s < e.widths.size(); ++s) {
        if (e.blocks[s] > 0 && e.widths[s] % e.heads != 0) {
            throw ConfigError("encoder stage width must be divisible by its head count");
        }
    }
    std::uint64_t stream = 0;

    add_linear("enc.stem", e.kernel[0] * e.kernel[1] * e.kernel[2] * e.channels, e.stem_width, 1.0, stream);
    std::size_t width = e.stem_width;
    for (std::size_t s = 0; s < e.widths.size(); ++s) {
        const std::string stage = "enc.s" + std::to_string(s + 1);
        add_linear(stage + ".proj", width, e.widths[s], 1.0, stream);
        width = e.widths[s];
        for (std::size_t b = 0; b < e.blocks[s]; ++b) {
            const std::string block = stage + ".b" + std::to_string(b + 1);
            add_norm(block + ".ln1", width);
            add_attention(block + ".attn", width, stream);
            add_norm(block + ".ln2", width);
            add_mlp(block + ".mlp", width, 4 * width, stream);
        }
    }
    params_.add("enc.pos", normal({trace.back().t, width}, 0.1, cfg_.seed * 1000003 + stream++));
    add_norm("enc.norm", width);

    for (std::size_t k = 0; k < d.books; ++k) {
        params_.add("dec.embed" + std::to_string(k),
                    normal({d.vocab + 2, d.dim}, 0.5, cfg_.seed * 1000003 + stream++));
    }
    params_.add("dec.pos", normal({d.max_steps, d.dim}, 0.1, cfg_.seed * 1000003 + stream++));
    for (std::size_t l = 0; l < d.layers; ++l) {
        const std::string layer = "dec.l" + std::to_string(l + 1);
        add_norm(layer + ".ln_self", d.dim);
        add_attention(layer + ".self", d.dim, stream);
        if (d.cross_attention) {
            add_norm(layer + ".ln_cross", d.dim);
            add_linear(layer + ".cross.q", d.dim, d.dim, 1.0, stream);
            add_linear(layer + ".cross.k", width, d.dim, 1.0, stream);
            add_linear(layer + ".cross.v", width, d.dim, 1.0, stream);
            add_linear(layer + ".cross.o", d.dim, d.dim, 0.5, stream);
        }
        add_norm(layer + ".ln_ffn", d.dim);
        add_mlp(layer + ".ffn", d.dim, d.ffn_mult * d.dim, stream);
    }
    add_norm("dec.norm", d.dim);
    for (std::size_t k = 0; k < d.books; ++k) {
        add_linear("dec.head" + std::to_string(k), d.dim, d.vocab, 1.0, stream);
    }
    for (std::size_t k = 0; k < d.books; ++k) {
        params_.add("contrast.embed" + std::to_string(k),
                    normal({d.vocab, width}, 1.0, cfg_.seed * 1000003 + stream++));
    }
}

// ---------------------------------------------------------------- forward

Var Model::linear(Graph& g, const std::string& name, Var x) {
    return nn::add_bias(nn::matmul(x, g.parameter(params_.at(name + ".w"))), g.parameter(params_.at(name + ".b")));
}

Var Model::norm(Graph& g, const std::string& name, Var x) {
    return nn::layer_norm(x, g.parameter(params_.at(name + ".g")), g.parameter(params_.at(name + ".b")));
}

Var Model::mlp(Graph& g, const std::string& prefix, Var x) {
    return linear(g, prefix + ".fc2", nn::gelu(linear(g, prefix + ".fc1", x)));
}

Var Model::attention(Graph& g, const std::string& prefix, Var q_in, Var kv_in, std::size_t heads, bool causal) {
    const Var q = linear(g, prefix + ".q", q_in);
    const Var k = linear(g, prefix + ".k", kv_in);
    const Var v = linear(g, prefix + ".v", kv_in);
    const std::size_t dim = q.value().cols();
    const std::size_t dh = dim / heads;
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    for (std::size_t h = 0; h < heads; ++h) {
        const Var qh = heads == 1 ? q : nn::slice_cols(q, h * dh, dh);
        const Var kh = heads == 1 ? k : nn::slice_cols(k, h * dh, dh);
        const Var vh = heads == 1 ? v : nn::slice_cols(v, h * dh, dh);
        Var scores = nn::scale(nn::matmul_nt(qh, kh), inv);
        if (causal) {
            scores = nn::causal_mask(scores);
        }
        outs.push_back(nn::matmul(nn::softmax(scores, 1), vh));
    }
    const Var joined = heads == 1 ? outs.front() : nn::concat_cols(outs);
    return linear(g, prefix + ".o", joined);
}

Var Model::encode(Graph& g, const Tensor& patches) {
    const EncoderConfig& e = cfg_.encoder;
    const auto trace = encoder_shape_trace(e);
    const std::size_t expected_cols = e.kernel[0] * e.kernel[1] * e.kernel[2] * e.channels;
    if (patches.rows() != trace[1].t * trace[1].h * trace[1].w || patches.cols() != expected_cols) {
        throw DimensionError("stem patches " + shape_string(patches.shape()) + " do not match the encoder config");
    }
    Var x = linear(g, "enc.stem", g.constant(patches));
    std::size_t h = trace[1].h, w = trace[1].w;
    const std::size_t t = trace[1].t;
    for (std::size_t s = 0; s < e.widths.size(); ++s) {
        const std::string stage = "enc.s" + std::to_string(s + 1);
        x = nn::spatial_avg_pool(x, t, h, w, e.pools[s]);
        h /= e.pools[s];
        w /= e.pools[s];
        x = linear(g, stage + ".proj", x);
        for (std::size_t b = 0; b < e.blocks[s]; ++b) {
            const std::string block = stage + ".b" + std::to_string(b + 1);
            const Var n1 = norm(g, block + ".ln1", x);
            x = nn::add(x, attention(g, block + ".attn", n1, n1, e.heads, false));
            x = nn::add(x, mlp(g, block + ".mlp", norm(g, block + ".ln2", x)));
        }
    }
    x = nn::add(x, g.parameter(params_.at("enc.pos")));
    return norm(g, "enc.norm", x);
}

std::vector<Var> Model::decode(Graph& g, Var video, std::span<const std::uint32_t> prefix, std::size_t steps) {
    const DecoderConfig& d = cfg_.decoder;
    if (steps == 0 || steps > d.max_steps) {
        throw ContractError("decoder prefix of " + std::to_string(steps) + " steps exceeds the maximum of " +
                            std::to_string(d.max_steps));
    }
    if (prefix.size() < (steps - 1) * d.books) {
        throw ContractError("decoder prefix holds fewer than steps - 1 rows");
    }
    Var x = nn::slice_rows(g.parameter(params_.at("dec.pos")), 0, steps);
    std::vector<std::uint32_t> idx(steps);
    for (std::size_t k = 0; k < d.books; ++k) {
        idx[0] = static_cast<std::uint32_t>(d.bos_row());
        for (std::size_t s = 1; s < steps; ++s) {
            const std::uint32_t tok = prefix[(s - 1) * d.books + k];
            if (tok > d.vocab) {
                throw ContractError("decoder input token " + std::to_string(tok) + " is neither a code nor PAD");
            }
            idx[s] = tok;
        }
        x = nn::add(x, nn::embedding(g.parameter(params_.at("dec.embed" + std::to_string(k))), idx));
    }
    for (std::size_t l = 0; l < d.layers; ++l) {
        const std::string layer = "dec.l" + std::to_string(l + 1);
        const Var n1 = norm(g, layer + ".ln_self", x);
        x = nn::add(x, attention(g, layer + ".self", n1, n1, d.heads, true));
        if (d.cross_attention) {
            x = nn::add(x, attention(g, layer + ".cross", norm(g, layer + ".ln_cross", x), video, d.heads, false));
        }
        x = nn::add(x, mlp(g, layer + ".ffn", norm(g, layer + ".ln_ffn", x)));
    }
    x = norm(g, "dec.norm", x);
    std::vector<Var> logits;
    for (std::size_t k = 0; k < d.books; ++k) {
        logits.push_back(linear(g, "dec.head" + std::to_string(k), x));
    }
    return logits;
}

Var Model::pooled_video(Var features) { return nn::mean_rows(features); }

Var Model::pooled_music(Graph& g, const std::vector<Var>& logits, std::size_t t_a) {
    std::optional<Var> total;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        const Var probs = nn::softmax(nn::slice_rows(logits[k], k, t_a), 1);
        const Var m = nn::mean_rows(nn::matmul(probs, g.parameter(params_.at("contrast.embed" + std::to_string(k)))));
        total = total ? nn::add(*total, m) : m;
    }
    return *total;
}

Tensor Model::pooled_music_tokens(const codec::TokenGrid& grid) const {
    grid.validate();
    const DecoderConfig& d = cfg_.decoder;
    if (grid.k != d.books || grid.vocab != d.vocab) {
        throw DimensionError("token grid does not match the decoder's books and vocabulary");
    }
    const std::size_t width = cfg_.encoder.dim();
    Tensor out = Tensor::matrix(1, width);
    for (std::size_t k = 0; k < grid.k; ++k) {
        const Tensor& e = params_.at("contrast.embed" + std::to_string(k)).value;
        Tensor book = Tensor::matrix(1, width);
        for (std::size_t t = 0; t < grid.t_a; ++t) {
            const auto row = e.row(grid.at(t, k));
            for (std::size_t q = 0; q < width; ++q) {
                book(0, q) += row[q];
            }
        }
        for (std::size_t q = 0; q < width; ++q) {
            out(0, q) += book(0, q) / static_cast<double>(grid.t_a);
        }
    }
    return out;
}

// ---------------------------------------------------------------- config io

namespace {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) {
        out = j.at(key).get<T>();
    }
}

}  // namespace

ModelConfig load_model_config(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        std::ifstream in(path);
        if (!in) {
            throw FormatError(path.string() + ": cannot open model config");
        }
        j = nlohmann::json::parse(in);
        ModelConfig cfg;
        if (j.contains("encoder")) {
            const auto& e = j.at("encoder");
            if (e.contains("preset")) {
                const auto preset = e.at("preset").get<std::string>();
                if (preset == "full_scale") {
                    cfg.encoder = EncoderConfig::full_scale();
                } else if (preset != "toy") {
                    throw ConfigError("unknown encoder preset '" + preset + "'");
                }
            }
            read_opt(e, "t_v", cfg.encoder.t_v);
            read_opt(e, "height", cfg.encoder.height);
            read_opt(e, "width", cfg.encoder.width);
            read_opt(e, "channels", cfg.encoder.channels);
            read_opt(e, "kernel", cfg.encoder.kernel);
            read_opt(e, "stride", cfg.encoder.stride);
            read_opt(e, "padding", cfg.encoder.padding);
            read_opt(e, "stem_width", cfg.encoder.stem_width);
            read_opt(e, "pools", cfg.encoder.pools);
            read_opt(e, "widths", cfg.encoder.widths);
            read_opt(e, "blocks", cfg.encoder.blocks);
            read_opt(e, "heads", cfg.encoder.heads);
        }
        if (j.contains("decoder")) {
            const auto& d = j.at("decoder");
            read_opt(d, "vocab", cfg.decoder.vocab);
            read_opt(d, "books", cfg.decoder.books);
            read_opt(d, "dim", cfg.decoder.dim);
            read_opt(d, "heads", cfg.decoder.heads);
            read_opt(d, "layers", cfg.decoder.layers);
            read_opt(d, "max_steps", cfg.decoder.max_steps);
            read_opt(d, "ffn_mult", cfg.decoder.ffn_mult);
            read_opt(d, "cross_attention", cfg.decoder.cross_attention);
        }
        read_opt(j, "seed", cfg.seed);
        encoder_shape_trace(cfg.encoder);
        return cfg;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(path.string() + ": " + ex.what());
    }
}

std::string model_config_json(const ModelConfig& cfg) {
    const EncoderConfig& e = cfg.encoder;
    const DecoderConfig& d = cfg.decoder;
    nlohmann::json j = {
        {"encoder",
         {{"t_v", e.t_v}, {"height", e.height}, {"width", e.width}, {"channels", e.channels},
          {"kernel", e.kernel}, {"stride", e.stride}, {"padding", e.padding}, {"stem_width", e.stem_width},
          {"pools", e.pools}, {"widths", e.widths}, {"blocks", e.blocks}, {"heads", e.heads}}},
        {"decoder",
         {{"vocab", d.vocab}, {"books", d.books}, {"dim", d.dim}, {"heads", d.heads}, {"layers", d.layers},
          {"max_steps", d.max_steps}, {"ffn_mult", d.ffn_mult}, {"cross_attention", d.cross_attention}}},
        {"seed", cfg.seed},
    };
    return j.dump(2);
}

}  // namespace beatforge::model
