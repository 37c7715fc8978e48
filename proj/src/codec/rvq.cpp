#include "beatforge/codec.hpp"

#include "beatforge/error.hpp"
#include "beatforge/kernels.hpp"

#include <algorithm>
#include <random>

namespace beatforge::codec {

namespace {

Tensor farthest_point_init(const Tensor& x, std::size_t vocab, std::uint64_t seed) {
    const std::size_t n = x.rows(), d = x.cols();
    Tensor c = Tensor::matrix(vocab, d);
    std::mt19937_64 rng(seed);
    std::size_t pick = static_cast<std::size_t>(rng() % n);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < vocab; ++j) {
        std::copy_n(x.row(pick).begin(), d, c.row(j).begin());
        std::size_t next = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dist = 0.0;
            for (std::size_t q = 0; q < d; ++q) {
                const double diff = x(i, q) - c(j, q);
                dist += diff * diff;
            }
            nearest[i] = std::min(nearest[i], dist);
            if (nearest[i] > best) {
                best = nearest[i];
                next = i;
            }
        }
        pick = next;
    }
    return c;
}

void assign(const Tensor& x, const Tensor& c, std::vector<std::uint32_t>& idx, std::vector<double>& dist) {
    kernels::nearest_centroid(x.values(), c.values(), x.rows(), c.rows(), x.cols(), idx, dist);
}

}  // namespace

void TokenGrid::validate() const {
    if (k == 0) {
        throw ContractError("token grid needs at least one codebook");
    }
    if (tokens.size() != t_a * k) {
        throw ContractError("token grid holds " + std::to_string(tokens.size()) + " codes, expected " +
                            std::to_string(t_a * k));
    }
    for (std::uint32_t v : tokens) {
        if (v >= vocab) {
            throw ContractError("token " + std::to_string(v) + " outside vocabulary of " + std::to_string(vocab));
        }
    }
}

Codebooks rvq_train(const Tensor& features, std::size_t k, std::size_t vocab, const RvqConfig& cfg) {
    if (k == 0 || vocab == 0) {
        throw ContractError("RVQ needs at least one stage and one code");
    }
    const std::size_t n = features.rows(), d = features.cols();
    if (n < vocab) {
        throw ContractError("insufficient data: " + std::to_string(n) + " feature rows for a codebook of " +
                            std::to_string(vocab));
    }
    if (!features.all_finite()) {
        throw NumericError("RVQ training features contain NaN or Inf");
    }
    Codebooks cb;
    cb.vocab = vocab;
    cb.dim = d;
    Tensor residual = Tensor::matrix(n, d);
    std::copy(features.values().begin(), features.values().end(), residual.values().begin());
    std::vector<std::uint32_t> idx(n);
    std::vector<double> dist(n);
    std::vector<double> sums(vocab * d);
    std::vector<std::size_t> counts(vocab);
    for (std::size_t stage = 0; stage < k; ++stage) {
        Tensor c = farthest_point_init(residual, vocab, cfg.seed + stage);
        for (std::size_t it = 0; it < cfg.iterations; ++it) {
            assign(residual, c, idx, dist);
            std::fill(sums.begin(), sums.end(), 0.0);
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = 0; i < n; ++i) {
                ++counts[idx[i]];
                for (std::size_t q = 0; q < d; ++q) {
                    sums[idx[i] * d + q] += residual(i, q);
                }
            }
            for (std::size_t j = 0; j < vocab; ++j) {
                if (counts[j] == 0) {
                    continue;  // empty cluster keeps its centroid
                }
                for (std::size_t q = 0; q < d; ++q) {
                    c(j, q) = sums[j * d + q] / static_cast<double>(counts[j]);
                }
            }
        }
        assign(residual, c, idx, dist);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t q = 0; q < d; ++q) {
                residual(i, q) -= c(idx[i], q);
            }
        }
        cb.stages.push_back(std::move(c));
    }
    return cb;
}

TokenGrid quantize(const Tensor& features, const Codebooks& cb) {
    if (cb.k() == 0) {
        throw ContractError("codebooks have zero stages");
    }
    if (features.cols() != cb.dim) {
        throw DimensionError("feature dim " + std::to_string(features.cols()) + " does not match codebook dim " +
                             std::to_string(cb.dim));
    }
    const std::size_t n = features.rows(), d = cb.dim;
    TokenGrid grid;
    grid.t_a = n;
    grid.k = cb.k();
    grid.vocab = cb.vocab;
    grid.tokens.resize(n * grid.k);
    Tensor residual = Tensor::matrix(n, d);
    std::copy(features.values().begin(), features.values().end(), residual.values().begin());
    std::vector<std::uint32_t> idx(n);
    std::vector<double> dist(n);
    for (std::size_t stage = 0; stage < cb.k(); ++stage) {
        const Tensor& c = cb.stages[stage];
        assign(residual, c, idx, dist);
        for (std::size_t i = 0; i < n; ++i) {
            grid.at(i, stage) = idx[i];
            for (std::size_t q = 0; q < d; ++q) {
                residual(i, q) -= c(idx[i], q);
            }
        }
    }
    return grid;
}

Tensor dequantize(const TokenGrid& grid, const Codebooks& cb, std::size_t stages) {
    grid.validate();
    if (grid.k != cb.k() || grid.vocab != cb.vocab) {
        throw DimensionError("token grid (K=" + std::to_string(grid.k) + ", vocab=" + std::to_string(grid.vocab) +
                             ") does not match codebooks (K=" + std::to_string(cb.k()) +
                             ", vocab=" + std::to_string(cb.vocab) + ")");
    }
    if (stages == 0) {
        stages = cb.k();
    }
    if (stages > cb.k()) {
        throw ContractError("cannot decode with " + std::to_string(stages) + " of " + std::to_string(cb.k()) +
                            " stages");
    }
    Tensor out = Tensor::matrix(grid.t_a, cb.dim);
    for (std::size_t i = 0; i < grid.t_a; ++i) {
        for (std::size_t stage = 0; stage < stages; ++stage) {
            const auto centroid = cb.stages[stage].row(grid.at(i, stage));
            for (std::size_t q = 0; q < cb.dim; ++q) {
                out(i, q) += centroid[q];
            }
        }
    }
    return out;
}

double reconstruction_error(const Tensor& features, const TokenGrid& grid, const Codebooks& cb, std::size_t stages) {
    const Tensor rec = dequantize(grid, cb, stages);
    if (rec.rows() != features.rows() || rec.cols() != features.cols()) {
        throw DimensionError("reconstruction shape differs from the features");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < rec.size(); ++i) {
        const double diff = rec[i] - features[i];
        total += diff * diff;
    }
    return rec.rows() == 0 ? 0.0 : total / static_cast<double>(rec.rows());
}

Tensor audio_features(const signal::Waveform& w, std::size_t bands, std::size_t window) {
    const std::size_t hop = signal::token_hop(w.sample_rate);
    const Tensor spec = signal::stft_magnitude(w, window, hop);
    const Tensor mel = signal::mel_log_features(spec, w.sample_rate, bands);
    const std::size_t t_a = timeline_length(w.samples.size(), w.sample_rate);
    Tensor out = Tensor::matrix(t_a, bands);
    for (std::size_t t = 0; t < t_a; ++t) {
        const auto src = mel.row(std::min(t, mel.rows() - 1));
        std::copy(src.begin(), src.end(), out.row(t).begin());
    }
    return out;
}

}  // namespace beatforge::codec
