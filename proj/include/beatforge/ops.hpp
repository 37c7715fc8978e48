#pragma once

// Differentiable ops on Graph variables. All matrices are rank-2 row-major;
// a rank-1 tensor of length n is treated as a 1 x n row where noted.

#include "beatforge/autodiff.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace beatforge::nn {

// Score written into masked (future) attention positions. Finite, and
// exp(kMaskedScore - rowmax) underflows to exactly 0.
inline constexpr double kMaskedScore = -1e30;

Var matmul(Var a, Var b);
// a (m x k) times b^T where b is n x k.
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// Adds a length-n bias to every row of an m x n matrix.
Var add_bias(Var a, Var bias);
Var sum(Var a);
// 1 x n mean over rows.
Var mean_rows(Var a);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

// tanh approximation of GELU.
Var gelu(Var a);
// axis 1: each row sums to 1; axis 0: each column sums to 1.
Var softmax(Var a, int axis = 1);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
// Square score matrix with entries j > i replaced by kMaskedScore.
Var causal_mask(Var scores);
// Gathers table rows; indices must be < table rows.
Var embedding(Var table, std::span<const std::uint32_t> indices);
// x holds (t * h * w) tokens of c channels, ordered t, y, x. Averages
// non-overlapping stride x stride spatial windows.
Var spatial_avg_pool(Var x, std::size_t t, std::size_t h, std::size_t w, std::size_t stride);
// Divides every row by its Euclidean norm; a row with norm <= eps is a NumericError.
Var normalize_rows(Var a, double eps = 1e-12);
// (1/normalizer) * sum_i weights[i] * -log softmax(logits_i)[targets[i]].
// Rows with target < 0 are ignored.
Var cross_entropy(Var logits, std::span<const std::int32_t> targets, std::span<const double> weights,
                  double normalizer);

}  // namespace beatforge::nn
