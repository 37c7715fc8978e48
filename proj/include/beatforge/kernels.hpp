#pragma once

// Data-parallel inner loops shared by the numeric modules.
//
// Each kernel exists twice: the OpenMP version in beatforge::kernels, used by
// the library, and a plain serial version in beatforge::kernels::reference,
// kept for equivalence tests and the benchmark. The parallel versions split
// work over independent output rows only, so every output element is computed
// with the same operation order as the reference. gemm, nearest_centroid and
// frame_abs_diff are therefore bitwise identical to their references;
// stft_magnitude uses an FFT and agrees with the direct DFT reference to
// rounding.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace beatforge::kernels {

// C (+)= A * B with A m x k, B k x n, C m x n (all row-major).
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C (+)= A * B^T with A m x k, B n x k.
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C (+)= A^T * B with A k x m, B k x n.
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);

// Magnitude spectrogram with a caller-supplied analysis window.
// Output is frames x (window/2 + 1), frames = 1 + (len - window) / hop.
std::vector<double> stft_magnitude(std::span<const double> samples, std::span<const double> window,
                                   std::size_t hop, std::size_t& frames_out);

// For each of n points (dim d) the index of the nearest of v centroids by
// squared Euclidean distance; ties go to the lowest index.
void nearest_centroid(std::span<const double> points, std::span<const double> centroids,
                      std::size_t n, std::size_t v, std::size_t d, std::span<std::uint32_t> index_out,
                      std::span<double> dist2_out);

// Mean absolute difference between consecutive frames of a (T x pixels) stack.
std::vector<double> frame_abs_diff(std::span<const double> frames, std::size_t count, std::size_t pixels);

// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

namespace reference {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// Direct O(N^2) DFT per frame.
std::vector<double> stft_magnitude(std::span<const double> samples, std::span<const double> window,
                                   std::size_t hop, std::size_t& frames_out);
void nearest_centroid(std::span<const double> points, std::span<const double> centroids,
                      std::size_t n, std::size_t v, std::size_t d, std::span<std::uint32_t> index_out,
                      std::span<double> dist2_out);
std::vector<double> frame_abs_diff(std::span<const double> frames, std::size_t count, std::size_t pixels);

}  // namespace reference

}  // namespace beatforge::kernels
