#pragma once

// Direct-evaluation references for the alignment weights and the MV-Align matcher.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace beatforge::oracle {

// Weight 1 where the video has a beat and any music beat lies within delta, alpha elsewhere.
std::vector<double> brute_force_weights(const std::vector<std::uint8_t>& pv, const std::vector<std::uint8_t>& pa,
                                        int delta, double alpha);

// Bipartite graph with an edge for every (video, music) pair within delta;
// a beat is matched when it has at least one edge. Returns {precision, recall}.
std::pair<double, double> brute_force_pr(const std::vector<std::uint8_t>& music,
                                         const std::vector<std::uint8_t>& video, int delta);

std::vector<std::uint8_t> random_beats(std::mt19937_64& rng, std::size_t n, double p);

}  // namespace beatforge::oracle
