#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>

namespace procscore {

using Rng = std::mt19937_64;

// Seed splitting. Every random stream in the pipeline is derived from a
// master seed as derive_seed(master, stream_tag, index), so that adding a
// consumer never shifts the draws of another one.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index = 0);

// Runs fn(i) for i in [0, n) on up to `threads` workers. Callers write into
// preallocated slots indexed by i, so results do not depend on scheduling.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

// Shortest round-trip decimal representation.
std::string format_double(double v);

}  // namespace procscore
