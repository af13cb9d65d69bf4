#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace raschdif {

using Index = Eigen::Index;

// Malformed input, contract violations on data (bad CSV cells, empty subsets,
// degenerate items). The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Newton/EM failed to reach the requested tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate)
      : std::runtime_error(what), last_iterate_(std::move(last_iterate)) {}

  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }

 private:
  Eigen::VectorXd last_iterate_;
};

inline constexpr std::uint64_t kDefaultSeed = 20240617;

// Independent generator for substream `stream` of `seed`. Monte Carlo loops are
// split into fixed-size chunks, each with its own substream, so results do not
// depend on how chunks are scheduled onto threads.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

// Deterministic child seed for a labelled sub-computation (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Number of worker threads: RASCHDIF_THREADS if set and positive, else the
// hardware concurrency (at least 1).
unsigned thread_count();

// Runs body(chunk) for chunk in [0, chunks) on up to thread_count() threads.
void parallel_for_chunks(std::size_t chunks, const std::function<void(std::size_t)>& body);

}  // namespace raschdif
