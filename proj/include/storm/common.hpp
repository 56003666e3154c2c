#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace storm {

// Malformed user input (files, configs, flag values). The CLI maps this to
// exit code 2; anything else escaping to main is an internal error (exit 3).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A broken internal invariant; never caused by user input alone.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Deterministic random draws. std::mt19937_64 output is pinned by the
// standard; the derived draws below avoid std::uniform_real_distribution and
// friends, whose sequences differ between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller.
  double gaussian();

  // Uniform index in [0, n). n must be positive.
  std::size_t pick(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[pick(i)]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Folds a string salt into a seed (FNV-1a) so that derived seeds, e.g. one
// per machine spec, stay stable across runs.
std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt);

// Diagnostics on stderr, gated by the STORM_LOG environment variable
// (error|warn|info|debug, default warn).
enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };
bool log_enabled(LogLevel level);
void log(LogLevel level, const std::string& message);

}  // namespace storm
