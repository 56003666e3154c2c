#include "storm/common.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <mutex>

namespace storm {

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::pick(std::size_t n) {
  if (n == 0) {
    throw InternalError("Rng::pick called with n = 0");
  }
  // Rejection sampling keeps the draw unbiased and deterministic.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = eng_();
  while (x >= limit) {
    x = eng_();
  }
  return static_cast<std::size_t>(x % n);
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& salt) {
  std::uint64_t h = 14695981039346656037ull ^ seed;
  for (unsigned char c : salt) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

LogLevel resolve_level() {
  const char* env = std::getenv("STORM_LOG");
  if (env == nullptr) {
    return LogLevel::warn;
  }
  const std::string value(env);
  if (value == "error") return LogLevel::error;
  if (value == "warn") return LogLevel::warn;
  if (value == "info") return LogLevel::info;
  if (value == "debug") return LogLevel::debug;
  return LogLevel::warn;
}

const char* level_tag(LogLevel level) {
  switch (level) {
    case LogLevel::error: return "error";
    case LogLevel::warn: return "warn";
    case LogLevel::info: return "info";
    case LogLevel::debug: return "debug";
  }
  return "?";
}

}  // namespace

bool log_enabled(LogLevel level) {
  static const LogLevel threshold = resolve_level();
  return static_cast<int>(level) <= static_cast<int>(threshold);
}

void log(LogLevel level, const std::string& message) {
  if (!log_enabled(level)) {
    return;
  }
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  std::cerr << "storm[" << level_tag(level) << "] " << message << "\n";
}

}  // namespace storm
