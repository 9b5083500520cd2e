#pragma once

#include <chrono>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ntrade {

enum class ErrorKind {
  InvalidArgument,
  MissingFile,
  MalformedHeader,
  StoreIo,
  InsufficientHistory,
  UnknownTicker,
  NonFinite,
  InvalidGenome,
  Format,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the engine carries a kind so callers (the CLI in
/// particular) can tell data problems from usage and runtime problems.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD. Throws Error{Format} on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);
/// Signed count of calendar days from a to b.
inline std::int64_t days_between(Date a, Date b) { return (b - a).count(); }

/// Deterministic RNG used everywhere in the engine. The uniform helpers are
/// written out rather than taken from <random> distributions because those are
/// not specified bit-for-bit across standard libraries, and checkpoints must
/// resume the same trajectory.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be > 0.
  std::size_t index(std::size_t n);
  bool chance(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (no cached second variate).
  double normal();

  std::string state() const;
  void set_state(const std::string& s);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ntrade
