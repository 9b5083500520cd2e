#include "ntrade/common.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace ntrade {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::MissingFile: return "missing file";
    case ErrorKind::MalformedHeader: return "malformed header";
    case ErrorKind::StoreIo: return "store i/o";
    case ErrorKind::InsufficientHistory: return "insufficient history";
    case ErrorKind::UnknownTicker: return "unknown ticker";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::InvalidGenome: return "invalid genome";
    case ErrorKind::Format: return "format error";
  }
  return "error";
}

namespace {

bool parse_uint(std::string_view s, int& out) {
  if (s.empty()) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace

Date parse_date(std::string_view text) {
  // Accept a trailing time component ("2020-01-02 00:00:00") by ignoring it.
  if (text.size() > 10 && (text[10] == ' ' || text[10] == 'T')) text = text.substr(0, 10);
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_uint(text.substr(0, 4), y) ||
      !parse_uint(text.substr(5, 2), m) || !parse_uint(text.substr(8, 2), d)) {
    throw Error(ErrorKind::Format, "bad date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw Error(ErrorKind::Format, "invalid calendar date '" + std::string(text) + "'");
  return Date{ymd};
}

std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "Rng::index(0)");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t range = static_cast<std::uint64_t>(n);
  // 2^64 mod range; draws at or above 2^64 - rem would bias the low residues.
  const std::uint64_t rem = (UINT64_MAX % range + 1) % range;
  std::uint64_t x = engine_();
  if (rem != 0) {
    const std::uint64_t limit = 0 - rem;
    while (x >= limit) x = engine_();
  }
  return static_cast<std::size_t>(x % range);
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw Error(ErrorKind::Format, "corrupt rng state");
}

}  // namespace ntrade
