#pragma once

// Shared fixtures for the unit and acceptance tests: synthetic corpora,
// hand-wired genomes and naive indicator reference implementations written
// straight from the definitions (prefix recomputation, no shared helpers with
// the library).

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "ntrade/backtest.hpp"
#include "ntrade/indicators.hpp"
#include "ntrade/market_data.hpp"
#include "ntrade/neat.hpp"

namespace ntrade::testing {

inline MarketData synthetic_market(std::size_t n_tickers, std::size_t n_bars, std::uint64_t seed,
                                   const SyntheticParams& params = {}) {
  std::vector<Bar> all;
  for (std::size_t i = 0; i < n_tickers; ++i) {
    auto bars = generate_synthetic("T" + std::to_string(i), n_bars, seed + 1000 * i, params);
    all.insert(all.end(), bars.begin(), bars.end());
  }
  return MarketData(std::move(all));
}

/// Window over bars[first .. first + warmup + trade) of one series.
inline SeriesWindow slice_window(const std::vector<Bar>& bars, std::size_t first, std::size_t warmup,
                                 std::size_t trade) {
  SeriesWindow w;
  w.ticker = bars.at(first).ticker;
  w.bars.assign(bars.begin() + static_cast<std::ptrdiff_t>(first),
                bars.begin() + static_cast<std::ptrdiff_t>(first + warmup + trade));
  w.warmup_len = warmup;
  w.trade_len = trade;
  return w;
}

/// Seed topology with every weight zero except bias -> (buy, sell, volume).
inline neat::Genome bias_wired_genome(double buy, double sell, double volume) {
  neat::InnovationLedger ledger;
  Rng rng(0);
  neat::Genome g = neat::seed_genome(ledger, rng, {});
  for (auto& c : g.connections) {
    c.weight = 0.0;
    if (c.in_node == neat::kBiasNode) {
      if (c.out_node == neat::kFirstOutput) c.weight = buy;
      if (c.out_node == neat::kFirstOutput + 1) c.weight = sell;
      if (c.out_node == neat::kFirstOutput + 2) c.weight = volume;
    }
  }
  return g;
}

/// Emits (buy ~ 1, sell ~ 0, volume ~ 1) on every bar.
inline neat::Genome always_buy_genome() { return bias_wired_genome(10.0, -10.0, 10.0); }
/// Never crosses the 0.5 threshold.
inline neat::Genome inert_genome() { return bias_wired_genome(-10.0, -10.0, 0.0); }

inline bool near_rel(double a, double b, double rel, double abs_floor) {
  if (std::isnan(a) || std::isnan(b)) return false;
  return std::abs(a - b) <= std::max(rel * std::max(std::abs(a), std::abs(b)), abs_floor);
}

namespace oracle {

using Vec = std::vector<double>;

inline double mean_of(const Vec& x, std::size_t from, std::size_t to_inclusive) {
  double s = 0.0;
  for (std::size_t i = from; i <= to_inclusive; ++i) s += x[i];
  return s / static_cast<double>(to_inclusive - from + 1);
}

inline double sma_ratio(const Vec& c, int n, std::size_t t) {
  return c[t] / mean_of(c, t + 1 - static_cast<std::size_t>(n), t);
}

inline double fast_k(const Vec& h, const Vec& l, const Vec& c, int n, std::size_t t) {
  double hh = -INFINITY, ll = INFINITY;
  for (std::size_t i = t + 1 - static_cast<std::size_t>(n); i <= t; ++i) {
    hh = std::max(hh, h[i]);
    ll = std::min(ll, l[i]);
  }
  return hh == ll ? 50.0 : 100.0 * (c[t] - ll) / (hh - ll);
}

inline double slow_k(const Vec& h, const Vec& l, const Vec& c, const IndicatorConfig& cfg, std::size_t t) {
  double s = 0.0;
  for (int j = 0; j < cfg.stoch_slowk; ++j) s += fast_k(h, l, c, cfg.stoch_fastk, t - static_cast<std::size_t>(j));
  return s / cfg.stoch_slowk;
}

inline double slow_d(const Vec& h, const Vec& l, const Vec& c, const IndicatorConfig& cfg, std::size_t t) {
  double s = 0.0;
  for (int j = 0; j < cfg.stoch_slowd; ++j) s += slow_k(h, l, c, cfg, t - static_cast<std::size_t>(j));
  return s / cfg.stoch_slowd;
}

inline double willr(const Vec& h, const Vec& l, const Vec& c, int n, std::size_t t) {
  double hh = -INFINITY, ll = INFINITY;
  for (std::size_t i = t + 1 - static_cast<std::size_t>(n); i <= t; ++i) {
    hh = std::max(hh, h[i]);
    ll = std::min(ll, l[i]);
  }
  return hh == ll ? -50.0 : -100.0 * (hh - c[t]) / (hh - ll);
}

/// EMA recursion over x[0..=t] seeded with x[0], rerun from scratch.
inline Vec ema_prefix(const Vec& x, int n, std::size_t t) {
  Vec out(t + 1);
  out[0] = x[0];
  for (std::size_t i = 1; i <= t; ++i) out[i] = out[i - 1] * (n - 1) / n + x[i] / n;
  return out;
}

inline double macd_diff(const Vec& c, const IndicatorConfig& cfg, std::size_t t) {
  const Vec fast = ema_prefix(c, cfg.macd_fast, t), slow = ema_prefix(c, cfg.macd_slow, t);
  Vec diff(t + 1);
  for (std::size_t i = 0; i <= t; ++i) diff[i] = fast[i] - slow[i];
  const Vec signal = ema_prefix(diff, cfg.macd_signal, t);
  const double now = diff[t] - signal[t], before = diff[t - 1] - signal[t - 1];
  return (now - before) / c[t];
}

inline double cci(const Vec& h, const Vec& l, const Vec& c, int n, std::size_t t) {
  Vec m;
  for (std::size_t i = t + 1 - static_cast<std::size_t>(n); i <= t; ++i) m.push_back((h[i] + l[i] + c[i]) / 3.0);
  double sm = 0.0;
  for (double v : m) sm += v;
  sm /= n;
  double d = 0.0;
  for (double v : m) d += std::abs(v - sm);
  d /= n;
  if (d <= 1e-12 * std::abs(sm)) return 0.0;
  return (m.back() - sm) / (0.015 * d);
}

inline double rsi(const Vec& c, int n, std::size_t t) {
  double up = 0.0, dw = 0.0;
  for (std::size_t i = t + 1 - static_cast<std::size_t>(n); i <= t; ++i) {
    up += std::max(c[i] - c[i - 1], 0.0);
    dw += std::max(c[i - 1] - c[i], 0.0);
  }
  up /= n;
  dw /= n;
  if (up == 0.0 && dw == 0.0) return 50.0;
  if (dw == 0.0) return 100.0;
  if (up == 0.0) return 0.0;
  return 100.0 - 100.0 / (1.0 + up / dw);
}

/// Raw oscillator EMA_fast(AD) - EMA_slow(AD) over the prefix ending at t.
inline Vec adosc_raw_prefix(const Vec& h, const Vec& l, const Vec& c, const Vec& v, const IndicatorConfig& cfg,
                            std::size_t t) {
  Vec ad(t + 1);
  double acc = 0.0;
  for (std::size_t i = 0; i <= t; ++i) {
    const double range = h[i] - l[i];
    acc += range == 0.0 ? 0.0 : ((c[i] - l[i]) - (h[i] - c[i])) / range * v[i];
    ad[i] = acc;
  }
  const Vec fast = ema_prefix(ad, cfg.adosc_fast, t), slow = ema_prefix(ad, cfg.adosc_slow, t);
  Vec raw(t + 1);
  for (std::size_t i = 0; i <= t; ++i) raw[i] = fast[i] - slow[i];
  return raw;
}

inline double adosc(const Vec& h, const Vec& l, const Vec& c, const Vec& v, const IndicatorConfig& cfg,
                    std::size_t t) {
  const Vec raw = adosc_raw_prefix(h, l, c, v, cfg, t);
  const std::size_t n = static_cast<std::size_t>(cfg.adosc_zscore_len);
  const double mu = mean_of(raw, t + 1 - n, t);
  double ss = 0.0, scale = 0.0;
  for (std::size_t i = t + 1 - n; i <= t; ++i) {
    ss += (raw[i] - mu) * (raw[i] - mu);
    scale = std::max(scale, std::abs(raw[i]));
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd <= 1e-12 * scale) return 0.0;
  return (raw[t] - mu) / sd;
}

}  // namespace oracle

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("ntrade-" + tag + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace ntrade::testing
