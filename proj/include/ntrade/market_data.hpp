#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ntrade/common.hpp"

namespace ntrade {

/// One daily OHLCV row.
struct Bar {
  std::string ticker;
  Date date{};
  double open = 0.0;
  double high = 0.0;
  double low = 0.0;
  double close = 0.0;
  double adj_close = 0.0;
  double volume = 0.0;

  bool operator==(const Bar&) const = default;
};

/// Checks the bar invariants: finite positive prices, low <= min(open, close),
/// high >= max(open, close), finite non-negative volume.
bool is_valid(const Bar& bar);

/// A contiguous run of bars from one ticker: `warmup_len` priming bars followed
/// by `trade_len` tradable bars.
struct SeriesWindow {
  std::string ticker;
  std::vector<Bar> bars;
  std::size_t warmup_len = 0;
  std::size_t trade_len = 0;

  std::span<const Bar> trade_bars() const { return std::span<const Bar>(bars).subspan(warmup_len); }
  Date start_date() const { return bars.at(warmup_len).date; }
  Date end_date() const { return bars.back().date; }
};

/// Throws Error{InvalidArgument} if the window breaks its invariants.
void audit_window(const SeriesWindow& w, std::size_t min_warmup = 1);

struct DatasetStats {
  std::size_t ticker_count = 0;
  std::size_t row_count = 0;
  std::optional<Date> date_min;
  std::optional<Date> date_max;
  std::size_t rejected_row_count = 0;
};

/// Split- and dividend-consistent price arrays for a span of bars. Every price
/// is scaled by adj_close / close, so the close series is adj_close and
/// high/low stay consistent with it.
struct AdjustedSeries {
  std::vector<Date> dates;
  std::vector<double> open, high, low, close, volume;
  std::size_t size() const { return close.size(); }
};

AdjustedSeries adjust(std::span<const Bar> bars);

/// Immutable per-ticker bar arrays (sorted, one bar per date). This is what the
/// samplers and evaluators read; it is safe to share between threads.
class MarketData {
 public:
  MarketData() = default;
  /// Bars may arrive in any order; later duplicates of a (ticker, date) win.
  explicit MarketData(std::vector<Bar> bars);

  const std::vector<Bar>& series(const std::string& ticker) const;
  bool has(const std::string& ticker) const { return series_.count(ticker) != 0; }
  std::vector<std::string> tickers() const;
  std::size_t ticker_count() const { return series_.size(); }
  std::size_t longest_series() const;
  bool empty() const { return series_.empty(); }

 private:
  std::map<std::string, std::vector<Bar>> series_;
};

/// Single-file SQLite store keyed on (ticker, date). Use ":memory:" for an
/// ephemeral store. All members are serialized on an internal mutex.
class BarStore {
 public:
  explicit BarStore(const std::filesystem::path& path);
  ~BarStore();
  BarStore(const BarStore&) = delete;
  BarStore& operator=(const BarStore&) = delete;

  /// Inserts or replaces bars by (ticker, date). Invalid bars are skipped and
  /// counted in the return value.
  std::size_t upsert(std::span<const Bar> bars);
  /// Stats over the whole store; rejected_row_count is always 0 here.
  DatasetStats stats() const;
  MarketData snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable std::mutex mutex_;
};

/// Loads an 8-column CSV (Ticker,Datetime,Open,High,Low,Close,Adj_Close,Volume)
/// into the store. Returns whole-store stats with this file's rejected count.
DatasetStats ingest_csv(const std::filesystem::path& path, BarStore& store);

void write_csv(const std::filesystem::path& path, std::span<const Bar> bars);

struct SyntheticParams {
  double initial_price = 100.0;
  /// Mean of the per-bar log return.
  double drift = 0.0003;
  /// Standard deviation of the per-bar log return.
  double volatility = 0.012;
  /// Scale of the high/low wick noise, as a fraction of price.
  double wick = 0.004;
  double base_volume = 1.0e6;
  /// Optional deterministic multiplicative cycle on the close:
  /// close *= 1 + amplitude * sin(2*pi*t / period).
  double sine_amplitude = 0.0;
  double sine_period = 20.0;
  Date start = Date{std::chrono::year{2000} / 1 / 3};
};

/// Geometric Brownian motion bars on business days (Mon-Fri) from
/// params.start. Same (seed, params) yields identical output.
std::vector<Bar> generate_synthetic(const std::string& ticker, std::size_t n_bars, std::uint64_t seed,
                                    const SyntheticParams& params = {});

/// Picks a ticker uniformly among those with enough history, then a uniform
/// start bar. The trade section holds the bars dated in
/// [start, start + window_days); the warmup bars are the ones just before it.
SeriesWindow sample_window(const MarketData& data, int window_days, std::size_t warmup_len, Rng& rng);

/// Trade section = bars dated in [from, to] for `ticker`.
SeriesWindow window_for_range(const MarketData& data, const std::string& ticker, Date from, Date to,
                              std::size_t warmup_len);

/// True when some ticker can host a window of the given calendar span.
bool has_history_for(const MarketData& data, int window_days, std::size_t warmup_len);

}  // namespace ntrade
