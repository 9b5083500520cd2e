#pragma once

#include <array>
#include <span>
#include <vector>

#include "ntrade/market_data.hpp"

namespace ntrade {

enum class CmfvMode {
  /// ((C - L) - (H - C)) / (H - L) * V
  Standard,
  /// (H - C[t-1]) / (H - L) * V.
  Literal,
};

struct IndicatorConfig {
  int sma_fast = 5;
  int sma_slow = 10;
  int stoch_fastk = 14;
  int stoch_slowk = 3;
  int stoch_slowd = 3;
  int willr_n = 14;
  int macd_fast = 12;
  int macd_slow = 26;
  int macd_signal = 9;
  int cci_n = 14;
  int rsi_n = 14;
  int adosc_fast = 3;
  int adosc_slow = 10;
  int adosc_zscore_len = 50;
  CmfvMode cmfv = CmfvMode::Standard;

  /// Throws Error{InvalidArgument} on a non-positive period or fast >= slow.
  void validate() const;
  /// Smallest bar index at which every indicator is defined.
  std::size_t required_warmup() const;
};

inline constexpr std::size_t kFeatureCount = 11;

/// Network inputs for one bar, in the fixed input order.
struct FeatureVector {
  double long_position = 0.0;
  double short_position = 0.0;
  double sma5 = 0.0;
  double sma10 = 0.0;
  double slow_k = 0.0;
  double slow_d = 0.0;
  double willr = 0.0;
  double macd_diff = 0.0;
  double cci = 0.0;
  double rsi = 0.0;
  double adosc = 0.0;

  std::array<double, kFeatureCount> as_inputs() const {
    return {long_position, short_position, sma5, sma10, slow_k, slow_d, willr, macd_diff, cci, rsi, adosc};
  }
};

// Point indicators. `t` indexes the input spans; every one of them reads only
// values at indices <= t and throws Error{InsufficientHistory} when t is not
// primed yet.

/// C[t] / mean(C[t-n+1..t]).
double sma_ratio(std::span<const double> closes, int n, std::size_t t);

struct Stochastic {
  double slow_k = 50.0;
  double slow_d = 50.0;
};
Stochastic stochastic(std::span<const double> high, std::span<const double> low, std::span<const double> close,
                      const IndicatorConfig& cfg, std::size_t t);

/// Williams %R in [-100, 0]; -50 when the range is flat.
double willr(std::span<const double> high, std::span<const double> low, std::span<const double> close, int n,
             std::size_t t);

/// (MACD[t] - MACD[t-1]) / C[t] with MACD = DIFF - EMA_signal(DIFF).
double macd_diff(std::span<const double> closes, const IndicatorConfig& cfg, std::size_t t);

double cci(std::span<const double> high, std::span<const double> low, std::span<const double> close, int n,
           std::size_t t);

double rsi(std::span<const double> closes, int n, std::size_t t);

/// Z-scored Chaikin A/D oscillator.
double adosc(std::span<const double> high, std::span<const double> low, std::span<const double> close,
             std::span<const double> volume, const IndicatorConfig& cfg, std::size_t t);

/// Raw (un-normalized) A/D oscillator series, EMA_fast(AD) - EMA_slow(AD).
std::vector<double> adosc_raw_series(std::span<const double> high, std::span<const double> low,
                                     std::span<const double> close, std::span<const double> volume,
                                     const IndicatorConfig& cfg);

/// EMA(t) = EMA(t-1) * (n-1)/n + x[t]/n, seeded with x[0].
std::vector<double> ema(std::span<const double> values, int n);

/// Full indicator columns over an adjusted series; entries before an
/// indicator is primed are NaN.
struct IndicatorColumns {
  std::vector<double> sma_fast, sma_slow, slow_k, slow_d, willr, macd_diff, cci, rsi, adosc;
};
IndicatorColumns compute_indicators(const AdjustedSeries& s, const IndicatorConfig& cfg);

/// One vector per tradable bar of the window, positions zeroed.
std::vector<FeatureVector> build_features(const SeriesWindow& window, const IndicatorConfig& cfg);

}  // namespace ntrade
