#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ntrade/indicators.hpp"
#include "ntrade/market_data.hpp"
#include "ntrade/neat.hpp"

namespace ntrade {

enum class ActionKind { Hold, Buy, Sell };

struct Action {
  ActionKind kind = ActionKind::Hold;
  /// Order size as a fraction of total equity, in [0, 1].
  double fraction = 0.0;

  bool operator==(const Action&) const = default;
};

inline constexpr double kActionThreshold = 0.5;

/// Maps (buy, sell, volume) network outputs to an order. A side fires above
/// 0.5; if both fire the larger one wins and an exact tie holds.
Action decide(const std::array<double, 3>& outputs);

struct BrokerConfig {
  double initial_cash = 100'000.0;
  /// Percent of traded notional charged on every fill.
  double commission_pct = 0.0;
  /// Orders smaller than this fraction of equity are ignored.
  double volume_floor = 0.01;
  /// Largest short notional as a multiple of equity.
  double max_short_leverage = 1.0;

  void validate() const;
};

enum class Side { Long, Short };

struct TradeRecord {
  Side direction = Side::Long;
  std::size_t entry_bar = 0;
  std::size_t exit_bar = 0;
  Date entry_date{};
  Date exit_date{};
  double entry_price = 0.0;
  double exit_price = 0.0;
  double size = 0.0;
  double fees = 0.0;
  double pnl = 0.0;
  double pnl_pct = 0.0;
  std::size_t duration_bars = 0;
  double duration_days = 0.0;
};

/// One execution. `shares` is signed (+ buys, - sells).
struct Fill {
  std::size_t bar = 0;
  double shares = 0.0;
  double price = 0.0;
  double fee = 0.0;
};

struct BacktestReport {
  std::string ticker;
  Date start{};
  Date end{};
  double pnl_pct = 0.0;
  double bnh_pct = 0.0;
  double pnl_relative = 0.0;
  double max_drawdown_pct = 0.0;
  std::size_t n_trades = 0;
  std::size_t n_wins = 0;
  double avg_duration_days = 0.0;
  double exposure_pct = 0.0;
  double sqn = 0.0;
  double win_rate = 0.0;
  bool bankrupt = false;
  std::vector<Date> dates;
  std::vector<double> equity_curve;
  std::vector<TradeRecord> trades;
  std::vector<Fill> fills;
};

/// Called once per tradable bar except the last, with the position fractions
/// already written into the feature vector.
using Policy = std::function<Action(std::size_t bar, const FeatureVector& features)>;

/// Broker simulation. A decision taken at bar t fills at bar t+1's open; the
/// last bar's decision is never taken and every position is closed at the
/// final close. Exposure counts the bars 1..T-1, the ones on which a position
/// can be held. `features` may be empty (zero vectors are used).
BacktestReport run_policy(const SeriesWindow& window, std::span<const FeatureVector> features, const Policy& policy,
                          const BrokerConfig& cfg);

BacktestReport run_backtest(const neat::Genome& genome, const SeriesWindow& window,
                            std::span<const FeatureVector> features, const BrokerConfig& cfg);

/// Full-equity long at the first fillable open, closed at the final close.
BacktestReport buy_and_hold(const SeriesWindow& window, const BrokerConfig& cfg);

/// Largest peak-to-trough decline in percent.
double max_drawdown(std::span<const double> equity_curve);

/// n * mean(pnl) / sample_std(pnl), or sqrt(n) * ... when sqrt_trades is set.
/// Zero for fewer than two trades or zero dispersion.
double sqn(std::span<const TradeRecord> trades, bool sqrt_trades = false);
double sqn(std::span<const double> pnls, bool sqrt_trades = false);

}  // namespace ntrade
