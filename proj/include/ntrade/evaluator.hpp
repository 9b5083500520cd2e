#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ntrade/backtest.hpp"
#include "ntrade/indicators.hpp"
#include "ntrade/market_data.hpp"
#include "ntrade/neat.hpp"

namespace ntrade {

/// Shared inputs of the selection and comparison protocols.
struct EvalContext {
  IndicatorConfig indicators;
  BrokerConfig broker;
  std::size_t warmup_len = 50;
  std::size_t jobs = 1;
};

struct SelectionCriteria {
  std::size_t n_runs = 20;
  int window_days = 365;
  /// Average trade duration must be strictly below this.
  double max_avg_duration_days = 90.0;
  /// Inclusive band on the per-run average trade count.
  double min_trades = 5.0;
  double max_trades = 200.0;

  void validate() const;
};

struct IndividualSummary {
  std::size_t index = 0;
  std::int64_t id = 0;
  std::size_t runs = 0;
  double mean_sqn = 0.0;
  double mean_duration_days = 0.0;
  double mean_trades = 0.0;
  double mean_return_pct = 0.0;
  bool eligible = false;
  std::string reason;
};

struct WindowInfo {
  std::string ticker;
  Date start{};
  Date end{};
  std::size_t trade_len = 0;
};

struct SelectionResult {
  std::size_t champion_index = 0;
  std::int64_t champion_id = 0;
  /// No individual passed the filters; ranked by mean SQN alone.
  bool relaxed = false;
  std::vector<WindowInfo> windows;
  std::vector<IndividualSummary> summaries;
};

/// Backtests every individual on the same `n_runs` sampled windows, drops
/// those failing the duration or trade-count filters, and picks the highest
/// mean SQN (lowest index on ties).
SelectionResult select_champion(std::span<const neat::Genome> population, const MarketData& data,
                                const SelectionCriteria& criteria, const EvalContext& ctx, std::uint64_t seed);

std::string render_selection(const SelectionResult& r);
std::string selection_csv(const SelectionResult& r);

struct RunRecord {
  std::size_t run_id = 0;
  std::string ticker;
  Date start{};
  Date end{};
  double model_return = 0.0;
  double bnh_return = 0.0;
  double model_exposure = 0.0;
  std::size_t n_trades = 0;
  double avg_duration = 0.0;
  std::size_t n_wins = 0;
  double bnh_exposure = 0.0;
};

struct ComparisonReport {
  std::size_t n_runs = 0;
  double avg_return_model = 0.0;
  double avg_return_bnh = 0.0;
  double std_return_model = 0.0;
  double std_return_bnh = 0.0;
  /// Model win rate counts trades: winning trades over all trades.
  std::size_t model_winning_trades = 0;
  std::size_t model_total_trades = 0;
  double win_rate_model = 0.0;
  /// False when the model never traded (win_rate_model is then 0).
  bool win_rate_model_defined = false;
  /// Buy & Hold win rate counts runs: positive-return runs over all runs.
  std::size_t bnh_positive_runs = 0;
  double win_rate_bnh = 0.0;
  std::size_t relative_wins_model = 0;
  std::size_t relative_wins_bnh = 0;
  std::size_t ties = 0;
  double exposure_model = 0.0;
  double exposure_bnh = 0.0;
  std::vector<RunRecord> runs;
};

/// Return gap (percentage points) below which a run counts as a tie.
inline constexpr double kTieTolerance = 1e-9;

/// Aggregates per-run records into the comparison metrics.
ComparisonReport aggregate(std::vector<RunRecord> runs);

/// Paired protocol: each sampled window is traded by the genome and by
/// Buy & Hold on identical bars.
ComparisonReport compare_vs_buy_and_hold(const neat::Genome& genome, const MarketData& data, std::size_t n_runs,
                                         int window_days, const EvalContext& ctx, std::uint64_t seed);

/// Rows: Average Return, Std of Return, Win Rate, Relative Win Rate, Exposure Time.
std::string render_comparison(const ComparisonReport& r);
std::string comparison_summary_csv(const ComparisonReport& r);

/// run_id,ticker,start,end,model_return,bnh_return,model_exposure,n_trades,
/// avg_duration,n_wins,bnh_exposure
std::string runs_csv(std::span<const RunRecord> runs);
std::vector<RunRecord> parse_runs_csv(const std::string& text);

/// Model return against Buy & Hold return per run, with the y = x diagonal
/// and a least-squares trend line.
std::string scatter_svg(std::span<const RunRecord> runs);
std::string scatter_csv(std::span<const RunRecord> runs);

}  // namespace ntrade
