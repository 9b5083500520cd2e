#pragma once

#include <string>
#include <string_view>

#include "ntrade/backtest.hpp"

namespace ntrade {

enum class FitnessKind { Sqn, MultiObjective, MultiObjectiveActive };

/// CLI names: "sqn", "mo", "mo-active".
FitnessKind parse_fitness_kind(std::string_view name);
std::string_view to_string(FitnessKind kind);

struct FitnessOption {
  FitnessKind kind = FitnessKind::MultiObjectiveActive;
  double w_relative = 1.5;
  double w_drawdown = 0.5;
  double w_trades = 0.0005;
  double w_duration = 1.0;
  /// Scale SQN by sqrt(#trades) instead of #trades.
  bool sqrt_trades = false;

  void validate() const;
};

/// SQN of the report's trade list.
double fitness1(const BacktestReport& r, const FitnessOption& opt = {});
/// pnl + 1.5 * pnl_relative - 0.5 * max_drawdown (percent units).
double fitness2(const BacktestReport& r, const FitnessOption& opt = {});
/// fitness2 + 0.0005 * n_trades - avg_duration_days.
double fitness3(const BacktestReport& r, const FitnessOption& opt = {});

double evaluate_fitness(const BacktestReport& r, const FitnessOption& opt);

}  // namespace ntrade
