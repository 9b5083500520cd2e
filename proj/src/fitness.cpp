#include "ntrade/fitness.hpp"

#include <cmath>
#include <string>

namespace ntrade {

FitnessKind parse_fitness_kind(std::string_view name) {
  if (name == "sqn") return FitnessKind::Sqn;
  if (name == "mo") return FitnessKind::MultiObjective;
  if (name == "mo-active") return FitnessKind::MultiObjectiveActive;
  throw Error(ErrorKind::InvalidArgument, "unknown fitness '" + std::string(name) + "' (sqn|mo|mo-active)");
}

std::string_view to_string(FitnessKind kind) {
  switch (kind) {
    case FitnessKind::Sqn: return "sqn";
    case FitnessKind::MultiObjective: return "mo";
    case FitnessKind::MultiObjectiveActive: return "mo-active";
  }
  return "?";
}

void FitnessOption::validate() const {
  for (double w : {w_relative, w_drawdown, w_trades, w_duration})
    if (!std::isfinite(w)) throw Error(ErrorKind::InvalidArgument, "fitness weights must be finite");
}

double fitness1(const BacktestReport& r, const FitnessOption& opt) {
  return opt.sqrt_trades ? sqn(r.trades, true) : r.sqn;
}

double fitness2(const BacktestReport& r, const FitnessOption& opt) {
  return r.pnl_pct + opt.w_relative * r.pnl_relative - opt.w_drawdown * r.max_drawdown_pct;
}

double fitness3(const BacktestReport& r, const FitnessOption& opt) {
  return fitness2(r, opt) + opt.w_trades * static_cast<double>(r.n_trades) - opt.w_duration * r.avg_duration_days;
}

double evaluate_fitness(const BacktestReport& r, const FitnessOption& opt) {
  switch (opt.kind) {
    case FitnessKind::Sqn: return fitness1(r, opt);
    case FitnessKind::MultiObjective: return fitness2(r, opt);
    case FitnessKind::MultiObjectiveActive: return fitness3(r, opt);
  }
  return 0.0;
}

}  // namespace ntrade
