// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <boost/math/distributions/students_t.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "ntrade/evaluator.hpp"
#include "ntrade/fitness.hpp"
#include "ntrade/trainer.hpp"
#include "support.hpp"

using namespace ntrade;
namespace oracle = ntrade::testing::oracle;
using ntrade::testing::near_rel;

namespace {

// Pinned tolerances.
constexpr double kIndicatorRel = 1e-9;
constexpr double kIndicatorAbsFloor = 1e-12;
constexpr double kBnhIdentityAbs = 1e-9;
constexpr double kAccountingRel = 1e-9;
constexpr double kAccountingAbsFloor = 1e-9;
constexpr double kFitnessAbs = 1e-12;
constexpr double kIndicatorBudgetSec = 30.0;
constexpr double kDeterminismBudgetSec = 300.0;
constexpr double kSignificance = 0.05;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Outcome indicator_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  const IndicatorConfig cfg;
  Rng rng(101);
  std::size_t checked = 0, mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    SyntheticParams p;
    p.initial_price = rng.uniform(1.0, 500.0);
    p.drift = rng.uniform(-0.003, 0.003);
    p.volatility = k % 10 == 0 ? 0.0 : rng.uniform(0.002, 0.05);
    p.wick = k % 10 == 0 ? 0.0 : rng.uniform(0.0, 0.02);
    p.base_volume = rng.uniform(1e3, 1e7);
    if (k % 3 == 0) {
      p.sine_amplitude = rng.uniform(0.0, 0.1);
      p.sine_period = rng.uniform(5.0, 40.0);
    }
    const std::size_t n = 70 + rng.index(90);
    const auto a = adjust(generate_synthetic("R", n, 5000 + static_cast<std::uint64_t>(k), p));
    const auto col = compute_indicators(a, cfg);
    for (std::size_t t = cfg.required_warmup(); t < a.size(); ++t) {
      const double pairs[][2] = {
          {col.sma_fast[t], oracle::sma_ratio(a.close, cfg.sma_fast, t)},
          {col.sma_slow[t], oracle::sma_ratio(a.close, cfg.sma_slow, t)},
          {col.slow_k[t], oracle::slow_k(a.high, a.low, a.close, cfg, t)},
          {col.slow_d[t], oracle::slow_d(a.high, a.low, a.close, cfg, t)},
          {col.willr[t], oracle::willr(a.high, a.low, a.close, cfg.willr_n, t)},
          {col.macd_diff[t], oracle::macd_diff(a.close, cfg, t)},
          {col.cci[t], oracle::cci(a.high, a.low, a.close, cfg.cci_n, t)},
          {col.rsi[t], oracle::rsi(a.close, cfg.rsi_n, t)},
          {col.adosc[t], oracle::adosc(a.high, a.low, a.close, a.volume, cfg, t)},
      };
      for (const auto& pr : pairs) {
        ++checked;
        if (!near_rel(pr[0], pr[1], kIndicatorRel, kIndicatorAbsFloor)) ++mismatches;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < kIndicatorBudgetSec,
          fmt("%.0f values on 1000 series, %.0f mismatches, %.2f s", static_cast<double>(checked),
              static_cast<double>(mismatches), secs)};
}

Outcome buy_and_hold_identity() {
  const auto data = ntrade::testing::synthetic_market(10, 1500, 202);
  const auto genome = ntrade::testing::always_buy_genome();
  const IndicatorConfig ind;
  const BrokerConfig broker;
  Rng rng(7);
  const int spans[] = {90, 150, 365};
  double worst_gap = 0.0, worst_exposure = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto w = sample_window(data, spans[rng.index(3)], 50, rng);
    const auto r = run_backtest(genome, w, build_features(w, ind), broker);
    worst_gap = std::max(worst_gap, std::abs(r.pnl_relative));
    worst_exposure = std::max(worst_exposure, std::abs(r.exposure_pct - 100.0));
  }
  return {worst_gap < kBnhIdentityAbs && worst_exposure < kBnhIdentityAbs,
          fmt("100 windows, max |pnl_relative| %.3g, max |exposure - 100| %.3g", worst_gap, worst_exposure)};
}

neat::Genome random_genome(Rng& rng) {
  neat::InnovationLedger ledger;
  neat::NeatConfig cfg;
  cfg.initial_weight_range = 3.0;
  auto g = neat::seed_genome(ledger, rng, cfg);
  for (int i = 0; i < 4; ++i) {
    neat::mutate_add_node(g, ledger, rng);
    neat::mutate_add_connection(g, ledger, rng, cfg);
  }
  return g;
}

Outcome accounting_invariant() {
  const auto data = ntrade::testing::synthetic_market(6, 1200, 303);
  const IndicatorConfig ind;
  Rng rng(11);
  std::size_t bars_checked = 0, violations = 0, runs_with_trades = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto w = sample_window(data, k % 2 ? 90 : 365, 50, rng);
    const auto features = build_features(w, ind);
    BrokerConfig broker;
    broker.commission_pct = rng.chance(0.5) ? rng.uniform(0.0, 0.3) : 0.0;
    BacktestReport r;
    if (k % 2 == 0) {
      Rng policy_rng(rng.next_u64());
      const double p_trade = rng.uniform(0.05, 0.6);
      r = run_policy(w, features, [&](std::size_t, const FeatureVector&) {
        const double u = policy_rng.uniform();
        if (u < p_trade / 2) return Action{ActionKind::Buy, policy_rng.uniform()};
        if (u < p_trade) return Action{ActionKind::Sell, policy_rng.uniform()};
        return Action{};
      }, broker);
    } else {
      r = run_backtest(random_genome(rng), w, features, broker);
    }
    if (!r.trades.empty()) ++runs_with_trades;
    const auto prices = adjust(w.trade_bars());
    double cash = broker.initial_cash, shares = 0.0;
    std::size_t next_fill = 0;
    for (std::size_t t = 0; t < r.equity_curve.size(); ++t) {
      while (next_fill < r.fills.size() && r.fills[next_fill].bar == t) {
        const auto& f = r.fills[next_fill++];
        cash -= f.shares * f.price + f.fee;
        shares += f.shares;
      }
      ++bars_checked;
      if (!near_rel(cash + shares * prices.close[t], r.equity_curve[t], kAccountingRel,
                    kAccountingAbsFloor * broker.initial_cash))
        ++violations;
    }
    if (next_fill != r.fills.size()) ++violations;
  }
  return {violations == 0 && runs_with_trades > 500,
          fmt("1000 backtests (%.0f trading), %.0f bars, %.0f violations", static_cast<double>(runs_with_trades),
              static_cast<double>(bars_checked), static_cast<double>(violations))};
}

Outcome fitness_exactness() {
  struct Fixture {
    BacktestReport report;
    double f1, f2, f3;
  };
  auto make = [](double pnl, double rel, double dd, std::vector<double> pnls, std::size_t trades, double duration) {
    BacktestReport r;
    r.pnl_pct = pnl;
    r.pnl_relative = rel;
    r.bnh_pct = pnl - rel;
    r.max_drawdown_pct = dd;
    r.n_trades = trades;
    r.avg_duration_days = duration;
    for (double p : pnls) {
      TradeRecord t;
      t.pnl = p;
      r.trades.push_back(t);
    }
    r.sqn = sqn(r.trades);
    return r;
  };
  // Hand values: 10 + 1.5*4 - 0.5*8 = 12; 12 + 0.0005*20 - 5 = 7.01;
  // trades {2,-1,2,-1}: mean 0.5, sample std sqrt(3), 4*0.5/sqrt(3);
  // 3 + 1.5*(-1) - 0.5*2 = 0.5; 0.5 + 0.0005*4 - 3 = -2.498.
  const std::vector<Fixture> fixtures{
      {make(10, 4, 8, {}, 0, 0), 0.0, 12.0, 12.0},
      {make(10, 4, 8, {}, 20, 5), 0.0, 12.0, 7.01},
      {make(3, -1, 2, {2, -1, 2, -1}, 4, 3), 1.1547005383792515, 0.5, -2.498},
  };
  double worst = 0.0;
  for (const auto& f : fixtures) {
    worst = std::max({worst, std::abs(fitness1(f.report) - f.f1), std::abs(fitness2(f.report) - f.f2),
                      std::abs(fitness3(f.report) - f.f3)});
  }
  return {worst <= kFitnessAbs, fmt("3 fixtures, max abs error %.3g", worst)};
}

Outcome neat_fuzz() {
  neat::NeatConfig cfg;
  neat::InnovationLedger ledger;
  Rng rng(55);
  cfg.population_size = 24;
  auto pool = neat::init_population(cfg, ledger, rng);
  std::size_t violations = 0;
  int last_innovation = ledger.peek_innovation(), last_node = ledger.peek_node_id();
  auto check = [&](const neat::Genome& g) {
    try {
      neat::validate(g);
    } catch (const Error&) {
      ++violations;
      return;
    }
    for (const auto& c : g.connections) {
      const auto known = ledger.find_innovation(c.in_node, c.out_node);
      if (!known || *known != c.innovation || c.innovation >= ledger.peek_innovation()) ++violations;
    }
    for (const auto& n : g.nodes)
      if (n.id >= ledger.peek_node_id()) ++violations;
  };
  constexpr int kOps = 100000;
  for (int op = 0; op < kOps; ++op) {
    if (op % 200 == 0) ledger.begin_generation();
    auto& g = pool[rng.index(pool.size())];
    const double u = rng.uniform();
    if (u < 0.3) {
      neat::mutate_weights(g, rng, cfg);
    } else if (u < 0.45) {
      neat::mutate(g, ledger, rng, cfg);
    } else if (u < 0.5) {
      neat::mutate_add_node(g, ledger, rng);
    } else if (u < 0.65) {
      neat::mutate_add_connection(g, ledger, rng, cfg);
    } else {
      auto& a = pool[rng.index(pool.size())];
      auto& b = pool[rng.index(pool.size())];
      a.fitness = rng.normal();
      b.fitness = rng.normal();
      auto child = neat::crossover(a, b, ledger, rng, cfg);
      check(child);
      g = std::move(child);
    }
    check(g);
    if (ledger.peek_innovation() < last_innovation || ledger.peek_node_id() < last_node) ++violations;
    last_innovation = ledger.peek_innovation();
    last_node = ledger.peek_node_id();
    // Keep genomes from growing without bound over the run.
    if (g.connections.size() > 200) g = neat::seed_genome(ledger, rng, cfg);
  }
  return {violations == 0, fmt("%.0f operations, %.0f violations, %.0f innovations", kOps,
                               static_cast<double>(violations), ledger.peek_innovation())};
}

Outcome schedule_reproduction() {
  const auto s = StageSchedule::progressive_default();
  const int gens[] = {1, 1500, 1501, 1901};
  const int want[] = {90, 90, 150, 365};
  bool ok = true;
  std::string got;
  for (int i = 0; i < 4; ++i) {
    const int d = window_days_for(gens[i], s);
    ok = ok && d == want[i];
    got += (i ? "/" : "") + std::to_string(d);
  }
  return {ok, "generations 1/1500/1501/1901 -> " + got};
}

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = ntrade::testing::synthetic_market(5, 1000, 404);
  TrainConfig cfg;
  cfg.neat.population_size = 50;
  cfg.schedule = StageSchedule::parse("30:90,15:150,5:365");
  cfg.jobs = 1;
  const auto a = history_csv(train(data, cfg, 2024).history);
  const auto b = history_csv(train(data, cfg, 2024).history);
  const double secs = seconds_since(t0);
  const auto rows = static_cast<double>(std::count(a.begin(), a.end(), '\n') - 1);
  return {a == b && rows == 50 && secs < kDeterminismBudgetSec,
          fmt("%.0f rows each, identical: %.0f, %.1f s for both runs", rows, a == b ? 1.0 : 0.0, secs)};
}

Outcome learning_smoke() {
  SyntheticParams p;
  p.drift = 0.0;
  p.volatility = 0.004;
  p.sine_amplitude = 0.05;
  p.sine_period = 20.0;
  const auto train_data = ntrade::testing::synthetic_market(5, 1500, 505, p);
  const auto held_out = ntrade::testing::synthetic_market(5, 1500, 909, p);

  TrainConfig cfg;
  cfg.neat.population_size = 150;
  cfg.fitness.kind = FitnessKind::MultiObjectiveActive;
  cfg.schedule = StageSchedule::parse("200:90");
  auto state = init_run(cfg, 31);
  auto generation_champion = [&] {
    const auto& pop = state.evaluated;
    return *std::max_element(pop.begin(), pop.end(),
                             [](const neat::Genome& x, const neat::Genome& y) { return *x.fitness < *y.fitness; });
  };
  run_generation(state, train_data, cfg);
  const neat::Genome first = generation_champion();
  train(state, train_data, cfg);
  const neat::Genome last = generation_champion();

  Rng rng(77);
  std::vector<double> diffs;
  double mean_first = 0.0, mean_last = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto w = sample_window(held_out, 90, cfg.warmup_len, rng);
    const auto features = build_features(w, cfg.indicators);
    const double f0 = evaluate_fitness(run_backtest(first, w, features, cfg.broker), cfg.fitness);
    const double f1 = evaluate_fitness(run_backtest(last, w, features, cfg.broker), cfg.fitness);
    mean_first += f0 / 20;
    mean_last += f1 / 20;
    diffs.push_back(f1 - f0);
  }
  double mean = 0.0, ss = 0.0;
  for (double d : diffs) mean += d / 20;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double sd = std::sqrt(ss / 19);
  double p_value = 1.0;
  if (sd > 0.0) {
    const boost::math::students_t dist(19.0);
    p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(mean / (sd / std::sqrt(20.0)))));
  } else if (mean > 0.0) {
    p_value = 0.0;
  }
  return {mean > 0.0 && p_value < kSignificance,
          fmt("held-out fitness3 gen 1 %.3f vs gen 200 %.3f, paired t two-sided p = %.3g", mean_first, mean_last,
              p_value)};
}

Outcome protocol_reproduction() {
  bool ok = true;
  std::string notes;
  auto require = [&](bool cond, const char* what) {
    if (!cond) {
      ok = false;
      notes += std::string(notes.empty() ? "" : "; ") + what;
    }
  };

  // Selection defaults and the windows actually used.
  const SelectionCriteria crit;
  require(crit.n_runs == 20 && crit.window_days == 365, "selection defaults");
  const auto data = ntrade::testing::synthetic_market(3, 1200, 606);
  std::vector<neat::Genome> pop{ntrade::testing::bias_wired_genome(0.2, 0.1, 0.3), ntrade::testing::inert_genome()};
  pop[1].id = 1;
  const auto sel = select_champion(pop, data, crit, EvalContext{}, 9);
  require(sel.windows.size() == 20, "20 selection windows");
  for (const auto& w : sel.windows) require(days_between(w.start, w.end) < 365 && w.trade_len >= 250, "365-day span");
  for (const auto& s : sel.summaries) require(s.runs == 20, "20 runs per individual");

  // Comparison table on a fixture with distinct trade and run denominators.
  auto rec = [](double model, double bnh, std::size_t trades, std::size_t wins) {
    RunRecord r;
    r.ticker = "F";
    r.model_return = model;
    r.bnh_return = bnh;
    r.n_trades = trades;
    r.n_wins = wins;
    r.model_exposure = 50.0;
    r.bnh_exposure = 100.0;
    return r;
  };
  const auto c = aggregate({rec(10, 5, 4, 3), rec(-2, 8, 6, 1), rec(3, -1, 0, 0), rec(7, 7, 2, 2)});
  const auto table = render_comparison(c);
  const char* rows[] = {"Average Return", "Std of Return", "Win Rate", "Relative Win Rate", "Exposure Time"};
  std::size_t at = 0;
  for (const char* row : rows) {
    const auto pos = table.find(row, at);
    require(pos != std::string::npos, row);
    if (pos != std::string::npos) at = pos + 1;
  }
  require(c.model_winning_trades == 6 && c.model_total_trades == 12, "model win rate counts trades");
  require(c.bnh_positive_runs == 3 && c.n_runs == 4, "Buy & Hold win rate counts runs");
  require(table.find("6/12=50%") != std::string::npos && table.find("3/4=75%") != std::string::npos,
          "rendered denominators");
  require(c.relative_wins_model == 2 && c.relative_wins_bnh == 1 && c.ties == 1, "relative wins");

  // The same denominators on a live comparison.
  const auto live = compare_vs_buy_and_hold(pop[0], data, 20, 365, EvalContext{}, 4);
  std::size_t trades = 0, wins = 0, positive = 0;
  for (const auto& r : live.runs) {
    trades += r.n_trades;
    wins += r.n_wins;
    positive += r.bnh_return > 0.0;
  }
  require(live.model_total_trades == trades && live.model_winning_trades == wins, "live trade denominators");
  require(live.bnh_positive_runs == positive && live.n_runs == 20, "live run denominators");
  return {ok, ok ? "20 x 365-day selection windows; five rows; trade and run denominators" : notes};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "indicator oracle suite", indicator_oracles},
      {2, "Buy & Hold identity", buy_and_hold_identity},
      {3, "accounting invariant", accounting_invariant},
      {4, "fitness exactness", fitness_exactness},
      {5, "NEAT structural fuzz", neat_fuzz},
      {6, "schedule reproduction", schedule_reproduction},
      {7, "determinism", determinism},
      {8, "learning smoke test", learning_smoke},
      {9, "protocol reproduction", protocol_reproduction},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
