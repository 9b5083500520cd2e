#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace ntrade;
using ntrade::testing::slice_window;

namespace {

std::vector<Bar> bars_from_prices(const std::vector<std::pair<double, double>>& open_close) {
  std::vector<Bar> bars;
  Date d = parse_date("2021-01-04");
  for (const auto& [o, c] : open_close) {
    bars.push_back({"FX", d, o, std::max(o, c) * 1.01, std::min(o, c) * 0.99, c, c, 1000});
    d += std::chrono::days{1};
  }
  return bars;
}

SeriesWindow plain_window(const std::vector<Bar>& bars) {
  SeriesWindow w;
  w.ticker = bars.front().ticker;
  w.bars = bars;
  w.warmup_len = 0;
  w.trade_len = bars.size();
  return w;
}

Policy scripted(std::vector<Action> actions) {
  return [actions = std::move(actions)](std::size_t bar, const FeatureVector&) {
    return bar < actions.size() ? actions[bar] : Action{};
  };
}

const Action kHold{};
Action buy(double f) { return {ActionKind::Buy, f}; }
Action sell(double f) { return {ActionKind::Sell, f}; }

}  // namespace

TEST_CASE("decide") {
  CHECK(decide({0.9, 0.2, 0.5}) == Action{ActionKind::Buy, 0.5});
  CHECK(decide({0.7, 0.8, 1.0}) == Action{ActionKind::Sell, 1.0});
  CHECK(decide({0.4, 0.4, 0.9}) == kHold);
  CHECK(decide({0.7, 0.7, 0.9}) == kHold);
  CHECK(decide({0.5, 0.2, 0.9}) == kHold);
  CHECK(decide({0.2, 0.51, 0.3}) == Action{ActionKind::Sell, 0.3});
  CHECK_THROWS_AS(decide({NAN, 0.2, 0.3}), Error);
}

TEST_CASE("max_drawdown") {
  CHECK(max_drawdown(std::vector<double>{100, 110, 120}) == 0.0);
  CHECK(max_drawdown(std::vector<double>{100, 120, 90, 130}) == doctest::Approx(25.0));
  CHECK(max_drawdown(std::vector<double>{100, 50, 100}) == doctest::Approx(50.0));
  CHECK_THROWS_AS(max_drawdown(std::vector<double>{}), Error);
}

TEST_CASE("sqn") {
  CHECK(sqn(std::vector<double>{2, -1, 2, -1}) == doctest::Approx(4 * 0.5 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(sqn(std::vector<double>{5}) == 0.0);
  CHECK(sqn(std::vector<double>{3, 3, 3}) == 0.0);
  CHECK(sqn(std::vector<double>{}) == 0.0);
  CHECK(sqn(std::vector<double>{2, -1, 2, -1}, true) == doctest::Approx(2 * 0.5 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("scripted trades: fills at next open, forced close at final close") {
  // Bars: (open, close)
  const auto bars = bars_from_prices({{10, 10}, {10, 11}, {12, 12}, {12, 13}, {14, 15}});
  const auto w = plain_window(bars);
  BrokerConfig cfg;

  SUBCASE("single long round trip") {
    const auto r = run_policy(w, {}, scripted({buy(1.0), kHold, sell(1.0)}), cfg);
    // Buy at bar 1 open (10), sell at bar 3 open (12).
    REQUIRE(r.trades.size() == 1);
    const auto& t = r.trades[0];
    CHECK(t.direction == Side::Long);
    CHECK(t.entry_bar == 1);
    CHECK(t.exit_bar == 3);
    CHECK(t.entry_price == 10.0);
    CHECK(t.exit_price == 12.0);
    CHECK(t.size == doctest::Approx(10000.0));
    CHECK(t.pnl == doctest::Approx(20000.0));
    CHECK(t.duration_days == 2.0);
    CHECK(r.pnl_pct == doctest::Approx(20.0));
    // Buy & Hold: 10 -> 15.
    CHECK(r.bnh_pct == doctest::Approx(50.0));
    CHECK(r.pnl_relative == r.pnl_pct - r.bnh_pct);
    // Held on bars 1 and 2 out of bars 1..4.
    CHECK(r.exposure_pct == doctest::Approx(50.0));
    CHECK(r.n_wins == 1);
    CHECK(r.win_rate == 1.0);
  }
  SUBCASE("short then flip long") {
    const auto r = run_policy(w, {}, scripted({sell(0.5), kHold, buy(1.0)}), cfg);
    // Short 50000 notional at 10 -> 5000 shares; cover at 12 (loss 10000), then
    // the rest of the 90000 order goes long.
    REQUIRE(r.trades.size() == 2);
    CHECK(r.trades[0].direction == Side::Short);
    CHECK(r.trades[0].size == doctest::Approx(5000.0));
    CHECK(r.trades[0].pnl == doctest::Approx(-10000.0));
    CHECK(r.trades[1].size == doctest::Approx(2500.0));
    CHECK(r.trades[1].direction == Side::Long);
    CHECK(r.trades[1].exit_bar == 4);
    CHECK(r.trades[1].exit_price == 15.0);
  }
  SUBCASE("last bar decision is discarded") {
    const auto r = run_policy(w, {}, scripted({kHold, kHold, kHold, kHold, buy(1.0)}), cfg);
    CHECK(r.trades.empty());
    CHECK(r.pnl_pct == 0.0);
  }
  SUBCASE("orders below the volume floor are ignored") {
    const auto r = run_policy(w, {}, scripted({buy(0.005)}), cfg);
    CHECK(r.trades.empty());
    CHECK(r.fills.empty());
  }
  SUBCASE("commission is charged per fill") {
    BrokerConfig fee = cfg;
    fee.commission_pct = 0.1;
    const auto r = run_policy(w, {}, scripted({buy(0.5), kHold, sell(1.0)}), fee);
    REQUIRE(r.trades.size() >= 1);
    const auto& t = r.trades[0];
    CHECK(t.fees == doctest::Approx(t.size * 10 * 0.001 + t.size * 12 * 0.001));
    CHECK(t.pnl == doctest::Approx((12 - 10) * t.size - t.fees));
  }
  SUBCASE("partial reduce keeps the entry price") {
    const auto r = run_policy(w, {}, scripted({buy(1.0), sell(0.5)}), cfg);
    REQUIRE(r.trades.size() == 2);
    CHECK(r.trades[0].entry_price == 10.0);
    CHECK(r.trades[1].entry_price == 10.0);
    CHECK(r.trades[0].size + r.trades[1].size == doctest::Approx(10000.0));
  }
}

TEST_CASE("inert genome") {
  const auto bars = generate_synthetic("I", 300, 3);
  const auto w = slice_window(bars, 0, 50, 120);
  const auto r = run_backtest(ntrade::testing::inert_genome(), w, build_features(w, {}), {});
  CHECK(r.n_trades == 0);
  CHECK(r.exposure_pct == 0.0);
  CHECK(r.pnl_pct == 0.0);
  CHECK(r.avg_duration_days == 0.0);
  CHECK(r.sqn == 0.0);
}

TEST_CASE("always-buy genome replicates Buy & Hold") {
  const auto bars = generate_synthetic("H", 800, 4);
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const std::size_t first = rng.index(500);
    const auto w = slice_window(bars, first, 50, 60 + rng.index(200));
    const auto r = run_backtest(ntrade::testing::always_buy_genome(), w, build_features(w, {}), {});
    CHECK(std::abs(r.pnl_relative) < 1e-9);
    CHECK(r.exposure_pct == 100.0);
    CHECK(r.n_trades == 1);
    const auto b = buy_and_hold(w, {});
    const auto& tb = w.trade_bars();
    const double expected = (tb.back().adj_close / (tb[1].open * tb[1].adj_close / tb[1].close) - 1.0) * 100.0;
    CHECK(b.pnl_pct == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("position fractions are injected into the features") {
  const auto bars = bars_from_prices({{10, 10}, {10, 10}, {10, 10}, {10, 10}, {10, 10}});
  std::vector<FeatureVector> seen;
  auto policy = [&](std::size_t bar, const FeatureVector& f) {
    seen.push_back(f);
    if (bar == 0) return buy(0.5);
    if (bar == 1) return sell(1.0);
    return kHold;
  };
  run_policy(plain_window(bars), {}, policy, {});
  REQUIRE(seen.size() == 4);
  CHECK(seen[0].long_position == 0.0);
  CHECK(seen[1].long_position == doctest::Approx(0.5));
  CHECK(seen[1].short_position == 0.0);
  // Sell 1.0: cover 0.5, then short 0.5 of equity.
  CHECK(seen[2].long_position == 0.0);
  CHECK(seen[2].short_position == doctest::Approx(0.5));
}

TEST_CASE("accounting identity from the fill log") {
  const auto bars = generate_synthetic("A", 600, 8);
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const auto w = slice_window(bars, rng.index(300), 50, 100 + rng.index(100));
    BrokerConfig cfg;
    cfg.commission_pct = k % 2 ? 0.05 : 0.0;
    Rng policy_rng(static_cast<std::uint64_t>(k));
    const auto r = run_policy(w, build_features(w, {}), [&](std::size_t, const FeatureVector&) {
      const double u = policy_rng.uniform();
      if (u < 0.3) return buy(policy_rng.uniform());
      if (u < 0.6) return sell(policy_rng.uniform());
      return kHold;
    }, cfg);
    const auto prices = adjust(w.trade_bars());
    double cash = cfg.initial_cash, shares = 0.0;
    std::size_t next_fill = 0;
    for (std::size_t t = 0; t < r.equity_curve.size(); ++t) {
      while (next_fill < r.fills.size() && r.fills[next_fill].bar == t) {
        const auto& f = r.fills[next_fill++];
        cash -= f.shares * f.price + f.fee;
        shares += f.shares;
      }
      CHECK(ntrade::testing::near_rel(cash + shares * prices.close[t], r.equity_curve[t], 1e-9, 1e-6));
    }
    CHECK(std::abs(shares) < 1e-6);
    // Closed-trade pnl sums to the equity change.
    double total = 0.0;
    for (const auto& t : r.trades) total += t.pnl;
    CHECK(total == doctest::Approx(r.equity_curve.back() - cfg.initial_cash).epsilon(1e-9));
    CHECK(r.max_drawdown_pct >= 0.0);
    CHECK((r.exposure_pct >= 0.0 && r.exposure_pct <= 100.0));
  }
}

TEST_CASE("bankruptcy ends the run") {
  // Short at 10, price explodes to 40: equity goes negative.
  const auto bars = bars_from_prices({{10, 10}, {10, 10}, {40, 40}, {40, 40}, {40, 40}});
  BrokerConfig cfg;
  const auto r = run_policy(plain_window(bars), {}, scripted({sell(1.0)}), cfg);
  CHECK(r.bankrupt);
  CHECK(r.equity_curve.size() == 3);
  CHECK(r.equity_curve.back() <= 0.0);
}

TEST_CASE("errors") {
  const auto bars = generate_synthetic("E", 200, 1);
  auto w = slice_window(bars, 0, 50, 50);
  CHECK_THROWS_AS(run_backtest(ntrade::testing::inert_genome(), w, {}, {}), Error);
  w.bars.resize(50);
  w.trade_len = 0;
  CHECK_THROWS_AS(run_policy(w, {}, scripted({}), {}), Error);
}
