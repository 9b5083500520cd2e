#include "ntrade/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace ntrade {

Action decide(const std::array<double, 3>& out) {
  for (double v : out)
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite network output");
  const bool buy = out[0] > kActionThreshold;
  const bool sell = out[1] > kActionThreshold;
  const double fraction = std::clamp(out[2], 0.0, 1.0);
  if (buy && sell) {
    if (out[0] == out[1]) return {};
    return {out[0] > out[1] ? ActionKind::Buy : ActionKind::Sell, fraction};
  }
  if (buy) return {ActionKind::Buy, fraction};
  if (sell) return {ActionKind::Sell, fraction};
  return {};
}

void BrokerConfig::validate() const {
  if (!(initial_cash > 0.0)) throw Error(ErrorKind::InvalidArgument, "initial_cash must be > 0");
  if (!(commission_pct >= 0.0)) throw Error(ErrorKind::InvalidArgument, "commission_pct must be >= 0");
  if (!(volume_floor >= 0.0 && volume_floor <= 1.0)) throw Error(ErrorKind::InvalidArgument, "volume_floor in [0, 1]");
  if (!(max_short_leverage >= 0.0)) throw Error(ErrorKind::InvalidArgument, "max_short_leverage must be >= 0");
}

double max_drawdown(std::span<const double> curve) {
  if (curve.empty()) throw Error(ErrorKind::InvalidArgument, "max_drawdown of an empty curve");
  double peak = curve[0], worst = 0.0;
  for (double e : curve) {
    peak = std::max(peak, e);
    if (peak > 0.0) worst = std::max(worst, (peak - e) / peak * 100.0);
  }
  return worst;
}

double sqn(std::span<const double> pnls, bool sqrt_trades) {
  const std::size_t n = pnls.size();
  if (n < 2) return 0.0;
  double mean = 0.0, scale = 0.0;
  for (double p : pnls) {
    mean += p;
    scale = std::max(scale, std::abs(p));
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double p : pnls) ss += (p - mean) * (p - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0 || sd <= 1e-12 * scale) return 0.0;
  const double count = sqrt_trades ? std::sqrt(static_cast<double>(n)) : static_cast<double>(n);
  return count * mean / sd;
}

double sqn(std::span<const TradeRecord> trades, bool sqrt_trades) {
  std::vector<double> pnls;
  pnls.reserve(trades.size());
  for (const auto& t : trades) pnls.push_back(t.pnl);
  return sqn(pnls, sqrt_trades);
}

namespace {

struct OpenTrade {
  Side side = Side::Long;
  std::size_t entry_bar = 0;
  double size = 0.0;
  double entry_price = 0.0;
  double entry_fees = 0.0;
};

class Broker {
 public:
  Broker(const AdjustedSeries& prices, const BrokerConfig& cfg, BacktestReport& report)
      : prices_(prices), cfg_(cfg), report_(report), cash_(cfg.initial_cash) {}

  double shares() const { return shares_; }
  double equity_at(double price) const { return cash_ + shares_ * price; }

  void execute(const Action& a, std::size_t bar) {
    if (a.kind == ActionKind::Hold) return;
    const double p = prices_.open[bar];
    const double equity = equity_at(p);
    if (equity <= 0.0) return;
    const double floor = cfg_.volume_floor * equity;
    const double notional = a.fraction * equity;
    if (notional <= 0.0 || notional < floor) return;
    const double sign = a.kind == ActionKind::Buy ? 1.0 : -1.0;

    // Offset the opposite position first.
    double traded = 0.0;
    if (shares_ * sign < 0.0) {
      const double offset = std::min(std::abs(shares_), notional / p);
      if (offset >= std::abs(shares_))
        reduce(std::abs(shares_), bar, p);
      else
        reduce(offset, bar, p);
      traded = offset * p;
    }
    const double remaining = notional - traded;
    if (remaining <= 0.0 || shares_ * sign < 0.0) return;

    const double fee_rate = cfg_.commission_pct / 100.0;
    double qty = remaining / p;
    if (sign > 0.0) {
      qty = std::min(qty, std::max(0.0, cash_) / (p * (1.0 + fee_rate)));
    } else {
      const double room = cfg_.max_short_leverage * equity_at(p) - std::abs(shares_) * p;
      qty = std::min(qty, std::max(0.0, room) / p);
    }
    if (qty <= 0.0 || qty * p < floor) return;
    increase(sign > 0.0 ? Side::Long : Side::Short, qty, bar, p);
  }

  void close_all(std::size_t bar) {
    if (shares_ != 0.0) reduce(std::abs(shares_), bar, prices_.close[bar]);
  }

 private:
  double fill(std::size_t bar, double signed_qty, double price) {
    const double fee = std::abs(signed_qty) * price * cfg_.commission_pct / 100.0;
    cash_ -= signed_qty * price + fee;
    shares_ += signed_qty;
    report_.fills.push_back({bar, signed_qty, price, fee});
    return fee;
  }

  void increase(Side side, double qty, std::size_t bar, double price) {
    const double fee = fill(bar, side == Side::Long ? qty : -qty, price);
    if (!open_) {
      open_ = OpenTrade{side, bar, qty, price, fee};
      return;
    }
    open_->entry_price = (open_->entry_price * open_->size + price * qty) / (open_->size + qty);
    open_->size += qty;
    open_->entry_fees += fee;
  }

  void reduce(double qty, std::size_t bar, double price) {
    const bool all = qty >= std::abs(shares_);
    const double signed_qty = shares_ > 0.0 ? -qty : qty;
    const double exit_fee = fill(bar, signed_qty, price);
    if (all) shares_ = 0.0;

    OpenTrade& o = *open_;
    const double portion = all ? 1.0 : qty / o.size;
    const double entry_fee = o.entry_fees * portion;
    const double dir = o.side == Side::Long ? 1.0 : -1.0;

    TradeRecord t;
    t.direction = o.side;
    t.entry_bar = o.entry_bar;
    t.exit_bar = bar;
    t.entry_date = prices_.dates[o.entry_bar];
    t.exit_date = prices_.dates[bar];
    t.entry_price = o.entry_price;
    t.exit_price = price;
    t.size = qty;
    t.fees = entry_fee + exit_fee;
    t.pnl = (price - o.entry_price) * qty * dir - t.fees;
    t.pnl_pct = t.pnl / (o.entry_price * qty) * 100.0;
    t.duration_bars = bar - o.entry_bar;
    t.duration_days = static_cast<double>(days_between(t.entry_date, t.exit_date));
    report_.trades.push_back(t);

    if (all) {
      open_.reset();
    } else {
      o.size -= qty;
      o.entry_fees -= entry_fee;
    }
  }

  const AdjustedSeries& prices_;
  const BrokerConfig& cfg_;
  BacktestReport& report_;
  double cash_;
  double shares_ = 0.0;
  std::optional<OpenTrade> open_;
};

BacktestReport simulate(const SeriesWindow& window, std::span<const FeatureVector> features, const Policy& policy,
                        const BrokerConfig& cfg) {
  cfg.validate();
  if (window.trade_len == 0) throw Error(ErrorKind::InvalidArgument, "empty trade section");
  if (!features.empty() && features.size() != window.trade_len)
    throw Error(ErrorKind::InvalidArgument, "features not aligned with the trade section");

  const AdjustedSeries prices = adjust(window.trade_bars());
  const std::size_t bars = prices.size();
  BacktestReport r;
  r.ticker = window.ticker;
  r.start = prices.dates.front();
  r.end = prices.dates.back();

  Broker broker(prices, cfg, r);
  std::optional<Action> pending;
  std::size_t exposed = 0;
  for (std::size_t t = 0; t < bars; ++t) {
    if (pending) broker.execute(*pending, t);
    pending.reset();
    if (t > 0 && broker.shares() != 0.0) ++exposed;

    const double price = prices.close[t];
    double equity = broker.equity_at(price);
    const bool last = t + 1 == bars;
    if (equity <= 0.0) r.bankrupt = true;
    if (last || r.bankrupt) {
      broker.close_all(t);
      equity = broker.equity_at(price);
    }
    r.dates.push_back(prices.dates[t]);
    r.equity_curve.push_back(equity);
    if (last || r.bankrupt) break;

    FeatureVector fv = features.empty() ? FeatureVector{} : features[t];
    const double held = broker.shares() * price;
    fv.long_position = std::clamp(std::max(held, 0.0) / equity, 0.0, 1.0);
    fv.short_position = std::clamp(std::max(-held, 0.0) / equity, 0.0, 1.0);
    pending = policy(t, fv);
  }

  r.pnl_pct = (r.equity_curve.back() / cfg.initial_cash - 1.0) * 100.0;
  r.max_drawdown_pct = max_drawdown(r.equity_curve);
  r.n_trades = r.trades.size();
  double duration = 0.0;
  for (const auto& t : r.trades) {
    duration += t.duration_days;
    if (t.pnl > 0.0) ++r.n_wins;
  }
  r.avg_duration_days = r.n_trades ? duration / static_cast<double>(r.n_trades) : 0.0;
  r.win_rate = r.n_trades ? static_cast<double>(r.n_wins) / static_cast<double>(r.n_trades) : 0.0;
  r.exposure_pct = bars > 1 ? static_cast<double>(exposed) / static_cast<double>(bars - 1) * 100.0 : 0.0;
  r.sqn = sqn(r.trades);
  return r;
}

const Policy& always_buy() {
  static const Policy p = [](std::size_t, const FeatureVector&) { return Action{ActionKind::Buy, 1.0}; };
  return p;
}

}  // namespace

BacktestReport buy_and_hold(const SeriesWindow& window, const BrokerConfig& cfg) {
  BacktestReport r = simulate(window, {}, always_buy(), cfg);
  r.bnh_pct = r.pnl_pct;
  r.pnl_relative = r.pnl_pct - r.bnh_pct;
  return r;
}

BacktestReport run_policy(const SeriesWindow& window, std::span<const FeatureVector> features, const Policy& policy,
                          const BrokerConfig& cfg) {
  BacktestReport r = simulate(window, features, policy, cfg);
  r.bnh_pct = simulate(window, {}, always_buy(), cfg).pnl_pct;
  r.pnl_relative = r.pnl_pct - r.bnh_pct;
  return r;
}

BacktestReport run_backtest(const neat::Genome& genome, const SeriesWindow& window,
                            std::span<const FeatureVector> features, const BrokerConfig& cfg) {
  if (features.size() != window.trade_len)
    throw Error(ErrorKind::InvalidArgument, "features not aligned with the trade section");
  neat::RecurrentNetwork net(genome);
  net.reset();
  return run_policy(window, features, [&net](std::size_t, const FeatureVector& fv) {
    const auto in = fv.as_inputs();
    return decide(net.activate(in));
  }, cfg);
}

}  // namespace ntrade
