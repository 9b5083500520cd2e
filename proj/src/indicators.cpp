#include "ntrade/indicators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ntrade {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Spreads below this fraction of the price level count as zero.
constexpr double kDegenerate = 1e-12;

void require(bool primed, const char* what, std::size_t t) {
  if (!primed) throw Error(ErrorKind::InsufficientHistory, std::string(what) + ": index " + std::to_string(t) + " not primed");
}

double window_mean(std::span<const double> x, std::size_t t, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = t + 1 - n; i <= t; ++i) sum += x[i];
  return sum / static_cast<double>(n);
}

double fast_k(std::span<const double> h, std::span<const double> l, std::span<const double> c, std::size_t n,
              std::size_t t) {
  double hh = h[t], ll = l[t];
  for (std::size_t i = t + 1 - n; i < t; ++i) {
    hh = std::max(hh, h[i]);
    ll = std::min(ll, l[i]);
  }
  if (hh == ll) return 50.0;
  return (c[t] - ll) / (hh - ll) * 100.0;
}

double typical(std::span<const double> h, std::span<const double> l, std::span<const double> c, std::size_t i) {
  return (h[i] + l[i] + c[i]) / 3.0;
}

double cmfv(std::span<const double> h, std::span<const double> l, std::span<const double> c,
            std::span<const double> v, CmfvMode mode, std::size_t t) {
  const double range = h[t] - l[t];
  if (range == 0.0) return 0.0;
  if (mode == CmfvMode::Literal) {
    const double prev = t == 0 ? c[t] : c[t - 1];
    return (h[t] - prev) / range * v[t];
  }
  return ((c[t] - l[t]) - (h[t] - c[t])) / range * v[t];
}

double zscore_last(std::span<const double> x, std::size_t t, std::size_t n) {
  const double mean = window_mean(x, t, n);
  double ss = 0.0, scale = 0.0;
  for (std::size_t i = t + 1 - n; i <= t; ++i) {
    ss += (x[i] - mean) * (x[i] - mean);
    scale = std::max(scale, std::abs(x[i]));
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (sd == 0.0 || sd <= kDegenerate * scale) return 0.0;
  return (x[t] - mean) / sd;
}

std::vector<double> macd_line(std::span<const double> closes, const IndicatorConfig& cfg) {
  const auto fast = ema(closes, cfg.macd_fast);
  const auto slow = ema(closes, cfg.macd_slow);
  std::vector<double> diff(closes.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = fast[i] - slow[i];
  const auto signal = ema(diff, cfg.macd_signal);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= signal[i];
  return diff;
}

std::size_t sz(int n) { return static_cast<std::size_t>(n); }

}  // namespace

void IndicatorConfig::validate() const {
  for (int p : {sma_fast, sma_slow, stoch_fastk, stoch_slowk, stoch_slowd, willr_n, macd_fast, macd_slow, macd_signal,
                cci_n, rsi_n, adosc_fast, adosc_slow, adosc_zscore_len}) {
    if (p < 1) throw Error(ErrorKind::InvalidArgument, "indicator periods must be >= 1");
  }
  if (sma_fast >= sma_slow || macd_fast >= macd_slow || adosc_fast >= adosc_slow)
    throw Error(ErrorKind::InvalidArgument, "fast periods must be shorter than slow periods");
}

std::size_t IndicatorConfig::required_warmup() const {
  const std::size_t stoch = sz(stoch_fastk + stoch_slowk + stoch_slowd - 3);
  return std::max({sz(sma_slow - 1), sz(sma_fast - 1), stoch, sz(willr_n - 1), std::size_t{1}, sz(cci_n - 1),
                   sz(rsi_n), sz(adosc_zscore_len - 1)});
}

std::vector<double> ema(std::span<const double> values, int n) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double keep = static_cast<double>(n - 1) / n;
  const double take = 1.0 / n;
  out[0] = values[0];
  for (std::size_t i = 1; i < values.size(); ++i) out[i] = out[i - 1] * keep + values[i] * take;
  return out;
}

double sma_ratio(std::span<const double> closes, int n, std::size_t t) {
  require(n >= 1 && t < closes.size() && t + 1 >= sz(n), "sma_ratio", t);
  return closes[t] / window_mean(closes, t, sz(n));
}

Stochastic stochastic(std::span<const double> h, std::span<const double> l, std::span<const double> c,
                      const IndicatorConfig& cfg, std::size_t t) {
  const std::size_t fk = sz(cfg.stoch_fastk), sk = sz(cfg.stoch_slowk), sd = sz(cfg.stoch_slowd);
  require(t < c.size() && t + 3 >= fk + sk + sd, "stochastic", t);
  auto slow_k_at = [&](std::size_t u) {
    double sum = 0.0;
    for (std::size_t i = u + 1 - sk; i <= u; ++i) sum += fast_k(h, l, c, fk, i);
    return sum / static_cast<double>(sk);
  };
  Stochastic out;
  out.slow_k = slow_k_at(t);
  double sum = 0.0;
  for (std::size_t u = t + 1 - sd; u <= t; ++u) sum += u == t ? out.slow_k : slow_k_at(u);
  out.slow_d = sum / static_cast<double>(sd);
  return out;
}

double willr(std::span<const double> h, std::span<const double> l, std::span<const double> c, int n, std::size_t t) {
  require(n >= 1 && t < c.size() && t + 1 >= sz(n), "willr", t);
  double hh = h[t], ll = l[t];
  for (std::size_t i = t + 1 - sz(n); i < t; ++i) {
    hh = std::max(hh, h[i]);
    ll = std::min(ll, l[i]);
  }
  if (hh == ll) return -50.0;
  return (hh - c[t]) / (hh - ll) * -100.0;
}

double macd_diff(std::span<const double> closes, const IndicatorConfig& cfg, std::size_t t) {
  require(t >= 1 && t < closes.size(), "macd_diff", t);
  const auto line = macd_line(closes.first(t + 1), cfg);
  return (line[t] - line[t - 1]) / closes[t];
}

double cci(std::span<const double> h, std::span<const double> l, std::span<const double> c, int n, std::size_t t) {
  require(n >= 1 && t < c.size() && t + 1 >= sz(n), "cci", t);
  const std::size_t first = t + 1 - sz(n);
  double sm = 0.0;
  for (std::size_t i = first; i <= t; ++i) sm += typical(h, l, c, i);
  sm /= n;
  double dev = 0.0;
  for (std::size_t i = first; i <= t; ++i) dev += std::abs(typical(h, l, c, i) - sm);
  dev /= n;
  if (dev == 0.0 || dev <= kDegenerate * std::abs(sm)) return 0.0;
  return (typical(h, l, c, t) - sm) / (0.015 * dev);
}

double rsi(std::span<const double> closes, int n, std::size_t t) {
  require(n >= 1 && t < closes.size() && t >= sz(n), "rsi", t);
  double up = 0.0, down = 0.0;
  for (std::size_t i = t + 1 - sz(n); i <= t; ++i) {
    const double change = closes[i] - closes[i - 1];
    if (change > 0.0)
      up += change;
    else
      down -= change;
  }
  up /= n;
  down /= n;
  if (up == 0.0 && down == 0.0) return 50.0;
  if (down == 0.0) return 100.0;
  if (up == 0.0) return 0.0;
  return 100.0 - 100.0 / (1.0 + up / down);
}

std::vector<double> adosc_raw_series(std::span<const double> h, std::span<const double> l,
                                     std::span<const double> c, std::span<const double> v,
                                     const IndicatorConfig& cfg) {
  std::vector<double> ad(c.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < c.size(); ++t) {
    acc += cmfv(h, l, c, v, cfg.cmfv, t);
    ad[t] = acc;
  }
  const auto fast = ema(ad, cfg.adosc_fast);
  const auto slow = ema(ad, cfg.adosc_slow);
  for (std::size_t t = 0; t < ad.size(); ++t) ad[t] = fast[t] - slow[t];
  return ad;
}

double adosc(std::span<const double> h, std::span<const double> l, std::span<const double> c,
             std::span<const double> v, const IndicatorConfig& cfg, std::size_t t) {
  const std::size_t len = sz(cfg.adosc_zscore_len);
  require(t < c.size() && t + 1 >= len, "adosc", t);
  const auto raw = adosc_raw_series(h.first(t + 1), l.first(t + 1), c.first(t + 1), v.first(t + 1), cfg);
  return zscore_last(raw, t, len);
}

IndicatorColumns compute_indicators(const AdjustedSeries& s, const IndicatorConfig& cfg) {
  cfg.validate();
  const std::size_t n = s.size();
  const std::span<const double> h = s.high, l = s.low, c = s.close, v = s.volume;
  IndicatorColumns col;
  for (auto* x : {&col.sma_fast, &col.sma_slow, &col.slow_k, &col.slow_d, &col.willr, &col.macd_diff, &col.cci,
                  &col.rsi, &col.adosc})
    x->assign(n, kNaN);

  std::vector<double> fk(n, kNaN), sk(n, kNaN);
  const std::size_t fkn = sz(cfg.stoch_fastk), skn = sz(cfg.stoch_slowk), sdn = sz(cfg.stoch_slowd);
  for (std::size_t t = 0; t < n; ++t) {
    if (t + 1 >= fkn) fk[t] = fast_k(h, l, c, fkn, t);
    if (t + 2 >= fkn + skn) sk[t] = window_mean(fk, t, skn);
    if (t + 3 >= fkn + skn + sdn) {
      col.slow_k[t] = sk[t];
      col.slow_d[t] = window_mean(sk, t, sdn);
    }
    if (t + 1 >= sz(cfg.sma_fast)) col.sma_fast[t] = sma_ratio(c, cfg.sma_fast, t);
    if (t + 1 >= sz(cfg.sma_slow)) col.sma_slow[t] = sma_ratio(c, cfg.sma_slow, t);
    if (t + 1 >= sz(cfg.willr_n)) col.willr[t] = willr(h, l, c, cfg.willr_n, t);
    if (t + 1 >= sz(cfg.cci_n)) col.cci[t] = cci(h, l, c, cfg.cci_n, t);
    if (t >= sz(cfg.rsi_n)) col.rsi[t] = rsi(c, cfg.rsi_n, t);
  }

  const auto line = macd_line(c, cfg);
  for (std::size_t t = 1; t < n; ++t) col.macd_diff[t] = (line[t] - line[t - 1]) / c[t];

  const auto raw = adosc_raw_series(h, l, c, v, cfg);
  const std::size_t zl = sz(cfg.adosc_zscore_len);
  for (std::size_t t = zl - 1; t < n; ++t) col.adosc[t] = zscore_last(raw, t, zl);
  return col;
}

std::vector<FeatureVector> build_features(const SeriesWindow& window, const IndicatorConfig& cfg) {
  cfg.validate();
  if (window.warmup_len < cfg.required_warmup())
    throw Error(ErrorKind::InsufficientHistory, "window warmup " + std::to_string(window.warmup_len) +
                                                    " < required " + std::to_string(cfg.required_warmup()));
  if (window.bars.size() != window.warmup_len + window.trade_len)
    throw Error(ErrorKind::InvalidArgument, "window length mismatch");
  const auto series = adjust(window.bars);
  const auto col = compute_indicators(series, cfg);
  std::vector<FeatureVector> out(window.trade_len);
  for (std::size_t i = 0; i < window.trade_len; ++i) {
    const std::size_t t = window.warmup_len + i;
    FeatureVector& f = out[i];
    f.sma5 = col.sma_fast[t];
    f.sma10 = col.sma_slow[t];
    f.slow_k = col.slow_k[t];
    f.slow_d = col.slow_d[t];
    f.willr = col.willr[t];
    f.macd_diff = col.macd_diff[t];
    f.cci = col.cci[t];
    f.rsi = col.rsi[t];
    f.adosc = col.adosc[t];
  }
  return out;
}

}  // namespace ntrade
