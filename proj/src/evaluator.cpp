#include "ntrade/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace ntrade {

namespace {

/// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(m);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<SeriesWindow> sample_windows(const MarketData& data, std::size_t n, int days, std::size_t warmup,
                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SeriesWindow> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_window(data, days, warmup, rng));
  return out;
}

}  // namespace

void SelectionCriteria::validate() const {
  if (n_runs < 1) throw Error(ErrorKind::InvalidArgument, "selection needs at least one run");
  if (window_days <= 0) throw Error(ErrorKind::InvalidArgument, "selection window must be > 0 days");
  if (!(min_trades < max_trades)) throw Error(ErrorKind::InvalidArgument, "trade band needs min < max");
}

SelectionResult select_champion(std::span<const neat::Genome> population, const MarketData& data,
                                const SelectionCriteria& criteria, const EvalContext& ctx, std::uint64_t seed) {
  criteria.validate();
  if (population.empty()) throw Error(ErrorKind::InvalidArgument, "empty population");
  const auto windows = sample_windows(data, criteria.n_runs, criteria.window_days, ctx.warmup_len, seed);
  std::vector<std::vector<FeatureVector>> features;
  for (const auto& w : windows) features.push_back(build_features(w, ctx.indicators));

  SelectionResult result;
  for (const auto& w : windows) result.windows.push_back({w.ticker, w.start_date(), w.end_date(), w.trade_len});
  result.summaries.resize(population.size());

  parallel_for(population.size(), ctx.jobs, [&](std::size_t i) {
    IndividualSummary& s = result.summaries[i];
    s.index = i;
    s.id = population[i].id;
    std::vector<double> sqns, durations, trades, returns;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto r = run_backtest(population[i], windows[k], features[k], ctx.broker);
      sqns.push_back(r.sqn);
      durations.push_back(r.avg_duration_days);
      trades.push_back(static_cast<double>(r.n_trades));
      returns.push_back(r.pnl_pct);
    }
    s.runs = windows.size();
    s.mean_sqn = mean_of(sqns);
    s.mean_duration_days = mean_of(durations);
    s.mean_trades = mean_of(trades);
    s.mean_return_pct = mean_of(returns);
    if (!(s.mean_duration_days < criteria.max_avg_duration_days))
      s.reason = "avg duration " + fmt("%.1f", s.mean_duration_days) + "d >= " +
                 fmt("%.0f", criteria.max_avg_duration_days) + "d";
    else if (s.mean_trades < criteria.min_trades || s.mean_trades > criteria.max_trades)
      s.reason = "avg trades " + fmt("%.1f", s.mean_trades) + " outside [" + fmt("%.0f", criteria.min_trades) + ", " +
                 fmt("%.0f", criteria.max_trades) + "]";
    s.eligible = s.reason.empty();
  });

  auto best_of = [&](bool require_eligible) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    for (const auto& s : result.summaries) {
      if (require_eligible && !s.eligible) continue;
      if (!best || s.mean_sqn > result.summaries[*best].mean_sqn) best = s.index;
    }
    return best;
  };
  auto pick = best_of(true);
  if (!pick) {
    result.relaxed = true;
    pick = best_of(false);
  }
  result.champion_index = *pick;
  result.champion_id = population[*pick].id;
  return result;
}

std::string render_selection(const SelectionResult& r) {
  std::ostringstream os;
  os << "Selection over " << r.windows.size() << " windows";
  if (!r.windows.empty()) os << " (" << r.windows.front().ticker << " " << format_date(r.windows.front().start) << " ...)";
  os << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%6s %10s %10s %12s %10s %10s  %s\n", "index", "id", "mean_sqn", "duration_d",
                "trades", "return%", "status");
  os << line;
  for (const auto& s : r.summaries) {
    std::snprintf(line, sizeof line, "%6zu %10lld %10.4f %12.2f %10.2f %10.2f  %s\n", s.index,
                  static_cast<long long>(s.id), s.mean_sqn, s.mean_duration_days, s.mean_trades, s.mean_return_pct,
                  s.eligible ? "ok" : s.reason.c_str());
    os << line;
  }
  os << "champion: id " << r.champion_id << " (index " << r.champion_index << ")";
  if (r.relaxed) os << " [warning: no individual passed the filters; ranked by mean SQN only]";
  os << "\n";
  return os.str();
}

std::string selection_csv(const SelectionResult& r) {
  std::string out = "index,id,runs,mean_sqn,mean_duration_days,mean_trades,mean_return_pct,eligible,reason\n";
  char buf[512];
  for (const auto& s : r.summaries) {
    std::snprintf(buf, sizeof buf, "%zu,%lld,%zu,%.17g,%.17g,%.17g,%.17g,%d,\"%s\"\n", s.index,
                  static_cast<long long>(s.id), s.runs, s.mean_sqn, s.mean_duration_days, s.mean_trades,
                  s.mean_return_pct, s.eligible ? 1 : 0, s.reason.c_str());
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

ComparisonReport aggregate(std::vector<RunRecord> runs) {
  ComparisonReport c;
  c.n_runs = runs.size();
  std::vector<double> model, bnh, exp_model, exp_bnh;
  for (const auto& r : runs) {
    model.push_back(r.model_return);
    bnh.push_back(r.bnh_return);
    exp_model.push_back(r.model_exposure);
    exp_bnh.push_back(r.bnh_exposure);
    c.model_total_trades += r.n_trades;
    c.model_winning_trades += r.n_wins;
    if (r.bnh_return > 0.0) ++c.bnh_positive_runs;
    const double gap = r.model_return - r.bnh_return;
    if (gap > kTieTolerance)
      ++c.relative_wins_model;
    else if (gap < -kTieTolerance)
      ++c.relative_wins_bnh;
    else
      ++c.ties;
  }
  c.avg_return_model = mean_of(model);
  c.avg_return_bnh = mean_of(bnh);
  c.std_return_model = sample_std(model);
  c.std_return_bnh = sample_std(bnh);
  c.win_rate_model_defined = c.model_total_trades > 0;
  c.win_rate_model = c.win_rate_model_defined
                         ? static_cast<double>(c.model_winning_trades) / static_cast<double>(c.model_total_trades)
                         : 0.0;
  c.win_rate_bnh = c.n_runs ? static_cast<double>(c.bnh_positive_runs) / static_cast<double>(c.n_runs) : 0.0;
  c.exposure_model = mean_of(exp_model);
  c.exposure_bnh = mean_of(exp_bnh);
  c.runs = std::move(runs);
  return c;
}

ComparisonReport compare_vs_buy_and_hold(const neat::Genome& genome, const MarketData& data, std::size_t n_runs,
                                         int window_days, const EvalContext& ctx, std::uint64_t seed) {
  if (n_runs < 1) throw Error(ErrorKind::InvalidArgument, "comparison needs at least one run");
  const auto windows = sample_windows(data, n_runs, window_days, ctx.warmup_len, seed);
  std::vector<RunRecord> runs(n_runs);
  parallel_for(n_runs, ctx.jobs, [&](std::size_t i) {
    const auto& w = windows[i];
    const auto features = build_features(w, ctx.indicators);
    const auto model = run_backtest(genome, w, features, ctx.broker);
    const auto bnh = buy_and_hold(w, ctx.broker);
    RunRecord& r = runs[i];
    r.run_id = i;
    r.ticker = w.ticker;
    r.start = w.start_date();
    r.end = w.end_date();
    r.model_return = model.pnl_pct;
    r.bnh_return = bnh.pnl_pct;
    r.model_exposure = model.exposure_pct;
    r.n_trades = model.n_trades;
    r.avg_duration = model.avg_duration_days;
    r.n_wins = model.n_wins;
    r.bnh_exposure = bnh.exposure_pct;
  });
  return aggregate(std::move(runs));
}

std::string render_comparison(const ComparisonReport& c) {
  char line[256];
  std::ostringstream os;
  std::snprintf(line, sizeof line, "%-18s | %-22s | %-22s\n", "Metrics", "Model", "Buy & Hold");
  os << line << std::string(68, '-') << "\n";
  std::snprintf(line, sizeof line, "%-18s | %-22s | %-22s\n", "Average Return", fmt("%.2f%%", c.avg_return_model).c_str(),
                fmt("%.2f%%", c.avg_return_bnh).c_str());
  os << line;
  std::snprintf(line, sizeof line, "%-18s | %-22s | %-22s\n", "Std of Return", fmt("%.2f%%", c.std_return_model).c_str(),
                fmt("%.2f%%", c.std_return_bnh).c_str());
  os << line;
  const std::string model_wr = std::to_string(c.model_winning_trades) + "/" + std::to_string(c.model_total_trades) +
                               "=" + (c.win_rate_model_defined ? fmt("%.0f%%", c.win_rate_model * 100.0) : "n/a");
  const std::string bnh_wr = std::to_string(c.bnh_positive_runs) + "/" + std::to_string(c.n_runs) + "=" +
                             fmt("%.0f%%", c.win_rate_bnh * 100.0);
  std::snprintf(line, sizeof line, "%-18s | %-22s | %-22s\n", "Win Rate", model_wr.c_str(), bnh_wr.c_str());
  os << line;
  std::snprintf(line, sizeof line, "%-18s | %-22zu | %-22zu\n", "Relative Win Rate", c.relative_wins_model,
                c.relative_wins_bnh);
  os << line;
  std::snprintf(line, sizeof line, "%-18s | %-22s | %-22s\n", "Exposure Time", fmt("%.2f%%", c.exposure_model).c_str(),
                fmt("%.2f%%", c.exposure_bnh).c_str());
  os << line;
  os << "runs: " << c.n_runs << ", ties: " << c.ties << "\n";
  return os.str();
}

std::string comparison_summary_csv(const ComparisonReport& c) {
  char buf[1024];
  std::string out = "metric,model,buy_and_hold\n";
  std::snprintf(buf, sizeof buf,
                "average_return_pct,%.17g,%.17g\n"
                "std_return_pct,%.17g,%.17g\n"
                "win_rate,%zu/%zu,%zu/%zu\n"
                "relative_wins,%zu,%zu\n"
                "exposure_pct,%.17g,%.17g\n"
                "ties,%zu,%zu\n",
                c.avg_return_model, c.avg_return_bnh, c.std_return_model, c.std_return_bnh, c.model_winning_trades,
                c.model_total_trades, c.bnh_positive_runs, c.n_runs, c.relative_wins_model, c.relative_wins_bnh,
                c.exposure_model, c.exposure_bnh, c.ties, c.ties);
  return out + buf;
}

std::string runs_csv(std::span<const RunRecord> runs) {
  std::string out =
      "run_id,ticker,start,end,model_return,bnh_return,model_exposure,n_trades,avg_duration,n_wins,bnh_exposure\n";
  char buf[512];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%zu,%s,%s,%s,%.17g,%.17g,%.17g,%zu,%.17g,%zu,%.17g\n", r.run_id, r.ticker.c_str(),
                  format_date(r.start).c_str(), format_date(r.end).c_str(), r.model_return, r.bnh_return,
                  r.model_exposure, r.n_trades, r.avg_duration, r.n_wins, r.bnh_exposure);
    out += buf;
  }
  return out;
}

std::vector<RunRecord> parse_runs_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("run_id,ticker,start,end,model_return", 0) != 0)
    throw Error(ErrorKind::MalformedHeader, "not a per-run comparison CSV");
  std::vector<RunRecord> runs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 11) throw Error(ErrorKind::Format, "bad per-run row: " + line);
    try {
      RunRecord r;
      r.run_id = std::stoul(f[0]);
      r.ticker = f[1];
      r.start = parse_date(f[2]);
      r.end = parse_date(f[3]);
      r.model_return = std::stod(f[4]);
      r.bnh_return = std::stod(f[5]);
      r.model_exposure = std::stod(f[6]);
      r.n_trades = std::stoul(f[7]);
      r.avg_duration = std::stod(f[8]);
      r.n_wins = std::stoul(f[9]);
      r.bnh_exposure = std::stod(f[10]);
      runs.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Format, "bad per-run row: " + line);
    }
  }
  return runs;
}

std::string scatter_csv(std::span<const RunRecord> runs) {
  std::string out = "run_id,bnh_return,model_return\n";
  char buf[128];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.run_id, r.bnh_return, r.model_return);
    out += buf;
  }
  return out;
}

std::string scatter_svg(std::span<const RunRecord> runs) {
  constexpr double W = 640, H = 480, M = 60;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : runs) {
    lo = std::min({lo, r.model_return, r.bnh_return});
    hi = std::max({hi, r.model_return, r.bnh_return});
  }
  if (hi - lo < 1e-9) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  auto sx = [&](double v) { return M + (v - lo) / (hi - lo) * (W - 2 * M); };
  auto sy = [&](double v) { return H - M - (v - lo) / (hi - lo) * (H - 2 * M); };

  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << R"(<?xml version="1.0" encoding="UTF-8"?>)" << "\n"
     << R"(<svg xmlns="http://www.w3.org/2000/svg" width=")" << W << R"(" height=")" << H << R"(" viewBox="0 0 )" << W
     << ' ' << H << R"(">)" << "\n"
     << R"(<rect x="0" y="0" width=")" << W << R"(" height=")" << H << R"(" fill="white"/>)" << "\n"
     << R"(<line x1=")" << M << R"(" y1=")" << H - M << R"(" x2=")" << W - M << R"(" y2=")" << H - M
     << R"(" stroke="black"/>)" << "\n"
     << R"(<line x1=")" << M << R"(" y1=")" << M << R"(" x2=")" << M << R"(" y2=")" << H - M << R"(" stroke="black"/>)"
     << "\n"
     << R"(<line x1=")" << sx(lo) << R"(" y1=")" << sy(lo) << R"(" x2=")" << sx(hi) << R"(" y2=")" << sy(hi)
     << R"(" stroke="gray" stroke-dasharray="4 4"/>)" << "\n";
  if (runs.size() >= 2) {
    double mx = 0, my = 0;
    for (const auto& r : runs) {
      mx += r.bnh_return;
      my += r.model_return;
    }
    mx /= static_cast<double>(runs.size());
    my /= static_cast<double>(runs.size());
    double sxy = 0, sxx = 0;
    for (const auto& r : runs) {
      sxy += (r.bnh_return - mx) * (r.model_return - my);
      sxx += (r.bnh_return - mx) * (r.bnh_return - mx);
    }
    if (sxx > 0) {
      const double slope = sxy / sxx, icpt = my - slope * mx;
      os << R"(<line x1=")" << sx(lo) << R"(" y1=")" << sy(slope * lo + icpt) << R"(" x2=")" << sx(hi) << R"(" y2=")"
         << sy(slope * hi + icpt) << R"(" stroke="crimson"/>)" << "\n";
    }
  }
  for (const auto& r : runs)
    os << R"(<circle cx=")" << sx(r.bnh_return) << R"(" cy=")" << sy(r.model_return)
       << R"(" r="3" fill="steelblue" fill-opacity="0.7"/>)" << "\n";
  os << R"(<text x=")" << W / 2 << R"(" y=")" << H - 15 << R"(" text-anchor="middle" font-size="14">Buy &amp; Hold return (%)</text>)"
     << "\n"
     << R"(<text x="18" y=")" << H / 2 << R"(" text-anchor="middle" font-size="14" transform="rotate(-90 18 )" << H / 2
     << ")\">Model return (%)</text>\n"
     << R"(<text x=")" << M << R"(" y=")" << H - M + 18 << R"(" font-size="11">)" << lo << "</text>\n"
     << R"(<text x=")" << W - M << R"(" y=")" << H - M + 18 << R"(" font-size="11" text-anchor="end">)" << hi
     << "</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace ntrade
