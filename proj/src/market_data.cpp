#include "ntrade/market_data.hpp"

#include <sqlite3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace ntrade {

bool is_valid(const Bar& b) {
  for (double p : {b.open, b.high, b.low, b.close, b.adj_close}) {
    if (!std::isfinite(p) || p <= 0.0) return false;
  }
  if (!std::isfinite(b.volume) || b.volume < 0.0) return false;
  if (b.high < b.low) return false;
  if (b.low > std::min(b.open, b.close) || b.high < std::max(b.open, b.close)) return false;
  return !b.ticker.empty();
}

void audit_window(const SeriesWindow& w, std::size_t min_warmup) {
  if (w.bars.size() != w.warmup_len + w.trade_len)
    throw Error(ErrorKind::InvalidArgument, "window length mismatch");
  if (w.warmup_len < min_warmup) throw Error(ErrorKind::InvalidArgument, "window warmup too short");
  for (std::size_t i = 0; i < w.bars.size(); ++i) {
    if (w.bars[i].ticker != w.ticker) throw Error(ErrorKind::InvalidArgument, "window mixes tickers");
    if (i > 0 && !(w.bars[i - 1].date < w.bars[i].date))
      throw Error(ErrorKind::InvalidArgument, "window dates not strictly increasing");
  }
}

AdjustedSeries adjust(std::span<const Bar> bars) {
  AdjustedSeries s;
  s.dates.reserve(bars.size());
  for (auto* v : {&s.open, &s.high, &s.low, &s.close, &s.volume}) v->reserve(bars.size());
  for (const Bar& b : bars) {
    const double f = b.adj_close / b.close;
    s.dates.push_back(b.date);
    s.open.push_back(b.open * f);
    s.high.push_back(b.high * f);
    s.low.push_back(b.low * f);
    s.close.push_back(b.adj_close);
    s.volume.push_back(b.volume);
  }
  return s;
}

// ---------------------------------------------------------------------------
// MarketData

MarketData::MarketData(std::vector<Bar> bars) {
  for (Bar& b : bars) series_[b.ticker].push_back(std::move(b));
  for (auto& [ticker, v] : series_) {
    std::stable_sort(v.begin(), v.end(), [](const Bar& a, const Bar& b) { return a.date < b.date; });
    // last-wins dedup: keep the final element of each run of equal dates
    std::vector<Bar> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i + 1 < v.size() && v[i + 1].date == v[i].date) continue;
      out.push_back(std::move(v[i]));
    }
    v = std::move(out);
  }
}

const std::vector<Bar>& MarketData::series(const std::string& ticker) const {
  auto it = series_.find(ticker);
  if (it == series_.end()) throw Error(ErrorKind::UnknownTicker, "unknown ticker '" + ticker + "'");
  return it->second;
}

std::vector<std::string> MarketData::tickers() const {
  std::vector<std::string> out;
  out.reserve(series_.size());
  for (const auto& [t, _] : series_) out.push_back(t);
  return out;
}

std::size_t MarketData::longest_series() const {
  std::size_t n = 0;
  for (const auto& [_, v] : series_) n = std::max(n, v.size());
  return n;
}

// ---------------------------------------------------------------------------
// BarStore

namespace {

struct DbCloser {
  void operator()(sqlite3* db) const { sqlite3_close(db); }
};
struct StmtFinalizer {
  void operator()(sqlite3_stmt* s) const { sqlite3_finalize(s); }
};
using DbPtr = std::unique_ptr<sqlite3, DbCloser>;
using StmtPtr = std::unique_ptr<sqlite3_stmt, StmtFinalizer>;

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
INSERT OR IGNORE INTO meta (key, value) VALUES ('schema_version', '1');
CREATE TABLE IF NOT EXISTS bars (
  ticker    TEXT NOT NULL,
  date      TEXT NOT NULL,
  open      REAL NOT NULL,
  high      REAL NOT NULL,
  low       REAL NOT NULL,
  close     REAL NOT NULL,
  adj_close REAL NOT NULL,
  volume    REAL NOT NULL,
  PRIMARY KEY (ticker, date)
) WITHOUT ROWID;
)sql";

[[noreturn]] void db_fail(sqlite3* db, const std::string& what) {
  throw Error(ErrorKind::StoreIo, what + ": " + (db ? sqlite3_errmsg(db) : "no connection"));
}

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error(ErrorKind::StoreIo, std::string("sqlite: ") + msg);
  }
}

StmtPtr prepare(sqlite3* db, const char* sql) {
  sqlite3_stmt* raw = nullptr;
  if (sqlite3_prepare_v2(db, sql, -1, &raw, nullptr) != SQLITE_OK) db_fail(db, "prepare");
  return StmtPtr(raw);
}

std::string column_text(sqlite3_stmt* s, int col) {
  const auto* p = sqlite3_column_text(s, col);
  return p ? reinterpret_cast<const char*>(p) : "";
}

}  // namespace

struct BarStore::Impl {
  DbPtr db;
};

BarStore::BarStore(const std::filesystem::path& path) : impl_(std::make_unique<Impl>()) {
  sqlite3* raw = nullptr;
  const int rc = sqlite3_open_v2(path.string().c_str(), &raw, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE, nullptr);
  impl_->db.reset(raw);
  if (rc != SQLITE_OK) db_fail(raw, "cannot open store '" + path.string() + "'");
  exec(raw, kSchema);
}

BarStore::~BarStore() = default;

std::size_t BarStore::upsert(std::span<const Bar> bars) {
  std::lock_guard lock(mutex_);
  sqlite3* db = impl_->db.get();
  exec(db, "BEGIN IMMEDIATE");
  std::size_t rejected = 0;
  try {
    auto stmt = prepare(db,
                        "INSERT OR REPLACE INTO bars (ticker, date, open, high, low, close, adj_close, volume) "
                        "VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)");
    for (const Bar& b : bars) {
      if (!is_valid(b)) {
        ++rejected;
        continue;
      }
      const std::string date = format_date(b.date);
      sqlite3_reset(stmt.get());
      sqlite3_bind_text(stmt.get(), 1, b.ticker.c_str(), -1, SQLITE_TRANSIENT);
      sqlite3_bind_text(stmt.get(), 2, date.c_str(), -1, SQLITE_TRANSIENT);
      sqlite3_bind_double(stmt.get(), 3, b.open);
      sqlite3_bind_double(stmt.get(), 4, b.high);
      sqlite3_bind_double(stmt.get(), 5, b.low);
      sqlite3_bind_double(stmt.get(), 6, b.close);
      sqlite3_bind_double(stmt.get(), 7, b.adj_close);
      sqlite3_bind_double(stmt.get(), 8, b.volume);
      if (sqlite3_step(stmt.get()) != SQLITE_DONE) db_fail(db, "insert");
    }
    exec(db, "COMMIT");
  } catch (...) {
    sqlite3_exec(db, "ROLLBACK", nullptr, nullptr, nullptr);
    throw;
  }
  return rejected;
}

DatasetStats BarStore::stats() const {
  std::lock_guard lock(mutex_);
  sqlite3* db = impl_->db.get();
  auto stmt = prepare(db, "SELECT COUNT(DISTINCT ticker), COUNT(*), MIN(date), MAX(date) FROM bars");
  if (sqlite3_step(stmt.get()) != SQLITE_ROW) db_fail(db, "stats");
  DatasetStats s;
  s.ticker_count = static_cast<std::size_t>(sqlite3_column_int64(stmt.get(), 0));
  s.row_count = static_cast<std::size_t>(sqlite3_column_int64(stmt.get(), 1));
  if (s.row_count > 0) {
    s.date_min = parse_date(column_text(stmt.get(), 2));
    s.date_max = parse_date(column_text(stmt.get(), 3));
  }
  return s;
}

MarketData BarStore::snapshot() const {
  std::lock_guard lock(mutex_);
  sqlite3* db = impl_->db.get();
  auto stmt = prepare(db,
                      "SELECT ticker, date, open, high, low, close, adj_close, volume FROM bars "
                      "ORDER BY ticker, date");
  std::vector<Bar> bars;
  int rc;
  while ((rc = sqlite3_step(stmt.get())) == SQLITE_ROW) {
    Bar b;
    b.ticker = column_text(stmt.get(), 0);
    b.date = parse_date(column_text(stmt.get(), 1));
    b.open = sqlite3_column_double(stmt.get(), 2);
    b.high = sqlite3_column_double(stmt.get(), 3);
    b.low = sqlite3_column_double(stmt.get(), 4);
    b.close = sqlite3_column_double(stmt.get(), 5);
    b.adj_close = sqlite3_column_double(stmt.get(), 6);
    b.volume = sqlite3_column_double(stmt.get(), 7);
    bars.push_back(std::move(b));
  }
  if (rc != SQLITE_DONE) db_fail(db, "snapshot");
  return MarketData(std::move(bars));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(sep, pos);
    out.push_back(trim(line.substr(pos, next - pos)));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size();
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

constexpr std::string_view kColumns[] = {"Ticker", "Datetime", "Open", "High", "Low", "Close", "Adj_Close", "Volume"};

}  // namespace

DatasetStats ingest_csv(const std::filesystem::path& path, BarStore& store) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::MalformedHeader, "empty file '" + path.string() + "'");
  std::string_view header = line;
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  const auto cols = split(trim(header), ',');
  bool ok = cols.size() == std::size(kColumns);
  for (std::size_t i = 0; ok && i < cols.size(); ++i) ok = iequals(cols[i], kColumns[i]);
  if (!ok) throw Error(ErrorKind::MalformedHeader, "unexpected header in '" + path.string() + "': " + line);

  std::vector<Bar> bars;
  std::size_t rejected = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    Bar b;
    bool good = f.size() == 8 && !f[0].empty();
    if (good) {
      b.ticker = std::string(f[0]);
      try {
        b.date = parse_date(f[1]);
      } catch (const Error&) {
        good = false;
      }
    }
    good = good && parse_double(f[2], b.open) && parse_double(f[3], b.high) && parse_double(f[4], b.low) &&
           parse_double(f[5], b.close) && parse_double(f[6], b.adj_close) && parse_double(f[7], b.volume);
    if (!good || !is_valid(b)) {
      ++rejected;
      continue;
    }
    bars.push_back(std::move(b));
  }
  store.upsert(bars);
  DatasetStats s = store.stats();
  s.rejected_row_count = rejected;
  return s;
}

void write_csv(const std::filesystem::path& path, std::span<const Bar> bars) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::StoreIo, "cannot write '" + path.string() + "'");
  out << "Ticker,Datetime,Open,High,Low,Close,Adj_Close,Volume\n";
  char buf[256];
  for (const Bar& b : bars) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", b.ticker.c_str(),
                  format_date(b.date).c_str(), b.open, b.high, b.low, b.close, b.adj_close, b.volume);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Synthetic data

std::vector<Bar> generate_synthetic(const std::string& ticker, std::size_t n_bars, std::uint64_t seed,
                                    const SyntheticParams& p) {
  if (!(p.initial_price > 0.0) || !std::isfinite(p.initial_price))
    throw Error(ErrorKind::InvalidArgument, "initial price must be positive");
  if (n_bars < 1) throw Error(ErrorKind::InvalidArgument, "n_bars must be >= 1");
  if (!(p.volatility >= 0.0)) throw Error(ErrorKind::InvalidArgument, "volatility must be >= 0");
  if (!(p.sine_period > 0.0) || std::abs(p.sine_amplitude) >= 1.0)
    throw Error(ErrorKind::InvalidArgument, "sine period must be > 0 and |amplitude| < 1");

  Rng rng(seed);
  std::vector<Bar> out;
  out.reserve(n_bars);
  double trend = p.initial_price;
  double prev_close = p.initial_price;
  Date date = p.start;
  auto is_weekend = [](Date d) {
    const std::chrono::weekday wd{d};
    return wd == std::chrono::Saturday || wd == std::chrono::Sunday;
  };
  while (is_weekend(date)) date += std::chrono::days{1};

  for (std::size_t t = 0; t < n_bars; ++t) {
    if (t > 0) trend *= std::exp(p.drift + p.volatility * rng.normal());
    const double cycle =
        p.sine_amplitude == 0.0
            ? 1.0
            : 1.0 + p.sine_amplitude * std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) / p.sine_period);
    const double close = trend * cycle;
    const double open = t == 0 ? close : prev_close;
    const double up = std::min(0.5, std::abs(p.wick * rng.normal()));
    const double down = std::min(0.5, std::abs(p.wick * rng.normal()));
    Bar b;
    b.ticker = ticker;
    b.date = date;
    b.open = open;
    b.close = close;
    b.adj_close = close;
    b.high = std::max(open, close) * (1.0 + up);
    b.low = std::min(open, close) * (1.0 - down);
    b.volume = std::round(p.base_volume * std::exp(0.3 * rng.normal()));
    out.push_back(std::move(b));
    prev_close = close;
    do {
      date += std::chrono::days{1};
    } while (is_weekend(date));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

/// Number of valid start indices for one series; starts are [warmup, warmup + count).
std::size_t valid_start_count(const std::vector<Bar>& s, int window_days, std::size_t warmup) {
  if (s.size() <= warmup || window_days <= 0) return 0;
  const Date last = s.back().date;
  std::size_t count = 0;
  for (std::size_t i = warmup; i < s.size(); ++i) {
    if (s[i].date + std::chrono::days{window_days - 1} > last) break;
    ++count;
  }
  return count;
}

SeriesWindow make_window(const std::vector<Bar>& s, std::size_t first_trade, std::size_t end_trade,
                         std::size_t warmup) {
  SeriesWindow w;
  w.ticker = s.at(first_trade).ticker;
  w.warmup_len = warmup;
  w.trade_len = end_trade - first_trade;
  w.bars.assign(s.begin() + static_cast<std::ptrdiff_t>(first_trade - warmup),
                s.begin() + static_cast<std::ptrdiff_t>(end_trade));
  return w;
}

}  // namespace

bool has_history_for(const MarketData& data, int window_days, std::size_t warmup_len) {
  for (const auto& t : data.tickers())
    if (valid_start_count(data.series(t), window_days, warmup_len) > 0) return true;
  return false;
}

SeriesWindow sample_window(const MarketData& data, int window_days, std::size_t warmup_len, Rng& rng) {
  if (window_days <= 0) throw Error(ErrorKind::InvalidArgument, "window_days must be > 0");
  std::vector<std::pair<const std::vector<Bar>*, std::size_t>> eligible;
  for (const auto& t : data.tickers()) {
    const auto& s = data.series(t);
    if (const std::size_t n = valid_start_count(s, window_days, warmup_len); n > 0) eligible.emplace_back(&s, n);
  }
  if (eligible.empty())
    throw Error(ErrorKind::InsufficientHistory, "no ticker covers " + std::to_string(warmup_len) +
                                                    " warmup bars plus a " + std::to_string(window_days) +
                                                    "-day window");
  const auto& [series, count] = eligible[rng.index(eligible.size())];
  const std::size_t start = warmup_len + rng.index(count);
  const Date stop = (*series)[start].date + std::chrono::days{window_days};
  std::size_t end = start;
  while (end < series->size() && (*series)[end].date < stop) ++end;
  return make_window(*series, start, end, warmup_len);
}

SeriesWindow window_for_range(const MarketData& data, const std::string& ticker, Date from, Date to,
                              std::size_t warmup_len) {
  if (to < from) throw Error(ErrorKind::InvalidArgument, "range end precedes start");
  const auto& s = data.series(ticker);
  auto lo = std::lower_bound(s.begin(), s.end(), from, [](const Bar& b, Date d) { return b.date < d; });
  auto hi = std::upper_bound(s.begin(), s.end(), to, [](Date d, const Bar& b) { return d < b.date; });
  const auto first = static_cast<std::size_t>(lo - s.begin());
  const auto end = static_cast<std::size_t>(hi - s.begin());
  if (first >= end) throw Error(ErrorKind::InsufficientHistory, "no bars for " + ticker + " in range");
  if (first < warmup_len)
    throw Error(ErrorKind::InsufficientHistory,
                "range starts too early for " + std::to_string(warmup_len) + " warmup bars");
  return make_window(s, first, end, warmup_len);
}

}  // namespace ntrade
