// ntrade: command-line front end for ingesting data, training, selecting and
// evaluating evolved trading networks.
//
// Exit codes: 0 success, 1 usage, 2 data, 3 runtime.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "ntrade/config.hpp"
#include "ntrade/evaluator.hpp"
#include "ntrade/io.hpp"
#include "ntrade/market_data.hpp"
#include "ntrade/trainer.hpp"

namespace fs = std::filesystem;
using namespace ntrade;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kExitUsage;
    case ErrorKind::MissingFile:
    case ErrorKind::MalformedHeader:
    case ErrorKind::InsufficientHistory:
    case ErrorKind::UnknownTicker:
    case ErrorKind::Format:
    case ErrorKind::InvalidGenome: return kExitData;
    case ErrorKind::StoreIo:
    case ErrorKind::NonFinite: return kExitRuntime;
  }
  return kExitRuntime;
}

struct GlobalOptions {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::string> store;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

EngineConfig resolve(const GlobalOptions& g) {
  EngineConfig c = g.config.empty() ? EngineConfig{} : load_config(g.config);
  if (g.out) c.output_dir = *g.out;
  if (g.store) c.store = *g.store;
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) c.train.jobs = *g.jobs;
  c.validate();
  return c;
}

fs::path output_dir(const EngineConfig& c) {
  fs::create_directories(c.output_dir);
  return c.output_dir;
}

MarketData open_market(const EngineConfig& c) {
  if (!fs::exists(c.store)) throw Error(ErrorKind::MissingFile, "store '" + c.store.string() + "' does not exist");
  BarStore store(c.store);
  MarketData data = store.snapshot();
  if (data.empty()) throw Error(ErrorKind::InsufficientHistory, "store '" + c.store.string() + "' is empty");
  return data;
}

void print_stats(const DatasetStats& s) {
  std::cout << "tickers=" << s.ticker_count << " rows=" << s.row_count << " rejected=" << s.rejected_row_count;
  if (s.date_min) std::cout << " from=" << format_date(*s.date_min) << " to=" << format_date(*s.date_max);
  std::cout << "\n";
}

void print_report(const BacktestReport& r) {
  std::printf("%s %s..%s\n", r.ticker.c_str(), format_date(r.start).c_str(), format_date(r.end).c_str());
  std::printf("  return        %10.4f%%\n", r.pnl_pct);
  std::printf("  buy & hold    %10.4f%%\n", r.bnh_pct);
  std::printf("  relative      %10.4f%%\n", r.pnl_relative);
  std::printf("  max drawdown  %10.4f%%\n", r.max_drawdown_pct);
  std::printf("  trades        %10zu (wins %zu)\n", r.n_trades, r.n_wins);
  std::printf("  avg duration  %10.2f days\n", r.avg_duration_days);
  std::printf("  exposure      %10.2f%%\n", r.exposure_pct);
  std::printf("  sqn           %10.4f\n", r.sqn);
  if (r.bankrupt) std::printf("  BANKRUPT\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neuroevolution trading engine"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Engine config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--store", g.store, "Bar store (SQLite file)");
  app.add_option("--seed", g.seed, "Global RNG seed");
  app.add_option("--jobs", g.jobs, "Worker threads (1 = reference mode)")->check(CLI::PositiveNumber);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Load OHLCV CSV files into the store");
  std::vector<std::string> csv_files;
  ingest->add_option("files", csv_files, "CSV files")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Write synthetic GBM bars as CSV (and optionally ingest them)");
  std::vector<std::string> synth_tickers{"SYN"};
  std::size_t synth_bars = 2000;
  SyntheticParams sp;
  bool synth_ingest = false;
  synth->add_option("--tickers", synth_tickers, "Ticker symbols")->delimiter(',');
  synth->add_option("--bars", synth_bars, "Bars per ticker")->check(CLI::PositiveNumber);
  synth->add_option("--initial-price", sp.initial_price);
  synth->add_option("--drift", sp.drift, "Mean per-bar log return");
  synth->add_option("--volatility", sp.volatility, "Per-bar log-return std");
  synth->add_option("--sine-amplitude", sp.sine_amplitude);
  synth->add_option("--sine-period", sp.sine_period);
  synth->add_flag("--ingest", synth_ingest, "Also load the bars into the store");

  // train
  auto* train_cmd = app.add_subcommand("train", "Evolve a population");
  std::string resume, stages, fitness_name;
  std::optional<int> stop_after;
  std::optional<std::size_t> population_size;
  train_cmd->add_option("--resume", resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_option("--stages", stages, "Schedule, e.g. 1500:90,400:150,100:365");
  train_cmd->add_option("--fitness", fitness_name, "sqn|mo|mo-active");
  train_cmd->add_option("--stop-after", stop_after, "Stop after this many completed generations");
  train_cmd->add_option("--population", population_size, "Population size");

  // select
  auto* select = app.add_subcommand("select", "Pick the champion of a population");
  std::string population_file;
  select->add_option("--population", population_file, "Population file")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Compare a genome against Buy & Hold");
  std::string genome_file;
  std::optional<std::size_t> runs;
  std::optional<int> window_days;
  evaluate->add_option("--genome", genome_file, "Genome file")->required();
  evaluate->add_option("--runs", runs, "Number of sampled windows")->check(CLI::PositiveNumber);
  evaluate->add_option("--window-days", window_days)->check(CLI::PositiveNumber);

  // backtest
  auto* backtest = app.add_subcommand("backtest", "Backtest a genome on an explicit date range");
  std::string ticker, from, to;
  backtest->add_option("--genome", genome_file, "Genome file")->required();
  backtest->add_option("--ticker", ticker)->required();
  backtest->add_option("--from", from, "First trade date (YYYY-MM-DD)")->required();
  backtest->add_option("--to", to, "Last trade date (YYYY-MM-DD)")->required();

  // report
  auto* report = app.add_subcommand("report", "Re-render saved results");
  std::string runs_file, report_file;
  auto* runs_opt = report->add_option("--runs", runs_file, "Per-run comparison CSV")->check(CLI::ExistingFile);
  auto* bt_opt = report->add_option("--backtest", report_file, "Backtest report JSON")->check(CLI::ExistingFile);
  runs_opt->excludes(bt_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    EngineConfig cfg = resolve(g);

    if (*ingest) {
      BarStore store(cfg.store);
      DatasetStats last;
      std::size_t rejected = 0;
      for (const auto& f : csv_files) {
        last = ingest_csv(f, store);
        rejected += last.rejected_row_count;
      }
      last.rejected_row_count = rejected;
      print_stats(last);
      return 0;
    }

    if (*synth) {
      const fs::path out = output_dir(cfg);
      std::vector<Bar> all;
      for (std::size_t i = 0; i < synth_tickers.size(); ++i) {
        auto bars = generate_synthetic(synth_tickers[i], synth_bars, cfg.seed + i, sp);
        write_csv(out / ("synth_" + synth_tickers[i] + ".csv"), bars);
        all.insert(all.end(), bars.begin(), bars.end());
      }
      std::cout << "wrote " << synth_tickers.size() << " synthetic series to " << out.string() << "\n";
      if (synth_ingest) {
        BarStore store(cfg.store);
        store.upsert(all);
        print_stats(store.stats());
      }
      return 0;
    }

    if (*train_cmd) {
      if (!stages.empty()) cfg.train.schedule = StageSchedule::parse(stages);
      if (!fitness_name.empty()) cfg.train.fitness.kind = parse_fitness_kind(fitness_name);
      if (population_size) cfg.train.neat.population_size = *population_size;
      cfg.validate();
      const MarketData data = open_market(cfg);
      const fs::path out = output_dir(cfg);
      write_json(out / "config.json", config_to_json(cfg));

      TrainRunState state;
      if (!resume.empty()) {
        state = load_checkpoint(resume);
      } else {
        if (!has_history_for(data, cfg.train.schedule.max_window_days(), cfg.train.warmup_len))
          throw Error(ErrorKind::InsufficientHistory, "no ticker covers the widest training window");
        state = init_run(cfg.train, cfg.seed);
      }
      const fs::path history_path = out / "history.csv";
      write_text(history_path, history_csv(state.history));
      std::ofstream history(history_path, std::ios::app);

      TrainOptions opts;
      opts.checkpoint_dir = out / "checkpoints";
      fs::create_directories(opts.checkpoint_dir);
      opts.stop_after = stop_after;
      opts.on_generation = [&](const HistoryRow& row) {
        const HistoryRow rows[] = {row};
        const std::string csv = history_csv(rows);
        history << csv.substr(csv.find('\n') + 1) << std::flush;
        if (row.generation % 10 == 0 || row.generation == 1)
          std::fprintf(stderr, "gen %d stage %d window %dd champion %.4f mean %.4f species %zu\n", row.generation,
                       row.stage, row.window_days, row.champion_fitness, row.mean_fitness, row.species_count);
      };
      train(state, data, cfg.train, opts);
      save_population(out / "population.json", state.evaluated);
      if (state.best) save_genome(out / "champion.json", *state.best);
      std::cout << "completed " << state.generation << " generations; artifacts in " << out.string() << "\n";
      return 0;
    }

    if (*select) {
      const auto population = load_population(population_file);
      if (population.empty()) throw Error(ErrorKind::Format, "population file is empty");
      const MarketData data = open_market(cfg);
      const fs::path out = output_dir(cfg);
      const auto result = select_champion(population, data, cfg.selection, cfg.eval_context(), cfg.seed);
      std::cout << render_selection(result);
      write_text(out / "selection.csv", selection_csv(result));
      save_genome(out / "selected.json", population[result.champion_index]);
      return 0;
    }

    if (*evaluate) {
      const auto genome = load_genome(genome_file);
      const MarketData data = open_market(cfg);
      const fs::path out = output_dir(cfg);
      const auto c = compare_vs_buy_and_hold(genome, data, runs.value_or(cfg.eval_runs),
                                             window_days.value_or(cfg.eval_window_days), cfg.eval_context(), cfg.seed);
      const std::string table = render_comparison(c);
      std::cout << table;
      write_text(out / "comparison_summary.txt", table);
      write_text(out / "comparison_summary.csv", comparison_summary_csv(c));
      write_text(out / "comparison_runs.csv", runs_csv(c.runs));
      write_text(out / "comparison_scatter.csv", scatter_csv(c.runs));
      write_text(out / "comparison_scatter.svg", scatter_svg(c.runs));
      return 0;
    }

    if (*backtest) {
      const auto genome = load_genome(genome_file);
      const MarketData data = open_market(cfg);
      const fs::path out = output_dir(cfg);
      const auto window = window_for_range(data, ticker, parse_date(from), parse_date(to), cfg.train.warmup_len);
      const auto features = build_features(window, cfg.train.indicators);
      const auto r = run_backtest(genome, window, features, cfg.train.broker);
      print_report(r);
      write_json(out / "backtest_report.json", report_to_json(r));
      write_equity_csv(out / "equity.csv", r);
      return 0;
    }

    if (*report) {
      const fs::path out = output_dir(cfg);
      if (!runs_file.empty()) {
        std::ifstream in(runs_file);
        std::stringstream ss;
        ss << in.rdbuf();
        const auto c = aggregate(parse_runs_csv(ss.str()));
        const std::string table = render_comparison(c);
        std::cout << table;
        write_text(out / "report_summary.txt", table);
        write_text(out / "report_scatter.svg", scatter_svg(c.runs));
        return 0;
      }
      if (!report_file.empty()) {
        const auto j = read_json(report_file);
        if (j.value("format", "") != "ntrade-backtest-report")
          throw Error(ErrorKind::Format, "not a backtest report");
        std::printf("%s %s..%s return %.4f%% (B&H %.4f%%) maxDD %.4f%% trades %zu sqn %.4f\n",
                    j.at("ticker").get<std::string>().c_str(), j.at("start").get<std::string>().c_str(),
                    j.at("end").get<std::string>().c_str(), j.at("pnl_pct").get<double>(),
                    j.at("bnh_pct").get<double>(), j.at("max_drawdown_pct").get<double>(),
                    j.at("n_trades").get<std::size_t>(), j.at("sqn").get<double>());
        return 0;
      }
      throw Error(ErrorKind::InvalidArgument, "report needs --runs or --backtest");
    }
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
