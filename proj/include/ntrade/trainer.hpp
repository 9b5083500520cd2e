#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ntrade/backtest.hpp"
#include "ntrade/fitness.hpp"
#include "ntrade/indicators.hpp"
#include "ntrade/market_data.hpp"
#include "ntrade/neat.hpp"

namespace ntrade {

struct Stage {
  int generations = 0;
  int window_days = 0;
};

/// Progressive training windows: consecutive stages, the first starting at
/// generation 1.
struct StageSchedule {
  std::vector<Stage> stages;

  /// 1500 gens on 90-day windows, 400 on 150-day, 100 on 365-day.
  static StageSchedule progressive_default();
  /// "1500:90,400:150,100:365". Throws Error{InvalidArgument}.
  static StageSchedule parse(const std::string& text);
  std::string to_string() const;

  int total_generations() const;
  int max_window_days() const;
  void validate() const;
};

/// Calendar-day window for a 1-based generation number.
int window_days_for(int generation, const StageSchedule& schedule);
/// 1-based stage index for a generation.
int stage_for(int generation, const StageSchedule& schedule);

struct TrainConfig {
  neat::NeatConfig neat;
  IndicatorConfig indicators;
  BrokerConfig broker;
  FitnessOption fitness;
  StageSchedule schedule = StageSchedule::progressive_default();
  std::size_t warmup_len = 50;
  /// Draw one window per genome instead of one shared window per generation.
  bool per_genome_windows = false;
  int checkpoint_every = 50;
  std::size_t jobs = 1;

  void validate() const;
};

struct HistoryRow {
  int generation = 0;
  int stage = 0;
  int window_days = 0;
  std::string ticker;
  Date window_start{};
  double champion_fitness = 0.0;
  double mean_fitness = 0.0;
  std::size_t species_count = 0;
  std::int64_t champion_id = 0;
};

struct TrainRunState {
  /// Number of completed generations.
  int generation = 0;
  /// Genomes to be evaluated next.
  std::vector<neat::Genome> population;
  /// The most recently evaluated generation, with fitness.
  std::vector<neat::Genome> evaluated;
  std::vector<neat::Species> species;
  neat::InnovationLedger ledger;
  Rng rng;
  std::vector<HistoryRow> history;
  std::optional<neat::Genome> best;
};

TrainRunState init_run(const TrainConfig& cfg, std::uint64_t seed);

/// Backtests and scores every genome on `window` (or on one window each when
/// `windows` has one entry per genome). Pure per genome; `jobs` threads.
void evaluate_genomes(std::vector<neat::Genome>& genomes, std::span<const SeriesWindow> windows,
                      const TrainConfig& cfg);

/// One full generation: sample, evaluate, speciate, reproduce, record.
void run_generation(TrainRunState& state, const MarketData& data, const TrainConfig& cfg);

struct TrainOptions {
  /// Empty disables checkpoint files.
  std::filesystem::path checkpoint_dir;
  /// Stop once this many generations are complete (simulated interruption).
  std::optional<int> stop_after;
  std::function<void(const HistoryRow&)> on_generation;
};

/// Runs from state.generation + 1 to the end of the schedule.
void train(TrainRunState& state, const MarketData& data, const TrainConfig& cfg, const TrainOptions& opts = {});

/// Fresh run; fails fast when no ticker covers the widest stage window.
TrainRunState train(const MarketData& data, const TrainConfig& cfg, std::uint64_t seed, const TrainOptions& opts = {});

void save_checkpoint(const std::filesystem::path& path, const TrainRunState& state);
TrainRunState load_checkpoint(const std::filesystem::path& path);

/// Columns: generation,stage,window_days,ticker,window_start,champion_fitness,
/// mean_fitness,species_count,champion_id
std::string history_csv(std::span<const HistoryRow> rows);

}  // namespace ntrade
