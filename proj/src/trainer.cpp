#include "ntrade/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "ntrade/io.hpp"

namespace ntrade {

// ---------------------------------------------------------------------------
// Schedule

StageSchedule StageSchedule::progressive_default() { return StageSchedule{{{1500, 90}, {400, 150}, {100, 365}}}; }

StageSchedule StageSchedule::parse(const std::string& text) {
  StageSchedule s;
  if (!text.empty() && text.back() == ',')
    throw Error(ErrorKind::InvalidArgument, "bad schedule '" + text + "': trailing comma");
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto colon = item.find(':');
    int gens = 0, days = 0;
    std::size_t used_g = 0, used_d = 0;
    try {
      if (colon == std::string::npos) throw std::invalid_argument("no colon");
      const std::string g = item.substr(0, colon), d = item.substr(colon + 1);
      gens = std::stoi(g, &used_g);
      days = std::stoi(d, &used_d);
      if (used_g != g.size() || used_d != d.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidArgument, "bad stage '" + item + "', expected GENERATIONS:DAYS");
    }
    s.stages.push_back({gens, days});
  }
  s.validate();
  return s;
}

std::string StageSchedule::to_string() const {
  std::string out;
  for (const auto& st : stages) {
    if (!out.empty()) out += ',';
    out += std::to_string(st.generations) + ":" + std::to_string(st.window_days);
  }
  return out;
}

int StageSchedule::total_generations() const {
  int n = 0;
  for (const auto& st : stages) n += st.generations;
  return n;
}

int StageSchedule::max_window_days() const {
  int m = 0;
  for (const auto& st : stages) m = std::max(m, st.window_days);
  return m;
}

void StageSchedule::validate() const {
  if (stages.empty()) throw Error(ErrorKind::InvalidArgument, "empty stage schedule");
  for (const auto& st : stages)
    if (st.generations <= 0 || st.window_days <= 0)
      throw Error(ErrorKind::InvalidArgument, "stage generations and window days must be > 0");
}

int stage_for(int generation, const StageSchedule& schedule) {
  int end = 0;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    end += schedule.stages[i].generations;
    if (generation >= 1 && generation <= end) return static_cast<int>(i) + 1;
  }
  throw Error(ErrorKind::InvalidArgument, "generation " + std::to_string(generation) + " outside the schedule");
}

int window_days_for(int generation, const StageSchedule& schedule) {
  return schedule.stages[static_cast<std::size_t>(stage_for(generation, schedule) - 1)].window_days;
}

void TrainConfig::validate() const {
  neat.validate();
  indicators.validate();
  broker.validate();
  fitness.validate();
  schedule.validate();
  if (warmup_len < indicators.required_warmup())
    throw Error(ErrorKind::InvalidArgument, "warmup_len " + std::to_string(warmup_len) + " is shorter than the " +
                                                std::to_string(indicators.required_warmup()) +
                                                " bars the indicators need");
  if (checkpoint_every < 1) throw Error(ErrorKind::InvalidArgument, "checkpoint_every must be >= 1");
  if (jobs < 1) throw Error(ErrorKind::InvalidArgument, "jobs must be >= 1");
}

// ---------------------------------------------------------------------------
// Evaluation

TrainRunState init_run(const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TrainRunState s;
  s.rng = Rng(seed);
  s.population = neat::init_population(cfg.neat, s.ledger, s.rng);
  return s;
}

void evaluate_genomes(std::vector<neat::Genome>& genomes, std::span<const SeriesWindow> windows,
                      const TrainConfig& cfg) {
  if (windows.size() != 1 && windows.size() != genomes.size())
    throw Error(ErrorKind::InvalidArgument, "need one shared window or one window per genome");
  std::vector<std::vector<FeatureVector>> features;
  features.reserve(windows.size());
  for (const auto& w : windows) features.push_back(build_features(w, cfg.indicators));

  auto score = [&](std::size_t i) {
    const std::size_t wi = windows.size() == 1 ? 0 : i;
    const BacktestReport r = run_backtest(genomes[i], windows[wi], features[wi], cfg.broker);
    const double f = evaluate_fitness(r, cfg.fitness);
    genomes[i].fitness = std::isfinite(f) ? f : -1e9;
  };

  const std::size_t jobs = std::min(cfg.jobs, genomes.size());
  if (jobs <= 1) {
    for (std::size_t i = 0; i < genomes.size(); ++i) score(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < genomes.size();) {
        try {
          score(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

void run_generation(TrainRunState& state, const MarketData& data, const TrainConfig& cfg) {
  const int gen = state.generation + 1;
  const int days = window_days_for(gen, cfg.schedule);

  std::vector<SeriesWindow> windows;
  const std::size_t n_windows = cfg.per_genome_windows ? state.population.size() : 1;
  for (std::size_t i = 0; i < n_windows; ++i) windows.push_back(sample_window(data, days, cfg.warmup_len, state.rng));
  evaluate_genomes(state.population, windows, cfg);

  const neat::Genome* champion = &state.population.front();
  double total = 0.0;
  for (const auto& g : state.population) {
    total += *g.fitness;
    if (*g.fitness > *champion->fitness) champion = &g;
  }
  if (!state.best || *champion->fitness > *state.best->fitness) state.best = *champion;

  state.species = neat::speciate(state.population, state.species, cfg.neat, state.ledger, state.rng);

  HistoryRow row;
  row.generation = gen;
  row.stage = stage_for(gen, cfg.schedule);
  row.window_days = days;
  row.ticker = windows.front().ticker;
  row.window_start = windows.front().start_date();
  row.champion_fitness = *champion->fitness;
  row.mean_fitness = total / static_cast<double>(state.population.size());
  row.species_count = state.species.size();
  row.champion_id = champion->id;

  state.evaluated = state.population;
  state.population = neat::reproduce(state.species, state.evaluated, cfg.neat, state.ledger, state.rng);
  state.history.push_back(row);
  state.generation = gen;
}

// ---------------------------------------------------------------------------
// Driver

void train(TrainRunState& state, const MarketData& data, const TrainConfig& cfg, const TrainOptions& opts) {
  cfg.validate();
  const int total = cfg.schedule.total_generations();
  while (state.generation < total) {
    if (opts.stop_after && state.generation >= *opts.stop_after) break;
    run_generation(state, data, cfg);
    if (opts.on_generation) opts.on_generation(state.history.back());
    if (!opts.checkpoint_dir.empty() &&
        (state.generation % cfg.checkpoint_every == 0 || state.generation == total ||
         (opts.stop_after && state.generation == *opts.stop_after))) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint-%06d.json", state.generation);
      save_checkpoint(opts.checkpoint_dir / name, state);
    }
  }
}

TrainRunState train(const MarketData& data, const TrainConfig& cfg, std::uint64_t seed, const TrainOptions& opts) {
  cfg.validate();
  if (!has_history_for(data, cfg.schedule.max_window_days(), cfg.warmup_len))
    throw Error(ErrorKind::InsufficientHistory,
                "no ticker covers " + std::to_string(cfg.warmup_len) + " warmup bars plus a " +
                    std::to_string(cfg.schedule.max_window_days()) + "-day window");
  TrainRunState state = init_run(cfg, seed);
  train(state, data, cfg, opts);
  return state;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

nlohmann::json history_to_json(const HistoryRow& h) {
  return {{"generation", h.generation},         {"stage", h.stage},
          {"window_days", h.window_days},       {"ticker", h.ticker},
          {"window_start", format_date(h.window_start)}, {"champion_fitness", h.champion_fitness},
          {"mean_fitness", h.mean_fitness},     {"species_count", h.species_count},
          {"champion_id", h.champion_id}};
}

HistoryRow history_from_json(const nlohmann::json& j) {
  HistoryRow h;
  h.generation = j.at("generation").get<int>();
  h.stage = j.at("stage").get<int>();
  h.window_days = j.at("window_days").get<int>();
  h.ticker = j.at("ticker").get<std::string>();
  h.window_start = parse_date(j.at("window_start").get<std::string>());
  h.champion_fitness = j.at("champion_fitness").get<double>();
  h.mean_fitness = j.at("mean_fitness").get<double>();
  h.species_count = j.at("species_count").get<std::size_t>();
  h.champion_id = j.at("champion_id").get<std::int64_t>();
  return h;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainRunState& s) {
  using nlohmann::json;
  json pop = json::array(), evaluated = json::array(), species = json::array(), history = json::array();
  for (const auto& g : s.population) pop.push_back(genome_to_json(g));
  for (const auto& g : s.evaluated) evaluated.push_back(genome_to_json(g));
  for (const auto& sp : s.species) species.push_back(species_to_json(sp));
  for (const auto& h : s.history) history.push_back(history_to_json(h));
  json j = {{"format", "ntrade-checkpoint"},
            {"version", kFileVersion},
            {"generation", s.generation},
            {"rng", s.rng.state()},
            {"ledger", ledger_to_json(s.ledger)},
            {"population", pop},
            {"evaluated", evaluated},
            {"species", species},
            {"history", history}};
  j["best"] = s.best ? genome_to_json(*s.best) : json(nullptr);
  write_json(path, j);
}

TrainRunState load_checkpoint(const std::filesystem::path& path) {
  const auto j = read_json(path);
  if (j.value("format", "") != "ntrade-checkpoint" || j.value("version", 0) != kFileVersion)
    throw Error(ErrorKind::Format, "'" + path.string() + "' is not a version " + std::to_string(kFileVersion) +
                                       " checkpoint");
  try {
    TrainRunState s;
    s.generation = j.at("generation").get<int>();
    s.rng.set_state(j.at("rng").get<std::string>());
    s.ledger = ledger_from_json(j.at("ledger"));
    for (const auto& g : j.at("population")) s.population.push_back(genome_from_json(g));
    for (const auto& g : j.at("evaluated")) s.evaluated.push_back(genome_from_json(g));
    for (const auto& sp : j.at("species")) s.species.push_back(species_from_json(sp));
    for (const auto& h : j.at("history")) s.history.push_back(history_from_json(h));
    if (!j.at("best").is_null()) s.best = genome_from_json(j.at("best"));
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Format, "corrupt checkpoint '" + path.string() + "': " + e.what());
  }
}

std::string history_csv(std::span<const HistoryRow> rows) {
  std::string out =
      "generation,stage,window_days,ticker,window_start,champion_fitness,mean_fitness,species_count,champion_id\n";
  char buf[512];
  for (const auto& h : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%s,%s,%.17g,%.17g,%zu,%lld\n", h.generation, h.stage, h.window_days,
                  h.ticker.c_str(), format_date(h.window_start).c_str(), h.champion_fitness, h.mean_fitness,
                  h.species_count, static_cast<long long>(h.champion_id));
    out += buf;
  }
  return out;
}

}  // namespace ntrade
