#include "ntrade/config.hpp"

#include <set>

#include "ntrade/io.hpp"

namespace ntrade {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config section '" + where + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items())
    if (!allowed.count(k)) throw Error(ErrorKind::InvalidArgument, "unknown config key '" + where + k + "'");
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void EngineConfig::validate() const {
  train.validate();
  selection.validate();
  if (eval_runs < 1 || eval_window_days <= 0)
    throw Error(ErrorKind::InvalidArgument, "evaluation runs and window must be positive");
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  try {
    reject_unknown(j, "", {"store", "output_dir", "seed", "jobs", "schedule", "warmup_len", "checkpoint_every",
                           "per_genome_windows", "fitness", "neat", "indicators", "broker", "selection", "evaluation"});
    if (j.contains("store")) c.store = j.at("store").get<std::string>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    get(j, "seed", c.seed);
    get(j, "jobs", c.train.jobs);
    if (j.contains("schedule")) c.train.schedule = StageSchedule::parse(j.at("schedule").get<std::string>());
    get(j, "warmup_len", c.train.warmup_len);
    get(j, "checkpoint_every", c.train.checkpoint_every);
    get(j, "per_genome_windows", c.train.per_genome_windows);

    if (j.contains("fitness")) {
      const auto& f = j.at("fitness");
      reject_unknown(f, "fitness.", {"kind", "w_relative", "w_drawdown", "w_trades", "w_duration", "sqrt_trades"});
      auto& o = c.train.fitness;
      if (f.contains("kind")) o.kind = parse_fitness_kind(f.at("kind").get<std::string>());
      get(f, "w_relative", o.w_relative);
      get(f, "w_drawdown", o.w_drawdown);
      get(f, "w_trades", o.w_trades);
      get(f, "w_duration", o.w_duration);
      get(f, "sqrt_trades", o.sqrt_trades);
    }
    if (j.contains("neat")) {
      const auto& n = j.at("neat");
      reject_unknown(n, "neat.",
                     {"population_size", "c1_excess", "c2_disjoint", "c3_weight", "compatibility_threshold",
                      "weight_mutate_prob", "weight_perturb_prob", "weight_perturb_power", "weight_replace_range",
                      "initial_weight_range", "add_connection_prob", "add_node_prob", "crossover_rate",
                      "inherit_disabled_prob", "elitism", "elitism_min_species_size", "stale_species_cutoff",
                      "survival_threshold"});
      auto& o = c.train.neat;
      get(n, "population_size", o.population_size);
      get(n, "c1_excess", o.c1_excess);
      get(n, "c2_disjoint", o.c2_disjoint);
      get(n, "c3_weight", o.c3_weight);
      get(n, "compatibility_threshold", o.compatibility_threshold);
      get(n, "weight_mutate_prob", o.weight_mutate_prob);
      get(n, "weight_perturb_prob", o.weight_perturb_prob);
      get(n, "weight_perturb_power", o.weight_perturb_power);
      get(n, "weight_replace_range", o.weight_replace_range);
      get(n, "initial_weight_range", o.initial_weight_range);
      get(n, "add_connection_prob", o.add_connection_prob);
      get(n, "add_node_prob", o.add_node_prob);
      get(n, "crossover_rate", o.crossover_rate);
      get(n, "inherit_disabled_prob", o.inherit_disabled_prob);
      get(n, "elitism", o.elitism);
      get(n, "elitism_min_species_size", o.elitism_min_species_size);
      get(n, "stale_species_cutoff", o.stale_species_cutoff);
      get(n, "survival_threshold", o.survival_threshold);
    }
    if (j.contains("indicators")) {
      const auto& i = j.at("indicators");
      reject_unknown(i, "indicators.",
                     {"sma_fast", "sma_slow", "stoch_fastk", "stoch_slowk", "stoch_slowd", "willr_n", "macd_fast",
                      "macd_slow", "macd_signal", "cci_n", "rsi_n", "adosc_fast", "adosc_slow", "adosc_zscore_len",
                      "cmfv"});
      auto& o = c.train.indicators;
      get(i, "sma_fast", o.sma_fast);
      get(i, "sma_slow", o.sma_slow);
      get(i, "stoch_fastk", o.stoch_fastk);
      get(i, "stoch_slowk", o.stoch_slowk);
      get(i, "stoch_slowd", o.stoch_slowd);
      get(i, "willr_n", o.willr_n);
      get(i, "macd_fast", o.macd_fast);
      get(i, "macd_slow", o.macd_slow);
      get(i, "macd_signal", o.macd_signal);
      get(i, "cci_n", o.cci_n);
      get(i, "rsi_n", o.rsi_n);
      get(i, "adosc_fast", o.adosc_fast);
      get(i, "adosc_slow", o.adosc_slow);
      get(i, "adosc_zscore_len", o.adosc_zscore_len);
      if (i.contains("cmfv")) {
        const auto mode = i.at("cmfv").get<std::string>();
        if (mode == "standard")
          o.cmfv = CmfvMode::Standard;
        else if (mode == "literal")
          o.cmfv = CmfvMode::Literal;
        else
          throw Error(ErrorKind::InvalidArgument, "indicators.cmfv must be 'standard' or 'literal'");
      }
    }
    if (j.contains("broker")) {
      const auto& b = j.at("broker");
      reject_unknown(b, "broker.", {"initial_cash", "commission_pct", "volume_floor", "max_short_leverage"});
      get(b, "initial_cash", c.train.broker.initial_cash);
      get(b, "commission_pct", c.train.broker.commission_pct);
      get(b, "volume_floor", c.train.broker.volume_floor);
      get(b, "max_short_leverage", c.train.broker.max_short_leverage);
    }
    if (j.contains("selection")) {
      const auto& s = j.at("selection");
      reject_unknown(s, "selection.", {"n_runs", "window_days", "max_avg_duration_days", "min_trades", "max_trades"});
      get(s, "n_runs", c.selection.n_runs);
      get(s, "window_days", c.selection.window_days);
      get(s, "max_avg_duration_days", c.selection.max_avg_duration_days);
      get(s, "min_trades", c.selection.min_trades);
      get(s, "max_trades", c.selection.max_trades);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      reject_unknown(e, "evaluation.", {"runs", "window_days"});
      get(e, "runs", c.eval_runs);
      get(e, "window_days", c.eval_window_days);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const EngineConfig& c) {
  const auto& t = c.train;
  const auto& n = t.neat;
  const auto& i = t.indicators;
  return {
      {"store", c.store.string()},
      {"output_dir", c.output_dir.string()},
      {"seed", c.seed},
      {"jobs", t.jobs},
      {"schedule", t.schedule.to_string()},
      {"warmup_len", t.warmup_len},
      {"checkpoint_every", t.checkpoint_every},
      {"per_genome_windows", t.per_genome_windows},
      {"fitness",
       {{"kind", to_string(t.fitness.kind)},
        {"w_relative", t.fitness.w_relative},
        {"w_drawdown", t.fitness.w_drawdown},
        {"w_trades", t.fitness.w_trades},
        {"w_duration", t.fitness.w_duration},
        {"sqrt_trades", t.fitness.sqrt_trades}}},
      {"neat",
       {{"population_size", n.population_size},
        {"c1_excess", n.c1_excess},
        {"c2_disjoint", n.c2_disjoint},
        {"c3_weight", n.c3_weight},
        {"compatibility_threshold", n.compatibility_threshold},
        {"weight_mutate_prob", n.weight_mutate_prob},
        {"weight_perturb_prob", n.weight_perturb_prob},
        {"weight_perturb_power", n.weight_perturb_power},
        {"weight_replace_range", n.weight_replace_range},
        {"initial_weight_range", n.initial_weight_range},
        {"add_connection_prob", n.add_connection_prob},
        {"add_node_prob", n.add_node_prob},
        {"crossover_rate", n.crossover_rate},
        {"inherit_disabled_prob", n.inherit_disabled_prob},
        {"elitism", n.elitism},
        {"elitism_min_species_size", n.elitism_min_species_size},
        {"stale_species_cutoff", n.stale_species_cutoff},
        {"survival_threshold", n.survival_threshold}}},
      {"indicators",
       {{"sma_fast", i.sma_fast},
        {"sma_slow", i.sma_slow},
        {"stoch_fastk", i.stoch_fastk},
        {"stoch_slowk", i.stoch_slowk},
        {"stoch_slowd", i.stoch_slowd},
        {"willr_n", i.willr_n},
        {"macd_fast", i.macd_fast},
        {"macd_slow", i.macd_slow},
        {"macd_signal", i.macd_signal},
        {"cci_n", i.cci_n},
        {"rsi_n", i.rsi_n},
        {"adosc_fast", i.adosc_fast},
        {"adosc_slow", i.adosc_slow},
        {"adosc_zscore_len", i.adosc_zscore_len},
        {"cmfv", i.cmfv == CmfvMode::Standard ? "standard" : "literal"}}},
      {"broker",
       {{"initial_cash", t.broker.initial_cash},
        {"commission_pct", t.broker.commission_pct},
        {"volume_floor", t.broker.volume_floor},
        {"max_short_leverage", t.broker.max_short_leverage}}},
      {"selection",
       {{"n_runs", c.selection.n_runs},
        {"window_days", c.selection.window_days},
        {"max_avg_duration_days", c.selection.max_avg_duration_days},
        {"min_trades", c.selection.min_trades},
        {"max_trades", c.selection.max_trades}}},
      {"evaluation", {{"runs", c.eval_runs}, {"window_days", c.eval_window_days}}},
  };
}

EngineConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json(path)); }

}  // namespace ntrade
