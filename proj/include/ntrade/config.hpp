#pragma once

#include <filesystem>

#include <json.hpp>

#include "ntrade/evaluator.hpp"
#include "ntrade/trainer.hpp"

namespace ntrade {

/// Everything a CLI run needs. See config/default.json for the key layout;
/// missing keys keep their defaults and unknown keys are rejected.
struct EngineConfig {
  std::filesystem::path store = "data/bars.sqlite";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  TrainConfig train;
  SelectionCriteria selection;
  std::size_t eval_runs = 100;
  int eval_window_days = 365;

  EvalContext eval_context() const { return {train.indicators, train.broker, train.warmup_len, train.jobs}; }
  void validate() const;
};

EngineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const EngineConfig& c);
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace ntrade
