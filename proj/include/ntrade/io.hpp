#pragma once

// JSON and CSV persistence for genomes, populations and backtest reports.
// Every JSON document carries a "format" tag and an integer "version".

#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "ntrade/backtest.hpp"
#include "ntrade/neat.hpp"

namespace ntrade {

inline constexpr int kFileVersion = 1;

nlohmann::json genome_to_json(const neat::Genome& g);
neat::Genome genome_from_json(const nlohmann::json& j);

nlohmann::json species_to_json(const neat::Species& s);
neat::Species species_from_json(const nlohmann::json& j);

nlohmann::json ledger_to_json(const neat::InnovationLedger& l);
neat::InnovationLedger ledger_from_json(const nlohmann::json& j);

void save_genome(const std::filesystem::path& path, const neat::Genome& g);
/// Accepts a genome document or a population document holding one genome.
neat::Genome load_genome(const std::filesystem::path& path);

void save_population(const std::filesystem::path& path, std::span<const neat::Genome> genomes);
std::vector<neat::Genome> load_population(const std::filesystem::path& path);

nlohmann::json report_to_json(const BacktestReport& r, bool include_series = true);

/// Two columns: date,equity.
void write_equity_csv(const std::filesystem::path& path, const BacktestReport& r);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ntrade
