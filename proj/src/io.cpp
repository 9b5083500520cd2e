#include "ntrade/io.hpp"

#include <cstdio>
#include <fstream>

namespace ntrade {

using nlohmann::json;

namespace {

std::string_view kind_name(neat::NodeKind k) {
  switch (k) {
    case neat::NodeKind::Input: return "input";
    case neat::NodeKind::Bias: return "bias";
    case neat::NodeKind::Output: return "output";
    case neat::NodeKind::Hidden: return "hidden";
  }
  return "?";
}

neat::NodeKind kind_from(const std::string& s) {
  if (s == "input") return neat::NodeKind::Input;
  if (s == "bias") return neat::NodeKind::Bias;
  if (s == "output") return neat::NodeKind::Output;
  if (s == "hidden") return neat::NodeKind::Hidden;
  throw Error(ErrorKind::Format, "unknown node kind '" + s + "'");
}

void check_header(const json& j, std::string_view format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw Error(ErrorKind::Format, "expected a '" + std::string(format) + "' document");
  if (j.value("version", 0) != kFileVersion)
    throw Error(ErrorKind::Format, "unsupported " + std::string(format) + " version");
}

template <typename F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, std::string("malformed document: ") + e.what());
  }
}

}  // namespace

json genome_to_json(const neat::Genome& g) {
  json nodes = json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"id", n.id},
                     {"kind", kind_name(n.kind)},
                     {"activation", n.activation == neat::Activation::Sigmoid ? "sigmoid" : "identity"}});
  json conns = json::array();
  for (const auto& c : g.connections)
    conns.push_back({{"innovation", c.innovation},
                     {"in", c.in_node},
                     {"out", c.out_node},
                     {"weight", c.weight},
                     {"enabled", c.enabled}});
  json j = {{"id", g.id}, {"nodes", nodes}, {"connections", conns}};
  j["fitness"] = g.fitness ? json(*g.fitness) : json(nullptr);
  return j;
}

neat::Genome genome_from_json(const json& j) {
  return guarded([&] {
    neat::Genome g;
    g.id = j.at("id").get<std::int64_t>();
    for (const auto& n : j.at("nodes")) {
      const std::string act = n.at("activation").get<std::string>();
      if (act != "sigmoid" && act != "identity") throw Error(ErrorKind::Format, "unknown activation '" + act + "'");
      g.nodes.push_back({n.at("id").get<int>(), kind_from(n.at("kind").get<std::string>()),
                         act == "sigmoid" ? neat::Activation::Sigmoid : neat::Activation::Identity});
    }
    for (const auto& c : j.at("connections"))
      g.connections.push_back({c.at("in").get<int>(), c.at("out").get<int>(), c.at("weight").get<double>(),
                               c.at("enabled").get<bool>(), c.at("innovation").get<int>()});
    if (j.contains("fitness") && !j.at("fitness").is_null()) g.fitness = j.at("fitness").get<double>();
    neat::validate(g);
    return g;
  });
}

json species_to_json(const neat::Species& s) {
  json j = {{"id", s.id},
            {"representative", genome_to_json(s.representative)},
            {"members", s.members},
            {"staleness", s.staleness}};
  j["best_fitness"] = s.best_fitness ? json(*s.best_fitness) : json(nullptr);
  return j;
}

neat::Species species_from_json(const json& j) {
  return guarded([&] {
    neat::Species s;
    s.id = j.at("id").get<int>();
    s.representative = genome_from_json(j.at("representative"));
    s.members = j.at("members").get<std::vector<std::int64_t>>();
    s.staleness = j.at("staleness").get<int>();
    if (!j.at("best_fitness").is_null()) s.best_fitness = j.at("best_fitness").get<double>();
    return s;
  });
}

json ledger_to_json(const neat::InnovationLedger& l) {
  const auto s = l.state();
  json conns = json::array();
  for (const auto& [pair, inno] : s.connections) conns.push_back({pair.first, pair.second, inno});
  json splits = json::array();
  for (const auto& [inno, node] : s.splits) splits.push_back({inno, node});
  return {{"next_innovation", s.next_innovation}, {"next_node_id", s.next_node_id},
          {"next_genome_id", s.next_genome_id},   {"next_species_id", s.next_species_id},
          {"connections", conns},                 {"splits", splits}};
}

neat::InnovationLedger ledger_from_json(const json& j) {
  return guarded([&] {
    neat::InnovationLedger::State s;
    s.next_innovation = j.at("next_innovation").get<int>();
    s.next_node_id = j.at("next_node_id").get<int>();
    s.next_genome_id = j.at("next_genome_id").get<std::int64_t>();
    s.next_species_id = j.at("next_species_id").get<int>();
    for (const auto& c : j.at("connections")) s.connections[{c.at(0).get<int>(), c.at(1).get<int>()}] = c.at(2).get<int>();
    for (const auto& c : j.at("splits")) s.splits[c.at(0).get<int>()] = c.at(1).get<int>();
    return neat::InnovationLedger::from_state(s);
  });
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::StoreIo, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error(ErrorKind::StoreIo, "write failed for '" + path.string() + "'");
}

void write_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

void save_genome(const std::filesystem::path& path, const neat::Genome& g) {
  write_json(path, {{"format", "ntrade-genome"}, {"version", kFileVersion}, {"genome", genome_to_json(g)}});
}

neat::Genome load_genome(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (j.value("format", "") == "ntrade-population") {
    auto pop = load_population(path);
    if (pop.size() != 1) throw Error(ErrorKind::Format, "population file holds " + std::to_string(pop.size()) + " genomes, expected 1");
    return pop.front();
  }
  check_header(j, "ntrade-genome");
  return genome_from_json(j.at("genome"));
}

void save_population(const std::filesystem::path& path, std::span<const neat::Genome> genomes) {
  json arr = json::array();
  for (const auto& g : genomes) arr.push_back(genome_to_json(g));
  write_json(path, {{"format", "ntrade-population"}, {"version", kFileVersion}, {"genomes", arr}});
}

std::vector<neat::Genome> load_population(const std::filesystem::path& path) {
  const json j = read_json(path);
  check_header(j, "ntrade-population");
  return guarded([&] {
    std::vector<neat::Genome> out;
    for (const auto& g : j.at("genomes")) out.push_back(genome_from_json(g));
    return out;
  });
}

json report_to_json(const BacktestReport& r, bool include_series) {
  json j = {{"format", "ntrade-backtest-report"},
            {"version", kFileVersion},
            {"ticker", r.ticker},
            {"start", format_date(r.start)},
            {"end", format_date(r.end)},
            {"pnl_pct", r.pnl_pct},
            {"bnh_pct", r.bnh_pct},
            {"pnl_relative", r.pnl_relative},
            {"max_drawdown_pct", r.max_drawdown_pct},
            {"n_trades", r.n_trades},
            {"n_wins", r.n_wins},
            {"win_rate", r.win_rate},
            {"avg_duration_days", r.avg_duration_days},
            {"exposure_pct", r.exposure_pct},
            {"sqn", r.sqn},
            {"bankrupt", r.bankrupt}};
  json trades = json::array();
  for (const auto& t : r.trades)
    trades.push_back({{"direction", t.direction == Side::Long ? "long" : "short"},
                      {"entry_bar", t.entry_bar},
                      {"exit_bar", t.exit_bar},
                      {"entry_date", format_date(t.entry_date)},
                      {"exit_date", format_date(t.exit_date)},
                      {"entry_price", t.entry_price},
                      {"exit_price", t.exit_price},
                      {"size", t.size},
                      {"fees", t.fees},
                      {"pnl", t.pnl},
                      {"pnl_pct", t.pnl_pct},
                      {"duration_bars", t.duration_bars},
                      {"duration_days", t.duration_days}});
  j["trades"] = trades;
  if (include_series) {
    json curve = json::array();
    for (std::size_t i = 0; i < r.equity_curve.size(); ++i)
      curve.push_back({format_date(r.dates[i]), r.equity_curve[i]});
    j["equity_curve"] = curve;
  }
  return j;
}

void write_equity_csv(const std::filesystem::path& path, const BacktestReport& r) {
  std::string text = "date,equity\n";
  char buf[64];
  for (std::size_t i = 0; i < r.equity_curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, ",%.17g\n", r.equity_curve[i]);
    text += format_date(r.dates[i]) + buf;
  }
  write_text(path, text);
}

}  // namespace ntrade
