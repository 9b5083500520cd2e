#include "ntrade/neat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>

namespace ntrade::neat {

// ---------------------------------------------------------------------------
// Genome

const NodeGene* Genome::find_node(int node_id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), node_id, [](const NodeGene& n, int id) { return n.id < id; });
  return it != nodes.end() && it->id == node_id ? &*it : nullptr;
}

bool Genome::has_connection(int in_node, int out_node) const {
  return std::any_of(connections.begin(), connections.end(),
                     [&](const ConnectionGene& c) { return c.in_node == in_node && c.out_node == out_node; });
}

std::size_t Genome::enabled_count() const {
  return static_cast<std::size_t>(
      std::count_if(connections.begin(), connections.end(), [](const ConnectionGene& c) { return c.enabled; }));
}

void validate(const Genome& g) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorKind::InvalidGenome, "genome " + std::to_string(g.id) + ": " + why);
  };
  for (std::size_t i = 1; i < g.nodes.size(); ++i)
    if (g.nodes[i - 1].id >= g.nodes[i].id) fail("node ids not unique and sorted");
  for (int id = 0; id < kBaseNodeCount; ++id) {
    const NodeGene* n = g.find_node(id);
    if (!n) fail("missing base node " + std::to_string(id));
    const NodeKind want = id < kInputCount ? NodeKind::Input : id == kBiasNode ? NodeKind::Bias : NodeKind::Output;
    if (n->kind != want) fail("base node " + std::to_string(id) + " has wrong kind");
  }
  for (const NodeGene& n : g.nodes) {
    if (n.id >= kBaseNodeCount && n.kind != NodeKind::Hidden) fail("non-base node must be hidden");
    const bool passthrough = n.kind == NodeKind::Input || n.kind == NodeKind::Bias;
    if (passthrough != (n.activation == Activation::Identity)) fail("activation tag does not match node kind");
  }
  std::set<std::pair<int, int>> pairs;
  for (std::size_t i = 0; i < g.connections.size(); ++i) {
    const ConnectionGene& c = g.connections[i];
    if (i > 0 && g.connections[i - 1].innovation >= c.innovation) fail("innovations not unique and sorted");
    const NodeGene* in = g.find_node(c.in_node);
    const NodeGene* out = g.find_node(c.out_node);
    if (!in || !out) fail("dangling connection " + std::to_string(c.innovation));
    if (out->kind == NodeKind::Input || out->kind == NodeKind::Bias) fail("connection into an input");
    if (!std::isfinite(c.weight)) fail("non-finite weight");
    if (!pairs.emplace(c.in_node, c.out_node).second) fail("duplicate connection pair");
  }
}

void NeatConfig::validate() const {
  for (double p : {weight_mutate_prob, weight_perturb_prob, add_connection_prob, add_node_prob, crossover_rate,
                   inherit_disabled_prob, survival_threshold}) {
    if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "NEAT probabilities must lie in [0, 1]");
  }
  if (population_size < 2) throw Error(ErrorKind::InvalidArgument, "population_size must be >= 2");
  if (!(compatibility_threshold > 0.0)) throw Error(ErrorKind::InvalidArgument, "compatibility threshold must be > 0");
  if (stale_species_cutoff < 1) throw Error(ErrorKind::InvalidArgument, "stale species cutoff must be >= 1");
}

// ---------------------------------------------------------------------------
// Ledger

int InnovationLedger::connection_innovation(int in_node, int out_node) {
  auto [it, inserted] = connections_.try_emplace({in_node, out_node}, next_innovation_);
  if (inserted) ++next_innovation_;
  return it->second;
}

std::optional<int> InnovationLedger::find_innovation(int in_node, int out_node) const {
  auto it = connections_.find({in_node, out_node});
  if (it == connections_.end()) return std::nullopt;
  return it->second;
}

int InnovationLedger::split_node(int connection_innovation) {
  auto [it, inserted] = splits_.try_emplace(connection_innovation, next_node_id_);
  if (inserted) ++next_node_id_;
  return it->second;
}

InnovationLedger::State InnovationLedger::state() const {
  return State{next_innovation_, next_node_id_, next_genome_id_, next_species_id_, connections_, splits_};
}

InnovationLedger InnovationLedger::from_state(const State& s) {
  InnovationLedger l;
  l.next_innovation_ = s.next_innovation;
  l.next_node_id_ = s.next_node_id;
  l.next_genome_id_ = s.next_genome_id;
  l.next_species_id_ = s.next_species_id;
  l.connections_ = s.connections;
  l.splits_ = s.splits;
  return l;
}

// ---------------------------------------------------------------------------
// Construction

namespace {

void sort_genes(Genome& g) {
  std::sort(g.nodes.begin(), g.nodes.end(), [](const NodeGene& a, const NodeGene& b) { return a.id < b.id; });
  std::sort(g.connections.begin(), g.connections.end(),
            [](const ConnectionGene& a, const ConnectionGene& b) { return a.innovation < b.innovation; });
}

void insert_connection(Genome& g, ConnectionGene c) {
  auto it = std::upper_bound(g.connections.begin(), g.connections.end(), c.innovation,
                             [](int inno, const ConnectionGene& x) { return inno < x.innovation; });
  g.connections.insert(it, c);
}

void insert_node(Genome& g, NodeGene n) {
  auto it = std::upper_bound(g.nodes.begin(), g.nodes.end(), n.id, [](int id, const NodeGene& x) { return id < x.id; });
  g.nodes.insert(it, n);
}

}  // namespace

std::vector<NodeGene> base_nodes() {
  std::vector<NodeGene> nodes;
  nodes.reserve(kBaseNodeCount);
  for (int i = 0; i < kInputCount; ++i) nodes.push_back({i, NodeKind::Input, Activation::Identity});
  nodes.push_back({kBiasNode, NodeKind::Bias, Activation::Identity});
  for (int i = 0; i < kOutputCount; ++i) nodes.push_back({kFirstOutput + i, NodeKind::Output, Activation::Sigmoid});
  return nodes;
}

Genome seed_genome(InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg) {
  Genome g;
  g.id = ledger.next_genome_id();
  g.nodes = base_nodes();
  for (int src = 0; src <= kBiasNode; ++src) {
    for (int o = 0; o < kOutputCount; ++o) {
      const int dst = kFirstOutput + o;
      g.connections.push_back({src, dst, rng.uniform(-cfg.initial_weight_range, cfg.initial_weight_range), true,
                               ledger.connection_innovation(src, dst)});
    }
  }
  for (int o = 0; o < kOutputCount; ++o) {
    const int node = kFirstOutput + o;
    g.connections.push_back({node, node, rng.uniform(-cfg.initial_weight_range, cfg.initial_weight_range), true,
                             ledger.connection_innovation(node, node)});
  }
  sort_genes(g);
  return g;
}

std::vector<Genome> init_population(const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng) {
  cfg.validate();
  std::vector<Genome> pop;
  pop.reserve(cfg.population_size);
  for (std::size_t i = 0; i < cfg.population_size; ++i) pop.push_back(seed_genome(ledger, rng, cfg));
  return pop;
}

// ---------------------------------------------------------------------------
// Distance

double compatibility(const Genome& a, const Genome& b, const NeatConfig& cfg) {
  const auto& ca = a.connections;
  const auto& cb = b.connections;
  const int max_a = ca.empty() ? -1 : ca.back().innovation;
  const int max_b = cb.empty() ? -1 : cb.back().innovation;
  std::size_t i = 0, j = 0, excess = 0, disjoint = 0, matching = 0;
  double weight_diff = 0.0;
  while (i < ca.size() || j < cb.size()) {
    if (j == cb.size() || (i < ca.size() && ca[i].innovation < cb[j].innovation)) {
      (ca[i].innovation > max_b ? excess : disjoint)++;
      ++i;
    } else if (i == ca.size() || cb[j].innovation < ca[i].innovation) {
      (cb[j].innovation > max_a ? excess : disjoint)++;
      ++j;
    } else {
      weight_diff += std::abs(ca[i].weight - cb[j].weight);
      ++matching;
      ++i;
      ++j;
    }
  }
  const std::size_t longest = std::max(ca.size(), cb.size());
  const double n = (ca.size() < 20 && cb.size() < 20) || longest == 0 ? 1.0 : static_cast<double>(longest);
  const double mean_w = matching ? weight_diff / static_cast<double>(matching) : 0.0;
  return cfg.c1_excess * static_cast<double>(excess) / n + cfg.c2_disjoint * static_cast<double>(disjoint) / n +
         cfg.c3_weight * mean_w;
}

// ---------------------------------------------------------------------------
// Mutation

void mutate_add_node(Genome& g, InnovationLedger& ledger, Rng& rng) {
  std::vector<std::size_t> enabled;
  for (std::size_t i = 0; i < g.connections.size(); ++i)
    if (g.connections[i].enabled) enabled.push_back(i);
  if (enabled.empty()) return;

  ConnectionGene& split = g.connections[enabled[rng.index(enabled.size())]];
  split.enabled = false;
  const ConnectionGene old = split;

  int node = ledger.split_node(old.innovation);
  // The genome may already carry that node (inherited from a parent that made
  // the same split earlier this generation).
  if (g.has_node(node)) node = ledger.fresh_node_id();
  insert_node(g, {node, NodeKind::Hidden, Activation::Sigmoid});
  insert_connection(g, {old.in_node, node, 1.0, true, ledger.connection_innovation(old.in_node, node)});
  insert_connection(g, {node, old.out_node, old.weight, true, ledger.connection_innovation(node, old.out_node)});
}

void mutate_add_connection(Genome& g, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg) {
  std::set<std::pair<int, int>> existing;
  for (const auto& c : g.connections) existing.emplace(c.in_node, c.out_node);
  std::vector<std::pair<int, int>> candidates;
  for (const NodeGene& src : g.nodes) {
    for (const NodeGene& dst : g.nodes) {
      if (dst.kind == NodeKind::Input || dst.kind == NodeKind::Bias) continue;
      if (!existing.count({src.id, dst.id})) candidates.emplace_back(src.id, dst.id);
    }
  }
  if (candidates.empty()) return;
  const auto [in, out] = candidates[rng.index(candidates.size())];
  insert_connection(g, {in, out, rng.uniform(-cfg.initial_weight_range, cfg.initial_weight_range), true,
                        ledger.connection_innovation(in, out)});
}

void mutate_weights(Genome& g, Rng& rng, const NeatConfig& cfg) {
  for (ConnectionGene& c : g.connections) {
    if (rng.chance(cfg.weight_perturb_prob))
      c.weight += rng.uniform(-cfg.weight_perturb_power, cfg.weight_perturb_power);
    else
      c.weight = rng.uniform(-cfg.weight_replace_range, cfg.weight_replace_range);
  }
}

void mutate(Genome& g, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg) {
  if (rng.chance(cfg.weight_mutate_prob)) mutate_weights(g, rng, cfg);
  if (rng.chance(cfg.add_node_prob)) mutate_add_node(g, ledger, rng);
  if (rng.chance(cfg.add_connection_prob)) mutate_add_connection(g, ledger, rng, cfg);
}

// ---------------------------------------------------------------------------
// Crossover

Genome crossover(const Genome& a, const Genome& b, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg) {
  if (!a.fitness || !b.fitness) throw Error(ErrorKind::InvalidArgument, "crossover needs evaluated parents");
  const bool equal = *a.fitness == *b.fitness;
  const Genome& fit = *a.fitness >= *b.fitness ? a : b;
  const Genome& other = &fit == &a ? b : a;

  Genome child;
  child.id = ledger.next_genome_id();
  std::map<int, NodeGene> nodes;
  for (const NodeGene& n : fit.nodes) nodes.emplace(n.id, n);
  if (equal)
    for (const NodeGene& n : other.nodes) nodes.emplace(n.id, n);

  auto pull_nodes = [&](const ConnectionGene& c) {
    for (int id : {c.in_node, c.out_node}) {
      if (nodes.count(id)) continue;
      const NodeGene* n = fit.find_node(id);
      if (!n) n = other.find_node(id);
      nodes.emplace(id, *n);
    }
  };

  const auto& cf = fit.connections;
  const auto& co = other.connections;
  std::size_t i = 0, j = 0;
  while (i < cf.size() || j < co.size()) {
    if (j == co.size() || (i < cf.size() && cf[i].innovation < co[j].innovation)) {
      child.connections.push_back(cf[i++]);
    } else if (i == cf.size() || co[j].innovation < cf[i].innovation) {
      if (equal) child.connections.push_back(co[j]);
      ++j;
    } else {
      ConnectionGene gene = rng.chance(0.5) ? cf[i] : co[j];
      const int disabled = !cf[i].enabled + !co[j].enabled;
      if (disabled == 2)
        gene.enabled = false;
      else if (disabled == 1)
        gene.enabled = !rng.chance(cfg.inherit_disabled_prob);
      else
        gene.enabled = true;
      child.connections.push_back(gene);
      ++i;
      ++j;
    }
  }
  for (const auto& c : child.connections) pull_nodes(c);
  for (auto& [_, n] : nodes) child.nodes.push_back(n);
  sort_genes(child);
  return child;
}

// ---------------------------------------------------------------------------
// Speciation and reproduction

std::vector<Species> speciate(const std::vector<Genome>& population, const std::vector<Species>& previous,
                              const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng) {
  std::vector<Species> species = previous;
  for (Species& s : species) s.members.clear();
  std::vector<std::vector<std::size_t>> index(species.size());

  for (std::size_t gi = 0; gi < population.size(); ++gi) {
    const Genome& g = population[gi];
    bool placed = false;
    for (std::size_t si = 0; si < species.size(); ++si) {
      if (compatibility(g, species[si].representative, cfg) < cfg.compatibility_threshold) {
        species[si].members.push_back(g.id);
        index[si].push_back(gi);
        placed = true;
        break;
      }
    }
    if (!placed) {
      Species s;
      s.id = ledger.next_species_id();
      s.representative = g;
      s.members.push_back(g.id);
      species.push_back(std::move(s));
      index.push_back({gi});
    }
  }

  std::vector<Species> out;
  for (std::size_t si = 0; si < species.size(); ++si) {
    if (species[si].members.empty()) continue;
    species[si].representative = population[index[si][rng.index(index[si].size())]];
    out.push_back(std::move(species[si]));
  }
  return out;
}

namespace {

std::unordered_map<std::int64_t, const Genome*> by_id(const std::vector<Genome>& population) {
  std::unordered_map<std::int64_t, const Genome*> m;
  for (const Genome& g : population) m.emplace(g.id, &g);
  return m;
}

double fitness_of(const Genome& g) {
  if (!g.fitness) throw Error(ErrorKind::InvalidArgument, "genome " + std::to_string(g.id) + " has no fitness");
  return *g.fitness;
}

}  // namespace

std::vector<std::size_t> offspring_quotas(const std::vector<Species>& species, const std::vector<Genome>& population,
                                          std::size_t total) {
  const auto lookup = by_id(population);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> means;
  for (const Species& s : species) {
    double sum = 0.0;
    for (auto id : s.members) {
      const double f = fitness_of(*lookup.at(id));
      sum += f;
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    means.push_back(s.members.empty() ? 0.0 : sum / static_cast<double>(s.members.size()));
  }
  std::vector<std::size_t> quota(species.size(), 0);
  if (species.empty()) return quota;

  // Summing f/|S| over a species gives its mean fitness, so species size drops out.
  const double range = std::max(hi - lo, 1.0);
  std::vector<double> weight(species.size());
  double weight_sum = 0.0;
  for (std::size_t i = 0; i < species.size(); ++i) {
    weight[i] = species[i].members.empty() ? 0.0 : (means[i] - lo) / range;
    weight_sum += weight[i];
  }
  if (weight_sum <= 0.0) {
    for (std::size_t i = 0; i < species.size(); ++i) weight[i] = species[i].members.empty() ? 0.0 : 1.0;
    weight_sum = std::accumulate(weight.begin(), weight.end(), 0.0);
  }

  // Largest-remainder apportionment.
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < species.size(); ++i) {
    const double exact = weight[i] / weight_sum * static_cast<double>(total);
    quota[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++quota[remainders[k % remainders.size()].second];
  return quota;
}

std::vector<Genome> reproduce(std::vector<Species>& species, const std::vector<Genome>& population,
                              const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng) {
  if (population.empty() || species.empty()) throw Error(ErrorKind::InvalidArgument, "empty population");
  const auto lookup = by_id(population);

  const Genome* champion = nullptr;
  for (const Genome& g : population)
    if (!champion || fitness_of(g) > fitness_of(*champion)) champion = &g;

  for (Species& s : species) {
    double best = -std::numeric_limits<double>::infinity();
    for (auto id : s.members) best = std::max(best, fitness_of(*lookup.at(id)));
    if (!s.best_fitness || best > *s.best_fitness) {
      s.best_fitness = best;
      s.staleness = 0;
    } else {
      ++s.staleness;
    }
  }
  std::erase_if(species, [&](const Species& s) {
    const bool holds_champion = std::find(s.members.begin(), s.members.end(), champion->id) != s.members.end();
    return s.staleness >= cfg.stale_species_cutoff && !holds_champion;
  });

  ledger.begin_generation();
  const auto quota = offspring_quotas(species, population, cfg.population_size);

  std::vector<Genome> next;
  next.reserve(cfg.population_size);
  for (std::size_t si = 0; si < species.size(); ++si) {
    std::size_t remaining = quota[si];
    if (remaining == 0) continue;
    std::vector<const Genome*> ranked;
    for (auto id : species[si].members) ranked.push_back(lookup.at(id));
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Genome* x, const Genome* y) { return *x->fitness > *y->fitness; });

    if (ranked.size() >= cfg.elitism_min_species_size) {
      for (std::size_t e = 0; e < cfg.elitism && e < ranked.size() && remaining > 0; ++e, --remaining) {
        Genome elite = *ranked[e];
        elite.fitness.reset();
        next.push_back(std::move(elite));
      }
    }

    const auto cutoff = static_cast<std::size_t>(std::ceil(cfg.survival_threshold * static_cast<double>(ranked.size())));
    const std::size_t pool = std::min(ranked.size(), std::max<std::size_t>(cutoff, 2));
    for (; remaining > 0; --remaining) {
      const Genome& p1 = *ranked[rng.index(pool)];
      Genome child;
      if (pool >= 2 && rng.chance(cfg.crossover_rate)) {
        const Genome& p2 = *ranked[rng.index(pool)];
        child = crossover(p1, p2, ledger, rng, cfg);
      } else {
        child = p1;
        child.id = ledger.next_genome_id();
      }
      child.fitness.reset();
      mutate(child, ledger, rng, cfg);
      next.push_back(std::move(child));
    }
  }
  return next;
}

}  // namespace ntrade::neat
