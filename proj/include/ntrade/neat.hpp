#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ntrade/common.hpp"
#include "ntrade/indicators.hpp"

namespace ntrade::neat {

inline constexpr int kInputCount = static_cast<int>(kFeatureCount);
inline constexpr int kOutputCount = 3;
inline constexpr int kBiasNode = kInputCount;         // 11
inline constexpr int kFirstOutput = kInputCount + 1;  // 12: buy, 13: sell, 14: volume
inline constexpr int kBaseNodeCount = kInputCount + 1 + kOutputCount;

enum class NodeKind { Input, Bias, Output, Hidden };
enum class Activation { Identity, Sigmoid };

struct NodeGene {
  int id = 0;
  NodeKind kind = NodeKind::Hidden;
  Activation activation = Activation::Sigmoid;

  bool operator==(const NodeGene&) const = default;
};

struct ConnectionGene {
  int in_node = 0;
  int out_node = 0;
  double weight = 0.0;
  bool enabled = true;
  int innovation = 0;

  bool operator==(const ConnectionGene&) const = default;
};

/// Nodes are kept sorted by id and connections by innovation number.
struct Genome {
  std::int64_t id = 0;
  std::vector<NodeGene> nodes;
  std::vector<ConnectionGene> connections;
  std::optional<double> fitness;

  const NodeGene* find_node(int node_id) const;
  bool has_node(int node_id) const { return find_node(node_id) != nullptr; }
  bool has_connection(int in_node, int out_node) const;
  std::size_t enabled_count() const;

  /// Structure and weights only; ignores id and fitness.
  bool same_genes(const Genome& other) const {
    return nodes == other.nodes && connections == other.connections;
  }
};

/// Throws Error{InvalidGenome} describing the first violated invariant.
void validate(const Genome& g);

struct NeatConfig {
  std::size_t population_size = 150;
  double c1_excess = 1.0;
  double c2_disjoint = 1.0;
  double c3_weight = 0.4;
  double compatibility_threshold = 3.0;
  double weight_mutate_prob = 0.8;
  double weight_perturb_prob = 0.9;
  double weight_perturb_power = 0.5;
  double weight_replace_range = 3.0;
  double initial_weight_range = 1.0;
  double add_connection_prob = 0.05;
  double add_node_prob = 0.03;
  double crossover_rate = 0.75;
  double inherit_disabled_prob = 0.75;
  std::size_t elitism = 1;
  std::size_t elitism_min_species_size = 5;
  int stale_species_cutoff = 15;
  double survival_threshold = 0.2;

  void validate() const;
};

/// Historical markings. Each (in, out) pair maps to one innovation number for
/// the lifetime of the ledger; splits of the same connection within a
/// generation map to the same new node id.
class InnovationLedger {
 public:
  InnovationLedger() = default;

  int connection_innovation(int in_node, int out_node);
  std::optional<int> find_innovation(int in_node, int out_node) const;
  /// Node id used when splitting the connection with this innovation.
  int split_node(int connection_innovation);
  int fresh_node_id() { return next_node_id_++; }
  std::int64_t next_genome_id() { return next_genome_id_++; }
  int next_species_id() { return next_species_id_++; }
  void begin_generation() { splits_.clear(); }

  int peek_innovation() const { return next_innovation_; }
  int peek_node_id() const { return next_node_id_; }

  // Serialization access.
  struct State {
    int next_innovation = 0;
    int next_node_id = kBaseNodeCount;
    std::int64_t next_genome_id = 0;
    int next_species_id = 0;
    std::map<std::pair<int, int>, int> connections;
    std::map<int, int> splits;
  };
  State state() const;
  static InnovationLedger from_state(const State& s);

 private:
  int next_innovation_ = 0;
  int next_node_id_ = kBaseNodeCount;
  std::int64_t next_genome_id_ = 0;
  int next_species_id_ = 0;
  std::map<std::pair<int, int>, int> connections_;
  std::map<int, int> splits_;
};

struct Species {
  int id = 0;
  Genome representative;
  std::vector<std::int64_t> members;
  int staleness = 0;
  std::optional<double> best_fitness;
};

/// The 15 fixed nodes: inputs 0..10, bias 11, outputs 12..14.
std::vector<NodeGene> base_nodes();

/// Every input and the bias wired to every output, plus a self-loop on each
/// output; weights uniform in +-initial_weight_range.
Genome seed_genome(InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg);

std::vector<Genome> init_population(const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng);

double compatibility(const Genome& a, const Genome& b, const NeatConfig& cfg);

/// Splits a random enabled connection. No-op without enabled connections.
void mutate_add_node(Genome& g, InnovationLedger& ledger, Rng& rng);
/// Adds a connection between an unconnected ordered pair (target not an input
/// or the bias). Self-loops and recurrent links are allowed.
void mutate_add_connection(Genome& g, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg);
void mutate_weights(Genome& g, Rng& rng, const NeatConfig& cfg);
/// Applies the configured weight and structural mutations.
void mutate(Genome& g, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg);

/// Both parents need a fitness; the child gets a fresh id and no fitness.
Genome crossover(const Genome& a, const Genome& b, InnovationLedger& ledger, Rng& rng, const NeatConfig& cfg);

/// Partitions the population. Each returned species' representative is a
/// random member, ready for the next call.
std::vector<Species> speciate(const std::vector<Genome>& population, const std::vector<Species>& previous,
                              const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng);

/// Offspring per species, proportional to each species' mean fitness shifted by
/// the population minimum. Sums to `total`.
std::vector<std::size_t> offspring_quotas(const std::vector<Species>& species, const std::vector<Genome>& population,
                                          std::size_t total);

/// Updates staleness, culls stale species (never the champion's), and breeds
/// exactly cfg.population_size genomes.
std::vector<Genome> reproduce(std::vector<Species>& species, const std::vector<Genome>& population,
                              const NeatConfig& cfg, InnovationLedger& ledger, Rng& rng);

/// Steepened logistic, 1 / (1 + exp(-4.9 x)), kept strictly inside (0, 1).
double steepened_sigmoid(double x);

/// Decoded genome. One call to activate() is one synchronous step: inputs are
/// read at the current step, every other source at its previous-step value.
class RecurrentNetwork {
 public:
  explicit RecurrentNetwork(const Genome& g);

  /// Returns (buy, sell, volume). Throws on wrong input count or non-finite input.
  std::array<double, kOutputCount> activate(std::span<const double> inputs);
  void reset();

 private:
  struct Link {
    std::size_t source;
    double weight;
  };
  struct Unit {
    std::size_t slot;
    std::vector<Link> links;
  };
  std::vector<Unit> units_;
  std::vector<double> state_;
  std::vector<double> scratch_;
  std::array<std::size_t, kOutputCount> output_slots_{};
};

}  // namespace ntrade::neat
