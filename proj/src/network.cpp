#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "ntrade/neat.hpp"

namespace ntrade::neat {

double steepened_sigmoid(double x) {
  // Clamping the exponent keeps the result strictly inside (0, 1) in double.
  const double z = std::clamp(4.9 * x, -30.0, 30.0);
  return 1.0 / (1.0 + std::exp(-z));
}

RecurrentNetwork::RecurrentNetwork(const Genome& g) {
  validate(g);
  std::unordered_map<int, std::size_t> slot;
  // Slots 0..11 are the inputs and the bias, matching their node ids.
  for (const NodeGene& n : g.nodes) slot.emplace(n.id, slot.size());
  state_.assign(slot.size(), 0.0);
  for (const NodeGene& n : g.nodes) {
    if (n.kind == NodeKind::Input || n.kind == NodeKind::Bias) continue;
    units_.push_back({slot.at(n.id), {}});
  }
  std::unordered_map<std::size_t, std::size_t> unit_of;
  for (std::size_t u = 0; u < units_.size(); ++u) unit_of.emplace(units_[u].slot, u);
  for (const ConnectionGene& c : g.connections) {
    if (!c.enabled) continue;
    units_[unit_of.at(slot.at(c.out_node))].links.push_back({slot.at(c.in_node), c.weight});
  }
  for (int o = 0; o < kOutputCount; ++o) output_slots_[o] = slot.at(kFirstOutput + o);
  scratch_.assign(units_.size(), 0.0);
  reset();
}

void RecurrentNetwork::reset() {
  std::fill(state_.begin(), state_.end(), 0.0);
  state_[kBiasNode] = 1.0;
}

std::array<double, kOutputCount> RecurrentNetwork::activate(std::span<const double> inputs) {
  if (inputs.size() != static_cast<std::size_t>(kInputCount))
    throw Error(ErrorKind::InvalidArgument,
                "network expects " + std::to_string(kInputCount) + " inputs, got " + std::to_string(inputs.size()));
  for (double x : inputs)
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFinite, "non-finite network input");

  std::copy(inputs.begin(), inputs.end(), state_.begin());
  state_[kBiasNode] = 1.0;
  for (std::size_t u = 0; u < units_.size(); ++u) {
    double sum = 0.0;
    for (const Link& l : units_[u].links) sum += l.weight * state_[l.source];
    scratch_[u] = steepened_sigmoid(std::isnan(sum) ? 0.0 : sum);
  }
  for (std::size_t u = 0; u < units_.size(); ++u) state_[units_[u].slot] = scratch_[u];
  return {state_[output_slots_[0]], state_[output_slots_[1]], state_[output_slots_[2]]};
}

}  // namespace ntrade::neat
