#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "tshoot/inference.hpp"
#include "tshoot/network.hpp"

namespace tshoot {

inline constexpr std::size_t kDefaultMappingLimit = 4096;

/// One deterministic function from parent configurations (rows, in CPT row
/// order) to child states.
using Mapping = std::vector<StateIndex>;

// All child_card^(rows) functions. Mapping i assigns to row r the r-th most
// significant base-child_card digit of i. Throws mapping_overflow past limit.
std::vector<Mapping> enumerate_mappings(std::span<const std::size_t> parent_cards,
                                        std::size_t child_card,
                                        std::size_t limit = kDefaultMappingLimit);

struct MappingSpec {
  VarId owner = 0;
  std::size_t rows = 0;
  std::vector<Mapping> mappings;
  std::vector<double> prior;
};

using MappingPriorPolicy =
    std::function<std::vector<double>(const Cpt&, std::size_t child_card,
                                      std::span<const Mapping>)>;

// Outputs independent across parent configurations: prior(m) = prod_r P(m(r) | r).
std::vector<double> product_of_columns(const Cpt& cpt, std::size_t child_card,
                                       std::span<const Mapping> mappings);

MappingSpec mapping_prior(const Network& net, const Cpt& cpt,
                          const MappingPriorPolicy& policy = product_of_columns,
                          std::size_t limit = kDefaultMappingLimit);

// Largest deviation of sum_{m: m(j)=k} prior(m) from P(k | j).
double marginal_inconsistency(const Network& net, const Cpt& cpt, const MappingSpec& spec);

enum class ActionKind { none, repair, set_configuration };

struct ActionSpec {
  ActionKind kind = ActionKind::none;
  VarId target = 0;
  std::vector<std::pair<VarId, StateIndex>> directly_set;

  static ActionSpec none() { return {}; }
  // Throws invalid_argument if the component has no normal state.
  static ActionSpec repair(const Network& net, VarId component);
  static ActionSpec set_configuration(VarId config, StateIndex state);
};

struct BuildOptions {
  MappingPriorPolicy prior = product_of_columns;
  std::size_t mapping_limit = kDefaultMappingLimit;
  // A post copy whose inputs are the pre copy's inputs is the same
  // deterministic function of the same values; keep one node for both.
  bool share_unchanged = true;
};

/// Pre/post twin network. Index maps translate original variable ids; a pre
/// and post entry may name the same node when the variable persists.
struct PersistenceNetwork {
  Network network;
  ActionSpec action;
  std::vector<VarId> pre;
  std::vector<std::vector<VarId>> post;  // one per post world
  std::vector<std::optional<VarId>> mapping;

  VarId post_of(VarId original, std::size_t world = 0) const {
    return post.at(world).at(original);
  }
};

PersistenceNetwork build_persistence_network(const Network& net, const ActionSpec& action,
                                             const BuildOptions& options = {});

// Components persist as single nodes; the chosen configuration is clamped in
// the post copy. One post world per setting; all share mapping nodes.
PersistenceNetwork build_config_persistence_network(
    const Network& net, std::span<const std::pair<VarId, StateIndex>> settings,
    const BuildOptions& options = {});

PersistenceNetwork build_config_persistence_network(const Network& net, VarId config,
                                                    StateIndex state,
                                                    const BuildOptions& options = {});

// Evidence in original ids mapped onto the persistence network.
Evidence translate_evidence(const PersistenceNetwork& pnet, const Evidence& pre_evidence,
                            std::span<const Evidence> post_evidence);

Distribution post_action_query(const PersistenceNetwork& pnet, const Evidence& pre_evidence,
                               const Evidence& post_evidence, VarId target,
                               std::size_t world = 0);

}  // namespace tshoot
