#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tshoot/error.hpp"

namespace tshoot {

using VarId = std::size_t;
using StateIndex = std::size_t;

struct StateSpace {
  std::vector<std::string> states;
  std::optional<StateIndex> normal;

  std::size_t size() const { return states.size(); }
  std::optional<StateIndex> find(std::string_view name) const;
};

enum class RoleKind {
  component,
  observation,
  configuration,
  problem_defining,
  mediator,
  mapping,
  plain,
};

const char* to_string(RoleKind kind);
std::optional<RoleKind> role_from_string(std::string_view name);

struct NodeRole {
  RoleKind kind = RoleKind::plain;
  bool observable = true;                // components only
  bool leak = false;                     // components only
  std::optional<VarId> owner;            // mediators: the cause they carry
  std::optional<StateIndex> initial;     // configurations: current setting
};

struct Variable {
  std::string id;
  StateSpace space;
  NodeRole role;
};

/// Conditional table for one child. Rows are parent configurations in
/// lexicographic order (first parent most significant); each row holds one
/// probability per child state.
struct Cpt {
  VarId child = 0;
  std::vector<VarId> parents;
  std::vector<double> table;

  bool deterministic() const;
};

/// Costs are in minutes. `configure` covers setting a configuration node and
/// resetting it afterwards.
struct CostModel {
  std::map<VarId, double> observe;
  std::map<VarId, double> repair;
  std::map<VarId, double> configure;
  std::optional<double> service_call;
};

enum class CombinationFunction { logical_or, max };

const char* to_string(CombinationFunction f);
std::optional<CombinationFunction> combination_from_string(std::string_view name);

struct CauseInteraction {
  VarId cause = 0;
  // rows: cause states, columns: effect states
  std::vector<double> table;
};

/// An effect node whose CPT is the composition of per-cause interactions
/// through a combination function. Unexpanded until to_causal_independence.
struct Combination {
  VarId effect = 0;
  CombinationFunction function = CombinationFunction::logical_or;
  std::vector<CauseInteraction> causes;
};

struct Violation {
  std::string node;
  std::string rule;
  std::string message;
};

class Network {
 public:
  Network() = default;
  explicit Network(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  VarId add_variable(std::string id, StateSpace space, NodeRole role = {});
  void set_cpt(Cpt cpt);
  void set_role(VarId v, NodeRole role);
  void add_combination(Combination c);

  std::size_t size() const { return variables_.size(); }
  const Variable& variable(VarId v) const { return variables_.at(v); }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::string& id(VarId v) const { return variables_.at(v).id; }
  std::size_t cardinality(VarId v) const { return variables_.at(v).space.size(); }
  const NodeRole& role(VarId v) const { return variables_.at(v).role; }

  std::optional<VarId> find(std::string_view id) const;
  // Throws unknown_variable.
  VarId index(std::string_view id) const;
  // Throws unknown_state.
  StateIndex state_index(VarId v, std::string_view state) const;

  bool has_cpt(VarId v) const { return v < cpts_.size() && cpts_[v].has_value(); }
  const Cpt& cpt(VarId v) const;
  std::span<const VarId> parents(VarId v) const;
  std::vector<VarId> children(VarId v) const;
  bool is_root(VarId v) const { return parents(v).empty(); }

  const std::vector<Combination>& combinations() const { return combinations_; }
  std::vector<Combination>& combinations() { return combinations_; }

  CostModel& costs() { return costs_; }
  const CostModel& costs() const { return costs_; }

  std::vector<VarId> with_role(RoleKind kind) const;
  std::vector<VarId> components() const { return with_role(RoleKind::component); }
  // Throws invalid_model when there is not exactly one.
  VarId problem_defining() const;

  // Descendants of v (excluding v).
  std::vector<VarId> descendants(VarId v) const;
  std::vector<bool> ancestral_closure(std::span<const VarId> seeds) const;

 private:
  std::string name_;
  std::vector<Variable> variables_;
  std::vector<std::optional<Cpt>> cpts_;
  std::map<std::string, VarId, std::less<>> by_id_;
  std::vector<Combination> combinations_;
  CostModel costs_;
};

std::vector<Violation> validate(const Network& net);

// Kahn's algorithm, smallest VarId first among ready nodes. Throws cycle.
std::vector<VarId> topological_order(const Network& net);

// CPT of an effect implied by its combination, for its causes as parents.
Cpt combined_cpt(const Network& net, const Combination& c);

// Inserts one mediator per cause of every declared combination. The effect
// becomes a deterministic function of its mediators.
Network to_causal_independence(const Network& net);

// Validated network in the form the planner works on: combinations
// expanded, original ids preserved. Throws invalid_model listing the
// violations.
Network prepare_network(const Network& net);

// Name of the mediator inserted between `cause` and `effect`.
std::string mediator_id(std::string_view effect, std::string_view cause);

// Mediators feeding the problem-defining node, keyed by owner.
std::map<VarId, VarId> problem_mediators(const Network& net);

// Row index of a parent configuration given per-parent states.
std::size_t row_index(const Network& net, std::span<const VarId> parents,
                      std::span<const StateIndex> states);

std::string describe_row(const Network& net, const Cpt& cpt, std::size_t row);

}  // namespace tshoot
