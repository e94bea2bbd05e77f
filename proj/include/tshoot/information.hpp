#pragma once

#include <optional>
#include <set>
#include <vector>

#include "tshoot/inference.hpp"
#include "tshoot/persistence.hpp"

namespace tshoot {

/// A set-observe-reset experiment: the configuration was set to `state`,
/// the observations were made in that setting, then it was put back.
struct ConfigExperiment {
  VarId config = 0;
  StateIndex state = 0;
  Evidence observations;

  bool operator==(const ConfigExperiment&) const = default;
};

struct InformationState {
  Evidence evidence;
  std::set<VarId> repaired;
  std::vector<ConfigExperiment> experiments;

  bool operator==(const InformationState&) const = default;
};

// Problem-defining node observed in its first non-normal state, and every
// configuration node with an initial setting observed in it.
InformationState initial_information(const Network& net);

StateIndex abnormal_state(const Network& net, VarId v);
bool problem_abnormal(const Network& net, const InformationState& info);

// Current configuration setting, when known.
std::optional<StateIndex> current_setting(const InformationState& info, VarId config);

void record_observation(InformationState& info, const Network& net, VarId v, StateIndex s);

// Marks the component normal. Evidence on its descendants and experiments
// that observed them are stale and dropped; the problem-defining node keeps
// its reading until the device is checked again.
void record_repair(InformationState& info, const Network& net, VarId component);

void record_experiment(InformationState& info, ConfigExperiment experiment);

// Components whose abnormality was observed directly: on the component
// itself, or on an observation node that is a deterministic single-parent
// test of it.
std::set<VarId> known_abnormal(const Network& net, const InformationState& info);

/// The network evidence is evaluated on: the device network itself, or a
/// configuration persistence network with one post world per experiment.
class World {
 public:
  World(const Network& net, const InformationState& info, const BuildOptions& options = {});

  const Network& network() const { return pnet_ ? pnet_->network : *base_; }
  const Evidence& evidence() const { return evidence_; }
  VarId pre(VarId v) const { return pnet_ ? pnet_->pre.at(v) : v; }
  VarId post(VarId v, std::size_t experiment) const { return pnet_->post_of(v, experiment); }
  bool persistent() const { return pnet_.has_value(); }

 private:
  const Network* base_;
  std::optional<PersistenceNetwork> pnet_;
  Evidence evidence_;
};

}  // namespace tshoot
