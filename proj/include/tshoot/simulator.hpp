#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tshoot/network.hpp"
#include "tshoot/planner.hpp"

namespace tshoot {

enum class ScenarioMode {
  // Forward sample from the prior, rejected until the device fails.
  prior,
  // One culprit drawn from the initial fault distribution, every other
  // component normal, rejected until the device fails.
  single_fault,
};

struct ScenarioOptions {
  ScenarioMode mode = ScenarioMode::prior;
  std::size_t rejection_cap = 1'000'000;
  // Initial fault distribution for single_fault; computed when absent.
  std::optional<FaultDistribution> faults;
};

/// Ground truth for one trial. Each variable owns one uniform draw that is
/// pushed through its CPT by inverse CDF, so re-evaluating after a repair or
/// a configuration change replays the same mechanisms.
struct Scenario {
  std::uint64_t seed = 0;
  std::vector<double> noise;
  std::map<VarId, StateIndex> fixed;  // configurations at their initial setting
  std::optional<VarId> fault;         // single_fault culprit
  std::vector<StateIndex> truth;      // initial state of every variable
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial);

// Throws model_exhausted past the rejection cap.
Scenario sample_scenario(const Network& net, std::uint64_t seed,
                         const ScenarioOptions& options = {});

// Variable states for the scenario with extra clamps applied.
std::vector<StateIndex> evaluate_scenario(const Network& net, const Scenario& scenario,
                                          const std::map<VarId, StateIndex>& overrides = {});

enum class PolicyKind { static_order, pc_order, with_observations, with_config };

struct Policy {
  PolicyKind kind = PolicyKind::pc_order;
  std::vector<VarId> order;  // static_order; empty means ascending observe cost
  bool single_copy = false;
  std::string name;
};

// "static", "static:B,A", "pc", "obs", "config", or the long names
// static_order, pc_order, with_observations, with_config.
Policy parse_policy(const Network& net, std::string_view text);
std::vector<Policy> parse_policies(const Network& net, std::string_view list);

struct TraceStep {
  std::string action;  // observe, repair, configure_observe, service_call
  std::string detail;
  double cost = 0;
};

struct TrialResult {
  double cost = 0;
  std::vector<TraceStep> trace;
};

// Closed troubleshooting loop against the scenario. Throws model_exhausted
// when the action budget (10 per network variable) runs out.
TrialResult run_policy(const Network& net, const Scenario& scenario, const Policy& policy);

struct PolicyResult {
  std::string policy;
  std::vector<double> costs;
  std::vector<std::vector<TraceStep>> traces;  // filled when requested
  double mean = 0;
  double std_error = 0;
};

struct PairedDifference {
  std::string first, second;
  double mean = 0;  // first - second
  double std_error = 0;
};

struct SimulationOptions {
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  ScenarioMode mode = ScenarioMode::prior;
  bool parallel = true;
  bool keep_traces = false;
};

struct Comparison {
  std::size_t trials = 0;
  std::vector<PolicyResult> results;
  std::vector<PairedDifference> differences;  // every ordered pair i < j
  double multi_fault_fraction = 0;
};

// Common random numbers: trial i uses the same scenario for every policy.
Comparison compare_policies(const Network& net, const std::vector<Policy>& policies,
                            const SimulationOptions& options);

// policy,trials,mean,stderr
void write_results_csv(std::ostream& out, const Comparison& c);
// trial,policy,step,action,detail,cost
void write_trace_csv(std::ostream& out, const Comparison& c);

}  // namespace tshoot
