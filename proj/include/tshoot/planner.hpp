#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tshoot/information.hpp"
#include "tshoot/network.hpp"

namespace tshoot {

/// Probability p_i that repairing component i fixes the device, rescaled to
/// sum to one over the components.
struct FaultDistribution {
  std::vector<VarId> components;
  std::vector<double> p;
  std::set<VarId> known_abnormal;

  double of(VarId component) const;
};

// Mediator posteriors Pr(e'_i abnormal | I) for components that feed the
// problem-defining node through a mediator, component posteriors otherwise.
// Directly observed abnormal components take all the mass. Throws
// inconsistent_model when every component has zero probability.
FaultDistribution fault_probabilities(const Network& net, const InformationState& info);

// Same quantity before rescaling, in `components` order.
std::vector<double> unscaled_fault_probabilities(const Network& net,
                                                 const InformationState& info);

// Pure ECR arithmetic: sum_i [(1 - sum_{j<i} p_j) C^o_i + p_i C^r_i] in the
// given order.
double expected_cost_of_repair(std::span<const double> p, std::span<const double> observe,
                               std::span<const double> repair,
                               std::span<const std::size_t> order);

// Decreasing p/C^o; zero-cost items first by decreasing p; index tie-break.
std::vector<std::size_t> ratio_order(std::span<const double> p,
                                     std::span<const double> observe);

/// One observe-then-repair step. An empty component is the service call.
struct RepairStep {
  std::optional<VarId> component;
  double p = 0;
  double observe_cost = 0;
  double repair_cost = 0;
};

struct RepairPlan {
  double expected_cost = 0;
  std::vector<RepairStep> steps;
};

// Optimal repair sequence under the fault distribution. Unobservable
// components are observed at their repair cost and repaired for free;
// known-abnormal ones skip the observation. With a service call configured,
// leak causes are folded into a final service-call step.
RepairPlan ecr(const Network& net, const FaultDistribution& fd);

// ECR for a caller-chosen order. Throws invalid_argument if the order misses
// a component with positive probability.
RepairPlan ecr(const Network& net, const FaultDistribution& fd, std::span<const VarId> order);

enum class PlanKind { repair_sequence, observation, config_observation, service_call };

const char* to_string(PlanKind kind);

struct OutcomeEvaluation {
  StateIndex state = 0;
  double probability = 0;
  double expected_cost = 0;  // ECR after the outcome
  std::vector<RepairStep> sequence;
};

struct PlanEvaluation {
  PlanKind kind = PlanKind::repair_sequence;
  double expected_cost = 0;
  bool approximate = false;
  std::vector<RepairStep> sequence;  // repair_sequence
  VarId observation = 0;             // observation, config_observation
  VarId config = 0;                  // config_observation
  StateIndex config_state = 0;
  double fixed_cost = 0;             // C^o, or C^s + C^o
  std::vector<OutcomeEvaluation> outcomes;
};

// Key used for deterministic tie-breaking.
std::string detail_key(const Network& net, const PlanEvaluation& plan);

// fixed + sum_k weight_k * cost_k, the shape of both ECO and ECCO.
double expected_plan_cost(double fixed_cost,
                          std::span<const std::pair<double, double>> weighted_costs);

// Outcomes below this probability are skipped in ECO/ECCO sums.
inline constexpr double kNegligibleOutcome = 1e-12;

PlanEvaluation eco(const Network& net, const InformationState& info, VarId observation);

PlanEvaluation ecco(const Network& net, const InformationState& info, VarId observation,
                    VarId config, StateIndex state, bool single_copy = false);

// Configuration change evaluated without the persistence network: clamp the
// setting in the device network, drop evidence below it, and pin components
// the outcome logically decides.
FaultDistribution single_copy_config_probs(const Network& net, const InformationState& info,
                                           VarId config, StateIndex state, VarId observation,
                                           StateIndex outcome);

struct RecommendOptions {
  bool use_config = true;
  bool use_single_copy = false;
  // Only the problem-defining node is observed after a configuration change.
  bool config_problem_only = true;
  bool parallel = true;
};

struct Recommendation {
  std::vector<PlanEvaluation> ranked;
  std::optional<FaultDistribution> faults;

  const PlanEvaluation& winner() const { return ranked.front(); }
};

// Sorts by expected cost; costs within a relative 1e-9 tie and fall back to
// kind order, then detail_key.
void rank_candidates(const Network& net, std::vector<PlanEvaluation>& plans);

// Throws model_exhausted when no candidate can be evaluated.
Recommendation recommend_next(const Network& net, const InformationState& info,
                              const RecommendOptions& options = {});

// Observation cost, with the problem-defining node free unless priced.
double observe_cost(const Network& net, VarId v);

}  // namespace tshoot
