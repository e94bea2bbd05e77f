#include "tshoot/planner.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>

namespace tshoot {

double FaultDistribution::of(VarId component) const {
  for (std::size_t i = 0; i < components.size(); ++i)
    if (components[i] == component) return p[i];
  return 0.0;
}

const char* to_string(PlanKind kind) {
  switch (kind) {
    case PlanKind::repair_sequence: return "repair";
    case PlanKind::observation: return "observation";
    case PlanKind::config_observation: return "config_observation";
    case PlanKind::service_call: return "service_call";
  }
  return "repair";
}

double observe_cost(const Network& net, VarId v) {
  auto it = net.costs().observe.find(v);
  if (it != net.costs().observe.end()) return it->second;
  if (net.role(v).kind == RoleKind::problem_defining) return 0.0;
  throw Error(ErrorCode::invalid_argument, "no observe cost for '" + net.id(v) + "'");
}

std::vector<double> unscaled_fault_probabilities(const Network& net,
                                                 const InformationState& info) {
  if (!problem_abnormal(net, info))
    throw Error(ErrorCode::invalid_argument, "problem-defining node is not observed abnormal");
  const auto components = net.components();
  const auto mediators = problem_mediators(net);
  const World world(net, info);
  std::vector<VarId> targets;
  std::vector<StateIndex> normals;
  for (VarId c : components) {
    auto it = mediators.find(c);
    const VarId t = it != mediators.end() ? it->second : c;
    targets.push_back(world.pre(t));
    normals.push_back(*net.variable(t).space.normal);
  }
  const auto post = posterior_marginals(world.network(), world.evidence(), targets);
  std::vector<double> q(components.size());
  for (std::size_t i = 0; i < components.size(); ++i)
    q[i] = std::max(0.0, 1.0 - post[i][normals[i]]);
  return q;
}

FaultDistribution fault_probabilities(const Network& net, const InformationState& info) {
  FaultDistribution fd;
  fd.components = net.components();
  fd.known_abnormal = known_abnormal(net, info);
  if (!problem_abnormal(net, info))
    throw Error(ErrorCode::invalid_argument, "problem-defining node is not observed abnormal");
  if (!fd.known_abnormal.empty()) {
    // Single fault: a component seen abnormal is the fault.
    const double share = 1.0 / static_cast<double>(fd.known_abnormal.size());
    for (VarId c : fd.components) fd.p.push_back(fd.known_abnormal.contains(c) ? share : 0.0);
    return fd;
  }
  fd.p = unscaled_fault_probabilities(net, info);
  const double total = std::accumulate(fd.p.begin(), fd.p.end(), 0.0);
  if (!(total > kImpossibleEvidence))
    throw Error(ErrorCode::inconsistent_model, "no component can explain the failure");
  for (double& x : fd.p) x /= total;
  return fd;
}

double expected_cost_of_repair(std::span<const double> p, std::span<const double> observe,
                               std::span<const double> repair,
                               std::span<const std::size_t> order) {
  double cost = 0.0;
  double done = 0.0;
  for (std::size_t i : order) {
    cost += std::max(0.0, 1.0 - done) * observe[i] + p[i] * repair[i];
    done += p[i];
  }
  return cost;
}

std::vector<std::size_t> ratio_order(std::span<const double> p,
                                     std::span<const double> observe) {
  std::vector<std::size_t> idx(p.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const bool za = observe[a] == 0.0, zb = observe[b] == 0.0;
    if (za != zb) return za;
    if (za) return p[a] > p[b];
    return p[a] / observe[a] > p[b] / observe[b];
  });
  return idx;
}

namespace {

struct CostedItem {
  std::optional<VarId> component;
  double p;
  double observe;
  double repair;
};

double required(const std::map<VarId, double>& m, VarId v, const Network& net,
                const char* what) {
  auto it = m.find(v);
  if (it == m.end())
    throw Error(ErrorCode::invalid_argument,
                std::string("missing ") + what + " cost for '" + net.id(v) + "'");
  return it->second;
}

// Components with their effective costs; leaks go to the service call when
// one is configured.
std::vector<CostedItem> costed_items(const Network& net, const FaultDistribution& fd,
                                     bool include_zero, double& service_p) {
  const auto& costs = net.costs();
  std::vector<CostedItem> items;
  service_p = 0.0;
  for (std::size_t i = 0; i < fd.components.size(); ++i) {
    const VarId c = fd.components[i];
    const auto& role = net.role(c);
    if (role.leak && costs.service_call) {
      service_p += fd.p[i];
      continue;
    }
    if (fd.p[i] <= 0.0 && !include_zero) continue;
    CostedItem item{c, fd.p[i], 0.0, 0.0};
    const double repair = required(costs.repair, c, net, "repair");
    if (fd.known_abnormal.contains(c)) {
      item.repair = repair;
    } else if (!role.observable) {
      item.observe = repair;
    } else {
      item.observe = required(costs.observe, c, net, "observe");
      item.repair = repair;
    }
    items.push_back(item);
  }
  return items;
}

RepairPlan finish_plan(const Network& net, std::vector<CostedItem> ordered, double service_p) {
  if (net.costs().service_call)
    ordered.push_back({std::nullopt, service_p, *net.costs().service_call, 0.0});
  std::vector<double> p, o, r;
  for (const auto& it : ordered) {
    p.push_back(it.p);
    o.push_back(it.observe);
    r.push_back(it.repair);
  }
  std::vector<std::size_t> order(ordered.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RepairPlan plan;
  plan.expected_cost = expected_cost_of_repair(p, o, r, order);
  for (const auto& it : ordered)
    plan.steps.push_back({it.component, it.p, it.observe, it.repair});
  return plan;
}

}  // namespace

RepairPlan ecr(const Network& net, const FaultDistribution& fd) {
  double service_p = 0.0;
  auto items = costed_items(net, fd, false, service_p);
  std::vector<double> p, o;
  for (const auto& it : items) {
    p.push_back(it.p);
    o.push_back(it.observe);
  }
  std::vector<CostedItem> ordered;
  for (std::size_t i : ratio_order(p, o)) ordered.push_back(items[i]);
  return finish_plan(net, std::move(ordered), service_p);
}

RepairPlan ecr(const Network& net, const FaultDistribution& fd, std::span<const VarId> order) {
  double service_p = 0.0;
  auto items = costed_items(net, fd, true, service_p);
  std::vector<CostedItem> ordered;
  std::vector<bool> used(items.size(), false);
  for (VarId c : order) {
    auto it = std::find_if(items.begin(), items.end(),
                           [&](const CostedItem& x) { return x.component == c; });
    if (it == items.end()) continue;  // leak folded into the service call
    const auto k = static_cast<std::size_t>(it - items.begin());
    if (used[k]) throw Error(ErrorCode::invalid_argument, "order repeats '" + net.id(c) + "'");
    used[k] = true;
    ordered.push_back(*it);
  }
  for (std::size_t k = 0; k < items.size(); ++k)
    if (!used[k] && items[k].p > 0.0)
      throw Error(ErrorCode::invalid_argument,
                  "order misses '" + net.id(*items[k].component) + "'");
  return finish_plan(net, std::move(ordered), service_p);
}

std::string detail_key(const Network& net, const PlanEvaluation& plan) {
  std::string key;
  switch (plan.kind) {
    case PlanKind::repair_sequence:
      for (const auto& s : plan.sequence) {
        if (!key.empty()) key += ",";
        key += s.component ? net.id(*s.component) : std::string("service");
      }
      break;
    case PlanKind::observation:
      key = net.id(plan.observation);
      break;
    case PlanKind::config_observation:
      key = net.id(plan.config) + "=" + net.variable(plan.config).space.states[plan.config_state] +
            "/" + net.id(plan.observation);
      break;
    case PlanKind::service_call:
      key = "service";
      break;
  }
  return key;
}

double expected_plan_cost(double fixed_cost,
                          std::span<const std::pair<double, double>> weighted_costs) {
  double total = fixed_cost;
  for (const auto& [w, c] : weighted_costs) total += w * c;
  return total;
}

namespace {

PlanEvaluation outcome_plan(const Network& net, PlanEvaluation plan,
                            const std::vector<double>& weights,
                            const std::function<FaultDistribution(StateIndex)>& faults_for) {
  std::vector<std::pair<double, double>> weighted;
  for (StateIndex k = 0; k < weights.size(); ++k) {
    if (weights[k] < kNegligibleOutcome) continue;
    const RepairPlan inner = ecr(net, faults_for(k));
    plan.outcomes.push_back({k, weights[k], inner.expected_cost, inner.steps});
    weighted.emplace_back(weights[k], inner.expected_cost);
  }
  plan.expected_cost = expected_plan_cost(plan.fixed_cost, weighted);
  return plan;
}

}  // namespace

PlanEvaluation eco(const Network& net, const InformationState& info, VarId observation) {
  if (observation >= net.size())
    throw Error(ErrorCode::unknown_variable, "unknown observation");
  if (info.evidence.contains(observation))
    throw Error(ErrorCode::invalid_argument, "'" + net.id(observation) + "' is already observed");
  PlanEvaluation plan;
  plan.kind = PlanKind::observation;
  plan.observation = observation;
  plan.fixed_cost = observe_cost(net, observation);

  const World world(net, info);
  const auto weights =
      posterior_marginal(world.network(), world.evidence(), world.pre(observation)).p;
  return outcome_plan(net, std::move(plan), weights, [&](StateIndex k) {
    InformationState next = info;
    next.evidence[observation] = k;
    return fault_probabilities(net, next);
  });
}

FaultDistribution single_copy_config_probs(const Network& net, const InformationState& info,
                                           VarId config, StateIndex state, VarId observation,
                                           StateIndex outcome) {
  if (net.role(config).kind != RoleKind::configuration)
    throw Error(ErrorCode::invalid_argument, "'" + net.id(config) + "' is not a configuration");
  FaultDistribution fd = fault_probabilities(net, info);

  Evidence ev = info.evidence;
  for (VarId d : net.descendants(config)) ev.erase(d);
  ev[config] = state;
  ev[observation] = outcome;
  const auto components = net.components();
  const auto post = posterior_marginals(net, ev, components);

  constexpr double kDecided = 1e-9;
  std::set<VarId> ruled_out, forced;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const double q = 1.0 - post[i][*net.variable(components[i]).space.normal];
    if (q <= kDecided) ruled_out.insert(components[i]);
    if (q >= 1.0 - kDecided) forced.insert(components[i]);
  }
  FaultDistribution out = fd;
  out.known_abnormal.clear();
  if (!forced.empty()) {
    const double share = 1.0 / static_cast<double>(forced.size());
    for (std::size_t i = 0; i < out.components.size(); ++i)
      out.p[i] = forced.contains(out.components[i]) ? share : 0.0;
    return out;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < out.components.size(); ++i) {
    if (ruled_out.contains(out.components[i])) out.p[i] = 0.0;
    total += out.p[i];
  }
  // Nothing left to blame: the outcome carries no usable information here.
  if (!(total > kImpossibleEvidence)) return fd;
  for (double& x : out.p) x /= total;
  return out;
}

PlanEvaluation ecco(const Network& net, const InformationState& info, VarId observation,
                    VarId config, StateIndex state, bool single_copy) {
  if (config >= net.size() || observation >= net.size())
    throw Error(ErrorCode::unknown_variable, "unknown variable");
  if (net.role(config).kind != RoleKind::configuration)
    throw Error(ErrorCode::invalid_argument, "'" + net.id(config) + "' is not a configuration");
  if (state >= net.cardinality(config))
    throw Error(ErrorCode::unknown_state, "configuration state out of range");
  if (current_setting(info, config) == state)
    throw Error(ErrorCode::invalid_argument, "configuration already in that state");
  auto setup = net.costs().configure.find(config);
  if (setup == net.costs().configure.end())
    throw Error(ErrorCode::invalid_argument, "no configure cost for '" + net.id(config) + "'");

  PlanEvaluation plan;
  plan.kind = PlanKind::config_observation;
  plan.observation = observation;
  plan.config = config;
  plan.config_state = state;
  plan.fixed_cost = setup->second + observe_cost(net, observation);
  plan.approximate = single_copy;

  if (single_copy) {
    Evidence ev = info.evidence;
    for (VarId d : net.descendants(config)) ev.erase(d);
    ev[config] = state;
    const auto weights = posterior_marginal(net, ev, observation).p;
    return outcome_plan(net, std::move(plan), weights, [&](StateIndex k) {
      return single_copy_config_probs(net, info, config, state, observation, k);
    });
  }

  InformationState hypothetical = info;
  hypothetical.experiments.push_back({config, state, {}});
  const World world(net, hypothetical);
  const std::size_t slot = hypothetical.experiments.size() - 1;
  const auto weights =
      posterior_marginal(world.network(), world.evidence(), world.post(observation, slot)).p;
  return outcome_plan(net, std::move(plan), weights, [&](StateIndex k) {
    InformationState next = hypothetical;
    next.experiments.back().observations[observation] = k;
    return fault_probabilities(net, next);
  });
}

void rank_candidates(const Network& net, std::vector<PlanEvaluation>& plans) {
  std::stable_sort(plans.begin(), plans.end(), [](const auto& a, const auto& b) {
    return a.expected_cost < b.expected_cost;
  });
  auto tie_order = [&](const PlanEvaluation& a, const PlanEvaluation& b) {
    if (a.kind != b.kind) return a.kind < b.kind;
    return detail_key(net, a) < detail_key(net, b);
  };
  for (std::size_t i = 0; i < plans.size();) {
    std::size_t j = i + 1;
    const double tol = 1e-9 * std::abs(plans[i].expected_cost);
    while (j < plans.size() && plans[j].expected_cost - plans[i].expected_cost <= tol) ++j;
    std::stable_sort(plans.begin() + static_cast<std::ptrdiff_t>(i),
                     plans.begin() + static_cast<std::ptrdiff_t>(j), tie_order);
    i = j;
  }
}

namespace {

struct Candidate {
  PlanKind kind;
  VarId observation = 0;
  VarId config = 0;
  StateIndex state = 0;
};

bool already_tried(const InformationState& info, VarId config, StateIndex state, VarId obs) {
  return std::any_of(info.experiments.begin(), info.experiments.end(), [&](const auto& e) {
    return e.config == config && e.state == state && e.observations.contains(obs);
  });
}

}  // namespace

Recommendation recommend_next(const Network& net, const InformationState& info,
                              const RecommendOptions& options) {
  if (!problem_abnormal(net, info))
    throw Error(ErrorCode::invalid_argument, "problem-defining node is not observed abnormal");
  const auto& costs = net.costs();
  const VarId pd = net.problem_defining();

  std::vector<Candidate> candidates;
  candidates.push_back({PlanKind::repair_sequence});
  for (VarId v = 0; v < net.size(); ++v) {
    const auto kind = net.role(v).kind;
    const bool observable_config =
        kind == RoleKind::configuration && costs.observe.contains(v);
    if ((kind == RoleKind::observation || observable_config) && !info.evidence.contains(v))
      candidates.push_back({PlanKind::observation, v});
  }
  if (options.use_config) {
    std::vector<VarId> targets{pd};
    if (!options.config_problem_only)
      for (VarId o : net.with_role(RoleKind::observation)) targets.push_back(o);
    for (VarId c : net.with_role(RoleKind::configuration)) {
      if (!costs.configure.contains(c)) continue;
      const auto current = current_setting(info, c);
      for (StateIndex m = 0; m < net.cardinality(c); ++m) {
        if (current == m) continue;
        for (VarId o : targets)
          if (!already_tried(info, c, m, o))
            candidates.push_back({PlanKind::config_observation, o, c, m});
      }
    }
  }

  std::vector<std::optional<PlanEvaluation>> results(candidates.size());
  std::vector<std::exception_ptr> errors(candidates.size());
  const auto n = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Candidate& c = candidates[static_cast<std::size_t>(i)];
    try {
      switch (c.kind) {
        case PlanKind::repair_sequence: {
          const RepairPlan plan = ecr(net, fault_probabilities(net, info));
          PlanEvaluation e;
          e.kind = PlanKind::repair_sequence;
          e.expected_cost = plan.expected_cost;
          e.sequence = plan.steps;
          results[static_cast<std::size_t>(i)] = std::move(e);
          break;
        }
        case PlanKind::observation:
          results[static_cast<std::size_t>(i)] = eco(net, info, c.observation);
          break;
        case PlanKind::config_observation:
          results[static_cast<std::size_t>(i)] =
              ecco(net, info, c.observation, c.config, c.state, options.use_single_copy);
          break;
        case PlanKind::service_call:
          break;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::impossible_evidence &&
          e.code() != ErrorCode::inconsistent_model)
        errors[static_cast<std::size_t>(i)] = std::current_exception();
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Recommendation rec;
  for (auto& r : results)
    if (r) rec.ranked.push_back(std::move(*r));
  if (costs.service_call) {
    PlanEvaluation s;
    s.kind = PlanKind::service_call;
    s.expected_cost = *costs.service_call;
    s.fixed_cost = *costs.service_call;
    rec.ranked.push_back(std::move(s));
  }
  if (rec.ranked.empty())
    throw Error(ErrorCode::model_exhausted, "no troubleshooting action remains");
  rank_candidates(net, rec.ranked);
  try {
    rec.faults = fault_probabilities(net, info);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::inconsistent_model) throw;
  }
  return rec;
}

}  // namespace tshoot
