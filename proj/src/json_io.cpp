#include "tshoot/json_io.hpp"

namespace tshoot {

namespace {

const std::string& state_name(const Network& net, VarId v, StateIndex s) {
  return net.variable(v).space.states.at(s);
}

Json evidence_json(const Network& net, const Evidence& ev) {
  Json out = Json::object();
  for (const auto& [v, s] : ev) out[net.id(v)] = state_name(net, v, s);
  return out;
}

}  // namespace

Json fault_json(const Network& net, const FaultDistribution& fd) {
  Json out = Json::array();
  for (std::size_t i = 0; i < fd.components.size(); ++i) {
    const VarId c = fd.components[i];
    out.push_back({{"component", net.id(c)},
                   {"p", fd.p[i]},
                   {"known_abnormal", fd.known_abnormal.contains(c)}});
  }
  return out;
}

Json step_json(const Network& net, const RepairStep& step) {
  return {{"component", step.component ? Json(net.id(*step.component)) : Json(nullptr)},
          {"p", step.p},
          {"observe_cost", step.observe_cost},
          {"repair_cost", step.repair_cost}};
}

Json plan_json(const Network& net, const PlanEvaluation& plan) {
  Json out{{"kind", to_string(plan.kind)},
           {"expected_cost", plan.expected_cost},
           {"detail", detail_key(net, plan)},
           {"approximate", plan.approximate},
           {"fixed_cost", plan.fixed_cost}};
  auto sequence = [&](const std::vector<RepairStep>& steps) {
    Json s = Json::array();
    for (const auto& step : steps) s.push_back(step_json(net, step));
    return s;
  };
  switch (plan.kind) {
    case PlanKind::repair_sequence:
      out["sequence"] = sequence(plan.sequence);
      break;
    case PlanKind::config_observation:
      out["config"] = net.id(plan.config);
      out["config_state"] = state_name(net, plan.config, plan.config_state);
      [[fallthrough]];
    case PlanKind::observation: {
      out["observation"] = net.id(plan.observation);
      Json outcomes = Json::array();
      for (const auto& o : plan.outcomes)
        outcomes.push_back({{"state", state_name(net, plan.observation, o.state)},
                            {"probability", o.probability},
                            {"expected_cost", o.expected_cost},
                            {"sequence", sequence(o.sequence)}});
      out["outcomes"] = std::move(outcomes);
      break;
    }
    case PlanKind::service_call:
      break;
  }
  return out;
}

Json recommendation_json(const Network& net, const Recommendation& rec) {
  Json ranked = Json::array();
  for (const auto& p : rec.ranked) ranked.push_back(plan_json(net, p));
  Json out{{"ranked", std::move(ranked)}};
  out["faults"] = rec.faults ? fault_json(net, *rec.faults) : Json(nullptr);
  return out;
}

Json information_json(const Network& net, const InformationState& info) {
  Json repaired = Json::array();
  for (VarId c : info.repaired) repaired.push_back(net.id(c));
  Json experiments = Json::array();
  for (const auto& e : info.experiments)
    experiments.push_back({{"config", net.id(e.config)},
                           {"state", state_name(net, e.config, e.state)},
                           {"observations", evidence_json(net, e.observations)}});
  return {{"evidence", evidence_json(net, info.evidence)},
          {"repaired", std::move(repaired)},
          {"experiments", std::move(experiments)}};
}

Json comparison_json(const Comparison& c) {
  Json results = Json::array();
  for (const auto& r : c.results)
    results.push_back({{"policy", r.policy}, {"mean", r.mean}, {"stderr", r.std_error}});
  Json diffs = Json::array();
  for (const auto& d : c.differences)
    diffs.push_back(
        {{"first", d.first}, {"second", d.second}, {"mean", d.mean}, {"stderr", d.std_error}});
  return {{"trials", c.trials},
          {"results", std::move(results)},
          {"differences", std::move(diffs)},
          {"multi_fault_fraction", c.multi_fault_fraction}};
}

Json violations_json(const std::vector<Violation>& vs) {
  Json out = Json::array();
  for (const auto& v : vs) out.push_back({{"node", v.node}, {"rule", v.rule}, {"message", v.message}});
  return out;
}

}  // namespace tshoot
