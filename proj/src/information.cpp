#include "tshoot/information.hpp"

#include <algorithm>

namespace tshoot {

StateIndex abnormal_state(const Network& net, VarId v) {
  const auto& space = net.variable(v).space;
  for (StateIndex s = 0; s < space.size(); ++s)
    if (!space.normal || s != *space.normal) return s;
  throw Error(ErrorCode::invalid_model, "'" + net.id(v) + "' has no abnormal state");
}

InformationState initial_information(const Network& net) {
  InformationState info;
  const VarId pd = net.problem_defining();
  info.evidence[pd] = abnormal_state(net, pd);
  for (VarId c : net.with_role(RoleKind::configuration))
    if (auto s = net.role(c).initial) info.evidence[c] = *s;
  return info;
}

bool problem_abnormal(const Network& net, const InformationState& info) {
  const VarId pd = net.problem_defining();
  auto it = info.evidence.find(pd);
  return it != info.evidence.end() && it->second != net.variable(pd).space.normal;
}

std::optional<StateIndex> current_setting(const InformationState& info, VarId config) {
  auto it = info.evidence.find(config);
  if (it == info.evidence.end()) return std::nullopt;
  return it->second;
}

void record_observation(InformationState& info, const Network& net, VarId v, StateIndex s) {
  if (v >= net.size()) throw Error(ErrorCode::unknown_variable, "unknown variable");
  if (s >= net.cardinality(v))
    throw Error(ErrorCode::unknown_state, "state out of range for '" + net.id(v) + "'");
  info.evidence[v] = s;
}

void record_repair(InformationState& info, const Network& net, VarId component) {
  const auto& var = net.variable(component);
  if (var.role.kind != RoleKind::component || !var.space.normal)
    throw Error(ErrorCode::invalid_argument, "'" + var.id + "' is not a repairable component");
  const VarId pd = net.problem_defining();
  const auto below = net.descendants(component);
  auto stale = [&](VarId v) {
    return v != pd && std::binary_search(below.begin(), below.end(), v);
  };
  std::erase_if(info.evidence, [&](const auto& kv) { return stale(kv.first); });
  std::erase_if(info.experiments, [&](const ConfigExperiment& e) {
    return std::any_of(e.observations.begin(), e.observations.end(),
                       [&](const auto& kv) {
                         return std::binary_search(below.begin(), below.end(), kv.first);
                       });
  });
  info.evidence[component] = *var.space.normal;
  info.repaired.insert(component);
}

void record_experiment(InformationState& info, ConfigExperiment experiment) {
  info.experiments.push_back(std::move(experiment));
}

std::set<VarId> known_abnormal(const Network& net, const InformationState& info) {
  std::set<VarId> out;
  auto inspect = [&](VarId v, StateIndex s) {
    const auto& var = net.variable(v);
    if (var.role.kind == RoleKind::component) {
      if (var.space.normal && s != *var.space.normal) out.insert(v);
      return;
    }
    if (var.role.kind != RoleKind::observation || !net.has_cpt(v)) return;
    const Cpt& cpt = net.cpt(v);
    if (cpt.parents.size() != 1 || !cpt.deterministic()) return;
    const VarId c = cpt.parents[0];
    const auto& cvar = net.variable(c);
    if (cvar.role.kind != RoleKind::component || !cvar.space.normal) return;
    if (cpt.table[*cvar.space.normal * var.space.size() + s] == 0.0) out.insert(c);
  };
  for (const auto& [v, s] : info.evidence) inspect(v, s);
  for (const auto& e : info.experiments)
    for (const auto& [v, s] : e.observations) inspect(v, s);
  return out;
}

World::World(const Network& net, const InformationState& info, const BuildOptions& options)
    : base_(&net) {
  if (info.experiments.empty()) {
    evidence_ = info.evidence;
    return;
  }
  std::vector<std::pair<VarId, StateIndex>> settings;
  std::vector<Evidence> post;
  for (const auto& e : info.experiments) {
    settings.emplace_back(e.config, e.state);
    post.push_back(e.observations);
  }
  pnet_ = build_config_persistence_network(net, settings, options);
  evidence_ = translate_evidence(*pnet_, info.evidence, post);
}

}  // namespace tshoot
