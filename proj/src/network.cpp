#include "tshoot/network.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace tshoot {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::invalid_model: return "invalid_model";
    case ErrorCode::unknown_variable: return "unknown_variable";
    case ErrorCode::unknown_state: return "unknown_state";
    case ErrorCode::cycle: return "cycle";
    case ErrorCode::impossible_evidence: return "impossible_evidence";
    case ErrorCode::mapping_overflow: return "mapping_overflow";
    case ErrorCode::inconsistent_model: return "inconsistent_model";
    case ErrorCode::model_exhausted: return "model_exhausted";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::not_active: return "not_active";
    case ErrorCode::contradiction: return "contradiction";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

std::optional<StateIndex> StateSpace::find(std::string_view name) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i] == name) return i;
  return std::nullopt;
}

const char* to_string(RoleKind kind) {
  switch (kind) {
    case RoleKind::component: return "component";
    case RoleKind::observation: return "observation";
    case RoleKind::configuration: return "configuration";
    case RoleKind::problem_defining: return "problem_defining";
    case RoleKind::mediator: return "mediator";
    case RoleKind::mapping: return "mapping";
    case RoleKind::plain: return "plain";
  }
  return "plain";
}

std::optional<RoleKind> role_from_string(std::string_view name) {
  for (auto k : {RoleKind::component, RoleKind::observation, RoleKind::configuration,
                 RoleKind::problem_defining, RoleKind::mediator, RoleKind::mapping,
                 RoleKind::plain})
    if (name == to_string(k)) return k;
  return std::nullopt;
}

const char* to_string(CombinationFunction f) {
  return f == CombinationFunction::logical_or ? "or" : "max";
}

std::optional<CombinationFunction> combination_from_string(std::string_view name) {
  if (name == "or") return CombinationFunction::logical_or;
  if (name == "max") return CombinationFunction::max;
  return std::nullopt;
}

bool Cpt::deterministic() const {
  return std::all_of(table.begin(), table.end(),
                     [](double p) { return p == 0.0 || p == 1.0; });
}

VarId Network::add_variable(std::string id, StateSpace space, NodeRole role) {
  if (by_id_.contains(id))
    throw Error(ErrorCode::invalid_model, "duplicate id '" + id + "'");
  const VarId v = variables_.size();
  by_id_.emplace(id, v);
  variables_.push_back({std::move(id), std::move(space), role});
  cpts_.emplace_back();
  return v;
}

void Network::set_cpt(Cpt cpt) {
  if (cpt.child >= variables_.size())
    throw Error(ErrorCode::unknown_variable, "cpt for unknown variable");
  for (VarId p : cpt.parents)
    if (p >= variables_.size())
      throw Error(ErrorCode::unknown_variable, "cpt parent out of range");
  cpts_[cpt.child] = std::move(cpt);
}

void Network::set_role(VarId v, NodeRole role) { variables_.at(v).role = role; }

void Network::add_combination(Combination c) { combinations_.push_back(std::move(c)); }

std::optional<VarId> Network::find(std::string_view id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

VarId Network::index(std::string_view id) const {
  if (auto v = find(id)) return *v;
  throw Error(ErrorCode::unknown_variable, "unknown variable '" + std::string(id) + "'");
}

StateIndex Network::state_index(VarId v, std::string_view state) const {
  if (auto s = variable(v).space.find(state)) return *s;
  throw Error(ErrorCode::unknown_state, "variable '" + id(v) + "' has no state '" +
                                            std::string(state) + "'");
}

const Cpt& Network::cpt(VarId v) const {
  if (!has_cpt(v)) throw Error(ErrorCode::invalid_model, "variable '" + id(v) + "' has no cpt");
  return *cpts_[v];
}

std::span<const VarId> Network::parents(VarId v) const {
  if (!has_cpt(v)) return {};
  return cpts_[v]->parents;
}

std::vector<VarId> Network::children(VarId v) const {
  std::vector<VarId> out;
  for (VarId c = 0; c < cpts_.size(); ++c) {
    if (!cpts_[c]) continue;
    const auto& ps = cpts_[c]->parents;
    if (std::find(ps.begin(), ps.end(), v) != ps.end()) out.push_back(c);
  }
  return out;
}

std::vector<VarId> Network::with_role(RoleKind kind) const {
  std::vector<VarId> out;
  for (VarId v = 0; v < variables_.size(); ++v)
    if (variables_[v].role.kind == kind) out.push_back(v);
  return out;
}

VarId Network::problem_defining() const {
  auto pd = with_role(RoleKind::problem_defining);
  if (pd.size() != 1)
    throw Error(ErrorCode::invalid_model, pd.empty() ? "no problem-defining variable"
                                                     : "multiple problem-defining variables");
  return pd.front();
}

std::vector<VarId> Network::descendants(VarId v) const {
  std::vector<std::vector<VarId>> kids(size());
  for (VarId c = 0; c < size(); ++c)
    for (VarId p : parents(c)) kids[p].push_back(c);
  std::vector<bool> seen(size(), false);
  std::vector<VarId> stack{v}, out;
  while (!stack.empty()) {
    VarId u = stack.back();
    stack.pop_back();
    for (VarId c : kids[u]) {
      if (seen[c]) continue;
      seen[c] = true;
      out.push_back(c);
      stack.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<bool> Network::ancestral_closure(std::span<const VarId> seeds) const {
  std::vector<bool> keep(size(), false);
  std::vector<VarId> stack(seeds.begin(), seeds.end());
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = true;
    for (VarId p : parents(v))
      if (!keep[p]) stack.push_back(p);
  }
  return keep;
}

std::size_t row_index(const Network& net, std::span<const VarId> parents,
                      std::span<const StateIndex> states) {
  std::size_t row = 0;
  for (std::size_t i = 0; i < parents.size(); ++i)
    row = row * net.cardinality(parents[i]) + states[i];
  return row;
}

std::string describe_row(const Network& net, const Cpt& cpt, std::size_t row) {
  if (cpt.parents.empty()) return "prior";
  std::vector<StateIndex> states(cpt.parents.size());
  for (std::size_t i = cpt.parents.size(); i-- > 0;) {
    const auto card = net.cardinality(cpt.parents[i]);
    states[i] = row % card;
    row /= card;
  }
  std::string out;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (i) out += ",";
    const auto& var = net.variable(cpt.parents[i]);
    out += var.id + "=" + var.space.states[states[i]];
  }
  return out;
}

namespace {

std::size_t row_count(const Network& net, std::span<const VarId> parents) {
  std::size_t rows = 1;
  for (VarId p : parents) rows *= net.cardinality(p);
  return rows;
}

// Combination state of two effect-space values.
StateIndex combine(CombinationFunction f, const StateSpace& space, StateIndex a,
                   StateIndex b) {
  if (f == CombinationFunction::max) return std::max(a, b);
  const StateIndex normal = *space.normal;
  return (a != normal || b != normal) ? (a != normal ? a : b) : normal;
}

void check_combination(const Network& net, const Combination& c,
                       std::vector<Violation>& out) {
  const auto& effect = net.variable(c.effect);
  auto add = [&](std::string rule, std::string msg) {
    out.push_back({effect.id, std::move(rule), std::move(msg)});
  };
  if (c.function == CombinationFunction::logical_or &&
      (effect.space.size() != 2 || !effect.space.normal))
    add("combination", "or requires a two-state effect with a designated normal state");
  if (c.causes.empty()) add("combination", "combination without causes");
  std::set<VarId> seen;
  for (const auto& cause : c.causes) {
    if (cause.cause >= net.size()) {
      add("combination", "unknown cause");
      continue;
    }
    if (!seen.insert(cause.cause).second)
      add("combination", "cause '" + net.id(cause.cause) + "' listed twice");
    const auto rows = net.cardinality(cause.cause);
    if (cause.table.size() != rows * effect.space.size()) {
      add("combination", "interaction for '" + net.id(cause.cause) +
                             "' has the wrong size for the effect state space");
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::size_t k = 0; k < effect.space.size(); ++k) {
        double p = cause.table[r * effect.space.size() + k];
        if (p < 0 || p > 1) add("range", "interaction entry outside [0,1]");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        add("normalization", "interaction for '" + net.id(cause.cause) + "' row " +
                                 net.variable(cause.cause).space.states[r] +
                                 " sums to " + std::to_string(sum));
    }
  }
}

}  // namespace

Cpt combined_cpt(const Network& net, const Combination& c) {
  std::vector<Violation> problems;
  check_combination(net, c, problems);
  if (!problems.empty())
    throw Error(ErrorCode::invalid_model, problems.front().node + ": " + problems.front().message);
  const auto& space = net.variable(c.effect).space;
  const std::size_t k = space.size();
  Cpt cpt;
  cpt.child = c.effect;
  for (const auto& cause : c.causes) cpt.parents.push_back(cause.cause);
  const std::size_t rows = row_count(net, cpt.parents);
  cpt.table.assign(rows * k, 0.0);
  std::vector<StateIndex> states(cpt.parents.size(), 0);
  for (std::size_t row = 0; row < rows; ++row) {
    std::vector<double> acc(c.causes[0].table.begin() + states[0] * k,
                            c.causes[0].table.begin() + (states[0] + 1) * k);
    for (std::size_t i = 1; i < c.causes.size(); ++i) {
      std::vector<double> next(k, 0.0);
      const double* med = c.causes[i].table.data() + states[i] * k;
      for (std::size_t a = 0; a < k; ++a)
        for (std::size_t m = 0; m < k; ++m)
          next[combine(c.function, space, a, m)] += acc[a] * med[m];
      acc = std::move(next);
    }
    std::copy(acc.begin(), acc.end(), cpt.table.begin() + row * k);
    for (std::size_t i = states.size(); i-- > 0;) {
      if (++states[i] < net.cardinality(cpt.parents[i])) break;
      states[i] = 0;
    }
  }
  return cpt;
}

std::string mediator_id(std::string_view effect, std::string_view cause) {
  return std::string(effect) + "~" + std::string(cause);
}

Network prepare_network(const Network& net) {
  const auto problems = validate(net);
  if (!problems.empty()) {
    std::string msg = "model is invalid:";
    for (const auto& v : problems) msg += " [" + v.node + "] " + v.message + ";";
    msg.pop_back();
    throw Error(ErrorCode::invalid_model, msg);
  }
  return net.combinations().empty() ? net : to_causal_independence(net);
}

Network to_causal_independence(const Network& net) {
  Network out(net.name());
  for (const auto& var : net.variables()) out.add_variable(var.id, var.space, var.role);
  for (VarId v = 0; v < net.size(); ++v)
    if (net.has_cpt(v)) out.set_cpt(net.cpt(v));
  out.costs() = net.costs();

  for (const auto& c : net.combinations()) {
    std::vector<Violation> problems;
    check_combination(net, c, problems);
    if (!problems.empty())
      throw Error(ErrorCode::invalid_model,
                  problems.front().node + ": " + problems.front().message);
    const auto& effect = net.variable(c.effect);
    const std::size_t k = effect.space.size();
    Cpt eff;
    eff.child = c.effect;
    for (const auto& cause : c.causes) {
      NodeRole role;
      role.kind = RoleKind::mediator;
      role.owner = cause.cause;
      const VarId m = out.add_variable(mediator_id(effect.id, net.id(cause.cause)),
                                       effect.space, role);
      out.set_cpt({m, {cause.cause}, cause.table});
      eff.parents.push_back(m);
    }
    std::size_t rows = 1;
    for (std::size_t i = 0; i < eff.parents.size(); ++i) rows *= k;
    eff.table.assign(rows * k, 0.0);
    for (std::size_t row = 0; row < rows; ++row) {
      std::size_t rest = row;
      std::vector<StateIndex> states(eff.parents.size());
      for (std::size_t i = states.size(); i-- > 0;) {
        states[i] = rest % k;
        rest /= k;
      }
      StateIndex value = states[0];
      for (std::size_t i = 1; i < states.size(); ++i)
        value = combine(c.function, effect.space, value, states[i]);
      eff.table[row * k + value] = 1.0;
    }
    out.set_cpt(std::move(eff));
  }
  return out;
}

std::map<VarId, VarId> problem_mediators(const Network& net) {
  std::map<VarId, VarId> out;
  const VarId pd = net.problem_defining();
  for (VarId p : net.parents(pd)) {
    const auto& role = net.role(p);
    if (role.kind == RoleKind::mediator && role.owner &&
        net.role(*role.owner).kind == RoleKind::component)
      out.emplace(*role.owner, p);
  }
  return out;
}

std::vector<VarId> topological_order(const Network& net) {
  const std::size_t n = net.size();
  std::vector<std::size_t> indegree(n, 0);
  std::vector<std::vector<VarId>> kids(n);
  for (VarId v = 0; v < n; ++v)
    for (VarId p : net.parents(v)) {
      ++indegree[v];
      kids[p].push_back(v);
    }
  std::priority_queue<VarId, std::vector<VarId>, std::greater<>> ready;
  for (VarId v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);
  std::vector<VarId> order;
  order.reserve(n);
  while (!ready.empty()) {
    VarId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (VarId c : kids[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() == n) return order;

  // Walk parents among the blocked nodes until one repeats.
  VarId start = 0;
  while (indegree[start] == 0) ++start;
  std::vector<VarId> path;
  std::vector<int> pos(n, -1);
  VarId v = start;
  while (pos[v] < 0) {
    pos[v] = static_cast<int>(path.size());
    path.push_back(v);
    for (VarId p : net.parents(v))
      if (indegree[p] != 0) {
        v = p;
        break;
      }
  }
  std::string cycle;
  for (std::size_t i = path.size(); i-- > static_cast<std::size_t>(pos[v]);)
    cycle += net.id(path[i]) + " -> ";
  cycle += net.id(v);
  throw Error(ErrorCode::cycle, "cycle detected: " + cycle);
}

std::vector<Violation> validate(const Network& net) {
  std::vector<Violation> out;
  auto add = [&](VarId v, std::string rule, std::string msg) {
    out.push_back({v < net.size() ? net.id(v) : std::string("<network>"), std::move(rule),
                   std::move(msg)});
  };

  const auto pd = net.with_role(RoleKind::problem_defining);
  if (pd.empty())
    out.push_back({"<network>", "problem-defining", "no problem-defining variable"});
  if (pd.size() > 1)
    for (VarId v : pd) add(v, "problem-defining", "multiple problem-defining variables");

  std::set<VarId> combined;
  for (const auto& c : net.combinations()) combined.insert(c.effect);

  for (VarId v = 0; v < net.size(); ++v) {
    const auto& var = net.variable(v);
    const auto& space = var.space;
    if (space.states.empty()) add(v, "states", "state space is empty");
    std::set<std::string> names(space.states.begin(), space.states.end());
    if (names.size() != space.states.size()) add(v, "states", "duplicate state names");
    if (space.normal && *space.normal >= space.size())
      add(v, "states", "normal state index out of range");

    const auto& role = var.role;
    switch (role.kind) {
      case RoleKind::component:
      case RoleKind::problem_defining:
        if (!space.normal) add(v, "role", "requires a designated normal state");
        break;
      case RoleKind::mediator:
        if (!role.owner || *role.owner >= net.size()) {
          add(v, "role", "mediator does not name an existing owner");
        } else if (net.has_cpt(v) &&
                   (net.parents(v).size() != 1 || net.parents(v)[0] != *role.owner)) {
          add(v, "role", "mediator must have its owner as sole parent");
        }
        break;
      case RoleKind::configuration:
        if (role.initial && *role.initial >= space.size())
          add(v, "role", "initial configuration state out of range");
        break;
      default:
        break;
    }
    if (role.kind == RoleKind::component && role.leak) {
      if (!net.is_root(v)) add(v, "leak", "leak cause must be a root");
      if (net.has_cpt(v) && space.normal && net.cpt(v).table.size() == space.size() &&
          net.cpt(v).table[*space.normal] != 0.0)
        add(v, "leak", "leak cause must be abnormal with probability 1");
    }

    if (!net.has_cpt(v)) {
      if (!combined.contains(v)) add(v, "cpt", "missing cpt");
      continue;
    }
    const Cpt& cpt = net.cpt(v);
    std::size_t rows = 1;
    bool parents_ok = true;
    std::set<VarId> uniq;
    for (VarId p : cpt.parents) {
      if (p >= net.size()) {
        add(v, "cpt", "unknown variable as parent");
        parents_ok = false;
        continue;
      }
      if (!uniq.insert(p).second) add(v, "cpt", "parent '" + net.id(p) + "' listed twice");
      rows *= net.cardinality(p);
    }
    if (!parents_ok) continue;
    if (cpt.table.size() != rows * space.size()) {
      add(v, "cpt", "table has " + std::to_string(cpt.table.size()) + " entries, expected " +
                        std::to_string(rows * space.size()));
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0;
      for (std::size_t k = 0; k < space.size(); ++k) {
        const double p = cpt.table[r * space.size() + k];
        if (!(p >= 0.0 && p <= 1.0))
          add(v, "range", "entry outside [0,1] in column " + describe_row(net, cpt, r));
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << "column " << describe_row(net, cpt, r) << " sums to " << sum;
        add(v, "normalization", msg.str());
      }
    }

    // One mediator per cause on an expanded effect.
    std::set<VarId> owners;
    for (VarId p : cpt.parents) {
      const auto& pr = net.role(p);
      if (pr.kind == RoleKind::mediator && pr.owner && !owners.insert(*pr.owner).second)
        add(v, "mediator", "more than one mediator for cause '" + net.id(*pr.owner) + "'");
    }
  }

  for (const auto& c : net.combinations()) {
    if (c.effect >= net.size()) {
      out.push_back({"<network>", "combination", "unknown effect"});
      continue;
    }
    check_combination(net, c, out);
  }

  try {
    (void)topological_order(net);
  } catch (const Error& e) {
    out.push_back({"<network>", "acyclic", e.what()});
  }

  const auto& costs = net.costs();
  auto check_costs = [&](const std::map<VarId, double>& m, const char* what) {
    for (const auto& [v, c] : m)
      if (!(c >= 0.0)) add(v, "cost", std::string(what) + " cost must be >= 0");
  };
  check_costs(costs.observe, "observe");
  check_costs(costs.repair, "repair");
  check_costs(costs.configure, "configure");
  if (costs.service_call && !(*costs.service_call >= 0.0))
    out.push_back({"<network>", "cost", "service call cost must be >= 0"});
  for (VarId v : net.components()) {
    const auto& role = net.role(v);
    if (role.leak && costs.service_call) continue;
    if (!costs.repair.contains(v)) add(v, "cost", "component has no repair cost");
    if (role.observable && !costs.observe.contains(v))
      add(v, "cost", "observable component has no observe cost");
  }
  for (VarId v : net.with_role(RoleKind::observation))
    if (!costs.observe.contains(v)) add(v, "cost", "observation has no observe cost");
  return out;
}

}  // namespace tshoot
