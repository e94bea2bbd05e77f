#include "tshoot/persistence.hpp"

#include <cmath>

namespace tshoot {

std::vector<Mapping> enumerate_mappings(std::span<const std::size_t> parent_cards,
                                        std::size_t child_card, std::size_t limit) {
  if (child_card == 0) throw Error(ErrorCode::invalid_argument, "empty child state space");
  std::size_t rows = 1;
  for (std::size_t c : parent_cards) {
    if (c == 0) throw Error(ErrorCode::invalid_argument, "empty parent state space");
    rows *= c;
  }
  std::size_t count = 1;
  for (std::size_t r = 0; r < rows; ++r) {
    if (count > limit / child_card)
      throw Error(ErrorCode::mapping_overflow,
                  "more than " + std::to_string(limit) +
                      " mappings; expand the network to causal-independence form first");
    count *= child_card;
  }
  std::vector<Mapping> out(count, Mapping(rows, 0));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t rest = i;
    for (std::size_t r = rows; r-- > 0;) {
      out[i][r] = rest % child_card;
      rest /= child_card;
    }
  }
  return out;
}

std::vector<double> product_of_columns(const Cpt& cpt, std::size_t child_card,
                                       std::span<const Mapping> mappings) {
  std::vector<double> prior(mappings.size(), 1.0);
  for (std::size_t i = 0; i < mappings.size(); ++i)
    for (std::size_t r = 0; r < mappings[i].size(); ++r)
      prior[i] *= cpt.table[r * child_card + mappings[i][r]];
  return prior;
}

MappingSpec mapping_prior(const Network& net, const Cpt& cpt, const MappingPriorPolicy& policy,
                          std::size_t limit) {
  std::vector<std::size_t> cards;
  for (VarId p : cpt.parents) cards.push_back(net.cardinality(p));
  MappingSpec spec;
  spec.owner = cpt.child;
  spec.mappings = enumerate_mappings(cards, net.cardinality(cpt.child), limit);
  spec.rows = spec.mappings.front().size();
  spec.prior = policy(cpt, net.cardinality(cpt.child), spec.mappings);
  return spec;
}

double marginal_inconsistency(const Network& net, const Cpt& cpt, const MappingSpec& spec) {
  const std::size_t k = net.cardinality(cpt.child);
  std::vector<double> implied(spec.rows * k, 0.0);
  for (std::size_t i = 0; i < spec.mappings.size(); ++i)
    for (std::size_t r = 0; r < spec.rows; ++r)
      implied[r * k + spec.mappings[i][r]] += spec.prior[i];
  double worst = 0.0;
  for (std::size_t i = 0; i < implied.size(); ++i)
    worst = std::max(worst, std::abs(implied[i] - cpt.table[i]));
  return worst;
}

ActionSpec ActionSpec::repair(const Network& net, VarId component) {
  const auto& var = net.variable(component);
  if (!var.space.normal)
    throw Error(ErrorCode::invalid_argument, "'" + var.id + "' has no normal state to repair to");
  ActionSpec a;
  a.kind = ActionKind::repair;
  a.target = component;
  a.directly_set = {{component, *var.space.normal}};
  return a;
}

ActionSpec ActionSpec::set_configuration(VarId config, StateIndex state) {
  ActionSpec a;
  a.kind = ActionKind::set_configuration;
  a.target = config;
  a.directly_set = {{config, state}};
  return a;
}

namespace {

struct Builder {
  const Network& net;
  const BuildOptions& options;
  PersistenceNetwork out;

  std::string post_name(const std::string& id, std::size_t world, std::size_t worlds) const {
    return worlds == 1 ? id + "@post" : id + "@post" + std::to_string(world + 1);
  }

  static NodeRole plain() { return {}; }

  void copy_costs(VarId from, VarId to) {
    const CostModel& src = net.costs();
    CostModel& dst = out.network.costs();
    if (auto it = src.observe.find(from); it != src.observe.end()) dst.observe[to] = it->second;
    if (auto it = src.repair.find(from); it != src.repair.end()) dst.repair[to] = it->second;
    if (auto it = src.configure.find(from); it != src.configure.end())
      dst.configure[to] = it->second;
  }

  // Copies v's table with parents substituted, optionally routed through a
  // mapping node.
  Cpt wired(VarId node, const Cpt& original, const std::vector<VarId>& parents,
            std::optional<VarId> mapping, const MappingSpec* spec) const {
    Cpt c;
    c.child = node;
    c.parents = parents;
    if (!mapping) {
      c.table = original.table;
      return c;
    }
    c.parents.push_back(*mapping);
    const std::size_t k = net.cardinality(original.child);
    const std::size_t m = spec->mappings.size();
    c.table.assign(spec->rows * m * k, 0.0);
    for (std::size_t r = 0; r < spec->rows; ++r)
      for (std::size_t i = 0; i < m; ++i)
        c.table[(r * m + i) * k + spec->mappings[i][r]] = 1.0;
    return c;
  }

  void run(const std::vector<std::vector<std::pair<VarId, StateIndex>>>& worlds,
           const std::vector<bool>& persisted) {
    const std::size_t n = net.size();
    const std::size_t nw = worlds.size();
    out.pre.assign(n, 0);
    out.post.assign(nw, std::vector<VarId>(n, 0));
    out.mapping.assign(n, std::nullopt);
    out.network.set_name(net.name() + "-persistence");

    std::vector<std::vector<std::optional<StateIndex>>> clamp(
        nw, std::vector<std::optional<StateIndex>>(n));
    for (std::size_t w = 0; w < nw; ++w)
      for (const auto& [v, s] : worlds[w]) {
        if (v >= n) throw Error(ErrorCode::unknown_variable, "action targets unknown variable");
        if (s >= net.cardinality(v))
          throw Error(ErrorCode::unknown_state, "action state out of range for '" + net.id(v) + "'");
        clamp[w][v] = s;
      }

    for (VarId v : topological_order(net)) {
      const auto& var = net.variable(v);
      const Cpt& cpt = net.cpt(v);
      std::vector<VarId> pre_parents;
      for (VarId p : cpt.parents) pre_parents.push_back(out.pre[p]);

      // Which worlds need their own post node?
      std::vector<bool> separate(nw, false);
      bool any_separate = false;
      for (std::size_t w = 0; w < nw; ++w) {
        if (clamp[w][v]) {
          separate[w] = true;
        } else if (!persisted[v]) {
          bool same = true;
          for (VarId p : cpt.parents) same = same && out.post[w][p] == out.pre[p];
          separate[w] = cpt.parents.empty() ? false : (!same || !options.share_unchanged);
        }
        any_separate = any_separate || separate[w];
      }

      // A mapping node is needed only when an unclamped post copy must
      // replay the pre copy's mechanism.
      bool needs_mapping = false;
      if (!cpt.parents.empty() && !cpt.deterministic())
        for (std::size_t w = 0; w < nw; ++w)
          needs_mapping = needs_mapping || (separate[w] && !clamp[w][v]);

      std::optional<VarId> mapping;
      MappingSpec spec;
      if (needs_mapping) {
        spec = mapping_prior(net, cpt, options.prior, options.mapping_limit);
        StateSpace space;
        for (std::size_t i = 0; i < spec.mappings.size(); ++i)
          space.states.push_back("m" + std::to_string(i));
        NodeRole role;
        role.kind = RoleKind::mapping;
        role.owner = std::nullopt;
        mapping = out.network.add_variable("m@" + var.id, std::move(space), role);
        out.network.set_cpt({*mapping, {}, spec.prior});
        out.mapping[v] = mapping;
      }

      NodeRole pre_role = var.role;
      if (pre_role.owner) pre_role.owner = out.pre[*pre_role.owner];
      const VarId pre = out.network.add_variable(any_separate ? var.id + "@pre" : var.id,
                                                 var.space, pre_role);
      out.network.set_cpt(wired(pre, cpt, pre_parents, mapping, &spec));
      out.pre[v] = pre;
      copy_costs(v, pre);

      for (std::size_t w = 0; w < nw; ++w) {
        if (!separate[w]) {
          out.post[w][v] = pre;
          continue;
        }
        const VarId post =
            out.network.add_variable(post_name(var.id, w, nw), var.space, plain());
        if (clamp[w][v]) {
          Cpt point{post, {}, std::vector<double>(net.cardinality(v), 0.0)};
          point.table[*clamp[w][v]] = 1.0;
          out.network.set_cpt(std::move(point));
        } else {
          std::vector<VarId> post_parents;
          for (VarId p : cpt.parents) post_parents.push_back(out.post[w][p]);
          out.network.set_cpt(wired(post, cpt, post_parents, mapping, &spec));
        }
        out.post[w][v] = post;
      }
    }
  }
};

}  // namespace

PersistenceNetwork build_persistence_network(const Network& net, const ActionSpec& action,
                                             const BuildOptions& options) {
  Builder b{net, options, {}};
  b.out.action = action;
  b.out.network.costs().service_call = net.costs().service_call;
  b.run({action.directly_set}, std::vector<bool>(net.size(), false));
  return std::move(b.out);
}

PersistenceNetwork build_config_persistence_network(
    const Network& net, std::span<const std::pair<VarId, StateIndex>> settings,
    const BuildOptions& options) {
  if (!net.combinations().empty())
    throw Error(ErrorCode::invalid_argument,
                "configuration persistence requires a network in causal-independence form");
  std::vector<bool> persisted(net.size(), false);
  for (VarId v = 0; v < net.size(); ++v) {
    const auto kind = net.role(v).kind;
    persisted[v] = kind == RoleKind::component || kind == RoleKind::configuration;
  }
  std::vector<std::vector<std::pair<VarId, StateIndex>>> worlds;
  for (const auto& [config, state] : settings) {
    if (config >= net.size() || net.role(config).kind != RoleKind::configuration)
      throw Error(ErrorCode::invalid_argument, "variable lacks the configuration role");
    worlds.push_back({{config, state}});
  }
  Builder b{net, options, {}};
  if (settings.size() == 1) b.out.action = ActionSpec::set_configuration(settings[0].first, settings[0].second);
  b.out.network.costs().service_call = net.costs().service_call;
  b.run(worlds, persisted);
  return std::move(b.out);
}

PersistenceNetwork build_config_persistence_network(const Network& net, VarId config,
                                                    StateIndex state,
                                                    const BuildOptions& options) {
  const std::pair<VarId, StateIndex> s[] = {{config, state}};
  return build_config_persistence_network(net, s, options);
}

Evidence translate_evidence(const PersistenceNetwork& pnet, const Evidence& pre_evidence,
                            std::span<const Evidence> post_evidence) {
  Evidence ev;
  auto put = [&](VarId node, StateIndex s) {
    auto [it, inserted] = ev.emplace(node, s);
    if (!inserted && it->second != s)
      throw Error(ErrorCode::impossible_evidence,
                  "conflicting evidence on persisted variable '" + pnet.network.id(node) + "'");
  };
  for (const auto& [v, s] : pre_evidence) put(pnet.pre.at(v), s);
  for (std::size_t w = 0; w < post_evidence.size(); ++w)
    for (const auto& [v, s] : post_evidence[w]) put(pnet.post.at(w).at(v), s);
  return ev;
}

Distribution post_action_query(const PersistenceNetwork& pnet, const Evidence& pre_evidence,
                               const Evidence& post_evidence, VarId target, std::size_t world) {
  std::vector<Evidence> post(pnet.post.size());
  post.at(world) = post_evidence;
  const Evidence ev = translate_evidence(pnet, pre_evidence, post);
  Distribution d = posterior_marginal(pnet.network, ev, pnet.post_of(target, world));
  d.variable = target;
  return d;
}

}  // namespace tshoot
