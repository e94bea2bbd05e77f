// Random network generators shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "tshoot/inference.hpp"
#include "tshoot/network.hpp"

namespace tshoot::testing {

inline std::vector<double> random_row(std::mt19937_64& rng, std::size_t k,
                                      double deterministic_chance) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> row(k, 0.0);
  if (u(rng) < deterministic_chance) {
    row[std::uniform_int_distribution<std::size_t>(0, k - 1)(rng)] = 1.0;
    return row;
  }
  double z = 0;
  for (double& x : row) {
    x = 0.05 + u(rng);
    z += x;
  }
  for (double& x : row) x /= z;
  return row;
}

struct RandomNetSpec {
  std::size_t variables = 6;
  std::size_t max_parents = 3;
  std::size_t max_states = 2;
  double edge_chance = 0.5;
  double deterministic_chance = 0.2;
};

// Random DAG over variables 0..n-1 with arcs only from lower to higher ids.
// Variable 0 is a component; the last is problem-defining.
inline Network random_network(std::mt19937_64& rng, const RandomNetSpec& spec) {
  Network net("random");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> states(2, std::max<std::size_t>(2, spec.max_states));
  for (std::size_t i = 0; i < spec.variables; ++i) {
    StateSpace space;
    const std::size_t k = states(rng);
    for (std::size_t s = 0; s < k; ++s) space.states.push_back("s" + std::to_string(s));
    space.normal = 0;
    NodeRole role;
    if (i == spec.variables - 1) role.kind = RoleKind::problem_defining;
    else if (i == 0 || u(rng) < 0.4) role.kind = RoleKind::component;
    net.add_variable("v" + std::to_string(i), space, role);
  }
  for (VarId v = 0; v < net.size(); ++v) {
    Cpt cpt;
    cpt.child = v;
    std::vector<VarId> pool(v);
    for (VarId p = 0; p < v; ++p) pool[p] = p;
    std::shuffle(pool.begin(), pool.end(), rng);
    for (VarId p : pool)
      if (cpt.parents.size() < spec.max_parents && u(rng) < spec.edge_chance)
        cpt.parents.push_back(p);
    std::sort(cpt.parents.begin(), cpt.parents.end());
    std::size_t rows = 1;
    for (VarId p : cpt.parents) rows *= net.cardinality(p);
    for (std::size_t r = 0; r < rows; ++r) {
      auto row = random_row(rng, net.cardinality(v),
                            cpt.parents.empty() ? 0.0 : spec.deterministic_chance);
      cpt.table.insert(cpt.table.end(), row.begin(), row.end());
    }
    net.set_cpt(std::move(cpt));
  }
  return net;
}

// Forward sample of every variable.
inline std::vector<StateIndex> forward_sample(std::mt19937_64& rng, const Network& net) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<StateIndex> x(net.size(), 0);
  for (VarId v : topological_order(net)) {
    const Cpt& cpt = net.cpt(v);
    std::size_t row = 0;
    for (VarId p : cpt.parents) row = row * net.cardinality(p) + x[p];
    const std::size_t k = net.cardinality(v);
    double r = u(rng), acc = 0.0;
    x[v] = k - 1;
    for (StateIndex s = 0; s < k; ++s) {
      acc += cpt.table[row * k + s];
      if (r < acc && cpt.table[row * k + s] > 0) {
        x[v] = s;
        break;
      }
    }
  }
  return x;
}

// Evidence on a random subset, drawn from a forward sample so Pr(ev) > 0.
inline Evidence sampled_evidence(std::mt19937_64& rng, const Network& net,
                                 double chance = 0.35) {
  const auto x = forward_sample(rng, net);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Evidence ev;
  for (VarId v = 0; v < net.size(); ++v)
    if (u(rng) < chance) ev[v] = x[v];
  return ev;
}

/// Noisy-OR device where exactly one component is faulty: a selector root
/// picks the culprit (or none), components are deterministic in it, and each
/// component reaches the effect through a noisy mediator.
inline Network single_fault_noisy_or(std::mt19937_64& rng, std::size_t components) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Network net("single-fault");
  StateSpace sel;
  sel.states.push_back("none");
  for (std::size_t i = 0; i < components; ++i) sel.states.push_back("c" + std::to_string(i));
  const VarId selector = net.add_variable("Fault", sel);
  {
    std::vector<double> prior;
    double z = 0;
    for (std::size_t i = 0; i <= components; ++i) {
      prior.push_back(u(rng));
      z += prior.back();
    }
    for (double& p : prior) p /= z;
    net.set_cpt({selector, {}, prior});
  }
  StateSpace binary{{"normal", "abnormal"}, 0};
  Combination comb;
  std::vector<VarId> comps;
  for (std::size_t i = 0; i < components; ++i) {
    NodeRole role;
    role.kind = RoleKind::component;
    const VarId c = net.add_variable("C" + std::to_string(i), binary, role);
    Cpt cpt{c, {selector}, {}};
    for (std::size_t s = 0; s <= components; ++s) {
      const bool faulty = s == i + 1;
      cpt.table.push_back(faulty ? 0.0 : 1.0);
      cpt.table.push_back(faulty ? 1.0 : 0.0);
    }
    net.set_cpt(std::move(cpt));
    const double strength = u(rng);
    comb.causes.push_back({c, {1.0, 0.0, 1.0 - strength, strength}});
    net.costs().observe[c] = 1.0;
    net.costs().repair[c] = 1.0;
  }
  NodeRole pd;
  pd.kind = RoleKind::problem_defining;
  comb.effect = net.add_variable("E", binary, pd);
  comb.function = CombinationFunction::logical_or;
  net.set_cpt(combined_cpt(net, comb));
  net.add_combination(std::move(comb));
  return to_causal_independence(net);
}

}  // namespace tshoot::testing
