// Brute-force references for tests. Nothing here goes through the
// library's factor code or persistence builder.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "tshoot/network.hpp"

namespace tshoot::oracle {

using Assignment = std::vector<StateIndex>;
using EvidenceMap = std::map<VarId, StateIndex>;

inline double cpt_entry(const Network& net, VarId v, const Assignment& x) {
  const Cpt& cpt = net.cpt(v);
  std::size_t row = 0;
  for (VarId p : cpt.parents) row = row * net.cardinality(p) + x[p];
  return cpt.table[row * net.cardinality(v) + x[v]];
}

inline void for_each_joint(const Network& net,
                           const std::function<void(const Assignment&, double)>& f) {
  Assignment x(net.size(), 0);
  while (true) {
    double p = 1.0;
    for (VarId v = 0; v < net.size() && p != 0.0; ++v) p *= cpt_entry(net, v, x);
    f(x, p);
    std::size_t d = 0;
    while (d < x.size() && ++x[d] == net.cardinality(d)) x[d++] = 0;
    if (d == x.size()) return;
  }
}

inline bool matches(const Assignment& x, const EvidenceMap& ev) {
  for (const auto& [v, s] : ev)
    if (x[v] != s) return false;
  return true;
}

inline double probability(const Network& net, const EvidenceMap& ev) {
  double z = 0;
  for_each_joint(net, [&](const Assignment& x, double p) {
    if (matches(x, ev)) z += p;
  });
  return z;
}

inline std::vector<double> marginal(const Network& net, const EvidenceMap& ev, VarId target) {
  std::vector<double> m(net.cardinality(target), 0.0);
  for_each_joint(net, [&](const Assignment& x, double p) {
    if (matches(x, ev)) m[x[target]] += p;
  });
  double z = 0;
  for (double v : m) z += v;
  for (double& v : m) v /= z;
  return m;
}

// Marginal over a subset of variables (by id) of the full joint, keyed by
// the subset's states in order.
inline std::map<Assignment, double> joint_over(const Network& net,
                                               const std::vector<VarId>& vars) {
  std::map<Assignment, double> out;
  for_each_joint(net, [&](const Assignment& x, double p) {
    Assignment key;
    for (VarId v : vars) key.push_back(x[v]);
    out[key] += p;
  });
  return out;
}

// Product-of-columns mapping prior computed from scratch.
inline double mapping_weight(const Network& net, VarId v, const std::vector<StateIndex>& f) {
  const std::size_t k = net.cardinality(v);
  double w = 1.0;
  for (std::size_t r = 0; r < f.size(); ++r) w *= net.cpt(v).table[r * k + f[r]];
  return w;
}

/// Exact post-action query by enumerating root states and one mechanism per
/// non-root node: a full function from parent rows to child states for
/// stochastic nodes, the CPT itself for deterministic ones. The same
/// mechanisms drive the pre world and the post world, where `clamps` force
/// states and cut parents.
struct PersistenceOracle {
  const Network& net;

  std::vector<double> post_marginal(const EvidenceMap& pre_ev, const EvidenceMap& post_ev,
                                    const std::map<VarId, StateIndex>& clamps,
                                    VarId target) const {
    const std::size_t n = net.size();
    std::vector<VarId> order;  // topological, naive
    std::vector<bool> placed(n, false);
    while (order.size() < n)
      for (VarId v = 0; v < n; ++v) {
        if (placed[v]) continue;
        bool ready = true;
        for (VarId p : net.parents(v)) ready = ready && placed[p];
        if (ready) {
          placed[v] = true;
          order.push_back(v);
        }
      }
    // Enumeration slots: roots pick a state; stochastic non-roots pick a function.
    std::vector<std::size_t> slot_size(n, 1);
    std::vector<std::size_t> rows(n, 1);
    std::vector<bool> stochastic(n, false);
    for (VarId v = 0; v < n; ++v) {
      for (VarId p : net.parents(v)) rows[v] *= net.cardinality(p);
      if (net.is_root(v)) {
        slot_size[v] = net.cardinality(v);
        continue;
      }
      for (double x : net.cpt(v).table) stochastic[v] = stochastic[v] || (x != 0.0 && x != 1.0);
      if (stochastic[v]) {
        std::size_t count = 1;
        for (std::size_t r = 0; r < rows[v]; ++r) count *= net.cardinality(v);
        slot_size[v] = count;
      }
    }
    std::vector<double> out(net.cardinality(target), 0.0);
    std::vector<std::size_t> pick(n, 0);
    while (true) {
      double w = 1.0;
      std::vector<std::vector<StateIndex>> fn(n);
      for (VarId v = 0; v < n && w != 0.0; ++v) {
        if (net.is_root(v)) {
          w *= net.cpt(v).table[pick[v]];
        } else if (stochastic[v]) {
          fn[v].assign(rows[v], 0);
          std::size_t rest = pick[v];
          for (std::size_t r = rows[v]; r-- > 0;) {
            fn[v][r] = rest % net.cardinality(v);
            rest /= net.cardinality(v);
          }
          w *= mapping_weight(net, v, fn[v]);
        }
      }
      if (w != 0.0) {
        auto world = [&](bool post) {
          Assignment x(n, 0);
          for (VarId v : order) {
            if (post) {
              if (auto it = clamps.find(v); it != clamps.end()) {
                x[v] = it->second;
                continue;
              }
            }
            if (net.is_root(v)) {
              x[v] = pick[v];
              continue;
            }
            std::size_t row = 0;
            for (VarId p : net.parents(v)) row = row * net.cardinality(p) + x[p];
            if (stochastic[v]) {
              x[v] = fn[v][row];
            } else {
              const auto& t = net.cpt(v).table;
              for (StateIndex s = 0; s < net.cardinality(v); ++s)
                if (t[row * net.cardinality(v) + s] == 1.0) x[v] = s;
            }
          }
          return x;
        };
        const Assignment pre = world(false), post = world(true);
        if (matches(pre, pre_ev) && matches(post, post_ev)) out[post[target]] += w;
      }
      std::size_t d = 0;
      while (d < n && ++pick[d] == slot_size[d]) pick[d++] = 0;
      if (d == n) break;
    }
    double z = 0;
    for (double v : out) z += v;
    for (double& v : out) v /= z;
    return out;
  }
};

}  // namespace tshoot::oracle
