#include "tshoot/inference.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace tshoot {

namespace {

// Walks every assignment of `scope` and keeps one running index per factor.
struct Odometer {
  std::vector<std::size_t> cards;
  std::vector<std::vector<std::size_t>> strides;  // [factor][digit]
  std::vector<std::size_t> digits;
  std::vector<std::size_t> index;

  Odometer(const std::vector<VarId>& scope, const std::vector<std::size_t>& scope_cards,
           std::span<const Factor* const> factors, const std::vector<VarId>* extra_scope)
      : cards(scope_cards), digits(scope.size(), 0) {
    const std::size_t n = factors.size() + (extra_scope ? 1 : 0);
    strides.assign(n, std::vector<std::size_t>(scope.size(), 0));
    index.assign(n, 0);
    auto fill = [&](std::size_t slot, const std::vector<VarId>& fscope,
                    const std::vector<std::size_t>& fcards) {
      std::size_t stride = 1;
      for (std::size_t i = fscope.size(); i-- > 0;) {
        auto it = std::lower_bound(scope.begin(), scope.end(), fscope[i]);
        strides[slot][static_cast<std::size_t>(it - scope.begin())] = stride;
        stride *= fcards[i];
      }
    };
    for (std::size_t f = 0; f < factors.size(); ++f)
      fill(f, factors[f]->scope, factors[f]->cards);
    if (extra_scope) {
      std::vector<std::size_t> ecards;
      for (VarId v : *extra_scope) {
        auto it = std::lower_bound(scope.begin(), scope.end(), v);
        ecards.push_back(scope_cards[static_cast<std::size_t>(it - scope.begin())]);
      }
      fill(factors.size(), *extra_scope, ecards);
    }
  }

  void next() {
    for (std::size_t d = digits.size(); d-- > 0;) {
      if (++digits[d] < cards[d]) {
        for (std::size_t f = 0; f < index.size(); ++f) index[f] += strides[f][d];
        return;
      }
      digits[d] = 0;
      for (std::size_t f = 0; f < index.size(); ++f)
        index[f] -= (cards[d] - 1) * strides[f][d];
    }
  }
};

void union_scope(std::span<const Factor* const> factors, std::vector<VarId>& scope,
                 std::vector<std::size_t>& cards) {
  std::map<VarId, std::size_t> u;
  for (const Factor* f : factors)
    for (std::size_t i = 0; i < f->scope.size(); ++i) u.emplace(f->scope[i], f->cards[i]);
  scope.clear();
  cards.clear();
  for (const auto& [v, c] : u) {
    scope.push_back(v);
    cards.push_back(c);
  }
}

std::size_t product_size(const std::vector<std::size_t>& cards) {
  return std::accumulate(cards.begin(), cards.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

void check_evidence(const Network& net, const Evidence& ev) {
  for (const auto& [v, s] : ev) {
    if (v >= net.size())
      throw Error(ErrorCode::unknown_variable, "evidence on unknown variable");
    if (s >= net.cardinality(v))
      throw Error(ErrorCode::unknown_state, "evidence state out of range for '" + net.id(v) + "'");
  }
}

Factor cpt_factor(const Network& net, VarId v, const Evidence& ev) {
  const Cpt& cpt = net.cpt(v);
  // Family in CPT layout order: parents then child.
  std::vector<VarId> family(cpt.parents.begin(), cpt.parents.end());
  family.push_back(v);
  std::vector<std::size_t> layout_stride(family.size());
  {
    std::size_t s = 1;
    for (std::size_t i = family.size(); i-- > 0;) {
      layout_stride[i] = s;
      s *= net.cardinality(family[i]);
    }
  }
  Factor f;
  std::size_t base = 0;
  std::vector<std::pair<VarId, std::size_t>> free;  // var, layout stride
  for (std::size_t i = 0; i < family.size(); ++i) {
    auto it = ev.find(family[i]);
    if (it != ev.end())
      base += it->second * layout_stride[i];
    else
      free.emplace_back(family[i], layout_stride[i]);
  }
  std::sort(free.begin(), free.end());
  for (const auto& [var, stride] : free) {
    f.scope.push_back(var);
    f.cards.push_back(net.cardinality(var));
  }
  f.values.resize(product_size(f.cards));
  std::vector<std::size_t> digits(free.size(), 0);
  std::size_t src = base;
  for (std::size_t out = 0; out < f.values.size(); ++out) {
    f.values[out] = cpt.table[src];
    for (std::size_t d = digits.size(); d-- > 0;) {
      if (++digits[d] < f.cards[d]) {
        src += free[d].second;
        break;
      }
      digits[d] = 0;
      src -= (f.cards[d] - 1) * free[d].second;
    }
  }
  return f;
}

Factor multiply(std::span<const Factor* const> factors) {
  Factor out;
  union_scope(factors, out.scope, out.cards);
  out.values.assign(product_size(out.cards), 0.0);
  Odometer odo(out.scope, out.cards, factors, nullptr);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    double v = 1.0;
    for (std::size_t f = 0; f < factors.size(); ++f) v *= factors[f]->values[odo.index[f]];
    out.values[i] = v;
    odo.next();
  }
  return out;
}

Factor multiply_sum_out(std::span<const Factor* const> factors, VarId var) {
  std::vector<VarId> scope;
  std::vector<std::size_t> cards;
  union_scope(factors, scope, cards);
  Factor out;
  for (std::size_t i = 0; i < scope.size(); ++i) {
    if (scope[i] == var) continue;
    out.scope.push_back(scope[i]);
    out.cards.push_back(cards[i]);
  }
  out.values.assign(product_size(out.cards), 0.0);
  Odometer odo(scope, cards, factors, &out.scope);
  const std::size_t total = product_size(cards);
  const std::size_t nf = factors.size();
  for (std::size_t i = 0; i < total; ++i) {
    double v = 1.0;
    for (std::size_t f = 0; f < nf && v != 0.0; ++f) v *= factors[f]->values[odo.index[f]];
    out.values[odo.index[nf]] += v;
    odo.next();
  }
  return out;
}

std::vector<VarId> min_fill_order(std::span<const Factor> factors,
                                  std::span<const VarId> eliminate) {
  std::map<VarId, std::set<VarId>> adj;
  for (VarId v : eliminate) adj[v];
  for (const auto& f : factors)
    for (VarId a : f.scope)
      for (VarId b : f.scope)
        if (a != b) adj[a].insert(b);
  std::set<VarId> remaining(eliminate.begin(), eliminate.end());
  std::vector<VarId> order;
  order.reserve(remaining.size());
  while (!remaining.empty()) {
    VarId best = *remaining.begin();
    std::size_t best_fill = static_cast<std::size_t>(-1);
    for (VarId v : remaining) {
      const auto& nb = adj[v];
      std::size_t fill = 0;
      for (auto a = nb.begin(); a != nb.end() && fill < best_fill; ++a)
        for (auto b = std::next(a); b != nb.end(); ++b)
          if (!adj[*a].contains(*b)) ++fill;
      if (fill < best_fill) {
        best_fill = fill;
        best = v;
        if (fill == 0) break;
      }
    }
    const auto nb = adj[best];
    for (VarId a : nb) {
      adj[a].erase(best);
      for (VarId b : nb)
        if (a != b) adj[a].insert(b);
    }
    adj.erase(best);
    remaining.erase(best);
    order.push_back(best);
  }
  return order;
}

namespace {

struct Problem {
  std::vector<Factor> factors;
  std::vector<VarId> hidden;  // relevant, unobserved variables
};

Problem setup(const Network& net, const Evidence& ev, std::span<const VarId> targets) {
  check_evidence(net, ev);
  std::vector<VarId> seeds(targets.begin(), targets.end());
  for (const auto& [v, s] : ev) seeds.push_back(v);
  const auto keep = net.ancestral_closure(seeds);
  Problem p;
  for (VarId v = 0; v < net.size(); ++v) {
    if (!keep[v]) continue;
    p.factors.push_back(cpt_factor(net, v, ev));
    if (!ev.contains(v)) p.hidden.push_back(v);
  }
  return p;
}

// Eliminates `order` from the factors; returns the product of what remains.
Factor eliminate(std::vector<Factor> factors, std::span<const VarId> order) {
  std::vector<Factor> pool = std::move(factors);
  for (VarId var : order) {
    std::vector<const Factor*> touching;
    std::vector<Factor> rest;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (std::binary_search(pool[i].scope.begin(), pool[i].scope.end(), var))
        idx.push_back(i);
    if (idx.empty()) continue;
    for (std::size_t i : idx) touching.push_back(&pool[i]);
    Factor merged = multiply_sum_out(touching, var);
    rest.reserve(pool.size() - idx.size() + 1);
    std::size_t k = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (k < idx.size() && idx[k] == i) {
        ++k;
        continue;
      }
      rest.push_back(std::move(pool[i]));
    }
    rest.push_back(std::move(merged));
    pool = std::move(rest);
  }
  std::vector<const Factor*> ptrs;
  for (const auto& f : pool) ptrs.push_back(&f);
  if (ptrs.empty()) return Factor::scalar(1.0);
  return multiply(ptrs);
}

Distribution finish(const Network& net, const Evidence& ev, VarId target, Factor joint) {
  Distribution d{target, {}};
  if (auto it = ev.find(target); it != ev.end()) {
    double z = std::accumulate(joint.values.begin(), joint.values.end(), 0.0);
    if (!(z > kImpossibleEvidence))
      throw Error(ErrorCode::impossible_evidence, "evidence has probability zero");
    d.p.assign(net.cardinality(target), 0.0);
    d.p[it->second] = 1.0;
    return d;
  }
  double z = std::accumulate(joint.values.begin(), joint.values.end(), 0.0);
  if (!(z > kImpossibleEvidence))
    throw Error(ErrorCode::impossible_evidence, "evidence has probability zero");
  d.p = std::move(joint.values);
  for (double& x : d.p) x /= z;
  return d;
}

}  // namespace

std::vector<Distribution> posterior_marginals(const Network& net, const Evidence& ev,
                                              std::span<const VarId> targets) {
  for (VarId t : targets)
    if (t >= net.size()) throw Error(ErrorCode::unknown_variable, "unknown target variable");
  Problem p = setup(net, ev, targets);
  std::vector<Distribution> out;
  out.reserve(targets.size());
  for (VarId t : targets) {
    std::vector<VarId> hidden;
    for (VarId v : p.hidden)
      if (v != t) hidden.push_back(v);
    const auto order = min_fill_order(p.factors, hidden);
    out.push_back(finish(net, ev, t, eliminate(p.factors, order)));
  }
  return out;
}

Distribution posterior_marginal(const Network& net, const Evidence& ev, VarId target) {
  const VarId t[] = {target};
  return std::move(posterior_marginals(net, ev, t).front());
}

double probability_of_evidence(const Network& net, const Evidence& ev) {
  if (ev.empty()) return 1.0;
  Problem p = setup(net, ev, {});
  const auto order = min_fill_order(p.factors, p.hidden);
  Factor f = eliminate(std::move(p.factors), order);
  return std::accumulate(f.values.begin(), f.values.end(), 0.0);
}

}  // namespace tshoot
