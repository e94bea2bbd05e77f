#pragma once

#include <map>
#include <span>
#include <vector>

#include "tshoot/network.hpp"

namespace tshoot {

using Evidence = std::map<VarId, StateIndex>;

// Evidence whose probability falls at or below this is impossible.
inline constexpr double kImpossibleEvidence = 1e-12;

/// Nonnegative table over a sorted scope; the last scope variable varies
/// fastest.
struct Factor {
  std::vector<VarId> scope;
  std::vector<std::size_t> cards;
  std::vector<double> values;

  static Factor scalar(double value) { return {{}, {}, {value}}; }
  std::size_t size() const { return values.size(); }
};

// CPT as a factor over child and parents, with evidence variables sliced out.
Factor cpt_factor(const Network& net, VarId v, const Evidence& ev);

Factor multiply(std::span<const Factor* const> factors);
// Multiplies the factors and sums out `var` in one pass.
Factor multiply_sum_out(std::span<const Factor* const> factors, VarId var);

// Greedy min-fill over the interaction graph of the scopes; ties go to the
// smaller VarId.
std::vector<VarId> min_fill_order(std::span<const Factor> factors,
                                  std::span<const VarId> eliminate);

struct Distribution {
  VarId variable = 0;
  std::vector<double> p;

  double operator[](StateIndex s) const { return p.at(s); }
};

// Exact Pr(target | ev). Throws impossible_evidence when Pr(ev) <= 1e-12.
Distribution posterior_marginal(const Network& net, const Evidence& ev, VarId target);

// Same as calling posterior_marginal per target, sharing the factor setup.
std::vector<Distribution> posterior_marginals(const Network& net, const Evidence& ev,
                                              std::span<const VarId> targets);

// Exact Pr(ev); 1 for empty evidence.
double probability_of_evidence(const Network& net, const Evidence& ev);

void check_evidence(const Network& net, const Evidence& ev);

}  // namespace tshoot
