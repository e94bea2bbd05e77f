#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "random_networks.hpp"
#include "tshoot/inference.hpp"
#include "tshoot/network_io.hpp"

using namespace tshoot;

namespace {
std::string model(const char* name) { return std::string(TSHOOT_MODELS_DIR) + "/" + name; }
}  // namespace

TEST_CASE("icon posterior") {
  const Network net = load_network(model("icon.net"));
  const VarId n = net.index("Net"), icon = net.index("Icon");
  const Evidence ev{{icon, 1}};
  CHECK(probability_of_evidence(net, ev) == doctest::Approx(0.41));
  const auto d = posterior_marginal(net, ev, n);
  CHECK(d[1] == doctest::Approx(0.27 / 0.41).epsilon(1e-12));
  CHECK(d[0] + d[1] == doctest::Approx(1.0));
}

TEST_CASE("evidence on the target is a point mass") {
  const Network net = load_network(model("icon.net"));
  const auto d = posterior_marginal(net, {{0, 1}}, 0);
  CHECK(d[1] == 1.0);
}

TEST_CASE("impossible evidence") {
  const Network net = load_network(model("d1.net"));
  const VarId a = net.index("A"), o = net.index("O");
  const Evidence ev{{a, 0}, {o, 1}};
  CHECK(probability_of_evidence(net, ev) == 0.0);
  try {
    posterior_marginal(net, ev, net.index("B"));
    FAIL("expected impossible evidence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::impossible_evidence);
  }
  CHECK_NOTHROW(check_evidence(net, ev));
  CHECK_THROWS_AS(check_evidence(net, {{a, 2}}), Error);
}

TEST_CASE("evidence naming a bad state is rejected") {
  const Network net = load_network(model("icon.net"));
  CHECK_THROWS_AS(posterior_marginal(net, {{0, 5}}, 1), Error);
}

TEST_CASE("factor product and sum-out") {
  // f(A,B) * g(B) summed over B
  Factor f{{0, 1}, {2, 2}, {0.1, 0.2, 0.3, 0.4}};
  Factor g{{1}, {2}, {0.5, 2.0}};
  const Factor* fs[] = {&f, &g};
  const Factor h = multiply(fs);
  REQUIRE(h.scope == std::vector<VarId>{0, 1});
  CHECK(h.values[1] == doctest::Approx(0.4));
  const Factor s = multiply_sum_out(fs, 1);
  REQUIRE(s.scope == std::vector<VarId>{0});
  CHECK(s.values[0] == doctest::Approx(0.05 + 0.4));
  CHECK(s.values[1] == doctest::Approx(0.15 + 0.8));
}

TEST_CASE("min-fill picks the leaf of a chain first") {
  // chain 0-1-2: eliminating 1 first would connect 0 and 2
  std::vector<Factor> fs{{{0, 1}, {2, 2}, std::vector<double>(4, 1)},
                         {{1, 2}, {2, 2}, std::vector<double>(4, 1)}};
  const VarId elim[] = {0, 1, 2};
  const auto order = min_fill_order(fs, elim);
  CHECK(order.front() == 0);
}

TEST_CASE("variable elimination matches joint enumeration") {
  std::mt19937_64 rng(20240101);
  for (int trial = 0; trial < 40; ++trial) {
    testing::RandomNetSpec spec;
    spec.variables = 4 + trial % 6;
    spec.max_states = 2 + trial % 2;
    const Network net = testing::random_network(rng, spec);
    const Evidence ev = testing::sampled_evidence(rng, net);
    CAPTURE(trial);
    CHECK(probability_of_evidence(net, ev) ==
          doctest::Approx(oracle::probability(net, ev)).epsilon(1e-9));
    std::vector<VarId> targets;
    for (VarId v = 0; v < net.size(); ++v) targets.push_back(v);
    const auto all = posterior_marginals(net, ev, targets);
    for (VarId v = 0; v < net.size(); ++v) {
      const auto expect = oracle::marginal(net, ev, v);
      for (StateIndex s = 0; s < expect.size(); ++s)
        CHECK(std::abs(all[v][s] - expect[s]) < 1e-9);
    }
  }
}
