#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "oracle.hpp"
#include "random_networks.hpp"
#include "tshoot/network_io.hpp"
#include "tshoot/persistence.hpp"
#include "tshoot/planner.hpp"

using namespace tshoot;

namespace {

Network model(const char* name) {
  return prepare_network(load_network(std::string(TSHOOT_MODELS_DIR) + "/" + name));
}

// A root observation with no path to anything else.
Network with_idle_observation(Network net, double cost) {
  NodeRole role;
  role.kind = RoleKind::observation;
  const VarId o = net.add_variable("Idle", {{"a", "b"}, std::nullopt}, role);
  net.set_cpt({o, {}, {0.4, 0.6}});
  net.costs().observe[o] = cost;
  return net;
}

Network scaled(Network net, double k) {
  auto& c = net.costs();
  for (auto* m : {&c.observe, &c.repair, &c.configure})
    for (auto& [v, x] : *m) x *= k;
  if (c.service_call) *c.service_call *= k;
  return net;
}

}  // namespace

TEST_CASE("fault probabilities on the two-component device") {
  const Network net = model("d1.net");
  const auto info = initial_information(net);
  const auto q = unscaled_fault_probabilities(net, info);
  REQUIRE(q.size() == 2);
  CHECK(q[0] == doctest::Approx(5.0 / 7.0).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(5.0 / 14.0).epsilon(1e-12));
  const auto fd = fault_probabilities(net, info);
  CHECK(fd.p[0] == doctest::Approx(2.0 / 3.0));
  CHECK(fd.p[1] == doctest::Approx(1.0 / 3.0));
  CHECK(fd.p[0] + fd.p[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("single component takes all the mass") {
  const Network net = model("single.net");
  const auto fd = fault_probabilities(net, initial_information(net));
  REQUIRE(fd.p.size() == 1);
  CHECK(fd.p[0] == doctest::Approx(1.0));
  const auto plan = ecr(net, fd);
  CHECK(plan.expected_cost == doctest::Approx(5.0));
  const auto rec = recommend_next(net, initial_information(net));
  CHECK(rec.winner().kind == PlanKind::repair_sequence);
  CHECK(rec.winner().expected_cost == doctest::Approx(5.0));
}

TEST_CASE("repaired component drops out") {
  const Network net = model("d1.net");
  auto info = initial_information(net);
  record_repair(info, net, net.index("A"));
  const auto fd = fault_probabilities(net, info);
  CHECK(fd.of(net.index("A")) == 0.0);
  CHECK(fd.of(net.index("B")) == doctest::Approx(1.0));
}

TEST_CASE("repair clears evidence below the component") {
  const Network net = model("d1.net");
  auto info = initial_information(net);
  record_observation(info, net, net.index("O"), 1);
  record_repair(info, net, net.index("A"));
  CHECK_FALSE(info.evidence.contains(net.index("O")));
  CHECK(info.evidence.at(net.problem_defining()) == 1);
  CHECK(info.repaired.contains(net.index("A")));
}

TEST_CASE("ecr arithmetic") {
  const double p[] = {0.7, 0.3}, o[] = {1, 1}, r[] = {4, 2};
  const std::size_t fwd[] = {0, 1}, rev[] = {1, 0};
  CHECK(expected_cost_of_repair(p, o, r, fwd) == doctest::Approx(4.7));
  CHECK(expected_cost_of_repair(p, o, r, rev) == doctest::Approx(5.1));
  CHECK(ratio_order(p, o) == std::vector<std::size_t>{0, 1});
  const double one[] = {1.0}, o1[] = {2}, r1[] = {3};
  const std::size_t only[] = {0};
  CHECK(expected_cost_of_repair(one, o1, r1, only) == doctest::Approx(5.0));

  const Network net = model("d1.net");
  const auto plan = ecr(net, fault_probabilities(net, initial_information(net)));
  CHECK(plan.expected_cost == doctest::Approx(10.0 / 3.0).epsilon(1e-12));
  REQUIRE(plan.steps.size() == 2);
  CHECK(plan.steps[0].component == net.index("A"));
}

TEST_CASE("zero observation cost sorts first by probability") {
  const double p[] = {0.5, 0.1, 0.4}, o[] = {1, 0, 0};
  CHECK(ratio_order(p, o) == std::vector<std::size_t>{2, 1, 0});
}

TEST_CASE("ratio order is optimal on random instances") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + trial % 5;
    std::vector<double> p(n), o(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = u(rng);
      o[i] = 10 * u(rng);
      r[i] = 10 * u(rng);
    }
    const double z = std::accumulate(p.begin(), p.end(), 0.0);
    for (double& x : p) x /= z;
    const auto best = expected_cost_of_repair(p, o, r, ratio_order(p, o));
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
      CHECK(best <= expected_cost_of_repair(p, o, r, perm) + 1e-9);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("unobservable component is priced as observed at repair cost") {
  Network net = model("d1.net");
  const VarId b = net.index("B");
  const auto fd = fault_probabilities(net, initial_information(net));
  NodeRole hidden = net.role(b);
  hidden.observable = false;
  Network h = net;
  h.set_role(b, hidden);
  Network swapped = net;
  swapped.costs().observe[b] = net.costs().repair.at(b);
  swapped.costs().repair[b] = 0.0;
  CHECK(ecr(h, fd).expected_cost == doctest::Approx(ecr(swapped, fd).expected_cost));
}

TEST_CASE("explicit order") {
  const Network net = model("d1.net");
  const auto fd = fault_probabilities(net, initial_information(net));
  const VarId rev[] = {net.index("B"), net.index("A")};
  CHECK(ecr(net, fd, rev).expected_cost == doctest::Approx(11.0 / 3.0));
  const VarId partial[] = {net.index("B")};
  CHECK_THROWS_AS(ecr(net, fd, partial), Error);
}

TEST_CASE("observation of a direct test") {
  const Network net = model("d1.net");
  const auto info = initial_information(net);
  const auto e = eco(net, info, net.index("O"));
  CHECK(e.expected_cost == doctest::Approx(0.5 + 16.0 / 7.0).epsilon(1e-12));
  REQUIRE(e.outcomes.size() == 2);
  CHECK(e.outcomes[1].probability == doctest::Approx(5.0 / 7.0));
  CHECK(e.outcomes[1].expected_cost == doctest::Approx(2.0));
  CHECK(e.outcomes[0].expected_cost == doctest::Approx(3.0));
  const auto rec = recommend_next(net, info);
  CHECK(rec.winner().kind == PlanKind::observation);
  CHECK(rec.winner().observation == net.index("O"));
  CHECK(rec.ranked[1].kind == PlanKind::repair_sequence);
  CHECK(rec.ranked[1].expected_cost == doctest::Approx(10.0 / 3.0));
  CHECK_THROWS_AS(eco(net, info, net.problem_defining()), Error);
}

TEST_CASE("irrelevant observation is pure waste") {
  const Network net = with_idle_observation(model("d1.net"), 0.25);
  const auto info = initial_information(net);
  const auto e = eco(net, info, net.index("Idle"));
  const double base = ecr(net, fault_probabilities(net, info)).expected_cost;
  CHECK(e.expected_cost == doctest::Approx(0.25 + base));
  const auto rec = recommend_next(net, info);
  CHECK(rec.winner().observation != net.index("Idle"));
}

TEST_CASE("ecco arithmetic") {
  const std::pair<double, double> outcomes[] = {{0.42, 7.07}, {0.58, 13.83}};
  const double total = expected_plan_cost(2.0 + 0.0, outcomes);
  CHECK(total == doctest::Approx(12.9908));
  CHECK(std::abs(total - 12.99) <= 0.02);
}

TEST_CASE("configuration experiment against mechanism enumeration") {
  const Network net = model("config.net");
  const VarId cfg = net.index("Config"), pd = net.problem_defining();
  const auto info = initial_information(net);
  const auto plan = ecco(net, info, pd, cfg, 1);
  CHECK_FALSE(plan.approximate);
  REQUIRE(plan.outcomes.size() == 2);

  oracle::PersistenceOracle o{net};
  const oracle::EvidenceMap pre{{cfg, 0}, {pd, 1}};
  const auto w = o.post_marginal(pre, {}, {{cfg, 1}}, pd);
  CHECK(plan.outcomes[0].probability == doctest::Approx(w[0]).epsilon(1e-10));

  // Outcome "normal": the branch used in setting 2 is cleared.
  InformationState next = info;
  next.experiments.push_back({cfg, 1, {{pd, 0}}});
  const auto q = unscaled_fault_probabilities(net, next);
  const auto mediators = problem_mediators(net);
  const auto comps = net.components();
  for (std::size_t i = 0; i < comps.size(); ++i) {
    auto it = mediators.find(comps[i]);
    const VarId t = it != mediators.end() ? it->second : comps[i];
    const auto expect = o.post_marginal(pre, {{pd, 0}}, {{cfg, 1}}, t);
    CAPTURE(net.id(comps[i]));
    CHECK(q[i] == doctest::Approx(expect[1]).epsilon(1e-10));
  }
  const auto fd = fault_probabilities(net, next);
  CHECK(fd.of(net.index("F2")) < 1e-12);
  CHECK(fd.of(net.index("C5")) < 1e-12);
  CHECK(fd.of(net.index("F1")) > 0.5);
}

TEST_CASE("single-copy configuration approximation") {
  const Network net = model("config.net");
  const VarId cfg = net.index("Config"), pd = net.problem_defining();
  const auto info = initial_information(net);
  const auto base = fault_probabilities(net, info);
  const auto fd = single_copy_config_probs(net, info, cfg, 1, pd, 0);
  CHECK(fd.of(net.index("F2")) == 0.0);
  CHECK(fd.of(net.index("C5")) == 0.0);
  const VarId f1 = net.index("F1"), c6 = net.index("C6");
  CHECK(fd.of(f1) / fd.of(c6) == doctest::Approx(base.of(f1) / base.of(c6)));
  double total = 0;
  for (double x : fd.p) total += x;
  CHECK(total == doctest::Approx(1.0));

  const auto approx = ecco(net, info, pd, cfg, 1, true);
  CHECK(approx.approximate);
  const auto exact = ecco(net, info, pd, cfg, 1, false);
  CHECK(approx.outcomes.size() == exact.outcomes.size());
}

TEST_CASE("single-copy approximation with nothing determined") {
  const Network net = model("config.net");
  const VarId cfg = net.index("Config"), pd = net.problem_defining();
  const auto info = initial_information(net);
  // PD abnormal in setting 2 pins nothing: F2, C5 or C6 could be at fault.
  const auto fd = single_copy_config_probs(net, info, cfg, 1, pd, 1);
  const auto base = fault_probabilities(net, info);
  for (std::size_t i = 0; i < fd.p.size(); ++i) CHECK(fd.p[i] == doctest::Approx(base.p[i]));
}

TEST_CASE("single-copy approximation agrees when logic decides") {
  // PD follows Fuse exactly; after any setting, PD abnormal pins Fuse.
  const Network net = model("single.net");
  const auto info = initial_information(net);
  const auto fd = fault_probabilities(net, info);
  CHECK(fd.p[0] == 1.0);
}

TEST_CASE("single-copy repair formula on single-fault devices") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 1 + trial % 5;
    const Network net = testing::single_fault_noisy_or(rng, n);
    const auto info = initial_information(net);
    const auto q = unscaled_fault_probabilities(net, info);
    const auto comps = net.components();
    const VarId pd = net.problem_defining();
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const auto pnet = build_persistence_network(net, ActionSpec::repair(net, comps[i]));
      const auto d = post_action_query(pnet, info.evidence, {}, pd);
      CHECK(std::abs(d[0] - q[i]) < 1e-9);
    }
  }
}

TEST_CASE("cost scaling") {
  for (const char* name : {"d1.net", "config.net"}) {
    const Network net = model(name);
    const Network big = scaled(net, 3.5);
    const auto info = initial_information(net);
    const auto a = recommend_next(net, info);
    const auto b = recommend_next(big, info);
    REQUIRE(a.ranked.size() == b.ranked.size());
    for (std::size_t i = 0; i < a.ranked.size(); ++i) {
      CHECK(b.ranked[i].expected_cost == doctest::Approx(3.5 * a.ranked[i].expected_cost));
      CHECK(detail_key(net, a.ranked[i]) == detail_key(big, b.ranked[i]));
    }
  }
}

TEST_CASE("parallel and serial evaluation agree") {
  const Network net = model("config.net");
  const auto info = initial_information(net);
  RecommendOptions serial;
  serial.parallel = false;
  const auto a = recommend_next(net, info);
  const auto b = recommend_next(net, info, serial);
  REQUIRE(a.ranked.size() == b.ranked.size());
  for (std::size_t i = 0; i < a.ranked.size(); ++i) {
    CHECK(a.ranked[i].expected_cost == b.ranked[i].expected_cost);
    CHECK(detail_key(net, a.ranked[i]) == detail_key(net, b.ranked[i]));
  }
}

TEST_CASE("config candidates can be switched off") {
  const Network net = model("config.net");
  const auto info = initial_information(net);
  RecommendOptions off;
  off.use_config = false;
  for (const auto& p : recommend_next(net, info, off).ranked)
    CHECK(p.kind != PlanKind::config_observation);
  bool any = false;
  for (const auto& p : recommend_next(net, info).ranked)
    any = any || p.kind == PlanKind::config_observation;
  CHECK(any);
}

TEST_CASE("ties fall back to kind then detail") {
  const Network net = model("d1.net");
  std::vector<PlanEvaluation> plans(3);
  plans[0].kind = PlanKind::observation;
  plans[0].observation = net.index("O");
  plans[0].expected_cost = 3.0;
  plans[1].kind = PlanKind::repair_sequence;
  plans[1].expected_cost = 3.0 + 1e-12;
  plans[2].kind = PlanKind::observation;
  plans[2].observation = net.index("A");
  plans[2].expected_cost = 2.0;
  rank_candidates(net, plans);
  CHECK(plans[0].observation == net.index("A"));
  CHECK(plans[1].kind == PlanKind::repair_sequence);
  CHECK(plans[2].kind == PlanKind::observation);
}

TEST_CASE("service call absorbs leak causes") {
  Network net("leaky");
  NodeRole comp;
  comp.kind = RoleKind::component;
  const VarId a = net.add_variable("A", {{"ok", "bad"}, 0}, comp);
  NodeRole leak = comp;
  leak.leak = true;
  const VarId l = net.add_variable("Other", {{"ok", "bad"}, 0}, leak);
  NodeRole pd;
  pd.kind = RoleKind::problem_defining;
  const VarId e = net.add_variable("E", {{"ok", "bad"}, 0}, pd);
  net.set_cpt({a, {}, {0.9, 0.1}});
  net.set_cpt({l, {}, {0.0, 1.0}});
  Combination c{e, CombinationFunction::logical_or, {{a, {1, 0, 0, 1}}, {l, {1, 0, 0.98, 0.02}}}};
  net.set_cpt(combined_cpt(net, c));
  net.add_combination(c);
  net.costs().observe[a] = 1;
  net.costs().repair[a] = 2;
  net.costs().service_call = 30;
  const Network ci = prepare_network(net);
  const auto info = initial_information(ci);
  const auto fd = fault_probabilities(ci, info);
  const auto plan = ecr(ci, fd);
  REQUIRE(plan.steps.size() == 2);
  CHECK(plan.steps[0].component == a);
  CHECK_FALSE(plan.steps[1].component.has_value());
  CHECK(plan.steps[1].p == doctest::Approx(fd.of(l)));
  // 1 + p_A*2 + (1 - p_A)*30
  CHECK(plan.expected_cost == doctest::Approx(1 + fd.of(a) * 2 + (1 - fd.of(a)) * 30));
  const auto rec = recommend_next(ci, info);
  CHECK(std::any_of(rec.ranked.begin(), rec.ranked.end(),
                    [](const auto& p) { return p.kind == PlanKind::service_call; }));
}

TEST_CASE("nothing left to try") {
  const Network net = model("d1.net");
  auto info = initial_information(net);
  record_repair(info, net, net.index("A"));
  record_repair(info, net, net.index("B"));
  info.evidence[net.index("O")] = 0;
  try {
    recommend_next(net, info);
    FAIL("expected exhaustion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::model_exhausted);
  }
}

TEST_CASE("printer ranking is stable") {
  const Network net = model("printer.net");
  const auto rec = recommend_next(net, initial_information(net));
  const std::pair<const char*, double> expect[] = {
      {"PrintPath=local/PrintOutput", 11.8799},
      {"PrinterOnline,PaperToner,NetConnection,Spooler,DriverFile,CablePort,service", 12.2314},
      {"NetIcon", 12.5617},
      {"PrinterDisplay", 13.1931},
      {"service", 30.0},
  };
  REQUIRE(rec.ranked.size() == std::size(expect));
  for (std::size_t i = 0; i < rec.ranked.size(); ++i) {
    CHECK(detail_key(net, rec.ranked[i]) == expect[i].first);
    CHECK(rec.ranked[i].expected_cost == doctest::Approx(expect[i].second).epsilon(1e-5));
  }
  CHECK(rec.faults->of(net.index("PrinterOnline")) == doctest::Approx(0.231128).epsilon(1e-5));
}
