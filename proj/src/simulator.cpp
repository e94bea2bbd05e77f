#include "tshoot/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <random>
#include <sstream>

#include "tshoot/information.hpp"

namespace tshoot {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t trial_seed(std::uint64_t seed, std::uint64_t trial) {
  return splitmix64(splitmix64(seed) ^ trial);
}

namespace {

// First state whose cumulative weight exceeds u; zero-weight states are
// never chosen.
StateIndex inverse_cdf(const double* row, std::size_t k, double u) {
  double total = 0.0;
  for (std::size_t s = 0; s < k; ++s) total += row[s];
  const double target = u * total;
  double acc = 0.0;
  StateIndex last = 0;
  for (StateIndex s = 0; s < k; ++s) {
    if (row[s] <= 0.0) continue;
    acc += row[s];
    last = s;
    if (target < acc) return s;
  }
  return last;
}

StateIndex abnormal_draw(const Network& net, VarId v, const double* row, double u) {
  const auto& space = net.variable(v).space;
  std::vector<double> w(row, row + space.size());
  if (space.normal) w[*space.normal] = 0.0;
  bool any = false;
  for (double x : w) any = any || x > 0.0;
  if (!any) return abnormal_state(net, v);
  return inverse_cdf(w.data(), w.size(), u);
}

bool failed(const Network& net, const std::vector<StateIndex>& x) {
  const VarId pd = net.problem_defining();
  return x[pd] != net.variable(pd).space.normal;
}

}  // namespace

std::vector<StateIndex> evaluate_scenario(const Network& net, const Scenario& scenario,
                                          const std::map<VarId, StateIndex>& overrides) {
  std::vector<StateIndex> x(net.size(), 0);
  for (VarId v : topological_order(net)) {
    if (auto it = overrides.find(v); it != overrides.end()) {
      x[v] = it->second;
      continue;
    }
    if (auto it = scenario.fixed.find(v); it != scenario.fixed.end()) {
      x[v] = it->second;
      continue;
    }
    const Cpt& cpt = net.cpt(v);
    const std::size_t k = net.cardinality(v);
    std::size_t row = 0;
    for (VarId p : cpt.parents) row = row * net.cardinality(p) + x[p];
    const double* r = cpt.table.data() + row * k;
    if (scenario.fault) {
      const auto& var = net.variable(v);
      if (v == *scenario.fault) {
        x[v] = abnormal_draw(net, v, r, scenario.noise[v]);
        continue;
      }
      if (var.role.kind == RoleKind::component && var.space.normal) {
        x[v] = *var.space.normal;
        continue;
      }
    }
    x[v] = inverse_cdf(r, k, scenario.noise[v]);
  }
  return x;
}

Scenario sample_scenario(const Network& net, std::uint64_t seed, const ScenarioOptions& options) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Scenario sc;
  sc.seed = seed;
  for (VarId c : net.with_role(RoleKind::configuration))
    if (auto s = net.role(c).initial) sc.fixed[c] = *s;

  if (options.mode == ScenarioMode::single_fault) {
    const FaultDistribution fd =
        options.faults ? *options.faults : fault_probabilities(net, initial_information(net));
    const double r = u(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < fd.components.size(); ++i) {
      if (fd.p[i] <= 0.0) continue;
      acc += fd.p[i];
      sc.fault = fd.components[i];
      if (r < acc) break;
    }
    if (!sc.fault) throw Error(ErrorCode::inconsistent_model, "no component can be at fault");
  }

  sc.noise.resize(net.size());
  for (std::size_t draw = 0; draw < options.rejection_cap; ++draw) {
    for (double& n : sc.noise) n = u(rng);
    sc.truth = evaluate_scenario(net, sc);
    if (failed(net, sc.truth)) return sc;
  }
  throw Error(ErrorCode::model_exhausted,
              "no failing device after " + std::to_string(options.rejection_cap) + " draws");
}

Policy parse_policy(const Network& net, std::string_view text) {
  Policy p;
  std::string_view head = text, tail;
  if (auto colon = text.find(':'); colon != std::string_view::npos) {
    head = text.substr(0, colon);
    tail = text.substr(colon + 1);
  }
  if (head == "static" || head == "static_order") {
    p.kind = PolicyKind::static_order;
    p.name = "static_order";
    while (!tail.empty()) {
      const auto comma = tail.find(',');
      const auto id = tail.substr(0, comma);
      const VarId v = net.index(id);
      if (net.role(v).kind != RoleKind::component)
        throw Error(ErrorCode::invalid_argument, "'" + std::string(id) + "' is not a component");
      p.order.push_back(v);
      tail = comma == std::string_view::npos ? std::string_view{} : tail.substr(comma + 1);
    }
    for (std::size_t i = 0; i < p.order.size(); ++i)
      p.name += (i == 0 ? ":" : ">") + net.id(p.order[i]);
    return p;
  }
  if (!tail.empty())
    throw Error(ErrorCode::invalid_argument, "policy '" + std::string(head) + "' takes no order");
  if (head == "pc" || head == "pc_order") {
    p.kind = PolicyKind::pc_order;
    p.name = "pc_order";
  } else if (head == "obs" || head == "with_observations") {
    p.kind = PolicyKind::with_observations;
    p.name = "with_observations";
  } else if (head == "config" || head == "with_config") {
    p.kind = PolicyKind::with_config;
    p.name = "with_config";
  } else if (head == "config_approx" || head == "with_config_single_copy") {
    p.kind = PolicyKind::with_config;
    p.single_copy = true;
    p.name = "with_config_single_copy";
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown policy '" + std::string(text) + "'");
  }
  return p;
}

std::vector<Policy> parse_policies(const Network& net, std::string_view list) {
  // Commas separate policies except inside a static order, which runs to
  // the next ';'. "static:B,A;pc" and "pc,obs" both work.
  std::vector<Policy> out;
  while (!list.empty()) {
    std::size_t end;
    if (list.starts_with("static:") || list.starts_with("static_order:")) {
      end = list.find(';');
    } else {
      end = list.find_first_of(",;");
    }
    const auto item = list.substr(0, end);
    if (!item.empty()) out.push_back(parse_policy(net, item));
    list = end == std::string_view::npos ? std::string_view{} : list.substr(end + 1);
  }
  if (out.empty()) throw Error(ErrorCode::invalid_argument, "no policies given");
  return out;
}

namespace {

class Device {
 public:
  Device(const Network& net, const Scenario& sc) : net_(net), sc_(sc) {}

  StateIndex read(VarId v, std::optional<std::pair<VarId, StateIndex>> setting = {}) const {
    auto ov = overrides_;
    if (setting) ov[setting->first] = setting->second;
    return evaluate_scenario(net_, sc_, ov)[v];
  }
  bool broken() const { return read(net_.problem_defining()) != normal(net_.problem_defining()); }
  void repair(VarId c) { overrides_[c] = normal(c); }
  void service() { serviced_ = true; }
  bool serviced() const { return serviced_; }

 private:
  StateIndex normal(VarId v) const { return *net_.variable(v).space.normal; }

  const Network& net_;
  const Scenario& sc_;
  std::map<VarId, StateIndex> overrides_;
  bool serviced_ = false;
};

class Loop {
 public:
  Loop(const Network& net, const Scenario& sc)
      : net_(net), device_(net, sc), info_(initial_information(net)) {}

  bool done() const { return device_.serviced() || !device_.broken(); }
  const InformationState& info() const { return info_; }
  TrialResult& result() { return result_; }

  void tick() {
    if (++actions_ > 10 * net_.size())
      throw Error(ErrorCode::model_exhausted, "action budget exceeded");
  }

  void service() {
    tick();
    const double c = net_.costs().service_call.value_or(0.0);
    result_.cost += c;
    result_.trace.push_back({"service_call", "", c});
    device_.service();
  }

  // Observe-then-repair; unobservable components are replaced outright.
  void repair_step(const RepairStep& step) {
    if (!step.component) {
      service();
      return;
    }
    tick();
    const VarId c = *step.component;
    const auto& var = net_.variable(c);
    result_.cost += step.observe_cost;
    if (!var.role.observable) {
      result_.trace.push_back({"repair", var.id, step.observe_cost});
      device_.repair(c);
      record_repair(info_, net_, c);
      return;
    }
    const StateIndex s = device_.read(c);
    if (s == *var.space.normal) {
      result_.trace.push_back({"observe", var.id + "=" + var.space.states[s], step.observe_cost});
      record_observation(info_, net_, c, s);
      return;
    }
    result_.cost += step.repair_cost;
    result_.trace.push_back({"repair", var.id, step.observe_cost + step.repair_cost});
    device_.repair(c);
    record_repair(info_, net_, c);
  }

  void observe(const PlanEvaluation& plan) {
    tick();
    const VarId o = plan.observation;
    const StateIndex s = device_.read(o);
    result_.cost += plan.fixed_cost;
    result_.trace.push_back(
        {"observe", net_.id(o) + "=" + net_.variable(o).space.states[s], plan.fixed_cost});
    record_observation(info_, net_, o, s);
  }

  void configure_observe(const PlanEvaluation& plan) {
    tick();
    const VarId o = plan.observation;
    const StateIndex s = device_.read(o, std::pair{plan.config, plan.config_state});
    result_.cost += plan.fixed_cost;
    result_.trace.push_back({"configure_observe",
                             net_.id(plan.config) + "=" +
                                 net_.variable(plan.config).space.states[plan.config_state] +
                                 "/" + net_.id(o) + "=" + net_.variable(o).space.states[s],
                             plan.fixed_cost});
    record_experiment(info_, {plan.config, plan.config_state, {{o, s}}});
  }

 private:
  const Network& net_;
  Device device_;
  InformationState info_;
  TrialResult result_;
  std::size_t actions_ = 0;
};

std::vector<VarId> default_static_order(const Network& net) {
  std::vector<VarId> order;
  for (VarId c : net.components())
    if (!net.role(c).leak) order.push_back(c);
  auto effective = [&](VarId c) {
    return net.role(c).observable ? net.costs().observe.at(c) : net.costs().repair.at(c);
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](VarId a, VarId b) { return effective(a) < effective(b); });
  return order;
}

void run_static(const Network& net, Loop& loop, const Policy& policy) {
  const auto order = policy.order.empty() ? default_static_order(net) : policy.order;
  for (VarId c : order) {
    if (loop.done()) return;
    const auto& role = net.role(c);
    if (role.leak) continue;
    RepairStep step{c, 0.0, 0.0, net.costs().repair.at(c)};
    if (role.observable) {
      step.observe_cost = net.costs().observe.at(c);
    } else {
      step.observe_cost = step.repair_cost;
      step.repair_cost = 0.0;
    }
    loop.repair_step(step);
  }
  if (loop.done()) return;
  if (net.costs().service_call) {
    loop.service();
    return;
  }
  throw Error(ErrorCode::model_exhausted, "static order finished with the device still failing");
}

void run_adaptive(const Network& net, Loop& loop, const Policy& policy) {
  RecommendOptions opts;
  opts.use_config = policy.kind == PolicyKind::with_config;
  opts.use_single_copy = policy.single_copy;
  opts.parallel = false;
  while (!loop.done()) {
    if (policy.kind == PolicyKind::pc_order) {
      FaultDistribution fd;
      try {
        fd = fault_probabilities(net, loop.info());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::inconsistent_model || !net.costs().service_call) throw;
        loop.service();
        continue;
      }
      const RepairPlan plan = ecr(net, fd);
      if (plan.steps.empty()) throw Error(ErrorCode::model_exhausted, "empty repair plan");
      loop.repair_step(plan.steps.front());
      continue;
    }
    const Recommendation rec = recommend_next(net, loop.info(), opts);
    const PlanEvaluation& w = rec.winner();
    switch (w.kind) {
      case PlanKind::repair_sequence:
        if (w.sequence.empty()) throw Error(ErrorCode::model_exhausted, "empty repair plan");
        loop.repair_step(w.sequence.front());
        break;
      case PlanKind::observation:
        loop.observe(w);
        break;
      case PlanKind::config_observation:
        loop.configure_observe(w);
        break;
      case PlanKind::service_call:
        loop.service();
        break;
    }
  }
}

void summarize(PolicyResult& r) {
  const double n = static_cast<double>(r.costs.size());
  double sum = 0.0;
  for (double c : r.costs) sum += c;
  r.mean = sum / n;
  double ss = 0.0;
  for (double c : r.costs) ss += (c - r.mean) * (c - r.mean);
  r.std_error = r.costs.size() > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
}

}  // namespace

TrialResult run_policy(const Network& net, const Scenario& scenario, const Policy& policy) {
  Loop loop(net, scenario);
  if (policy.kind == PolicyKind::static_order) run_static(net, loop, policy);
  else run_adaptive(net, loop, policy);
  return std::move(loop.result());
}

Comparison compare_policies(const Network& net, const std::vector<Policy>& policies,
                            const SimulationOptions& options) {
  if (options.trials == 0) throw Error(ErrorCode::invalid_argument, "trials must be at least 1");
  if (policies.empty()) throw Error(ErrorCode::invalid_argument, "no policies given");
  ScenarioOptions so;
  so.mode = options.mode;
  if (so.mode == ScenarioMode::single_fault)
    so.faults = fault_probabilities(net, initial_information(net));

  const std::size_t np = policies.size();
  const std::size_t nt = options.trials;
  std::vector<TrialResult> grid(np * nt);
  std::vector<char> multi(nt, 0);
  std::vector<std::exception_ptr> errors(nt);
  const auto components = net.components();

  const auto n = static_cast<std::ptrdiff_t>(nt);
#pragma omp parallel for schedule(dynamic) if (options.parallel)
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    try {
      const Scenario sc = sample_scenario(net, trial_seed(options.seed, ti), so);
      std::size_t abnormal = 0;
      for (VarId c : components)
        if (sc.truth[c] != net.variable(c).space.normal && !net.role(c).leak) ++abnormal;
      multi[ti] = abnormal > 1;
      for (std::size_t p = 0; p < np; ++p) grid[p * nt + ti] = run_policy(net, sc, policies[p]);
    } catch (...) {
      errors[ti] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  Comparison c;
  c.trials = nt;
  std::size_t multi_count = 0;
  for (char m : multi) multi_count += m ? 1 : 0;
  c.multi_fault_fraction = static_cast<double>(multi_count) / static_cast<double>(nt);
  for (std::size_t p = 0; p < np; ++p) {
    PolicyResult r;
    r.policy = policies[p].name;
    for (std::size_t t = 0; t < nt; ++t) {
      auto& cell = grid[p * nt + t];
      r.costs.push_back(cell.cost);
      if (options.keep_traces) r.traces.push_back(std::move(cell.trace));
    }
    summarize(r);
    c.results.push_back(std::move(r));
  }
  for (std::size_t a = 0; a < np; ++a)
    for (std::size_t b = a + 1; b < np; ++b) {
      PolicyResult d;
      for (std::size_t t = 0; t < nt; ++t)
        d.costs.push_back(c.results[a].costs[t] - c.results[b].costs[t]);
      summarize(d);
      c.differences.push_back({c.results[a].policy, c.results[b].policy, d.mean, d.std_error});
    }
  return c;
}

void write_results_csv(std::ostream& out, const Comparison& c) {
  std::ostringstream s;
  s.precision(10);
  s << "policy,trials,mean,stderr\n";
  for (const auto& r : c.results)
    s << r.policy << ',' << c.trials << ',' << r.mean << ',' << r.std_error << '\n';
  out << s.str();
}

void write_trace_csv(std::ostream& out, const Comparison& c) {
  std::ostringstream s;
  s.precision(10);
  s << "trial,policy,step,action,detail,cost\n";
  for (const auto& r : c.results)
    for (std::size_t t = 0; t < r.traces.size(); ++t)
      for (std::size_t k = 0; k < r.traces[t].size(); ++k) {
        const auto& step = r.traces[t][k];
        s << t << ',' << r.policy << ',' << k << ',' << step.action << ',' << step.detail << ','
          << step.cost << '\n';
      }
  out << s.str();
}

}  // namespace tshoot
