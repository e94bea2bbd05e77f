#include "tshoot/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tshoot/inference.hpp"
#include "tshoot/network_io.hpp"
#include "tshoot/persistence.hpp"
#include "tshoot/server.hpp"
#include "tshoot/session.hpp"
#include "tshoot/simulator.hpp"

namespace tshoot {

namespace {

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::io_error: return kExitUsage;
    default: return kExitDomain;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::pair<std::string, std::string> split_assignment(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw Error(ErrorCode::invalid_argument, "expected node=state, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

void print_report(std::ostream& out, const Network& net, const Recommendation& rec) {
  out << "# candidates\n";
  for (std::size_t i = 0; i < rec.ranked.size(); ++i) {
    const auto& p = rec.ranked[i];
    out << i + 1 << '\t' << to_string(p.kind) << '\t' << p.expected_cost << '\t'
        << detail_key(net, p) << (p.approximate ? "\tapproximate" : "") << '\n';
  }
  out << "# faults\n";
  if (!rec.faults) return;
  for (std::size_t i = 0; i < rec.faults->components.size(); ++i) {
    const VarId c = rec.faults->components[i];
    out << net.id(c) << '\t' << rec.faults->p[i]
        << (rec.faults->known_abnormal.count(c) ? "\tknown_abnormal" : "") << '\n';
  }
}

std::string describe(const Network& net, const PlanEvaluation& p) {
  std::ostringstream s;
  s.precision(6);
  switch (p.kind) {
    case PlanKind::repair_sequence: {
      const auto& first = p.sequence.front();
      if (!first.component) {
        s << "call service";
      } else {
        const bool observe = first.observe_cost > 0 && first.repair_cost > 0;
        s << (observe ? "check and repair " : "repair ") << net.id(*first.component);
      }
      break;
    }
    case PlanKind::observation:
      s << "observe " << net.id(p.observation);
      break;
    case PlanKind::config_observation:
      s << "set " << net.id(p.config) << " to "
        << net.variable(p.config).space.states[p.config_state] << ", observe "
        << net.id(p.observation) << ", then reset";
      break;
    case PlanKind::service_call:
      s << "call service";
      break;
  }
  s << " (expected cost " << p.expected_cost << ")";
  return s.str();
}

// Raw document and planning network for a model file.
struct LoadedModel {
  Json document;
  std::shared_ptr<const Network> net;
};

LoadedModel load_model(const std::string& path) {
  LoadedModel m;
  const std::string text = read_file(path);
  try {
    m.document = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::parse_error, e.what());
  }
  m.net = planning_network(parse_network(text));
  return m;
}

void print_violations(std::ostream& out, const std::vector<Violation>& vs) {
  for (const auto& v : vs) out << v.node << '\t' << v.rule << '\t' << v.message << '\n';
}

// --- commands ---

int cmd_validate(const std::string& path, std::ostream& out) {
  const Network net = parse_network(read_file(path));
  const auto vs = validate(net);
  print_violations(out, vs);
  if (!vs.empty()) return kExitDomain;
  out << "valid\t" << net.size() << " variables\n";
  return kExitOk;
}

struct RecommendArgs {
  std::string path;
  std::vector<std::string> evidence;
  bool no_config = false;
  bool single_copy = false;
  bool json = false;
};

int cmd_recommend(const RecommendArgs& a, std::ostream& out) {
  const auto model = load_model(a.path);
  const Network& net = *model.net;
  InformationState info = initial_information(net);
  for (const auto& text : a.evidence) {
    const auto [node, state] = split_assignment(text);
    const VarId v = net.index(node);
    record_observation(info, net, v, net.state_index(v, state));
  }
  if (!(probability_of_evidence(net, info.evidence) > kImpossibleEvidence))
    throw Error(ErrorCode::contradiction, "the evidence has probability zero under the model");
  RecommendOptions opts;
  opts.use_config = !a.no_config;
  opts.use_single_copy = a.single_copy;
  const auto rec = recommend_next(net, info, opts);
  if (a.json) {
    out << recommendation_json(net, rec).dump(2) << '\n';
  } else {
    print_report(out, net, rec);
  }
  return kExitOk;
}

const char* kTroubleshootHelp =
    "commands:\n"
    "  observe NODE STATE   (o)  record an observation\n"
    "  repair COMPONENT     (r)  record a repair\n"
    "  set CONFIG STATE          change a configuration and start an experiment\n"
    "  reset CONFIG STATE        put the configuration back\n"
    "  check normal|abnormal     record whether the device works\n"
    "  show                      print the full ranking\n"
    "  help\n"
    "  quit\n";

struct TroubleshootArgs {
  std::string path;
  bool no_config = false;
  bool single_copy = false;
  std::string log;
};

SessionEvent parse_command(const std::vector<std::string>& words) {
  auto need = [&](std::size_t n) {
    if (words.size() != n)
      throw Error(ErrorCode::invalid_argument,
                  "'" + words[0] + "' takes " + std::to_string(n - 1) + " argument(s)");
  };
  const std::string& cmd = words[0];
  SessionEvent e;
  if (cmd == "observe" || cmd == "o") {
    need(3);
    e.kind = EventKind::observed;
    e.node = words[1];
    e.state = words[2];
  } else if (cmd == "repair" || cmd == "r") {
    need(2);
    e.kind = EventKind::repaired;
    e.node = words[1];
  } else if (cmd == "set" || cmd == "reset") {
    need(3);
    e.kind = EventKind::configured;
    e.node = words[1];
    e.state = words[2];
    e.reset = cmd == "reset";
  } else if (cmd == "check") {
    need(2);
    if (words[1] != "normal" && words[1] != "abnormal")
      throw Error(ErrorCode::invalid_argument, "check takes 'normal' or 'abnormal'");
    e.kind = EventKind::device_check;
    e.normal = words[1] == "normal";
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown command '" + cmd + "'; try help");
  }
  return e;
}

int cmd_troubleshoot(const TroubleshootArgs& a, std::istream& in, std::ostream& out,
                     std::ostream& err) {
  const auto model = load_model(a.path);
  SessionOptions opts;
  opts.use_config = !a.no_config;
  opts.single_copy = a.single_copy;
  Session session(random_session_id(), model.net, opts);
  const Network& net = session.network();

  std::ofstream log;
  if (!a.log.empty()) {
    log.open(a.log);
    if (!log) throw Error(ErrorCode::io_error, "cannot write '" + a.log + "'");
    write_log_header(log, session, {"", model.document}, utc_timestamp());
    log.flush();
  }

  auto prompt = [&] {
    switch (session.status()) {
      case SessionStatus::resolved:
        break;
      case SessionStatus::exhausted:
        out << "no modeled cause is left; call service or check the device\n";
        break;
      case SessionStatus::active:
        if (auto exp = session.open_experiment()) {
          const auto& cfg = net.variable(exp->first);
          const auto back = current_setting(session.information(), exp->first);
          out << "experiment: " << cfg.id << " = " << cfg.space.states[exp->second]
              << "; record what you see, then reset " << cfg.id << " to "
              << cfg.space.states[*back] << '\n';
          break;
        }
        out << "next: " << describe(net, session.recommendation()->winner()) << '\n';
        break;
    }
    out << "> " << std::flush;
  };

  out.precision(6);
  prompt();
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ws(line);
    std::vector<std::string> words{std::istream_iterator<std::string>(ws), {}};
    if (words.empty()) {
      prompt();
      continue;
    }
    if (words[0] == "quit" || words[0] == "q") break;
    if (words[0] == "help") {
      out << kTroubleshootHelp;
    } else if (words[0] == "show") {
      if (session.recommendation()) print_report(out, net, *session.recommendation());
    } else {
      try {
        const auto& e = session.apply(parse_command(words));
        if (log.is_open()) {
          write_log_event(log, e);
          log.flush();
        }
      } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
      }
      if (session.status() == SessionStatus::resolved) {
        out << "resolved after " << session.sequence() << " events\n";
        return kExitOk;
      }
    }
    prompt();
  }
  out << '\n';
  return kExitOk;
}

struct SimulateArgs {
  std::string path;
  std::string policies = "static,pc,obs,config";
  std::size_t trials = 1000;
  std::uint64_t seed = 1;
  std::string mode = "prior";
  std::string trace;
  bool serial = false;
  bool json = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const auto model = load_model(a.path);
  const Network& net = *model.net;
  SimulationOptions opts;
  opts.trials = a.trials;
  opts.seed = a.seed;
  opts.mode = a.mode == "single_fault" ? ScenarioMode::single_fault : ScenarioMode::prior;
  opts.parallel = !a.serial;
  opts.keep_traces = !a.trace.empty();
  const auto c = compare_policies(net, parse_policies(net, a.policies), opts);
  if (!a.trace.empty()) {
    std::ofstream t(a.trace);
    if (!t) throw Error(ErrorCode::io_error, "cannot write '" + a.trace + "'");
    write_trace_csv(t, c);
  }
  if (a.json) {
    out << comparison_json(c).dump(2) << '\n';
    return kExitOk;
  }
  write_results_csv(out, c);
  out << "# differences\nfirst,second,mean,stderr\n";
  out.precision(6);
  for (const auto& d : c.differences)
    out << d.first << ',' << d.second << ',' << d.mean << ',' << d.std_error << '\n';
  out << "# multi_fault_fraction," << c.multi_fault_fraction << '\n';
  return kExitOk;
}

struct ServeArgs {
  std::string bind = "127.0.0.1";
  int port = 8080;
  std::string models = TSHOOT_DEFAULT_MODELS;
  std::string logs;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  ModelLibrary models(a.models);
  std::optional<std::filesystem::path> logs;
  if (!a.logs.empty()) {
    std::filesystem::create_directories(a.logs);
    logs = a.logs;
  }
  SessionStore store(models, logs);
  if (logs) out << "replayed " << store.load_logs() << " sessions\n";
  HttpServer server(store);
  const int port = server.bind(a.bind, a.port);
  out << "listening on http://" << a.bind << ':' << port << std::endl;
  server.listen();
  return kExitOk;
}

struct PersistArgs {
  std::string path;
  std::string repair;
  std::string set;
  bool keep_copies = false;
};

int cmd_persist(const PersistArgs& a, std::ostream& out) {
  const auto model = load_model(a.path);
  const Network& net = *model.net;
  BuildOptions opts;
  opts.share_unchanged = !a.keep_copies;
  PersistenceNetwork pnet;
  if (!a.repair.empty()) {
    const VarId c = net.index(a.repair);
    if (net.role(c).kind != RoleKind::component)
      throw Error(ErrorCode::invalid_argument, "'" + a.repair + "' is not a component");
    pnet = build_persistence_network(net, ActionSpec::repair(net, c), opts);
  } else if (!a.set.empty()) {
    const auto [node, state] = split_assignment(a.set);
    const VarId c = net.index(node);
    pnet = build_config_persistence_network(net, c, net.state_index(c, state), opts);
  } else {
    pnet = build_persistence_network(net, ActionSpec::none(), opts);
  }
  out << write_network(pnet.network) << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Decision-theoretic troubleshooting"};
  app.require_subcommand(1);

  auto* validate_cmd = app.add_subcommand("validate", "Check a network document");
  std::string validate_path;
  validate_cmd->add_option("network", validate_path)->required();

  RecommendArgs rec;
  auto* rec_cmd = app.add_subcommand("recommend", "Rank the next troubleshooting actions");
  rec_cmd->add_option("network", rec.path)->required();
  rec_cmd->add_option("--evidence", rec.evidence, "Observed node=state")->take_all();
  rec_cmd->add_flag("--no-config", rec.no_config, "Skip configuration experiments");
  rec_cmd->add_flag("--single-copy", rec.single_copy, "Approximate configuration experiments");
  rec_cmd->add_flag("--json", rec.json);

  TroubleshootArgs ts;
  auto* ts_cmd = app.add_subcommand("troubleshoot", "Interactive troubleshooting loop");
  ts_cmd->add_option("network", ts.path)->required();
  ts_cmd->add_flag("--no-config", ts.no_config);
  ts_cmd->add_flag("--single-copy", ts.single_copy);
  ts_cmd->add_option("--log", ts.log, "Write a session log here");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Compare policies by Monte Carlo");
  sim_cmd->add_option("network", sim.path)->required();
  sim_cmd->add_option("--policies", sim.policies, "e.g. static,pc,obs,config");
  sim_cmd->add_option("--trials", sim.trials)->check(CLI::PositiveNumber);
  sim_cmd->add_option("--seed", sim.seed);
  sim_cmd->add_option("--mode", sim.mode)->check(CLI::IsMember({"prior", "single_fault"}));
  sim_cmd->add_option("--trace", sim.trace, "Write per-step traces as CSV");
  sim_cmd->add_flag("--serial", sim.serial);
  sim_cmd->add_flag("--json", sim.json);

  ServeArgs srv;
  auto* srv_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  srv_cmd->add_option("--bind", srv.bind);
  srv_cmd->add_option("--port", srv.port)->check(CLI::Range(0, 65535));
  srv_cmd->add_option("--models", srv.models, "Directory of bundled networks");
  srv_cmd->add_option("--logs", srv.logs, "Directory for session logs");

  PersistArgs per;
  auto* per_cmd = app.add_subcommand("persist", "Print a persistence network");
  per_cmd->add_option("network", per.path)->required();
  auto* repair_opt = per_cmd->add_option("--repair", per.repair, "Component to repair");
  per_cmd->add_option("--set", per.set, "Configuration change config=state")
      ->excludes(repair_opt);
  per_cmd->add_flag("--keep-copies", per.keep_copies, "Do not share unchanged nodes");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*validate_cmd) return cmd_validate(validate_path, out);
    if (*rec_cmd) return cmd_recommend(rec, out);
    if (*ts_cmd) return cmd_troubleshoot(ts, in, out, err);
    if (*sim_cmd) return cmd_simulate(sim, out);
    if (*srv_cmd) return cmd_serve(srv, out);
    if (*per_cmd) return cmd_persist(per, out);
  } catch (const InvalidModel& e) {
    err << "error: " << e.what() << '\n';
    print_violations(err, e.violations());
    return kExitDomain;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace tshoot
