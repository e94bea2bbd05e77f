#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "tshoot/cli.hpp"
#include "tshoot/network_io.hpp"
#include "tshoot/session.hpp"

using namespace tshoot;

namespace {

const std::string models = TSHOOT_MODELS_DIR;
const std::string fixtures = TSHOOT_FIXTURES_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream s(text);
  for (std::string l; std::getline(s, l);) out.push_back(l);
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / (random_session_id() + "-" + name);
}

}  // namespace

TEST_CASE("validate exit codes") {
  auto ok = run({"validate", models + "/printer.net"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.rfind("valid", 0) == 0);

  std::string doc = slurp(models + "/icon.net");
  auto j = Json::parse(doc);
  j["cpts"][1]["table"][0] = {0.5, 0.4};
  const auto broken = temp_path("broken.net");
  std::ofstream(broken) << j.dump();
  auto bad = run({"validate", broken.string()});
  std::filesystem::remove(broken);
  CHECK(bad.code == kExitDomain);
  CHECK(bad.out.find("Icon\tnormalization") != std::string::npos);

  CHECK(run({"validate", models + "/missing.net"}).code == kExitUsage);
  CHECK(run({"validate"}).code == kExitUsage);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
}

TEST_CASE("recommend") {
  auto d1 = run({"recommend", models + "/d1.net"});
  REQUIRE(d1.code == kExitOk);
  const auto l = lines(d1.out);
  REQUIRE(l.size() >= 3);
  CHECK(l[0] == "# candidates");
  CHECK(l[1] == "1\tobservation\t2.78571\tO");
  CHECK(l[2] == "2\trepair\t3.33333\tA,B");

  auto single = run({"recommend", models + "/single.net"});
  CHECK(lines(single.out)[1] == "1\trepair\t5\tFuse");

  auto with = run({"recommend", models + "/config.net"});
  auto without = run({"recommend", models + "/config.net", "--no-config"});
  CHECK(with.out.find("config_observation") != std::string::npos);
  CHECK(without.out.find("config_observation") == std::string::npos);
  auto approx = run({"recommend", models + "/config.net", "--single-copy"});
  CHECK(approx.out.find("approximate") != std::string::npos);

  auto ev = run({"recommend", models + "/d1.net", "--evidence", "O=abnormal"});
  CHECK(lines(ev.out)[1] == "1\trepair\t2\tA");
  CHECK(lines(ev.out)[3] == "A\t1\tknown_abnormal");

  auto js = run({"recommend", models + "/d1.net", "--json"});
  const auto parsed = Json::parse(js.out);
  CHECK(parsed["ranked"][0]["kind"] == "observation");
  CHECK(parsed["ranked"][0]["expected_cost"].get<double>() == doctest::Approx(0.5 + 16.0 / 7.0));

  CHECK(run({"recommend", models + "/d1.net", "--evidence", "O"}).code == kExitDomain);
  CHECK(run({"recommend", models + "/d1.net", "--evidence", "Q=1"}).code == kExitDomain);
  CHECK(run({"recommend", models + "/d1.net", "--evidence", "O=abnormal", "--evidence",
             "A=normal"})
            .code == kExitDomain);
}

TEST_CASE("troubleshoot transcript") {
  const std::string script =
      "observe O abnormal\nobserve A normal\nhelp\nrepair A\ncheck normal\n";
  auto r = run({"troubleshoot", models + "/d1.net"}, script);
  CHECK(r.code == kExitOk);
  CHECK(r.out == slurp(fixtures + "/d1_troubleshoot.txt"));
  // The contradictory answer is reported and the loop carries on.
  CHECK(r.err == "error: the model gives this outcome probability zero given the earlier evidence\n");
}

TEST_CASE("troubleshoot quit writes a replayable log") {
  const auto log = temp_path("session.jsonl");
  auto r = run({"troubleshoot", models + "/printer.net", "--log", log.string()},
               "set PrintPath local\ncheck abnormal\nreset PrintPath network\n"
               "o PrinterDisplay ready\nbogus\nquit\n");
  CHECK(r.code == kExitOk);
  CHECK(r.err == "error: unknown command 'bogus'; try help\n");
  std::ifstream in(log);
  REQUIRE(in);
  ModelLibrary lib(models);
  auto replayed = replay_log(in, lib);
  CHECK(replayed.session->sequence() == 4);
  CHECK(replayed.session->recommendation_json().dump() == replayed.recorded.dump());
  in.close();
  std::filesystem::remove(log);
}

TEST_CASE("troubleshoot ends at end of input") {
  auto r = run({"troubleshoot", models + "/single.net"}, "show\n");
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("1\trepair\t5\tFuse") != std::string::npos);
}

TEST_CASE("simulate is deterministic") {
  const std::vector<std::string> args{"simulate", models + "/d1.net", "--policies",
                                      "pc,pc_order,static", "--trials", "300", "--seed", "9"};
  auto a = run(args);
  auto b = run(args);
  REQUIRE(a.code == kExitOk);
  CHECK(a.out == b.out);
  auto serial = args;
  serial.push_back("--serial");
  CHECK(run(serial).out == a.out);
  CHECK(a.out.find("pc_order,pc_order,0,0\n") != std::string::npos);
  CHECK(lines(a.out)[0] == "policy,trials,mean,stderr");

  const auto trace = temp_path("trace.csv");
  auto t = run({"simulate", models + "/d1.net", "--policies", "pc", "--trials", "5", "--trace",
                trace.string(), "--json"});
  CHECK(t.code == kExitOk);
  CHECK(Json::parse(t.out)["trials"] == 5);
  CHECK(lines(slurp(trace.string()))[0] == "trial,policy,step,action,detail,cost");
  std::filesystem::remove(trace);

  CHECK(run({"simulate", models + "/d1.net", "--policies", "nonsense"}).code == kExitDomain);
  CHECK(run({"simulate", models + "/d1.net", "--mode", "other"}).code == kExitUsage);
}

TEST_CASE("persist prints a network document") {
  auto r = run({"persist", models + "/icon.net", "--repair", "Net"});
  REQUIRE(r.code == kExitOk);
  const Network pnet = parse_network(r.out);
  CHECK(pnet.find("Net@pre").has_value());
  CHECK(pnet.find("Icon@post").has_value());
  CHECK(pnet.find("m@Icon").has_value());
  CHECK(validate(pnet).empty());

  auto cfg = run({"persist", models + "/config.net", "--set", "Config=2"});
  REQUIRE(cfg.code == kExitOk);
  CHECK(parse_network(cfg.out).find("PD@post").has_value());
  CHECK(run({"persist", models + "/icon.net", "--repair", "Icon"}).code == kExitDomain);
}

TEST_CASE("serve rejects a bad bind address") {
  auto r = run({"serve", "--bind", "999.0.0.1", "--port", "8080"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("cannot bind") != std::string::npos);
}
