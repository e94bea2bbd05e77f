// Serial versus OpenMP timings for the two parallel kernels: candidate
// evaluation in recommend_next and trials in compare_policies.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <omp.h>

#include "tshoot/network_io.hpp"
#include "tshoot/planner.hpp"
#include "tshoot/simulator.hpp"

using namespace tshoot;

namespace {

template <typename F>
double seconds(F&& f, int repeat) {
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < repeat; ++i) f();
  const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
  return d.count() / repeat;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string path = argc > 1 ? argv[1] : TSHOOT_MODELS_DIR "/printer.net";
  const std::size_t trials = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 200;
  const Network net = prepare_network(load_network(path));
  const auto info = initial_information(net);
  std::printf("network %s, %d threads\n", path.c_str(), omp_get_max_threads());

  double costs[2] = {0, 0};
  for (bool parallel : {false, true}) {
    RecommendOptions opts;
    opts.parallel = parallel;
    const double t = seconds([&] { costs[parallel] = recommend_next(net, info, opts).winner().expected_cost; }, 5);
    std::printf("recommend_next   %-8s %10.4f s\n", parallel ? "parallel" : "serial", t);
  }
  if (costs[0] != costs[1]) {
    std::printf("mismatch: %.17g vs %.17g\n", costs[0], costs[1]);
    return 1;
  }

  const auto policies = parse_policies(net, "static,pc,obs,config");
  double means[2] = {0, 0};
  for (bool parallel : {false, true}) {
    SimulationOptions opts;
    opts.trials = trials;
    opts.parallel = parallel;
    const double t = seconds([&] { means[parallel] = compare_policies(net, policies, opts).results.back().mean; }, 1);
    std::printf("compare_policies %-8s %10.4f s  (%zu trials)\n", parallel ? "parallel" : "serial", t, trials);
  }
  if (means[0] != means[1]) {
    std::printf("mismatch: %.17g vs %.17g\n", means[0], means[1]);
    return 1;
  }
  return 0;
}
