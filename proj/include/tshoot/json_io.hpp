#pragma once

#include "json.hpp"
#include "tshoot/information.hpp"
#include "tshoot/planner.hpp"
#include "tshoot/simulator.hpp"

namespace tshoot {

using Json = nlohmann::json;

// Wire shapes shared by the HTTP service and `--json` CLI output. Doubles
// are written with round-trip precision.
Json fault_json(const Network& net, const FaultDistribution& fd);
Json step_json(const Network& net, const RepairStep& step);
Json plan_json(const Network& net, const PlanEvaluation& plan);
Json recommendation_json(const Network& net, const Recommendation& rec);
Json information_json(const Network& net, const InformationState& info);
Json comparison_json(const Comparison& c);
Json violations_json(const std::vector<Violation>& vs);

}  // namespace tshoot
