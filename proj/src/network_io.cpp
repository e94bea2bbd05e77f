#include "tshoot/network_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace tshoot {

using json = nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::parse_error, where + ": " + what);
}

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(where, std::string("missing '") + key + "'");
  return *it;
}

std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) schema_error(where, "expected a string");
  return j.get<std::string>();
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) schema_error(where, "expected a number");
  return j.get<double>();
}

VarId resolve(const Network& net, const json& j, const std::string& where) {
  const auto id = as_string(j, where);
  if (auto v = net.find(id)) return *v;
  throw Error(ErrorCode::unknown_variable, where + ": unknown variable '" + id + "'");
}

std::vector<double> flat_table(const json& rows, const std::string& where) {
  if (!rows.is_array()) schema_error(where, "expected a list of rows");
  std::vector<double> out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto at = where + "[" + std::to_string(r) + "]";
    if (!rows[r].is_array()) schema_error(at, "expected a row of probabilities");
    for (std::size_t k = 0; k < rows[r].size(); ++k)
      out.push_back(as_number(rows[r][k], at + "[" + std::to_string(k) + "]"));
  }
  return out;
}

json rows_of(const std::vector<double>& table, std::size_t width) {
  json rows = json::array();
  for (std::size_t i = 0; i < table.size(); i += width)
    rows.push_back(std::vector<double>(table.begin() + i, table.begin() + i + width));
  return rows;
}

void read_costs(Network& net, const json& j, const char* key,
                std::map<VarId, double>& into) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const std::string where = std::string("costs.") + key;
  if (!it->is_object()) schema_error(where, "expected an object");
  for (const auto& [id, value] : it->items()) {
    const VarId v = resolve(net, id, where);
    into[v] = as_number(value, where + "." + id);
  }
}

}  // namespace

Network parse_network(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document.begin(), document.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::parse_error,
                "syntax error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  const auto format = as_string(member(doc, "format", "document"), "format");
  if (format != kNetworkFormat)
    schema_error("format", "unsupported format '" + format + "'");

  Network net(doc.value("name", std::string{}));
  const auto& vars = member(doc, "variables", "document");
  if (!vars.is_array()) schema_error("variables", "expected a list");

  // Owners may reference later variables; resolve them in a second pass.
  std::vector<std::pair<VarId, std::string>> owners;
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto where = "variables[" + std::to_string(i) + "]";
    const auto& v = vars[i];
    StateSpace space;
    const auto& states = member(v, "states", where);
    if (!states.is_array()) schema_error(where + ".states", "expected a list");
    for (const auto& s : states) space.states.push_back(as_string(s, where + ".states"));
    if (auto it = v.find("normal"); it != v.end()) {
      const auto name = as_string(*it, where + ".normal");
      space.normal = space.find(name);
      if (!space.normal) schema_error(where + ".normal", "no state named '" + name + "'");
    }
    NodeRole role;
    if (auto it = v.find("role"); it != v.end()) {
      const auto name = as_string(*it, where + ".role");
      auto kind = role_from_string(name);
      if (!kind) schema_error(where + ".role", "unknown role '" + name + "'");
      role.kind = *kind;
    }
    role.observable = v.value("observable", true);
    role.leak = v.value("leak", false);
    if (auto it = v.find("initial"); it != v.end()) {
      const auto name = as_string(*it, where + ".initial");
      role.initial = space.find(name);
      if (!role.initial) schema_error(where + ".initial", "no state named '" + name + "'");
    }
    const auto id = as_string(member(v, "id", where), where + ".id");
    if (net.find(id)) schema_error(where + ".id", "duplicate id '" + id + "'");
    const VarId var = net.add_variable(id, std::move(space), role);
    if (auto it = v.find("owner"); it != v.end())
      owners.emplace_back(var, as_string(*it, where + ".owner"));
  }
  for (const auto& [v, owner] : owners) {
    auto role = net.role(v);
    role.owner = resolve(net, owner, net.id(v) + ".owner");
    net.set_role(v, role);
  }

  if (auto it = doc.find("cpts"); it != doc.end()) {
    if (!it->is_array()) schema_error("cpts", "expected a list");
    std::set<VarId> seen;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto where = "cpts[" + std::to_string(i) + "]";
      const auto& c = (*it)[i];
      Cpt cpt;
      cpt.child = resolve(net, member(c, "child", where), where + ".child");
      if (!seen.insert(cpt.child).second)
        schema_error(where, "second cpt for '" + net.id(cpt.child) + "'");
      if (auto p = c.find("parents"); p != c.end()) {
        if (!p->is_array()) schema_error(where + ".parents", "expected a list");
        for (const auto& pid : *p) cpt.parents.push_back(resolve(net, pid, where + ".parents"));
      }
      cpt.table = flat_table(member(c, "table", where), where + ".table");
      net.set_cpt(std::move(cpt));
    }
  }

  if (auto it = doc.find("combinations"); it != doc.end()) {
    if (!it->is_array()) schema_error("combinations", "expected a list");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const auto where = "combinations[" + std::to_string(i) + "]";
      const auto& c = (*it)[i];
      Combination comb;
      comb.effect = resolve(net, member(c, "effect", where), where + ".effect");
      const auto fname = as_string(member(c, "function", where), where + ".function");
      auto f = combination_from_string(fname);
      if (!f) schema_error(where + ".function", "unknown combination function '" + fname + "'");
      comb.function = *f;
      const auto& causes = member(c, "causes", where);
      if (!causes.is_array()) schema_error(where + ".causes", "expected a list");
      for (std::size_t k = 0; k < causes.size(); ++k) {
        const auto cw = where + ".causes[" + std::to_string(k) + "]";
        CauseInteraction ci;
        ci.cause = resolve(net, member(causes[k], "cause", cw), cw + ".cause");
        ci.table = flat_table(member(causes[k], "interaction", cw), cw + ".interaction");
        comb.causes.push_back(std::move(ci));
      }
      if (net.has_cpt(comb.effect))
        schema_error(where, "effect '" + net.id(comb.effect) +
                                "' has both a cpt and a combination");
      net.set_cpt(combined_cpt(net, comb));
      net.add_combination(std::move(comb));
    }
  }

  if (auto it = doc.find("costs"); it != doc.end()) {
    auto& costs = net.costs();
    read_costs(net, *it, "observe", costs.observe);
    read_costs(net, *it, "repair", costs.repair);
    read_costs(net, *it, "configure", costs.configure);
    if (auto s = it->find("service_call"); s != it->end())
      costs.service_call = as_number(*s, "costs.service_call");
  }
  return net;
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_network(buf.str());
}

std::string write_network(const Network& net, int indent) {
  json doc;
  doc["format"] = kNetworkFormat;
  doc["name"] = net.name();
  json vars = json::array();
  for (const auto& var : net.variables()) {
    json v;
    v["id"] = var.id;
    v["states"] = var.space.states;
    if (var.space.normal) v["normal"] = var.space.states[*var.space.normal];
    v["role"] = to_string(var.role.kind);
    if (var.role.kind == RoleKind::component) {
      if (!var.role.observable) v["observable"] = false;
      if (var.role.leak) v["leak"] = true;
    }
    if (var.role.owner) v["owner"] = net.id(*var.role.owner);
    if (var.role.initial) v["initial"] = var.space.states[*var.role.initial];
    vars.push_back(std::move(v));
  }
  doc["variables"] = std::move(vars);

  std::set<VarId> combined;
  for (const auto& c : net.combinations()) combined.insert(c.effect);
  json cpts = json::array();
  for (VarId v = 0; v < net.size(); ++v) {
    if (!net.has_cpt(v) || combined.contains(v)) continue;
    const auto& cpt = net.cpt(v);
    json c;
    c["child"] = net.id(v);
    json parents = json::array();
    for (VarId p : cpt.parents) parents.push_back(net.id(p));
    c["parents"] = std::move(parents);
    c["table"] = rows_of(cpt.table, net.cardinality(v));
    cpts.push_back(std::move(c));
  }
  doc["cpts"] = std::move(cpts);

  if (!net.combinations().empty()) {
    json combs = json::array();
    for (const auto& comb : net.combinations()) {
      json c;
      c["effect"] = net.id(comb.effect);
      c["function"] = to_string(comb.function);
      json causes = json::array();
      for (const auto& cause : comb.causes)
        causes.push_back({{"cause", net.id(cause.cause)},
                          {"interaction", rows_of(cause.table, net.cardinality(comb.effect))}});
      c["causes"] = std::move(causes);
      combs.push_back(std::move(c));
    }
    doc["combinations"] = std::move(combs);
  }

  json costs = json::object();
  auto put = [&](const char* key, const std::map<VarId, double>& m) {
    if (m.empty()) return;
    json o = json::object();
    for (const auto& [v, c] : m) o[net.id(v)] = c;
    costs[key] = std::move(o);
  };
  put("observe", net.costs().observe);
  put("repair", net.costs().repair);
  put("configure", net.costs().configure);
  if (net.costs().service_call) costs["service_call"] = *net.costs().service_call;
  doc["costs"] = std::move(costs);
  return doc.dump(indent);
}

}  // namespace tshoot
