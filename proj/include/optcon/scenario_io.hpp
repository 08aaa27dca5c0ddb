#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optcon/sim.hpp"

namespace optcon {

class ScenarioFileError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A scenario plus the metadata and output options carried by its JSON file.
struct ScenarioFile {
    std::string name;
    std::string description;
    Scenario scenario;
    std::string output_dir = "out";

    bool operator==(const ScenarioFile&) const = default;
};

namespace detail {

using nlohmann::json;

// Reads `key` from `obj`; failures name the JSON path.
template <class T>
T field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object() || !obj.contains(key)) throw ScenarioFileError(path + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ScenarioFileError(path + "/" + key + ": " + e.what());
    }
}

template <class T>
T field_or(const json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    return field<T>(obj, key, path);
}

inline json cost_to_json(const CostCatalogEntry& c) {
    json j{{"type", cost_name(c)}};
    if (const auto* q = std::get_if<Quadratic>(&c)) {
        j["c"] = q->c;
        j["center"] = q->center;
    }
    return j;
}

inline CostCatalogEntry cost_from_json(const json& j, const std::string& path) {
    const auto type = field<std::string>(j, "type", path);
    if (type == "quadratic") {
        Quadratic q{field<double>(j, "c", path), field<double>(j, "center", path)};
        if (!(q.c > 0.0)) throw ScenarioFileError(path + "/c: quadratic weight must be positive");
        return q;
    }
    if (type == "sqrt_ratio") return SqrtRatio{};
    if (type == "log_ratio") return LogRatio{};
    if (type == "soft_plus_pair") return SoftPlusPair{};
    throw ScenarioFileError(path + "/type: unknown cost family '" + type + "'");
}

inline json event_to_json(const Event& e) {
    json j{{"time", e.time}};
    std::visit(overloaded{
                   [&](const IsolateNode& a) {
                       j["action"] = "isolate_node";
                       j["node"] = a.node;
                   },
                   [&](const RestoreGraph&) { j["action"] = "restore_graph"; },
                   [&](const Disturbance& d) {
                       j["action"] = "disturbance";
                       j["amplitude"] = d.amplitude;
                       j["frequency"] = d.frequency;
                       j["t_on"] = d.t_on;
                       j["t_off"] = d.t_off;
                   },
               },
               e.action);
    return j;
}

inline Event event_from_json(const json& j, const std::string& path) {
    Event e;
    e.time = field<double>(j, "time", path);
    const auto action = field<std::string>(j, "action", path);
    if (action == "isolate_node") {
        e.action = IsolateNode{field<std::size_t>(j, "node", path)};
    } else if (action == "restore_graph") {
        e.action = RestoreGraph{};
    } else if (action == "disturbance") {
        e.action = Disturbance{field<double>(j, "amplitude", path), field<double>(j, "frequency", path),
                               field<double>(j, "t_on", path), field<double>(j, "t_off", path)};
    } else {
        throw ScenarioFileError(path + "/action: unknown event '" + action + "'");
    }
    return e;
}

inline NussbaumFn nussbaum_from_string(const std::string& s, const std::string& path) {
    if (s == "theta_sq_sin") return NussbaumFn::ThetaSqSin;
    if (s == "exp_sq_sin") return NussbaumFn::ExpSqSin;
    throw ScenarioFileError(path + ": unknown Nussbaum function '" + s + "'");
}

inline GeneratorMode mode_from_string(const std::string& s, const std::string& path) {
    if (s == "offline") return GeneratorMode::Offline;
    if (s == "online") return GeneratorMode::Online;
    throw ScenarioFileError(path + ": mode must be 'offline' or 'online', got '" + s + "'");
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioFile& f) {
    using nlohmann::json;
    const Scenario& s = f.scenario;
    json edges = json::array();
    for (const auto& e : s.graph.edges()) edges.push_back({{"from", e.from}, {"to", e.to}, {"weight", e.weight}});
    json agents = json::array();
    for (std::size_t i = 0; i < s.agents.size(); ++i)
        agents.push_back({{"order", s.agents[i].order}, {"b", s.agents[i].b}, {"k", s.k[i]}});
    json costs = json::array();
    for (const auto& c : s.costs) costs.push_back(detail::cost_to_json(c));
    json events = json::array();
    for (const auto& e : s.events) events.push_back(detail::event_to_json(e));

    json j;
    j["name"] = f.name;
    j["description"] = f.description;
    j["graph"] = {{"n", s.graph.size()}, {"edges", edges}};
    j["agents"] = agents;
    j["costs"] = costs;
    j["mode"] = to_string(s.mode);
    j["eps"] = s.eps;
    if (s.gains) {
        j["gains"] = {{"alpha", s.gains->alpha}, {"beta", s.gains->beta}};
    } else {
        j["gains"] = "auto";
    }
    j["nussbaum"] = to_string(s.nussbaum);
    j["t_end"] = s.t_end;
    j["h"] = s.h;
    j["init"] = {{"x", s.init.x}, {"r", s.init.r}, {"v", s.init.v}, {"theta", s.init.theta}};
    j["events"] = events;
    j["output"] = {{"record_every", s.record_every}, {"dir", f.output_dir}};
    return j;
}

inline std::string serialize_scenario(const ScenarioFile& f) { return to_json(f).dump(2) + "\n"; }

/// Builds a ScenarioFile from parsed JSON. Optional pieces: agents[i].k
/// (defaults to (lambda+1)^{n-1} coefficients), gains ("auto"), init.r/v/theta
/// (defaults r = y(0), v = 0, theta = 0), and init.y in place of init.x.
inline ScenarioFile scenario_from_json(const nlohmann::json& j) {
    using nlohmann::json;
    ScenarioFile f;
    Scenario& s = f.scenario;
    f.name = detail::field_or<std::string>(j, "name", "", "");
    f.description = detail::field_or<std::string>(j, "description", "", "");

    const auto g = detail::field<json>(j, "graph", "");
    const auto n = detail::field<std::size_t>(g, "n", "/graph");
    std::vector<Edge> edges;
    const auto jedges = detail::field<json>(g, "edges", "/graph");
    for (std::size_t e = 0; e < jedges.size(); ++e) {
        const std::string p = "/graph/edges/" + std::to_string(e);
        edges.push_back({detail::field<std::size_t>(jedges[e], "from", p), detail::field<std::size_t>(jedges[e], "to", p),
                         detail::field_or<double>(jedges[e], "weight", p, 1.0)});
    }
    try {
        s.graph = build_digraph(n, edges);
    } catch (const GraphError& e) {
        throw ScenarioFileError(std::string("/graph: ") + e.what());
    }

    const auto jagents = detail::field<json>(j, "agents", "");
    for (std::size_t i = 0; i < jagents.size(); ++i) {
        const std::string p = "/agents/" + std::to_string(i);
        AgentDynamics a{detail::field<std::size_t>(jagents[i], "order", p), detail::field<double>(jagents[i], "b", p)};
        if (a.order == 0) throw ScenarioFileError(p + "/order: must be at least 1");
        s.k.push_back(jagents[i].contains("k") ? detail::field<std::vector<double>>(jagents[i], "k", p)
                                               : default_hurwitz_coeffs(a.order));
        s.agents.push_back(a);
    }

    const auto jcosts = detail::field<json>(j, "costs", "");
    for (std::size_t i = 0; i < jcosts.size(); ++i)
        s.costs.push_back(detail::cost_from_json(jcosts[i], "/costs/" + std::to_string(i)));

    s.mode = detail::mode_from_string(detail::field<std::string>(j, "mode", ""), "/mode");
    s.eps = detail::field<double>(j, "eps", "");
    if (j.contains("gains") && j.at("gains").is_object()) {
        s.gains = GainSchedule{detail::field<double>(j["gains"], "alpha", "/gains"),
                               detail::field<double>(j["gains"], "beta", "/gains")};
    } else if (j.contains("gains") && j.at("gains") != "auto") {
        throw ScenarioFileError("/gains: expected {alpha, beta} or \"auto\"");
    }
    s.nussbaum = detail::nussbaum_from_string(detail::field<std::string>(j, "nussbaum", ""), "/nussbaum");
    s.t_end = detail::field<double>(j, "t_end", "");
    s.h = detail::field<double>(j, "h", "");

    const auto init = detail::field<json>(j, "init", "");
    if (init.contains("x")) {
        s.init.x = detail::field<std::vector<AgentState>>(init, "x", "/init");
    } else {
        const auto y0 = detail::field<std::vector<double>>(init, "y", "/init");
        if (y0.size() != s.agents.size()) throw ScenarioFileError("/init/y: one value per agent expected");
        s.init = default_initial_conditions(s.agents, y0);
    }
    if (s.init.x.size() != s.agents.size()) throw ScenarioFileError("/init/x: one state per agent expected");
    std::vector<double> y0;
    for (const auto& x : s.init.x) {
        if (x.empty()) throw ScenarioFileError("/init/x: empty agent state");
        y0.push_back(x.front());
    }
    s.init.r = detail::field_or<std::vector<double>>(init, "r", "/init", y0);
    s.init.v = detail::field_or<std::vector<double>>(init, "v", "/init", std::vector<double>(y0.size(), 0.0));
    s.init.theta =
        detail::field_or<std::vector<double>>(init, "theta", "/init", std::vector<double>(y0.size(), 0.0));

    if (j.contains("events")) {
        const auto& jev = j.at("events");
        for (std::size_t e = 0; e < jev.size(); ++e)
            s.events.push_back(detail::event_from_json(jev[e], "/events/" + std::to_string(e)));
    }
    if (j.contains("output")) {
        const auto& out = j.at("output");
        s.record_every = detail::field_or<std::size_t>(out, "record_every", "/output", 10);
        f.output_dir = detail::field_or<std::string>(out, "dir", "/output", "out");
    }

    try {
        validate_scenario(s);
    } catch (const ScenarioError& e) {
        throw ScenarioFileError(e.what());
    }
    return f;
}

inline ScenarioFile parse_scenario(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioFileError(std::string("JSON syntax: ") + e.what());
    }
    return scenario_from_json(j);
}

inline ScenarioFile load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ScenarioFileError("cannot read " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const ScenarioFileError& e) {
        throw ScenarioFileError(path + ": " + e.what());
    }
}

inline void save_scenario(const ScenarioFile& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ScenarioFileError("cannot open " + path + " for writing");
    os << serialize_scenario(f);
    if (!os) throw ScenarioFileError("write failed for " + path);
}

// ============================================================================
// Built-in scenarios
// ============================================================================

/// The 8-node weight-balanced, strongly connected ring-of-cycles used by both
/// built-in examples (unit weights).
inline Digraph example_graph() {
    return build_digraph(8, {{2, 1, 1.0},
                             {3, 2, 1.0},
                             {1, 3, 1.0},
                             {5, 3, 1.0},
                             {3, 4, 1.0},
                             {4, 5, 1.0},
                             {7, 5, 1.0},
                             {5, 6, 1.0},
                             {6, 7, 1.0},
                             {8, 7, 1.0},
                             {7, 8, 1.0},
                             {1, 8, 1.0},
                             {8, 1, 1.0}});
}

inline const std::vector<double>& example_initial_outputs() {
    static const std::vector<double> y0{-3.0, -2.0, 0.0, -1.0, 1.0, 4.0, 2.0, 5.0};
    return y0;
}

/// Average consensus of eight double integrators with mixed control
/// directions; node 8 is cut off on [15, 30).
inline ScenarioFile example1() {
    ScenarioFile f;
    f.name = "example1";
    f.description =
        "Average consensus of 8 double integrators (b = -1,-1,-1,-1,1,1,1,1) with f_i = (y - y_i(0))^2; "
        "node 8 isolated at t=15 s and reconnected at t=30 s.";
    f.output_dir = "out/example1";
    Scenario& s = f.scenario;
    s.graph = example_graph();
    const auto& y0 = example_initial_outputs();
    for (std::size_t i = 0; i < 8; ++i) {
        s.agents.push_back({2, i < 4 ? -1.0 : 1.0});
        s.k.push_back({1.0});
        s.costs.push_back(Quadratic{1.0, y0[i]});
    }
    s.mode = GeneratorMode::Offline;
    s.eps = 1.0;
    s.gains = GainSchedule{5.0, 20.0};
    s.nussbaum = NussbaumFn::ThetaSqSin;
    s.t_end = 45.0;
    s.h = 1e-3;
    s.record_every = 10;
    s.init = default_initial_conditions(s.agents, y0);
    s.events = {{15.0, IsolateNode{8}}, {30.0, RestoreGraph{}}};
    return f;
}

/// Optimal consensus of heterogeneous chains (orders 1..4, b_i = -1) with
/// real-time gradients and an actuated disturbance 10 sin(t) on [15, 30).
inline ScenarioFile example2() {
    ScenarioFile f;
    f.name = "example2";
    f.description =
        "Optimal consensus of chains of orders 1,2,3,4,1,2,3,4 (b_i = -1) with the four non-quadratic cost "
        "families, real-time gradients, and an actuated disturbance 10 sin(t) for 15 <= t < 30.";
    f.output_dir = "out/example2";
    Scenario& s = f.scenario;
    s.graph = example_graph();
    const std::vector<std::size_t> orders{1, 2, 3, 4, 1, 2, 3, 4};
    const std::vector<std::vector<double>> ks{{}, {1.0}, {1.0, 2.0}, {1.0, 3.0, 3.0}};
    const std::vector<CostCatalogEntry> families{Quadratic{1.0, 8.0}, SqrtRatio{}, LogRatio{}, SoftPlusPair{}};
    for (std::size_t i = 0; i < 8; ++i) {
        s.agents.push_back({orders[i], -1.0});
        s.k.push_back(ks[i % 4]);
        s.costs.push_back(families[i % 4]);
    }
    s.mode = GeneratorMode::Online;
    s.eps = 0.5;
    s.gains = GainSchedule{2.0, 5.0};
    s.nussbaum = NussbaumFn::ExpSqSin;
    s.t_end = 45.0;
    s.h = 1e-3;
    s.record_every = 10;
    s.init = default_initial_conditions(s.agents, example_initial_outputs());
    s.events = {{15.0, Disturbance{10.0, 1.0, 15.0, 30.0}}};
    return f;
}

inline ScenarioFile builtin_example(int which) {
    switch (which) {
        case 1: return example1();
        case 2: return example2();
        default: throw ScenarioFileError("unknown built-in example " + std::to_string(which) + " (expected 1 or 2)");
    }
}

}  // namespace optcon
