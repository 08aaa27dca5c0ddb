#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "optcon/controller.hpp"
#include "optcon/costs.hpp"
#include "optcon/graph.hpp"
#include "optcon/plant.hpp"

namespace optcon {

class ScenarioError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class GeneratorMode {
    Offline,  // gradients evaluated at the generator state r_i
    Online,   // gradients evaluated at the measured output y_i
};

inline const char* to_string(GeneratorMode m) { return m == GeneratorMode::Offline ? "offline" : "online"; }

// ----------------------------------------------------------------------------
// Events
// ----------------------------------------------------------------------------

/// Cut every link touching `node` (1-based).
struct IsolateNode {
    std::size_t node = 1;
    bool operator==(const IsolateNode&) const = default;
};

/// Reinstate the scenario's original weights.
struct RestoreGraph {
    bool operator==(const RestoreGraph&) const = default;
};

/// amplitude * sin(frequency * t) added to every u_i ahead of the plant gain
/// while t_on <= t < t_off.
struct Disturbance {
    double amplitude = 0.0;
    double frequency = 1.0;
    double t_on = 0.0;
    double t_off = 0.0;
    bool operator==(const Disturbance&) const = default;
};

using EventAction = std::variant<IsolateNode, RestoreGraph, Disturbance>;

struct Event {
    double time = 0.0;
    EventAction action;
    bool operator==(const Event&) const = default;
};

struct InitialConditions {
    std::vector<AgentState> x;
    std::vector<double> r;
    std::vector<double> v;
    std::vector<double> theta;
    bool operator==(const InitialConditions&) const = default;
};

/// Default initialization: r(0) = y(0), v(0) = 0, theta(0) = 0, derivatives 0.
inline InitialConditions default_initial_conditions(const std::vector<AgentDynamics>& agents,
                                                    const std::vector<double>& y0) {
    if (agents.size() != y0.size()) throw ScenarioError("initial outputs do not match agent count");
    InitialConditions ic;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        AgentState x(agents[i].order, 0.0);
        x[0] = y0[i];
        ic.x.push_back(std::move(x));
    }
    ic.r = y0;
    ic.v.assign(y0.size(), 0.0);
    ic.theta.assign(y0.size(), 0.0);
    return ic;
}

struct Scenario {
    Digraph graph;
    std::vector<AgentDynamics> agents;
    std::vector<std::vector<double>> k;  // Hurwitz coefficients per agent, size order-1 each
    std::vector<CostCatalogEntry> costs;
    GeneratorMode mode = GeneratorMode::Offline;
    double eps = 1.0;
    std::optional<GainSchedule> gains;  // empty: derive from the generator gain bounds
    NussbaumFn nussbaum = NussbaumFn::ThetaSqSin;
    double t_end = 1.0;
    double h = 1e-3;
    std::size_t record_every = 10;
    InitialConditions init;
    std::vector<Event> events;

    bool operator==(const Scenario&) const = default;
};

/// Throws ScenarioError on structural problems.
inline void validate_scenario(const Scenario& s) {
    const std::size_t n = s.graph.size();
    if (n == 0) throw ScenarioError("scenario has no agents");
    if (s.agents.size() != n || s.costs.size() != n || s.k.size() != n)
        throw ScenarioError("agents, costs and k must each have one entry per graph node");
    if (!(s.h > 0.0) || !(s.t_end > 0.0)) throw ScenarioError("h and t_end must be positive");
    if (!(s.eps > 0.0)) throw ScenarioError("eps must be positive");
    if (s.record_every == 0) throw ScenarioError("record_every must be at least 1");
    if (s.gains && (!(s.gains->alpha > 0.0) || !(s.gains->beta > 0.0)))
        throw ScenarioError("gains must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = s.agents[i];
        if (a.order == 0) throw ScenarioError("agent " + std::to_string(i + 1) + ": order must be >= 1");
        if (a.b == 0.0 || !std::isfinite(a.b))
            throw ScenarioError("agent " + std::to_string(i + 1) + ": b must be nonzero and finite");
        if (s.k[i].size() != a.order - 1)
            throw ScenarioError("agent " + std::to_string(i + 1) + ": expected " + std::to_string(a.order - 1) +
                                " Hurwitz coefficients");
    }
    const auto& ic = s.init;
    if (ic.x.size() != n || ic.r.size() != n || ic.v.size() != n || ic.theta.size() != n)
        throw ScenarioError("initial conditions must cover every agent");
    for (std::size_t i = 0; i < n; ++i)
        if (ic.x[i].size() != s.agents[i].order)
            throw ScenarioError("agent " + std::to_string(i + 1) + ": initial state length must equal order");
    for (const auto& e : s.events) {
        if (e.time < 0.0 || e.time > s.t_end) throw ScenarioError("event time outside [0, t_end]");
        if (const auto* iso = std::get_if<IsolateNode>(&e.action); iso && (iso->node < 1 || iso->node > n))
            throw ScenarioError("IsolateNode refers to unknown node " + std::to_string(iso->node));
    }
}

/// Non-fatal configuration issues (the simulator knows b_i even though the
/// controller does not).
inline std::vector<std::string> scenario_warnings(const Scenario& s) {
    std::vector<std::string> out;
    if (s.mode == GeneratorMode::Online && !s.agents.empty()) {
        const bool pos = s.agents.front().b > 0.0;
        for (const auto& a : s.agents)
            if ((a.b > 0.0) != pos) {
                out.emplace_back("online mode assumes every b_i has the same sign; this scenario mixes signs");
                break;
            }
    }
    return out;
}

inline GainSchedule resolve_gains(const Scenario& s) {
    if (s.gains) return *s.gains;
    const auto [lo, hi] = aggregate_params(s.costs);
    return lemma1_gains(lo, hi, sym_spectrum(s.graph));
}

// ----------------------------------------------------------------------------
// Trace
// ----------------------------------------------------------------------------

/// Sampled trajectory; every per-agent series is indexed [sample][agent].
struct Trace {
    std::vector<double> times;
    std::vector<std::vector<AgentState>> x;
    std::vector<std::vector<double>> y;
    std::vector<std::vector<double>> u;
    std::vector<std::vector<double>> theta;
    std::vector<std::vector<double>> r;
    std::vector<std::vector<double>> v;
    std::vector<std::vector<double>> zeta;

    std::size_t size() const { return times.size(); }
    std::size_t agents() const { return y.empty() ? 0 : y.front().size(); }

    bool operator==(const Trace&) const = default;
};

class BlowUpError : public std::runtime_error {
  public:
    BlowUpError(std::size_t agent, double t, double theta, const std::string& why)
        : std::runtime_error("blow-up at agent " + std::to_string(agent) + ", t=" + std::to_string(t) +
                             ", theta=" + std::to_string(theta) + ": " + why),
          agent_(agent), t_(t), theta_(theta) {}

    std::size_t agent() const { return agent_; }  // 1-based
    double time() const { return t_; }
    double theta() const { return theta_; }

    /// Samples recorded before the abort (set by run_scenario).
    const Trace* partial_trace() const { return partial_.get(); }
    void attach_trace(Trace t) { partial_ = std::make_shared<Trace>(std::move(t)); }

  private:
    std::size_t agent_;
    double t_;
    double theta_;
    std::shared_ptr<const Trace> partial_;
};

inline constexpr double kBlowUpLimit = 1e9;

// ----------------------------------------------------------------------------
// Working graph and disturbance state
// ----------------------------------------------------------------------------

struct WorkingConditions {
    Digraph graph;
    Eigen::MatrixXd lap;
    std::vector<Disturbance> disturbances;  // registered so far

    explicit WorkingConditions(const Digraph& g) : graph(g), lap(laplacian(g)) {}

    /// Total additive input at time t.
    double disturbance_input(double t) const {
        double d = 0.0;
        for (const auto& dist : disturbances)
            if (t >= dist.t_on && t < dist.t_off) d += dist.amplitude * std::sin(dist.frequency * t);
        return d;
    }
};

inline void apply_event(const Digraph& original, WorkingConditions& wc, const Event& event) {
    std::visit(detail::overloaded{
                   [&](const IsolateNode& iso) {
                       const std::size_t k = iso.node - 1;
                       for (std::size_t j = 0; j < wc.graph.size(); ++j) {
                           wc.graph.set_weight(k, j, 0.0);
                           wc.graph.set_weight(j, k, 0.0);
                       }
                       wc.lap = laplacian(wc.graph);
                   },
                   [&](const RestoreGraph&) {
                       wc.graph = original;
                       wc.lap = laplacian(wc.graph);
                   },
                   [&](const Disturbance& d) { wc.disturbances.push_back(d); },
               },
               event.action);
}

// ----------------------------------------------------------------------------
// Closed-loop model
// ----------------------------------------------------------------------------

/// Immutable data derived from a scenario. Packed state layout per agent:
/// (x_i[0..n_i), r_i, v_i, theta_i), agents contiguous in index order.
class ClosedLoop {
  public:
    explicit ClosedLoop(const Scenario& s) : scenario_(s), gains_((validate_scenario(s), resolve_gains(s))) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < s.agents.size(); ++i) {
            translations_.push_back(build_translation(s.agents[i].order, s.k[i], s.eps));
            offsets_.push_back(off);
            off += s.agents[i].order + 3;
        }
        dim_ = off;
        for (const auto& c : s.costs) costs_.push_back(make_cost(c));
    }

    const Scenario& scenario() const { return scenario_; }
    const GainSchedule& gains() const { return gains_; }
    std::size_t agents() const { return offsets_.size(); }
    std::size_t dim() const { return dim_; }
    std::size_t offset(std::size_t i) const { return offsets_[i]; }
    std::size_t order(std::size_t i) const { return scenario_.agents[i].order; }
    const TranslationData& translation(std::size_t i) const { return translations_[i]; }

    Eigen::VectorXd pack(const InitialConditions& ic) const {
        Eigen::VectorXd s(static_cast<Eigen::Index>(dim_));
        for (std::size_t i = 0; i < agents(); ++i) {
            auto o = static_cast<Eigen::Index>(offsets_[i]);
            for (double xj : ic.x[i]) s(o++) = xj;
            s(o++) = ic.r[i];
            s(o++) = ic.v[i];
            s(o) = ic.theta[i];
        }
        return s;
    }

    std::span<const double> x(const Eigen::VectorXd& s, std::size_t i) const {
        return {s.data() + offsets_[i], order(i)};
    }
    double r(const Eigen::VectorXd& s, std::size_t i) const { return s(idx(i, 0)); }
    double v(const Eigen::VectorXd& s, std::size_t i) const { return s(idx(i, 1)); }
    double theta(const Eigen::VectorXd& s, std::size_t i) const { return s(idx(i, 2)); }

    double zeta(const Eigen::VectorXd& s, std::size_t i) const {
        return optcon::zeta(x(s, i), r(s, i), translations_[i]);
    }

    /// Controller output N(theta_i) zeta_i, excluding any disturbance.
    double control(const Eigen::VectorXd& s, std::size_t i, double t) const {
        try {
            return control_law(zeta(s, i), theta(s, i), scenario_.nussbaum).u;
        } catch (const NussbaumOverflow& e) {
            throw BlowUpError(i + 1, t, theta(s, i), "Nussbaum gain overflow");
        }
    }

    /// Gradient fed to agent i's generator.
    double generator_gradient(const Eigen::VectorXd& s, std::size_t i) const {
        const double at = scenario_.mode == GeneratorMode::Offline ? r(s, i) : x(s, i)[0];
        return costs_[i].grad(at);
    }

  private:
    Eigen::Index idx(std::size_t i, std::size_t slot) const {
        return static_cast<Eigen::Index>(offsets_[i] + order(i) + slot);
    }

    Scenario scenario_;
    GainSchedule gains_;
    std::vector<TranslationData> translations_;
    std::vector<CostFunction> costs_;
    std::vector<std::size_t> offsets_;
    std::size_t dim_ = 0;
};

inline Eigen::VectorXd closed_loop_derivative(const ClosedLoop& model, const WorkingConditions& wc, double t,
                                              const Eigen::VectorXd& s) {
    const std::size_t n = model.agents();
    for (std::size_t i = 0; i < n; ++i) {
        const auto o = static_cast<Eigen::Index>(model.offset(i));
        const auto len = static_cast<Eigen::Index>(model.order(i) + 3);
        const auto seg = s.segment(o, len);
        if (!seg.allFinite() || seg.cwiseAbs().maxCoeff() > kBlowUpLimit)
            throw BlowUpError(i + 1, t, model.theta(s, i), "state magnitude exceeded 1e9");
    }

    GeneratorState gs{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    Eigen::VectorXd grads(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        gs.r(ii) = model.r(s, i);
        gs.v(ii) = model.v(s, i);
        grads(ii) = model.generator_gradient(s, i);
    }
    const auto [rdot, vdot] = generator_derivative(gs, grads, wc.lap, model.gains());
    const double dist = wc.disturbance_input(t);

    Eigen::VectorXd ds(s.size());
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double z = model.zeta(s, i);
        const double u = model.control(s, i, t);
        if (!std::isfinite(u) || std::abs(u) > kBlowUpLimit)
            throw BlowUpError(i + 1, t, model.theta(s, i), "|u| exceeded 1e9");

        const auto xdot = plant_derivative(model.x(s, i), model.scenario().agents[i], u + dist);
        auto o = static_cast<Eigen::Index>(model.offset(i));
        for (double d : xdot) ds(o++) = d;
        ds(o++) = rdot(ii);
        ds(o++) = vdot(ii);
        ds(o) = z * z;
    }
    return ds;
}

// ----------------------------------------------------------------------------
// Integration
// ----------------------------------------------------------------------------

/// Classical fourth-order Runge-Kutta step.
template <class Derivative>
Eigen::VectorXd rk4_step(Derivative&& f, double t, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = f(t, x);
    const Eigen::VectorXd k2 = f(t + 0.5 * h, (x + 0.5 * h * k1).eval());
    const Eigen::VectorXd k3 = f(t + 0.5 * h, (x + 0.5 * h * k2).eval());
    const Eigen::VectorXd k4 = f(t + h, (x + h * k3).eval());
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline std::size_t snap_to_grid(double time, double h) { return static_cast<std::size_t>(std::llround(time / h)); }

namespace detail {

inline void record_sample(const ClosedLoop& model, double t, const Eigen::VectorXd& s, Trace& tr) {
    const std::size_t n = model.agents();
    std::vector<AgentState> xs(n);
    std::vector<double> y(n), u(n), th(n), r(n), v(n), z(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = model.x(s, i);
        xs[i].assign(xi.begin(), xi.end());
        y[i] = xi[0];
        z[i] = model.zeta(s, i);
        u[i] = model.control(s, i, t);
        th[i] = model.theta(s, i);
        r[i] = model.r(s, i);
        v[i] = model.v(s, i);
    }
    tr.times.push_back(t);
    tr.x.push_back(std::move(xs));
    tr.y.push_back(std::move(y));
    tr.u.push_back(std::move(u));
    tr.theta.push_back(std::move(th));
    tr.r.push_back(std::move(r));
    tr.v.push_back(std::move(v));
    tr.zeta.push_back(std::move(z));
}

}  // namespace detail

/// Fixed-step RK4 from 0 to t_end. Event times snap to the step grid and
/// apply before the step that starts there; disturbance windows are evaluated
/// at the RK stage times. Samples every `record_every` steps plus the final
/// state. On blow-up the thrown BlowUpError carries the samples so far.
inline Trace run_scenario(const Scenario& scenario) {
    const ClosedLoop model(scenario);
    const double h = scenario.h;
    const std::size_t steps = std::max<std::size_t>(1, snap_to_grid(scenario.t_end, h));

    std::vector<std::pair<std::size_t, const Event*>> schedule;
    for (const auto& e : scenario.events) schedule.emplace_back(snap_to_grid(e.time, h), &e);
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });

    WorkingConditions wc(scenario.graph);
    Eigen::VectorXd state = model.pack(scenario.init);
    Trace trace;
    std::size_t next_event = 0;

    auto rhs = [&](double t, const Eigen::VectorXd& s) { return closed_loop_derivative(model, wc, t, s); };

    try {
        for (std::size_t k = 0;; ++k) {
            const double t = static_cast<double>(k) * h;
            while (next_event < schedule.size() && schedule[next_event].first <= k)
                apply_event(scenario.graph, wc, *schedule[next_event++].second);
            if (k % scenario.record_every == 0 || k == steps) detail::record_sample(model, t, state, trace);
            if (k == steps) break;
            state = rk4_step(rhs, t, state, h);
        }
    } catch (BlowUpError& e) {
        e.attach_trace(trace);
        throw;
    }
    return trace;
}

// ----------------------------------------------------------------------------
// Generator-only runs
// ----------------------------------------------------------------------------

struct GeneratorRun {
    Digraph graph;
    std::vector<CostFunction> costs;
    GainSchedule gains;
    std::vector<double> r0;
    std::vector<double> v0;
    double t_end = 1.0;
    double h = 1e-3;
    std::size_t record_every = 10;
};

struct GeneratorTrace {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> r;
    std::vector<Eigen::VectorXd> v;
};

/// Integrates the generator alone with offline gradients grad f_i(r_i).
inline GeneratorTrace run_generator(const GeneratorRun& run) {
    const std::size_t n = run.graph.size();
    if (run.costs.size() != n || run.r0.size() != n || run.v0.size() != n)
        throw ScenarioError("generator run: sizes must match the graph");
    if (!(run.h > 0.0) || !(run.t_end > 0.0) || run.record_every == 0)
        throw ScenarioError("generator run: invalid step configuration");

    const Eigen::MatrixXd lap = laplacian(run.graph);
    const auto nn = static_cast<Eigen::Index>(n);
    auto rhs = [&](double, const Eigen::VectorXd& s) {
        GeneratorState gs{s.head(nn), s.tail(nn)};
        Eigen::VectorXd grads(nn);
        for (Eigen::Index i = 0; i < nn; ++i) grads(i) = run.costs[static_cast<std::size_t>(i)].grad(gs.r(i));
        const auto [rd, vd] = generator_derivative(gs, grads, lap, run.gains);
        Eigen::VectorXd out(2 * nn);
        out << rd, vd;
        return out;
    };

    Eigen::VectorXd s(2 * nn);
    for (Eigen::Index i = 0; i < nn; ++i) {
        s(i) = run.r0[static_cast<std::size_t>(i)];
        s(nn + i) = run.v0[static_cast<std::size_t>(i)];
    }
    const std::size_t steps = std::max<std::size_t>(1, snap_to_grid(run.t_end, run.h));
    GeneratorTrace tr;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * run.h;
        if (k % run.record_every == 0 || k == steps) {
            tr.times.push_back(t);
            tr.r.push_back(s.head(nn));
            tr.v.push_back(s.tail(nn));
        }
        if (k == steps) break;
        s = rk4_step(rhs, t, s, run.h);
    }
    return tr;
}

}  // namespace optcon
