#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "optcon/analysis.hpp"
#include "optcon/scenario_io.hpp"

// Command implementations behind the `optcon` executable. Each returns the
// process exit status and writes human-readable output to `out`.

namespace optcon::cli {

enum ExitCode : int {
    kOk = 0,
    kCheckFailed = 1,
    kBadInput = 2,
    kBlowUp = 3,
};

namespace detail {

inline std::string fmt_double(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::vector<double> check_samples() {
    std::vector<double> s;
    for (int k = -20; k <= 20; ++k) s.push_back(0.5 * k + 0.123);
    return s;
}

// Sampled strong-convexity / Lipschitz probe for one cost.
inline bool convexity_probe(const CostFunction& f, const std::vector<double>& ys) {
    for (std::size_t a = 0; a < ys.size(); ++a)
        for (std::size_t b = a + 1; b < ys.size(); ++b) {
            const double dy = ys[a] - ys[b];
            const double dg = f.grad(ys[a]) - f.grad(ys[b]);
            if (dg * dy < f.mu * dy * dy - 1e-9) return false;
            if (std::abs(dg) > f.lipschitz * std::abs(dy) + 1e-9) return false;
        }
    return true;
}

}  // namespace detail

/// Validates a loaded scenario. Failures: graph not weight-balanced or not
/// strongly connected, cost gradients or convexity bounds that do not hold on
/// samples, non-Hurwitz coefficients. Mixed b_i signs in online mode and
/// gains below the proven floor are reported as notes only.
inline bool check_scenario(const ScenarioFile& file, std::ostream& out) {
    const Scenario& s = file.scenario;
    bool ok = true;
    auto line = [&](bool pass, const std::string& what) {
        out << (pass ? "[ ok ] " : "[FAIL] ") << what << '\n';
        ok = ok && pass;
    };

    out << "scenario: " << (file.name.empty() ? "(unnamed)" : file.name) << " (" << s.graph.size() << " agents, "
        << to_string(s.mode) << " gradients)\n";

    const bool balanced = is_weight_balanced(s.graph, 1e-9);
    const bool connected = is_strongly_connected(s.graph);
    line(balanced, "graph is weight-balanced");
    line(connected, "graph is strongly connected");

    const auto samples = detail::check_samples();
    for (std::size_t i = 0; i < s.costs.size(); ++i) {
        const auto f = make_cost(s.costs[i]);
        const auto rep = grad_check(f, samples);
        const bool conv = f.mu > 0.0 && f.lipschitz >= f.mu && detail::convexity_probe(f, samples);
        line(rep.passed() && conv, "cost " + std::to_string(i + 1) + " (" + cost_name(s.costs[i]) +
                                       "): gradient and convexity bounds mu=" + detail::fmt_double(f.mu) +
                                       " L=" + detail::fmt_double(f.lipschitz));
    }

    for (std::size_t i = 0; i < s.agents.size(); ++i) {
        std::string ks = "(";
        for (std::size_t j = 0; j < s.k[i].size(); ++j) ks += (j ? "," : "") + detail::fmt_double(s.k[i][j]);
        ks += ")";
        line(is_hurwitz(s.k[i]),
             "agent " + std::to_string(i + 1) + " order " + std::to_string(s.agents[i].order) + " k=" + ks +
                 " is Hurwitz");
    }

    for (const auto& w : scenario_warnings(s)) out << "[note] " << w << '\n';

    if (balanced && connected && s.graph.size() > 1) {
        const auto spec = sym_spectrum(s.graph);
        out << "lambda2 = " << detail::fmt_double(spec.lambda2, 12) << '\n';
        out << "lambdaN = " << detail::fmt_double(spec.lambdaN, 12) << '\n';
        const auto [lo, hi] = aggregate_params(s.costs);
        const auto floor = lemma1_gains(lo, hi, spec);
        out << "cost parameters: l_under = " << detail::fmt_double(lo) << ", l_bar = " << detail::fmt_double(hi)
            << '\n';
        out << "gain floor: alpha >= " << detail::fmt_double(floor.alpha, 10)
            << ", beta >= " << detail::fmt_double(floor.beta, 10) << '\n';
        if (s.gains) {
            out << "configured gains: alpha = " << detail::fmt_double(s.gains->alpha)
                << ", beta = " << detail::fmt_double(s.gains->beta) << '\n';
            if (s.gains->alpha < floor.alpha || s.gains->beta < floor.beta)
                out << "[note] configured gains are below the sufficient floor; convergence is not guaranteed "
                       "by the bound\n";
        } else {
            out << "configured gains: auto (floor values)\n";
        }
    }
    out << (ok ? "check passed\n" : "check FAILED\n");
    return ok;
}

inline int cmd_check(const std::string& path, std::ostream& out) {
    try {
        return check_scenario(load_scenario(path), out) ? kOk : kCheckFailed;
    } catch (const ScenarioFileError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    }
}

inline int cmd_oracle(const std::string& path, std::ostream& out) {
    try {
        const auto f = load_scenario(path);
        const auto res = global_minimizer(f.scenario.costs);
        out << "y_star = " << detail::fmt_double(res.y_star, 12) << '\n';
        out << "residual = " << detail::fmt_double(res.residual, 3) << '\n';
        return kOk;
    } catch (const ScenarioFileError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    } catch (const CostError& e) {
        out << "error: " << e.what() << '\n';
        return kCheckFailed;
    }
}

inline int cmd_scaffold(int example, const std::string& path, std::ostream& out) {
    try {
        save_scenario(builtin_example(example), path);
        out << "wrote " << path << '\n';
        return kOk;
    } catch (const ScenarioFileError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    }
}

struct RunOptions {
    std::optional<std::string> out_dir;
    std::optional<double> step;
    std::optional<double> t_end;
};

/// Gnuplot script drawing y_i, u_i and theta_i against time from trace.csv.
inline std::string plot_script(const std::string& title, std::size_t agents) {
    const std::string n = std::to_string(agents);
    std::string s;
    s += "# gnuplot script; run from the output directory: gnuplot -p plot.gp\n";
    s += "set datafile separator ','\n";
    s += "set key outside right\n";
    s += "set grid\n";
    s += "set xlabel 't [s]'\n";
    s += "set multiplot layout 3,1 title '" + title + "'\n";
    const char* panels[3][2] = {{"3", "y_%d"}, {"4", "u_%d"}, {"5", "theta_%d"}};
    const char* labels[3] = {"y_i(t)", "u_i(t)", "theta_i(t)"};
    for (int p = 0; p < 3; ++p) {
        s += std::string("set ylabel '") + labels[p] + "'\n";
        s += "plot for [i=1:" + n + "] 'trace.csv' every ::1 using ($2==i ? $1 : 1/0):" + panels[p][0] +
             " with lines title sprintf('" + panels[p][1] + "', i)\n";
    }
    s += "unset multiplot\n";
    return s;
}

namespace detail {

// Fit window: second half of the interval before the first event.
inline std::pair<double, double> fit_window(const Scenario& s) {
    double first = s.t_end;
    for (const auto& e : s.events) first = std::min(first, e.time);
    return {0.5 * first, first};
}

inline nlohmann::json metrics_json(const ScenarioFile& f, const GainSchedule& gains, double y_star, double residual,
                                   const Trace& tr, bool aborted, const std::string& abort_message) {
    nlohmann::json j;
    j["scenario"] = f.name;
    j["samples"] = tr.size();
    j["aborted"] = aborted;
    if (aborted) j["abort_message"] = abort_message;
    j["y_star"] = y_star;
    j["oracle_residual"] = residual;
    j["gains"] = {{"alpha", gains.alpha}, {"beta", gains.beta}};
    if (tr.size() > 0) {
        const auto [t0, t1] = fit_window(f.scenario);
        const auto m = compute_metrics(tr, y_star, t0, t1);
        j["t_final"] = tr.times.back();
        j["final_consensus_error"] = m.consensus_error.back();
        j["final_optimality_gap"] = m.optimality_gap.back();
        j["max_optimality_gap"] = *std::max_element(m.optimality_gap.begin(), m.optimality_gap.end());
        j["fit_window"] = {t0, t1};
        if (std::isfinite(m.fitted_rate)) {
            j["fitted_rate"] = m.fitted_rate;
        } else {
            j["fitted_rate"] = nullptr;
        }
        j["final_values"] = m.final_values;
        j["max_abs_u"] = m.max_abs_u;
        j["max_theta"] = m.max_theta;
    }
    return j;
}

}  // namespace detail

/// Runs a scenario and writes trace.csv, metrics.json and plot.gp into the
/// output directory (--out, else the file's output.dir).
inline int cmd_run(const std::string& path, const RunOptions& opt, std::ostream& out) {
    ScenarioFile f;
    try {
        f = load_scenario(path);
    } catch (const ScenarioFileError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    }
    if (opt.step) f.scenario.h = *opt.step;
    if (opt.t_end) {
        // A shortened run simply never reaches the later events.
        f.scenario.t_end = *opt.t_end;
        auto& ev = f.scenario.events;
        const auto before = ev.size();
        std::erase_if(ev, [&](const Event& e) { return e.time > *opt.t_end; });
        if (ev.size() != before)
            out << "[note] dropped " << before - ev.size() << " event(s) after t_end = " << *opt.t_end << '\n';
    }
    try {
        validate_scenario(f.scenario);
    } catch (const ScenarioError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    }
    if (!check_scenario(f, out)) return kCheckFailed;

    const std::filesystem::path dir = opt.out_dir.value_or(f.output_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        out << "error: cannot create " << dir.string() << ": " << ec.message() << '\n';
        return kBadInput;
    }

    const auto oracle = global_minimizer(f.scenario.costs);
    const auto gains = resolve_gains(f.scenario);
    Trace trace;
    bool aborted = false;
    std::string abort_message;
    try {
        trace = run_scenario(f.scenario);
    } catch (const BlowUpError& e) {
        aborted = true;
        abort_message = e.what();
        if (e.partial_trace()) trace = *e.partial_trace();
    }

    try {
        export_csv(trace, (dir / "trace.csv").string());
    } catch (const AnalysisError& e) {
        out << "error: " << e.what() << '\n';
        return kBadInput;
    }
    {
        std::ofstream os(dir / "metrics.json", std::ios::binary | std::ios::trunc);
        os << detail::metrics_json(f, gains, oracle.y_star, oracle.residual, trace, aborted, abort_message).dump(2)
           << '\n';
    }
    {
        std::ofstream os(dir / "plot.gp", std::ios::binary | std::ios::trunc);
        os << plot_script(f.name.empty() ? "scenario" : f.name, f.scenario.graph.size());
    }

    out << "wrote " << (dir / "trace.csv").string() << ", metrics.json, plot.gp\n";
    if (aborted) {
        out << "ABORTED: " << abort_message << '\n';
        return kBlowUp;
    }
    const auto gap = optimality_gap(trace, oracle.y_star);
    out << "y_star = " << detail::fmt_double(oracle.y_star, 12) << ", final optimality gap = "
        << detail::fmt_double(gap.back()) << ", final consensus error = "
        << detail::fmt_double(consensus_error(trace).back()) << '\n';
    return kOk;
}

}  // namespace optcon::cli
