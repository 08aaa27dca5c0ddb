#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optcon/sim.hpp"

namespace optcon {

class AnalysisError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// max_i |y_i - mean(y)| per sample.
inline std::vector<double> consensus_error(const Trace& tr) {
    if (tr.size() == 0) throw AnalysisError("consensus_error of an empty trace");
    std::vector<double> out;
    out.reserve(tr.size());
    for (const auto& y : tr.y) {
        double mean = 0.0;
        for (double yi : y) mean += yi;
        mean /= static_cast<double>(y.size());
        double e = 0.0;
        for (double yi : y) e = std::max(e, std::abs(yi - mean));
        out.push_back(e);
    }
    return out;
}

/// max_i |y_i - y_star| per sample.
inline std::vector<double> optimality_gap(const Trace& tr, double y_star) {
    std::vector<double> out;
    out.reserve(tr.size());
    for (const auto& y : tr.y) {
        double e = 0.0;
        for (double yi : y) e = std::max(e, std::abs(yi - y_star));
        out.push_back(e);
    }
    return out;
}

/// Negated least-squares slope of ln(value) against time. Points with
/// value <= 1e-10 are dropped.
inline double fit_exponential_rate(std::span<const double> times, std::span<const double> values) {
    if (times.size() != values.size()) throw AnalysisError("fit_exponential_rate: length mismatch");
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(values[k] > 1e-10)) continue;
        const double l = std::log(values[k]);
        st += times[k];
        sl += l;
        stt += times[k] * times[k];
        stl += times[k] * l;
        ++m;
    }
    if (m < 3) throw AnalysisError("fit_exponential_rate needs at least 3 usable points");
    const double md = static_cast<double>(m);
    const double denom = md * stt - st * st;
    if (denom <= 0.0) throw AnalysisError("fit_exponential_rate: degenerate time grid");
    return -(md * stl - st * sl) / denom;
}

/// Fit restricted to samples with t in [t0, t1].
inline double fit_exponential_rate(std::span<const double> times, std::span<const double> values, double t0,
                                   double t1) {
    std::vector<double> ts, vs;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= t0 && times[k] <= t1) {
            ts.push_back(times[k]);
            vs.push_back(values[k]);
        }
    return fit_exponential_rate(ts, vs);
}

struct MetricsReport {
    std::vector<double> consensus_error;
    std::vector<double> optimality_gap;
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> final_values;
    double max_abs_u = 0.0;
    double max_theta = 0.0;
};

/// Metrics over a trace. The rate is fitted to the optimality gap over
/// [fit_t0, fit_t1]; NaN when the window has too few usable samples.
inline MetricsReport compute_metrics(const Trace& tr, double y_star, double fit_t0, double fit_t1) {
    MetricsReport m;
    m.consensus_error = consensus_error(tr);
    m.optimality_gap = optimality_gap(tr, y_star);
    try {
        m.fitted_rate = fit_exponential_rate(tr.times, m.optimality_gap, fit_t0, fit_t1);
    } catch (const AnalysisError&) {
    }
    m.final_values = tr.y.back();
    for (std::size_t k = 0; k < tr.size(); ++k)
        for (std::size_t i = 0; i < tr.agents(); ++i) {
            m.max_abs_u = std::max(m.max_abs_u, std::abs(tr.u[k][i]));
            m.max_theta = std::max(m.max_theta, tr.theta[k][i]);
        }
    return m;
}

// ----------------------------------------------------------------------------
// CSV export
// ----------------------------------------------------------------------------

inline constexpr const char* kTraceCsvHeader = "t,agent,y,u,theta,r,v,zeta";

/// Time-major, agent-minor rows; agents numbered from 1; %.17g round-trips.
inline void write_csv(const Trace& tr, std::ostream& os) {
    os << kTraceCsvHeader << '\n';
    char buf[512];
    for (std::size_t k = 0; k < tr.size(); ++k)
        for (std::size_t i = 0; i < tr.agents(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", tr.times[k], i + 1,
                          tr.y[k][i], tr.u[k][i], tr.theta[k][i], tr.r[k][i], tr.v[k][i], tr.zeta[k][i]);
            os << buf;
        }
}

inline void export_csv(const Trace& tr, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw AnalysisError("cannot open " + path + " for writing");
    write_csv(tr, os);
    os.flush();
    if (!os) throw AnalysisError("write failed for " + path);
}

}  // namespace optcon
