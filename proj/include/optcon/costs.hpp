#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace optcon {

class CostError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// ============================================================================
// Cost catalog
// ============================================================================
// Every entry is a scalar strongly convex function with a closed-form
// gradient. The declared (mu, lipschitz) pair for the non-quadratic families is
// the conservative bound (1, 3); their true curvature lies in [1.99, 2.1].

/// c * (y - center)^2
struct Quadratic {
    double c = 1.0;
    double center = 0.0;
    bool operator==(const Quadratic&) const = default;
};

/// y^2 / (20 sqrt(y^2 + 1)) + y^2
struct SqrtRatio {
    bool operator==(const SqrtRatio&) const = default;
};

/// y^2 / (80 ln(y^2 + 2)) + (y - 5)^2
struct LogRatio {
    bool operator==(const LogRatio&) const = default;
};

/// ln(e^{-0.05 y} + e^{0.05 y}) + y^2
struct SoftPlusPair {
    bool operator==(const SoftPlusPair&) const = default;
};

using CostCatalogEntry = std::variant<Quadratic, SqrtRatio, LogRatio, SoftPlusPair>;

namespace detail {

inline void require_finite(double y) {
    if (!std::isfinite(y)) throw CostError("cost evaluated at non-finite argument");
}

template <class... Fs>
struct overloaded : Fs... {
    using Fs::operator()...;
};
template <class... Fs>
overloaded(Fs...) -> overloaded<Fs...>;

}  // namespace detail

inline double eval_cost(const CostCatalogEntry& entry, double y) {
    detail::require_finite(y);
    return std::visit(
        detail::overloaded{
            [y](const Quadratic& q) { return q.c * (y - q.center) * (y - q.center); },
            [y](const SqrtRatio&) { return y * y / (20.0 * std::sqrt(y * y + 1.0)) + y * y; },
            [y](const LogRatio&) { return y * y / (80.0 * std::log(y * y + 2.0)) + (y - 5.0) * (y - 5.0); },
            [y](const SoftPlusPair&) {
                // ln(2 cosh(a)) = |a| + ln(1 + e^{-2|a|}), stable for large |y|
                const double a = std::abs(0.05 * y);
                return a + std::log1p(std::exp(-2.0 * a)) + y * y;
            },
        },
        entry);
}

inline double eval_grad(const CostCatalogEntry& entry, double y) {
    detail::require_finite(y);
    return std::visit(
        detail::overloaded{
            [y](const Quadratic& q) { return 2.0 * q.c * (y - q.center); },
            [y](const SqrtRatio&) {
                const double s = std::sqrt(y * y + 1.0);
                // d/dy [y^2 (y^2+1)^{-1/2}] = y (y^2 + 2) / (y^2+1)^{3/2}
                return y * (y * y + 2.0) / (20.0 * s * s * s) + 2.0 * y;
            },
            [y](const LogRatio&) {
                const double w = y * y + 2.0;
                const double l = std::log(w);
                // d/dy [y^2 / l] = 2y/l - 2y^3 / (w l^2)
                return (2.0 * y / l - 2.0 * y * y * y / (w * l * l)) / 80.0 + 2.0 * (y - 5.0);
            },
            [y](const SoftPlusPair&) { return 0.05 * std::tanh(0.05 * y) + 2.0 * y; },
        },
        entry);
}

/// (mu, lipschitz) declared for a catalog entry.
inline std::pair<double, double> declared_params(const CostCatalogEntry& entry) {
    if (const auto* q = std::get_if<Quadratic>(&entry)) return {2.0 * q->c, 2.0 * q->c};
    return {1.0, 3.0};
}

inline std::string cost_name(const CostCatalogEntry& entry) {
    return std::visit(detail::overloaded{
                          [](const Quadratic&) { return std::string("quadratic"); },
                          [](const SqrtRatio&) { return std::string("sqrt_ratio"); },
                          [](const LogRatio&) { return std::string("log_ratio"); },
                          [](const SoftPlusPair&) { return std::string("soft_plus_pair"); },
                      },
                      entry);
}

/// Type-erased strongly convex scalar function. Catalog entries convert to
/// this; tests also build ad-hoc instances (e.g. with a corrupted gradient).
struct CostFunction {
    std::function<double(double)> eval;
    std::function<double(double)> grad;
    double mu = 1.0;
    double lipschitz = 1.0;
};

inline CostFunction make_cost(const CostCatalogEntry& entry) {
    const auto [mu, lip] = declared_params(entry);
    return CostFunction{[entry](double y) { return eval_cost(entry, y); },
                        [entry](double y) { return eval_grad(entry, y); }, mu, lip};
}

inline std::vector<CostFunction> make_costs(const std::vector<CostCatalogEntry>& entries) {
    std::vector<CostFunction> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(make_cost(e));
    return out;
}

// ============================================================================
// Gradient check
// ============================================================================

struct GradCheckFailure {
    double y;
    double analytic;
    double numeric;
};

struct GradCheckReport {
    std::size_t checked = 0;
    std::vector<GradCheckFailure> failures;
    bool passed() const { return failures.empty(); }
};

/// Compares the analytic gradient with a central difference at each sample.
inline GradCheckReport grad_check(const CostFunction& f, const std::vector<double>& samples, double step = 1e-5,
                                  double tol = 1e-6) {
    if (!(step > 0.0)) throw CostError("grad_check step must be positive");
    GradCheckReport report;
    for (double y : samples) {
        const double analytic = f.grad(y);
        const double numeric = (f.eval(y + step) - f.eval(y - step)) / (2.0 * step);
        ++report.checked;
        if (std::abs(analytic - numeric) > tol * std::max(1.0, std::abs(analytic)))
            report.failures.push_back({y, analytic, numeric});
    }
    return report;
}

inline GradCheckReport grad_check(const CostCatalogEntry& entry, const std::vector<double>& samples,
                                  double step = 1e-5, double tol = 1e-6) {
    return grad_check(make_cost(entry), samples, step, tol);
}

// ============================================================================
// Centralized minimizer of the aggregate cost
// ============================================================================

struct MinimizerOptions {
    double search_limit = 1e6;  // bracket is sought inside [-search_limit, search_limit]
    double grad_tol = 1e-8;
    int max_iterations = 400;
};

struct MinimizerResult {
    double y_star = 0.0;
    double residual = 0.0;  // sum of gradients at y_star
};

/// Root of sum_i grad f_i(y) by sign-change bracketing and bisection. The
/// aggregate gradient is strictly increasing for strongly convex entries.
inline MinimizerResult global_minimizer(const std::vector<CostFunction>& costs, const MinimizerOptions& opt = {}) {
    if (costs.empty()) throw CostError("global_minimizer needs at least one cost");
    for (const auto& f : costs)
        if (!(f.mu > 0.0)) throw CostError("global_minimizer requires strongly convex costs (mu > 0)");

    auto total = [&](double y) {
        double s = 0.0;
        for (const auto& f : costs) s += f.grad(y);
        return s;
    };

    double lo = -1.0, hi = 1.0;
    double glo = total(lo), ghi = total(hi);
    while (!(glo <= 0.0 && ghi >= 0.0)) {
        if (hi >= opt.search_limit) {
            std::ostringstream os;
            os << "no sign change of the aggregate gradient in [" << -opt.search_limit << ", " << opt.search_limit
               << "]";
            throw CostError(os.str());
        }
        lo *= 2.0;
        hi *= 2.0;
        glo = total(lo);
        ghi = total(hi);
    }

    double mid = 0.5 * (lo + hi);
    double gmid = total(mid);
    for (int it = 0; it < opt.max_iterations; ++it) {
        if (gmid == 0.0) break;
        if (gmid < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        const double next = 0.5 * (lo + hi);
        if (next == lo || next == hi) break;  // interval exhausted at double resolution
        mid = next;
        gmid = total(mid);
        if (std::abs(gmid) <= opt.grad_tol && (hi - lo) <= 1e-12 * std::max(1.0, std::abs(mid))) break;
    }
    if (!(std::abs(gmid) <= opt.grad_tol)) {
        std::ostringstream os;
        os << "bisection stalled at y=" << mid << " with residual " << gmid;
        throw CostError(os.str());
    }
    return {mid, gmid};
}

inline MinimizerResult global_minimizer(const std::vector<CostCatalogEntry>& entries,
                                        const MinimizerOptions& opt = {}) {
    return global_minimizer(make_costs(entries), opt);
}

/// (min_i mu_i, max_i lipschitz_i)
inline std::pair<double, double> aggregate_params(const std::vector<CostFunction>& costs) {
    if (costs.empty()) throw CostError("aggregate_params of an empty cost list");
    double lo = costs.front().mu, hi = costs.front().lipschitz;
    for (const auto& f : costs) {
        lo = std::min(lo, f.mu);
        hi = std::max(hi, f.lipschitz);
    }
    return {lo, hi};
}

inline std::pair<double, double> aggregate_params(const std::vector<CostCatalogEntry>& entries) {
    return aggregate_params(make_costs(entries));
}

}  // namespace optcon
