#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "optcon/graph.hpp"

namespace optcon {

class ControllerError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a Nussbaum gain is no longer representable. Carries theta so
/// the simulator can report where the adaptation ran away.
class NussbaumOverflow : public std::overflow_error {
  public:
    explicit NussbaumOverflow(double theta)
        : std::overflow_error("Nussbaum gain overflow at theta=" + std::to_string(theta)), theta_(theta) {}
    double theta() const { return theta_; }

  private:
    double theta_;
};

// ============================================================================
// Optimal signal generator
// ============================================================================

struct GeneratorState {
    Eigen::VectorXd r;  // local estimates of the optimum
    Eigen::VectorXd v;  // dual variables
};

struct GainSchedule {
    double alpha = 1.0;
    double beta = 1.0;
    bool operator==(const GainSchedule&) const = default;
};

/// Smallest (alpha, beta) for which the generator provably converges
/// exponentially:
///   alpha = max{1, 1/l_under, 2 l_bar^2 / (l_under lambda2)}
///   beta  = max{1, 1/lambda2, 6 alpha^2 lambdaN^2 / lambda2^2}
inline GainSchedule lemma1_gains(double l_under, double l_bar, const SpectralInfo& spec) {
    if (!(spec.lambda2 > 0.0)) throw ControllerError("lambda2 must be positive (graph not balanced/connected)");
    if (!(l_under > 0.0) || l_bar < l_under) throw ControllerError("need l_bar >= l_under > 0");
    const double l2 = spec.lambda2;
    const double alpha = std::max({1.0, 1.0 / l_under, 2.0 * l_bar * l_bar / (l_under * l2)});
    const double beta = std::max({1.0, 1.0 / l2, 6.0 * alpha * alpha * spec.lambdaN * spec.lambdaN / (l2 * l2)});
    return {alpha, beta};
}

/// Primal-dual generator right-hand side
///   r' = -alpha grad - beta L r - L v,   v' = alpha beta L r.
/// `grads[i]` is grad f_i at r_i (offline) or at y_i (online); the caller
/// decides.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> generator_derivative(const GeneratorState& gs,
                                                                        const Eigen::VectorXd& grads,
                                                                        const Eigen::MatrixXd& lap,
                                                                        const GainSchedule& gains) {
    const Eigen::Index n = lap.rows();
    if (gs.r.size() != n || gs.v.size() != n || grads.size() != n || lap.cols() != n)
        throw ControllerError("generator_derivative: dimension mismatch");
    const Eigen::VectorXd lr = lap * gs.r;
    const Eigen::VectorXd lv = lap * gs.v;
    Eigen::VectorXd rdot = -gains.alpha * grads - gains.beta * lr - lv;
    Eigen::VectorXd vdot = gains.alpha * gains.beta * lr;
    return {std::move(rdot), std::move(vdot)};
}

inline std::pair<Eigen::VectorXd, Eigen::VectorXd> generator_derivative(const GeneratorState& gs,
                                                                        const Eigen::VectorXd& grads,
                                                                        const Digraph& g,
                                                                        const GainSchedule& gains) {
    return generator_derivative(gs, grads, laplacian(g), gains);
}

// ============================================================================
// Nussbaum functions
// ============================================================================

enum class NussbaumFn {
    ThetaSqSin,  // theta^2 sin(theta)
    ExpSqSin,    // exp(theta^2) sin(theta)
};

inline const char* to_string(NussbaumFn fn) {
    switch (fn) {
        case NussbaumFn::ThetaSqSin: return "theta_sq_sin";
        case NussbaumFn::ExpSqSin: return "exp_sq_sin";
    }
    return "?";
}

/// Largest |theta| for which exp(theta^2) stays comfortably representable.
inline double exp_sq_theta_limit() { return std::sqrt(0.5 * std::log(std::numeric_limits<double>::max())); }

inline double nussbaum_eval(NussbaumFn fn, double theta) {
    if (!std::isfinite(theta)) throw NussbaumOverflow(theta);
    switch (fn) {
        case NussbaumFn::ThetaSqSin: return theta * theta * std::sin(theta);
        case NussbaumFn::ExpSqSin:
            if (std::abs(theta) > exp_sq_theta_limit()) throw NussbaumOverflow(theta);
            return std::exp(theta * theta) * std::sin(theta);
    }
    throw ControllerError("unknown Nussbaum function");
}

/// Adaptive law u = N(theta) zeta, theta' = zeta^2.
struct ControlOutput {
    double u = 0.0;
    double thetadot = 0.0;
};

inline ControlOutput control_law(double zeta_value, double theta, NussbaumFn fn) {
    if (!std::isfinite(zeta_value)) throw ControllerError("non-finite tracking error");
    return {nussbaum_eval(fn, theta) * zeta_value, zeta_value * zeta_value};
}

// ============================================================================
// Numeric probe of the Nussbaum properties
// ============================================================================
// The defining conditions are limits, so the probe settles for finite
// thresholds. With I(t) = int_0^t N and I+/I- the integrals of the positive
// and negative parts:
//   sign-switching:  max I(t)/t > threshold and min I(t)/t < -threshold over (0, theta_max]
//   strengthened:    I+(theta_max)/theta_max and I-(theta_max)/theta_max exceed the
//                    threshold, and both I+/I- and I-/I+ exceed it somewhere in the
//                    upper half of the range (the early range is excluded because
//                    I- vanishes on the first lobe).

struct NussbaumCheckpoint {
    double theta = 0.0;
    double mean = 0.0;     // I(theta) / theta
    double running_max = 0.0;
    double running_min = 0.0;
    double pos_mean = 0.0;  // I+(theta) / theta
    double neg_mean = 0.0;  // I-(theta) / theta
};

struct NussbaumProbeReport {
    std::vector<NussbaumCheckpoint> checkpoints;
    double max_mean = -std::numeric_limits<double>::infinity();
    double min_mean = std::numeric_limits<double>::infinity();
    double max_pos_over_neg = 0.0;
    double max_neg_over_pos = 0.0;
    double final_pos_mean = 0.0;
    double final_neg_mean = 0.0;
    double threshold = 10.0;

    bool passes_sign_switching() const { return max_mean > threshold && min_mean < -threshold; }
    bool passes_strengthened() const {
        return passes_sign_switching() && final_pos_mean > threshold && final_neg_mean > threshold &&
               max_pos_over_neg > threshold && max_neg_over_pos > threshold;
    }
};

inline NussbaumProbeReport probe_nussbaum_property(const std::function<double(double)>& fn, double theta_max,
                                                   std::size_t window_count, std::size_t nodes_per_window = 400,
                                                   double threshold = 10.0) {
    if (!(theta_max > 0.0)) throw ControllerError("probe range must be positive");
    if (window_count < 4) throw ControllerError("probe needs at least 4 windows");
    if (nodes_per_window == 0) throw ControllerError("probe needs quadrature nodes");

    NussbaumProbeReport rep;
    rep.threshold = threshold;
    const std::size_t total = window_count * nodes_per_window;
    const double h = theta_max / static_cast<double>(total);

    double integral = 0.0, pos = 0.0, neg = 0.0;
    double prev = fn(0.0);
    for (std::size_t k = 1; k <= total; ++k) {
        const double theta = static_cast<double>(k) * h;
        const double cur = fn(theta);
        integral += 0.5 * h * (prev + cur);
        pos += 0.5 * h * (std::max(prev, 0.0) + std::max(cur, 0.0));
        neg += 0.5 * h * (std::max(-prev, 0.0) + std::max(-cur, 0.0));
        prev = cur;

        const double mean = integral / theta;
        rep.max_mean = std::max(rep.max_mean, mean);
        rep.min_mean = std::min(rep.min_mean, mean);
        if (theta >= 0.5 * theta_max) {
            if (neg > 0.0) rep.max_pos_over_neg = std::max(rep.max_pos_over_neg, pos / neg);
            if (pos > 0.0) rep.max_neg_over_pos = std::max(rep.max_neg_over_pos, neg / pos);
        }
        if (k % nodes_per_window == 0)
            rep.checkpoints.push_back({theta, mean, rep.max_mean, rep.min_mean, pos / theta, neg / theta});
    }
    rep.final_pos_mean = pos / theta_max;
    rep.final_neg_mean = neg / theta_max;
    return rep;
}

inline NussbaumProbeReport probe_nussbaum_property(NussbaumFn fn, double theta_max, std::size_t window_count,
                                                   std::size_t nodes_per_window = 400, double threshold = 10.0) {
    return probe_nussbaum_property([fn](double t) { return nussbaum_eval(fn, t); }, theta_max, window_count,
                                   nodes_per_window, threshold);
}

}  // namespace optcon
