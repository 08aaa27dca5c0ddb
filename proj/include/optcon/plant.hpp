#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace optcon {

class PlantError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Integrator chain y^(n) = b u. The controller never reads `b`.
struct AgentDynamics {
    std::size_t order = 1;
    double b = 1.0;

    bool operator==(const AgentDynamics&) const = default;
};

/// (y, y', ..., y^(n-1)) for one agent.
using AgentState = std::vector<double>;

/// Matrices of the error coordinates (z, zeta) for one agent of order n:
///
///   z' = (A1 z + A2 zeta) / eps - E1 r'
///   zeta' = (A3 z + A4 zeta) / eps + eps^{n-1} b u + E2 r'
///
/// with z = (y - r, eps y', ..., eps^{n-2} y^(n-2)). All blocks are empty for
/// n = 1. z_1 = y - r, so the reference enters z' with a minus sign.
/// P solves A1^T P + P A1 = -2 I.
struct TranslationData {
    std::size_t order = 1;
    std::vector<double> k;
    double eps = 1.0;
    Eigen::MatrixXd A1;
    Eigen::VectorXd A2;
    Eigen::RowVectorXd A3;
    double A4 = 0.0;
    Eigen::VectorXd E1;
    double E2 = 0.0;
    Eigen::MatrixXd P;
};

/// Coefficients of (lambda + 1)^{n-1}, lowest degree first, without the
/// leading 1.
inline std::vector<double> default_hurwitz_coeffs(std::size_t n) {
    if (n == 0) throw PlantError("chain order must be at least 1");
    const std::size_t m = n - 1;
    std::vector<double> k;
    k.reserve(m);
    double binom = 1.0;  // C(m, j)
    for (std::size_t j = 0; j < m; ++j) {
        k.push_back(binom);
        binom = binom * static_cast<double>(m - j) / static_cast<double>(j + 1);
    }
    return k;
}

/// Companion matrix of lambda^m + k_m lambda^{m-1} + ... + k_1.
inline Eigen::MatrixXd companion(std::span<const double> k) {
    const auto m = static_cast<Eigen::Index>(k.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i + 1 < m; ++i) a(i, i + 1) = 1.0;
    for (Eigen::Index j = 0; j < m; ++j) a(m - 1, j) = -k[static_cast<std::size_t>(j)];
    return a;
}

inline bool is_hurwitz_matrix(const Eigen::MatrixXd& a, double margin = 1e-9) {
    if (a.size() == 0) return true;
    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    if (es.info() != Eigen::Success) return false;
    return (es.eigenvalues().real().array() < -margin).all();
}

inline bool is_hurwitz(std::span<const double> k) { return is_hurwitz_matrix(companion(k)); }

/// Solves A^T P + P A = -2 I through the Kronecker-sum system
/// (I (x) A^T + A^T (x) I) vec(P) = -2 vec(I).
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a) {
    const Eigen::Index m = a.rows();
    if (a.cols() != m) throw PlantError("Lyapunov solve needs a square matrix");
    if (m == 0) return {};
    if (m > 8) throw PlantError("Lyapunov solve limited to 8x8");
    if (!is_hurwitz_matrix(a)) throw PlantError("Lyapunov solve: matrix is not Hurwitz");

    const Eigen::Index mm = m * m;
    const Eigen::MatrixXd at = a.transpose();
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
    Eigen::MatrixXd kron = Eigen::MatrixXd::Zero(mm, mm);
    // Column-major vec: vec(A^T P) = (I (x) A^T) vec(P), vec(P A) = (A^T (x) I) vec(P).
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            kron.block(i * m, j * m, m, m) += eye(i, j) * at;
            kron.block(i * m, j * m, m, m) += at(i, j) * eye;
        }
    Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>((-2.0 * eye).eval().data(), mm);

    Eigen::FullPivLU<Eigen::MatrixXd> lu(kron);
    if (!lu.isInvertible()) throw PlantError("Lyapunov system is singular");
    const Eigen::VectorXd vecp = lu.solve(rhs);
    Eigen::MatrixXd p = Eigen::Map<const Eigen::MatrixXd>(vecp.data(), m, m);
    p = 0.5 * (p + p.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() <= 0.0) throw PlantError("Lyapunov solution is not positive definite");
    return p;
}

inline double lyapunov_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p) {
    if (a.size() == 0) return 0.0;
    const Eigen::MatrixXd r = a.transpose() * p + p * a + 2.0 * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    return r.cwiseAbs().maxCoeff();
}

inline TranslationData build_translation(std::size_t n, const std::vector<double>& k, double eps) {
    if (n == 0) throw PlantError("chain order must be at least 1");
    if (k.size() != n - 1)
        throw PlantError("expected " + std::to_string(n - 1) + " Hurwitz coefficients, got " +
                         std::to_string(k.size()));
    if (!(eps > 0.0)) throw PlantError("eps must be positive");
    if (!is_hurwitz(k)) throw PlantError("coefficients do not define a Hurwitz polynomial");

    TranslationData td;
    td.order = n;
    td.k = k;
    td.eps = eps;
    if (n == 1) return td;

    const auto m = static_cast<Eigen::Index>(n - 1);
    const double klast = k.back();
    td.A1 = companion(k);
    td.A2 = Eigen::VectorXd::Zero(m);
    td.A2(m - 1) = 1.0;
    td.A3.resize(m);
    td.A3(0) = -klast * k[0];
    for (Eigen::Index j = 1; j < m; ++j)
        td.A3(j) = k[static_cast<std::size_t>(j - 1)] - klast * k[static_cast<std::size_t>(j)];
    td.A4 = klast;
    td.E1 = Eigen::VectorXd::Zero(m);
    td.E1(0) = 1.0;
    td.E2 = -k[0];
    td.P = solve_lyapunov(td.A1);
    return td;
}

/// Composite tracking error
/// zeta = k_1 (y - r) + sum_{j=2}^{n-1} k_j eps^{j-1} y^(j-1) + eps^{n-1} y^(n-1).
inline double zeta(std::span<const double> x, double r, const TranslationData& td) {
    const std::size_t n = td.order;
    if (x.size() != n) throw PlantError("state length does not match chain order");
    if (n == 1) return x[0] - r;
    double s = td.k[0] * (x[0] - r);
    double scale = 1.0;
    for (std::size_t j = 1; j + 1 < n; ++j) {
        scale *= td.eps;
        s += td.k[j] * scale * x[j];
    }
    scale *= td.eps;
    return s + scale * x[n - 1];
}

/// (z, zeta) from the physical state; inverse of `from_translated`.
inline std::pair<Eigen::VectorXd, double> to_translated(std::span<const double> x, double r,
                                                        const TranslationData& td) {
    const std::size_t n = td.order;
    Eigen::VectorXd z(static_cast<Eigen::Index>(n - 1));
    double scale = 1.0;
    for (std::size_t j = 0; j + 1 < n; ++j) {
        z(static_cast<Eigen::Index>(j)) = j == 0 ? x[0] - r : scale * x[j];
        scale *= td.eps;
    }
    return {z, zeta(x, r, td)};
}

inline AgentState from_translated(const Eigen::VectorXd& z, double zeta_value, double r, const TranslationData& td) {
    const std::size_t n = td.order;
    AgentState x(n, 0.0);
    if (n == 1) {
        x[0] = zeta_value + r;
        return x;
    }
    double scale = 1.0;
    double top = zeta_value;  // eps^{n-1} y^(n-1) = zeta - sum k_j z_j
    for (std::size_t j = 0; j + 1 < n; ++j) {
        const double zj = z(static_cast<Eigen::Index>(j));
        x[j] = j == 0 ? zj + r : zj / scale;
        top -= td.k[j] * zj;
        scale *= td.eps;
    }
    x[n - 1] = top / scale;
    return x;
}

/// x' for the chain: shift up, top derivative b u.
inline AgentState plant_derivative(std::span<const double> x, const AgentDynamics& dyn, double u) {
    if (!std::isfinite(u)) throw PlantError("non-finite control input");
    if (x.size() != dyn.order) throw PlantError("state length does not match chain order");
    AgentState dx(x.size());
    for (std::size_t j = 0; j + 1 < x.size(); ++j) dx[j] = x[j + 1];
    dx.back() = dyn.b * u;
    return dx;
}

}  // namespace optcon
