#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace optcon {

class GraphError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Directed edge `from -> to` with positive weight. Node indices are 1-based,
/// matching how scenario files and the CLI refer to agents.
struct Edge {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 1.0;

    bool operator==(const Edge&) const = default;
};

/// Weighted digraph stored as a dense adjacency matrix. Entry (i, j) is the
/// weight with which node i hears node j, so an edge j -> i sets a_ij.
class Digraph {
  public:
    Digraph() = default;
    explicit Digraph(std::size_t n) : n_(n), weights_(n * n, 0.0) {}

    std::size_t size() const { return n_; }

    // 0-based accessors.
    double weight(std::size_t i, std::size_t j) const { return weights_[i * n_ + j]; }
    void set_weight(std::size_t i, std::size_t j, double w) { weights_[i * n_ + j] = w; }

    double in_degree(std::size_t i) const {
        double d = 0.0;
        for (std::size_t j = 0; j < n_; ++j) d += weight(i, j);
        return d;
    }
    double out_degree(std::size_t i) const {
        double d = 0.0;
        for (std::size_t j = 0; j < n_; ++j) d += weight(j, i);
        return d;
    }

    /// Edges in row-major order of the adjacency matrix (by receiving node,
    /// then by sending node), 1-based.
    std::vector<Edge> edges() const {
        std::vector<Edge> out;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j)
                if (weight(i, j) != 0.0) out.push_back({j + 1, i + 1, weight(i, j)});
        return out;
    }

    Eigen::MatrixXd adjacency() const {
        Eigen::MatrixXd a(n_, n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) a(i, j) = weight(i, j);
        return a;
    }

    bool operator==(const Digraph&) const = default;

  private:
    std::size_t n_ = 0;
    std::vector<double> weights_;
};

inline Digraph build_digraph(std::size_t n, const std::vector<Edge>& edges) {
    if (n == 0) throw GraphError("digraph needs at least one node");
    Digraph g(n);
    for (const auto& e : edges) {
        std::ostringstream where;
        where << "edge (" << e.from << " -> " << e.to << ", w=" << e.weight << ")";
        if (e.from < 1 || e.from > n || e.to < 1 || e.to > n)
            throw GraphError(where.str() + ": node index out of range 1.." + std::to_string(n));
        if (e.from == e.to) throw GraphError(where.str() + ": self-loop");
        if (!(e.weight > 0.0) || !std::isfinite(e.weight))
            throw GraphError(where.str() + ": weight must be positive and finite");
        g.set_weight(e.to - 1, e.from - 1, e.weight);
    }
    return g;
}

/// L = D_in - A. Rows sum to zero by construction.
inline Eigen::MatrixXd laplacian(const Digraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd lap = -g.adjacency();
    for (Eigen::Index i = 0; i < n; ++i) {
        // Diagonal as the negated sum of the row so that L * 1 = 0 holds in
        // floating point too.
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i) s += lap(i, j);
        lap(i, i) = -s;
    }
    return lap;
}

inline bool is_weight_balanced(const Digraph& g, double tol = 1e-12) {
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g.in_degree(i) - g.out_degree(i)) > tol) return false;
    return true;
}

namespace detail {

// Nodes reachable from `start` following edges forward (sender -> receiver)
// or backward.
inline std::vector<bool> reachable(const Digraph& g, std::size_t start, bool forward) {
    std::vector<bool> seen(g.size(), false);
    std::vector<std::size_t> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (std::size_t w = 0; w < g.size(); ++w) {
            const double a = forward ? g.weight(w, u) : g.weight(u, w);
            if (a > 0.0 && !seen[w]) {
                seen[w] = true;
                stack.push_back(w);
            }
        }
    }
    return seen;
}

}  // namespace detail

inline bool is_strongly_connected(const Digraph& g) {
    if (g.size() <= 1) return true;
    const auto fwd = detail::reachable(g, 0, true);
    const auto bwd = detail::reachable(g, 0, false);
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!fwd[i] || !bwd[i]) return false;
    return true;
}

/// Digraph restricted to the listed 0-based nodes, renumbered in order.
inline Digraph induced_subgraph(const Digraph& g, const std::vector<std::size_t>& nodes) {
    Digraph sub(nodes.size());
    for (std::size_t a = 0; a < nodes.size(); ++a)
        for (std::size_t b = 0; b < nodes.size(); ++b)
            sub.set_weight(a, b, g.weight(nodes[a], nodes[b]));
    return sub;
}

struct SpectralInfo {
    double lambda1 = 0.0;  // smallest; ~0 for balanced graphs
    double lambda2 = 0.0;
    double lambdaN = 0.0;
};

/// Extreme eigenvalues of Sym(L) = (L + L^T) / 2. The graph must be
/// weight-balanced and strongly connected, otherwise lambda2 is meaningless
/// for gain design.
inline SpectralInfo sym_spectrum(const Digraph& g) {
    if (!is_weight_balanced(g, 1e-9)) throw GraphError("graph is not weight-balanced");
    if (!is_strongly_connected(g)) throw GraphError("graph is not strongly connected");

    const Eigen::MatrixXd lap = laplacian(g);
    const Eigen::MatrixXd sym = 0.5 * (lap + lap.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw GraphError("eigen solve of Sym(L) failed");

    const auto& ev = es.eigenvalues();  // ascending
    SpectralInfo info;
    info.lambda1 = ev(0);
    info.lambda2 = ev.size() > 1 ? ev(1) : 0.0;
    info.lambdaN = ev(ev.size() - 1);
    if (std::abs(info.lambda1) > 1e-10)
        throw GraphError("smallest eigenvalue of Sym(L) is not zero: " + std::to_string(info.lambda1));
    return info;
}

}  // namespace optcon
