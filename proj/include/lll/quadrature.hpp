#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "lll/kernels.hpp"

namespace lll {

struct GaussHermiteRule {
    std::vector<double> nodes;
    std::vector<double> log_weights; // weights stored in log to pair with log integrands
};

/// Golub-Welsch nodes/weights for the weight e^{-x^2}.
inline GaussHermiteRule gauss_hermite(int n) {
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double beta = std::sqrt(static_cast<double>(k) / 2.0);
        J(k, k - 1) = beta;
        J(k - 1, k) = beta;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    GaussHermiteRule rule;
    rule.nodes.resize(n);
    rule.log_weights.resize(n);
    const double log_sqrt_pi = 0.5 * std::log(M_PI);
    for (int k = 0; k < n; ++k) {
        rule.nodes[k] = es.eigenvalues()(k);
        const double v0 = es.eigenvectors()(0, k);
        rule.log_weights[k] = log_sqrt_pi + 2.0 * std::log(std::abs(v0));
    }
    return rule;
}

using LogFunction = std::function<LogComplex(cd)>;

/// Tensor Gauss-Hermite integral of conj(f) * g over the plane, with nodes
/// scaled to the e^{-2 kappa |w - center|^2} envelope the integrand carries.
/// Everything is assembled in log form, so node-weight products never
/// overflow even when the envelope correction e^{x^2} is astronomically big.
inline cd quad_inner_product(const LogFunction& f, const LogFunction& g, const KernelParams& p,
                             cd center, int n_nodes) {
    const GaussHermiteRule rule = gauss_hermite(n_nodes);
    const double scale = std::sqrt(2.0 * p.kappa);
    cd acc(0.0, 0.0);
    for (int i = 0; i < n_nodes; ++i) {
        const double xi = rule.nodes[i];
        for (int j = 0; j < n_nodes; ++j) {
            const double xj = rule.nodes[j];
            const cd w(center.real() + xi / scale, center.imag() + xj / scale);
            const LogComplex fv = f(w);
            const LogComplex gv = g(w);
            const double lm = fv.log_mod + gv.log_mod + rule.log_weights[i] +
                              rule.log_weights[j] + xi * xi + xj * xj;
            const double ph = gv.phase - fv.phase;
            acc += LogComplex{lm, ph}.value();
        }
    }
    return acc / (2.0 * p.kappa);
}

/// Node-count heuristic: resolve the Gaussian envelope displaced by the
/// farthest coherent-state center. Validated against the closed-form overlap.
inline int quad_nodes_for(const KernelParams& p, double max_center_dist) {
    const double q = std::sqrt(2.0 * p.kappa) * max_center_dist;
    return std::max(40, static_cast<int>(std::ceil(q * q / 2.0 + 6.0 * q)) + 20);
}

} // namespace lll
