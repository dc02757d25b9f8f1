#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "lll/operator.hpp"

namespace lll {

struct SpectralData {
    VectorXd eigenvalues; // ascending
    MatrixXcd eigenvectors;
    double residual = 0.0; // max-abs of M V - V Lambda
};

/// Hermitian eigendecomposition with the residual invariant checked up front;
/// ill-conditioned decompositions are flagged by throwing, never silently kept.
inline SpectralData eigendecompose(const MatrixXcd& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw std::invalid_argument("eigendecompose: input not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigendecompose: solver failed");
    SpectralData sd;
    sd.eigenvalues = es.eigenvalues();
    sd.eigenvectors = es.eigenvectors();
    sd.residual = (m * sd.eigenvectors -
                   sd.eigenvectors * sd.eigenvalues.cast<cd>().asDiagonal())
                      .cwiseAbs()
                      .maxCoeff();
    if (sd.residual > 1e-10 * scale)
        throw std::runtime_error("eigendecompose: residual above 1e-10 * ||M||");
    return sd;
}

inline SpectralData eigendecompose(const ImpurityMatrix& m) { return eigendecompose(m.m); }

inline double distance_to_spectrum(const SpectralData& sd, double E) {
    return (sd.eigenvalues.array() - E).abs().minCoeff();
}

inline double distance_to_spectrum(const ImpurityMatrix& m, double E) {
    return distance_to_spectrum(eigendecompose(m), E);
}

/// Gamma(E) = (M - E)^{-1} assembled from spectral data.
inline MatrixXcd green_matrix(const SpectralData& sd, double E) {
    if (distance_to_spectrum(sd, E) < 1e-14)
        throw std::runtime_error("green_matrix: E within 1e-14 of the spectrum");
    const VectorXd inv = (sd.eigenvalues.array() - E).inverse();
    return sd.eigenvectors * inv.cast<cd>().asDiagonal() * sd.eigenvectors.adjoint();
}

inline cd green_entry(const SpectralData& sd, double E, Eigen::Index i, Eigen::Index j) {
    if (distance_to_spectrum(sd, E) < 1e-14)
        throw std::runtime_error("green_entry: E within 1e-14 of the spectrum");
    const VectorXd inv = (sd.eigenvalues.array() - E).inverse();
    cd acc(0.0, 0.0);
    for (Eigen::Index k = 0; k < sd.eigenvalues.size(); ++k)
        acc += sd.eigenvectors(i, k) * inv(k) * std::conj(sd.eigenvectors(j, k));
    return acc;
}

/// <n| Gamma |n'> addressed by lattice sites; requires region metadata.
inline cd green_entry(const ImpurityMatrix& m, double E, GaussInt n, GaussInt np) {
    if (!m.region) throw std::invalid_argument("green_entry: matrix carries no region");
    const SpectralData sd = eigendecompose(m);
    return green_entry(sd, E, static_cast<Eigen::Index>(m.region->index_of(n)),
                       static_cast<Eigen::Index>(m.region->index_of(np)));
}

/// Parameters of the (m,E)-regularity definition and the Theorem 3.4 checks.
struct RegularityParams {
    double beta = 0.5;
    double s = 0.75;
    double gamma = 0.5;
    double u = 7.0;

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta out of (0,1)");
        if (!(s > 0.5 && s < 1.0)) throw std::invalid_argument("s out of (1/2,1)");
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma out of (0,1)");
        if (!(u > 3.0)) throw std::invalid_argument("u must exceed 3");
    }
};

struct RegularityVerdict {
    bool ra_pass = false;
    bool rb_pass = false;
    double ra_margin = 0.0;          // d(E, sigma) - e^{-L^beta}/2
    double rb_worst_log_ratio = 0.0; // max over annulus of log|Gamma| + mL
    bool overall() const { return ra_pass && rb_pass; }
};

/// (RA): d(E, sigma(M)) > e^{-L^beta}/2.
/// (RB): |<center| Gamma(E) |n'>| <= e^{-mL} for every n' in the boundary
/// annulus, compared in the log domain.
inline RegularityVerdict regularity_check(const ImpurityMatrix& m, const RegularityParams& rp,
                                          double decay_m, double E) {
    rp.validate();
    if (!m.region) throw std::invalid_argument("regularity_check: matrix carries no region");
    const BoxRegion& reg = *m.region;
    const double L = static_cast<double>(reg.side);
    const auto annulus = annulus_indices(reg, rp.s); // throws if geometry degenerate

    const SpectralData sd = eigendecompose(m);
    RegularityVerdict v;
    const double d = distance_to_spectrum(sd, E);
    v.ra_margin = d - 0.5 * std::exp(-std::pow(L, rp.beta));
    v.ra_pass = v.ra_margin > 0.0;

    const double neg_inf = -std::numeric_limits<double>::infinity();
    if (d < 1e-14) {
        v.rb_pass = false;
        v.rb_worst_log_ratio = std::numeric_limits<double>::infinity();
        return v;
    }
    // Center column of Gamma by direct solve: substitution keeps the
    // multiplicative smallness of far entries, where the eigenvector
    // expansion would bury them under additive eps/d noise.
    const auto c = static_cast<Eigen::Index>(reg.index_of(reg.center));
    const auto n = m.m.rows();
    VectorXcd rhs = VectorXcd::Zero(n);
    rhs(c) = cd(1.0, 0.0);
    const VectorXcd col =
        (m.m - E * MatrixXcd::Identity(n, n)).partialPivLu().solve(rhs);
    double worst = neg_inf;
    for (std::size_t idx : annulus) {
        const double a = std::abs(col(static_cast<Eigen::Index>(idx)));
        const double lg = a > 0.0 ? std::log(a) : neg_inf;
        worst = std::max(worst, lg + decay_m * L);
    }
    v.rb_worst_log_ratio = worst;
    v.rb_pass = worst <= 0.0;
    return v;
}

/// psi(z) = (pi / 2 kappa lambda) sum_n P0(z, zeta_n) xi_n for a kernel vector
/// xi of M^lambda; at the sites, omega_n psi(zeta_n) returns xi_n.
inline cd reconstruct_eigenfunction(const VectorXcd& xi, const Realization& real, double lambda,
                                    const KernelParams& p, cd z) {
    if (lambda == 0.0)
        throw std::invalid_argument("reconstruct_eigenfunction: lambda must be nonzero");
    if (static_cast<std::size_t>(xi.size()) != real.size())
        throw std::invalid_argument("reconstruct_eigenfunction: xi size mismatch");
    cd acc(0.0, 0.0);
    for (std::size_t n = 0; n < real.size(); ++n) {
        const cd zn = real.zeta_of(n);
        acc += LogComplex{-p.kappa * std::norm(z - zn), -2.0 * p.kappa * wedge(z, zn)}.value() *
               xi(static_cast<Eigen::Index>(n));
    }
    return acc / lambda;
}

struct DecayFit {
    double rate = 0.0;
    double r_squared = 0.0;
    int points_used = 0;
    cd center;
};

/// Least-squares slope of log|xi_n| against |zeta_n - zeta_center| with the
/// center at the peak entry; localization centers are random, so the fit is
/// anchored at argmax rather than the box center. Entries below 1e-280 are
/// excluded.
inline DecayFit decay_rate_fit(const VectorXcd& xi, const std::vector<cd>& zeta) {
    if (static_cast<std::size_t>(xi.size()) != zeta.size())
        throw std::invalid_argument("decay_rate_fit: size mismatch");
    Eigen::Index peak = 0;
    xi.cwiseAbs().maxCoeff(&peak);
    const cd zc = zeta[static_cast<std::size_t>(peak)];
    std::vector<double> xs, ys;
    for (Eigen::Index n = 0; n < xi.size(); ++n) {
        const double a = std::abs(xi(n));
        if (a < 1e-280) continue;
        xs.push_back(std::abs(zeta[static_cast<std::size_t>(n)] - zc));
        ys.push_back(std::log(a));
    }
    if (xs.size() < 3) throw std::invalid_argument("decay_rate_fit: fewer than 3 usable points");
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (denom <= 0.0) throw std::invalid_argument("decay_rate_fit: degenerate abscissae");
    const double slope = (n * sxy - sx * sy) / denom;
    const double icept = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    const double mean_y = sy / n;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double fit = icept + slope * xs[i];
        ss_res += (ys[i] - fit) * (ys[i] - fit);
        ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
    }
    DecayFit f;
    f.rate = -slope;
    f.r_squared = ss_tot > 1e-30 ? 1.0 - ss_res / ss_tot : 1.0;
    f.points_used = static_cast<int>(xs.size());
    f.center = zc;
    return f;
}

inline DecayFit decay_rate_fit(const VectorXcd& xi, const Realization& real) {
    return decay_rate_fit(xi, real.positions());
}

struct EigenvalueMotion {
    double derivative_fd = 0.0;
    double overlap_sq = 0.0;
};

/// Central finite difference of lambda_k under omega_n -> omega_n +- h against
/// |<f_zeta_n, psi_k>|^2 (the Feynman-Hellmann identity of the crossing
/// argument). Near-degenerate eigenvalues are refused: the paper's basis
/// choice there is non-constructive, so the contract stays testable.
inline EigenvalueMotion eigenvalue_motion(const HamiltonianRestriction& hr, Eigen::Index n,
                                          Eigen::Index k, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("eigenvalue_motion: h must be positive");
    if (n < 0 || n >= hr.size() || k < 0 || k >= hr.size())
        throw std::invalid_argument("eigenvalue_motion: index out of range");
    const double norm_h = hr.eigenvalues.cwiseAbs().maxCoeff();
    double gap = std::numeric_limits<double>::infinity();
    if (k > 0) gap = std::min(gap, hr.eigenvalues(k) - hr.eigenvalues(k - 1));
    if (k + 1 < hr.size()) gap = std::min(gap, hr.eigenvalues(k + 1) - hr.eigenvalues(k));
    if (!(gap > 10.0 * h * std::max(norm_h, 1.0)))
        throw std::runtime_error("eigenvalue_motion: eigenvalue too close to degenerate");

    VectorXd wp = hr.omega, wm = hr.omega;
    wp(n) += h;
    wm(n) -= h;
    const VectorXd lp = hr.spectrum_with(wp);
    const VectorXd lm = hr.spectrum_with(wm);
    EigenvalueMotion out;
    out.derivative_fd = (lp(k) - lm(k)) / (2.0 * h);
    out.overlap_sq = std::norm(hr.overlaps(n, k));
    return out;
}

} // namespace lll
