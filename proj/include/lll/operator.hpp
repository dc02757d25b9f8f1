#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lll/disorder.hpp"
#include "lll/kernels.hpp"
#include "lll/lattice.hpp"

namespace lll {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

/// Bare site data (positions + strengths): what the matrix builders actually
/// consume. Realizations provide it in region order; hand-placed
/// configurations (witness constructions, cluster sweeps) build it directly.
struct SiteConfig {
    std::vector<cd> zeta;
    std::vector<double> omega;

    static SiteConfig from(const Realization& r) { return {r.positions(), r.omega}; }
    std::size_t size() const { return zeta.size(); }
};

/// Dense finite-volume lattice matrix M^lambda = M_0 + V^lambda_omega:
/// off-diagonal (pi/2kappa) P0(zeta_m, zeta_n), diagonal 1 - lambda/omega_n.
struct ImpurityMatrix {
    MatrixXcd m;
    double kappa = 0.0;
    double lambda = 0.0;
    std::vector<cd> zeta;
    std::optional<BoxRegion> region; // present when built from a Realization
    std::uint64_t realization_seed = 0;
    std::string realization_id;

    Eigen::Index size() const { return m.rows(); }
};

inline ImpurityMatrix build_matrix(const SiteConfig& sites, double lambda,
                                   const KernelParams& p) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    for (double w : sites.omega)
        if (std::abs(w) < omega_floor)
            throw std::invalid_argument("build_matrix: strength below omega_floor, resample");
    ImpurityMatrix out;
    out.kappa = p.kappa;
    out.lambda = lambda;
    out.zeta = sites.zeta;
    out.m.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out.m(i, i) = cd(1.0 - lambda / sites.omega[i], 0.0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            // (pi/2kappa) P0 = exp(-kappa|dz|^2 - 2 i kappa zeta_i ^ zeta_j)
            const cd v = LogComplex{-p.kappa * std::norm(sites.zeta[i] - sites.zeta[j]),
                                    -2.0 * p.kappa * wedge(sites.zeta[i], sites.zeta[j])}
                             .value();
            out.m(i, j) = v;
            out.m(j, i) = std::conj(v);
        }
    }
    return out;
}

inline ImpurityMatrix build_matrix(const Realization& real, double lambda,
                                   const KernelParams& p) {
    ImpurityMatrix out = build_matrix(SiteConfig::from(real), lambda, p);
    out.region = real.region;
    out.realization_seed = real.seed;
    out.realization_id = real.model_id;
    return out;
}

/// H_Lambda = sum_n omega_n |f_zeta_n><f_zeta_n| in the coherent-state frame.
/// The Gram matrix G has G_mn = <f_zeta_m, f_zeta_n>; the nonzero spectrum of
/// H_Lambda equals the spectrum of D_omega G, computed through the Hermitian
/// similarity G^{1/2} D_omega G^{1/2}.
struct HamiltonianRestriction {
    MatrixXcd gram;
    VectorXd omega;
    double kappa = 0.0;
    MatrixXcd sqrt_gram;  // G^{1/2}, eigenvalues clamped at 1e-14
    VectorXd eigenvalues; // ascending
    MatrixXcd overlaps;   // overlaps(m,k) = <f_zeta_m, psi_k>, psi_k normalized
    std::vector<cd> zeta;

    Eigen::Index size() const { return gram.rows(); }

    /// Spectrum for modified strengths, reusing the cached G^{1/2}.
    VectorXd spectrum_with(const VectorXd& w) const {
        const MatrixXcd b = sqrt_gram * w.cast<cd>().asDiagonal() * sqrt_gram;
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(b, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }
};

inline HamiltonianRestriction build_hamiltonian_restriction(const SiteConfig& sites,
                                                            const KernelParams& p) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    HamiltonianRestriction hr;
    hr.kappa = p.kappa;
    hr.zeta = sites.zeta;
    hr.omega = Eigen::Map<const VectorXd>(sites.omega.data(), n);
    hr.gram.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        hr.gram(i, i) = cd(1.0, 0.0);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const cd v = LogComplex{-p.kappa * std::norm(sites.zeta[i] - sites.zeta[j]),
                                    -2.0 * p.kappa * wedge(sites.zeta[i], sites.zeta[j])}
                             .value();
            hr.gram(i, j) = v;
            hr.gram(j, i) = std::conj(v);
        }
    }
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eg(hr.gram);
    // tight clusters make the f's nearly parallel; clamp keeps G^{1/2} usable
    VectorXd clamped = eg.eigenvalues().cwiseMax(1e-14);
    hr.sqrt_gram =
        eg.eigenvectors() * clamped.cwiseSqrt().asDiagonal() * eg.eigenvectors().adjoint();
    const MatrixXcd b = hr.sqrt_gram * hr.omega.cast<cd>().asDiagonal() * hr.sqrt_gram;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(b);
    hr.eigenvalues = es.eigenvalues();
    // psi_k = sum_m c_m f_m with c = G^{-1/2} y_k; then <f_m, psi_k> = (G^{1/2} y_k)_m
    hr.overlaps = hr.sqrt_gram * es.eigenvectors();
    return hr;
}

inline HamiltonianRestriction build_hamiltonian_restriction(const Realization& real,
                                                            const KernelParams& p) {
    return build_hamiltonian_restriction(SiteConfig::from(real), p);
}

/// (H phi)(z) = (pi/2kappa) sum_n omega_n P0(z, zeta_n) phi(zeta_n) for a
/// function known by its values at the impurity sites.
inline cd apply_hamiltonian(const Realization& real, const KernelParams& p,
                            const std::vector<cd>& site_values, cd z) {
    if (site_values.size() != real.size())
        throw std::invalid_argument("apply_hamiltonian: need a value at every impurity site");
    cd acc(0.0, 0.0);
    for (std::size_t n = 0; n < real.size(); ++n) {
        const cd zn = real.zeta_of(n);
        const cd k =
            LogComplex{-p.kappa * std::norm(z - zn), -2.0 * p.kappa * wedge(z, zn)}.value();
        acc += real.omega[n] * k * site_values[n];
    }
    return acc;
}

/// phi_k(z) = z^k psi_zeta(z) e^{-kappa |z|^2} with psi_zeta the canonical
/// product over the region's sites of (1 - z/zeta_n) e^{z/zeta_n + z^2/(2 zeta_n^2)}.
/// Vanishes exactly at every site, so H_Lambda phi_k = 0 by construction.
/// Evaluation is a sum of log factors with separate phase tracking.
struct ZeroMode {
    int k = 1;
    double kappa = 0.0;
    std::vector<cd> zeta;

    LogComplex log_eval(cd z) const {
        const double neg_inf = -std::numeric_limits<double>::infinity();
        if (z == cd(0.0, 0.0)) return {neg_inf, 0.0};
        cd exponent = static_cast<double>(k) * std::log(z);
        for (const cd& zn : zeta) {
            if (z == zn) return {neg_inf, 0.0}; // the factor (1 - z/zeta_n) vanishes
            const cd ratio = z / zn;
            exponent += std::log(cd(1.0, 0.0) - ratio) + ratio + 0.5 * ratio * ratio;
        }
        return {exponent.real() - kappa * std::norm(z), exponent.imag()};
    }

    cd value(cd z) const {
        const LogComplex lv = log_eval(z);
        return std::isinf(lv.log_mod) ? cd(0.0, 0.0) : lv.value();
    }
};

inline ZeroMode zero_mode(const Realization& real, int k, const KernelParams& p) {
    if (k < 1) throw std::invalid_argument("zero_mode: need k >= 1");
    std::vector<cd> zs = real.positions();
    for (const cd& zn : zs)
        if (zn == cd(0.0, 0.0))
            throw std::invalid_argument("zero_mode: a site sits at the origin; shift the region");
    return ZeroMode{k, p.kappa, std::move(zs)};
}

struct WitnessReport {
    Realization realization;
    double residual = 0.0;
    double tail_radius = 0.0; // D of the proof's tail condition
    double cluster_offset = 0.0;
};

namespace detail {

// Smallest D with sum over |zeta_n| >= D of e^{-kappa |zeta_n - zeta_0|^2}
// provably below delta/4R, using the square-shell tail bound around zeta_0.
inline double witness_tail_radius(double kappa, double delta, double strength_radius) {
    const double target = delta / (4.0 * strength_radius);
    for (int d = 2; d < 1000; ++d) {
        if (shell_tail_bound(kappa, d - 1) < target) return static_cast<double>(d);
    }
    throw std::runtime_error("witness_tail_radius: no radius found");
}

} // namespace detail

/// ||H_Lambda f_zeta_c - E f_zeta_c|| through the Gram matrix: the coefficient
/// vector of the residual in the coherent-state frame is D_omega G e_c - E e_c
/// and its norm is sqrt(v* G v).
inline double witness_residual(const Realization& r, double E, const KernelParams& p,
                               GaussInt center = {0, 0}) {
    const HamiltonianRestriction hr = build_hamiltonian_restriction(r, p);
    const auto n0 = static_cast<Eigen::Index>(r.region.index_of(center));
    VectorXcd v = hr.gram.col(n0).cwiseProduct(hr.omega.cast<cd>());
    v(n0) -= E;
    return std::sqrt(std::max(0.0, std::real(v.dot(hr.gram * v))));
}

/// Proof construction of Lemma 3.1: strengths E/4 on B = {0, 1, i, 1+i} whose
/// positions cluster near the shared box corner, near-zero strengths (set to
/// omega_floor) everywhere else inside radius D. Returns the realization and
/// the residual ||H_Lambda f_zeta0 - E f_zeta0|| computed through the Gram matrix.
inline WitnessReport lemma31_witness(double E, double delta, const KernelParams& p,
                                     const DisorderModel& model) {
    model.validate();
    const double a4 = 4.0 * model.a();
    const double b4 = 4.0 * model.b();
    if (E < a4 - 1e-12 || E > b4 + 1e-12)
        throw std::invalid_argument("lemma31_witness: E outside [4a, 4b]");
    if (!(delta > 0.0)) throw std::invalid_argument("lemma31_witness: delta must be positive");

    const double R = model.strength_radius();
    const double D = detail::witness_tail_radius(p.kappa, delta, R);
    const int L = 2 * static_cast<int>(std::ceil(D)) + 3;

    Realization r;
    r.region = BoxRegion({0, 0}, L);
    r.model_id = model.id + ":lemma31";
    r.seed = 0;
    r.omega.assign(r.region.size(), model.b() > 0.0 ? omega_floor : -omega_floor);
    r.tilde.assign(r.region.size(), cd(0.0, 0.0));

    double h = 0.2; // corner-cluster half-offset
    if (std::abs(E) > 0.0) {
        const double target = delta / (4.0 * std::abs(E) * std::sqrt(2.0 * p.kappa));
        h = std::min(0.2, target / (2.0 * std::sqrt(2.0)));
        if (h < 1e-9)
            throw std::invalid_argument(
                "lemma31_witness: delta too small, clustering collides with omega_floor scale");
    }
    const GaussInt bset[4] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    const double sx[4] = {-1.0, 1.0, -1.0, 1.0};
    const double sy[4] = {-1.0, -1.0, 1.0, 1.0};
    const cd corner(0.5, 0.5);
    double omega_b = E / 4.0;
    if (std::abs(omega_b) < omega_floor) omega_b = model.b() > 0.0 ? omega_floor : -omega_floor;
    for (int i = 0; i < 4; ++i) {
        const auto idx = r.region.index_of(bset[i]);
        r.set_position(idx, corner + cd(sx[i] * h, sy[i] * h));
        r.omega[idx] = omega_b;
    }

    WitnessReport rep;
    rep.residual = witness_residual(r, E, p);
    rep.realization = std::move(r);
    rep.tail_radius = D;
    rep.cluster_offset = h;
    return rep;
}

} // namespace lll
