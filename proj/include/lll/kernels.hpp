#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>

#include "lll/disorder.hpp"
#include "lll/lattice.hpp"

namespace lll {

/// kappa = B/4, the only free parameter of the lowest-level kernel.
struct KernelParams {
    double kappa;
    double two_kappa_over_pi;
    double sqrt_pi_over_2kappa;

    explicit KernelParams(double k) : kappa(k) {
        if (!(k > 0.0)) throw std::invalid_argument("KernelParams: kappa must be positive");
        two_kappa_over_pi = 2.0 * k / M_PI;
        sqrt_pi_over_2kappa = std::sqrt(M_PI / (2.0 * k));
    }
};

/// z ^ z' = Re z * Im z' - Im z * Re z'.
inline double wedge(cd z, cd zp) { return z.real() * zp.imag() - z.imag() * zp.real(); }

/// Magnitude/phase pair for kernel values; survives kappa >= 500 where the
/// linear-domain value underflows.
struct LogComplex {
    double log_mod;
    double phase;

    cd value() const {
        const double m = std::exp(log_mod);
        return cd(m * std::cos(phase), m * std::sin(phase));
    }
};

inline LogComplex log_projection_kernel(cd z, cd zp, const KernelParams& p) {
    return {std::log(p.two_kappa_over_pi) - p.kappa * std::norm(z - zp),
            -2.0 * p.kappa * wedge(z, zp)};
}

/// P0(z,z') = (2 kappa / pi) exp(-kappa |z-z'|^2 - 2 i kappa z ^ z').
inline cd projection_kernel(cd z, cd zp, const KernelParams& p) {
    return log_projection_kernel(z, zp, p).value();
}

inline LogComplex log_coherent_state(cd zeta, cd z, const KernelParams& p) {
    const cd cross = std::conj(zeta) * z;
    return {0.5 * std::log(p.two_kappa_over_pi) + 2.0 * p.kappa * cross.real() -
                p.kappa * (std::norm(zeta) + std::norm(z)),
            2.0 * p.kappa * cross.imag()};
}

/// f_zeta(z) = sqrt(2 kappa / pi) exp(2 kappa conj(zeta) z - kappa(|zeta|^2 + |z|^2));
/// equals sqrt(pi / 2 kappa) P0(z, zeta) and has unit L^2 norm.
inline cd coherent_state(cd zeta, cd z, const KernelParams& p) {
    return log_coherent_state(zeta, z, p).value();
}

/// Overlap <f_zeta, f_zeta'> = sqrt(pi/2kappa) f_zeta'(zeta) = (pi/2kappa) P0(zeta, zeta').
inline cd coherent_overlap(cd zeta, cd zetap, const KernelParams& p) {
    const LogComplex lp = log_projection_kernel(zeta, zetap, p);
    return LogComplex{lp.log_mod - std::log(p.two_kappa_over_pi), lp.phase}.value();
}

/// K(s) = 9 + 8 e^{-s} + 4 sqrt(pi/s) + 4/s; strictly decreasing on (0,inf).
inline double k_bound(double s) {
    if (!(s > 0.0)) throw std::domain_error("k_bound: s must be positive");
    return 9.0 + 8.0 * std::exp(-s) + 4.0 * std::sqrt(M_PI / s) + 4.0 / s;
}

namespace detail {

// Per-site bound on e^{-sigma |zeta_n - c|^2} for sites in the shell
// |n - round(c)|_inf = k: every position in such a box is at distance
// >= k - 1 from c.
inline double shell_site_bound(double sigma, int k) {
    const double d = std::max(0.0, static_cast<double>(k) - 1.0);
    return std::exp(-sigma * d * d);
}

inline double shell_tail_bound(double sigma, int from_shell) {
    double tail = 0.0;
    for (int k = from_shell; k < from_shell + 400; ++k) {
        const double term = 8.0 * static_cast<double>(k) * shell_site_bound(sigma, k);
        tail += term;
        if (term < 1e-300) break;
    }
    return tail;
}

} // namespace detail

/// Truncated sum over realization sites of e^{-s|z-zeta_n|^2 - t|zeta_n-z'|^2},
/// expanded in square shells around the Gaussian weight's center until the
/// analytic tail bound drops below 1e-12 of the partial sum (`max_shell`
/// caps the radius; tests use the cap to confirm truncation stability).
inline double gaussian_lattice_sum(cd z, cd zp, double s, double t, const Realization& real,
                                   int max_shell = -1) {
    if (s < 0.0 || t < 0.0 || s + t <= 0.0)
        throw std::invalid_argument("gaussian_lattice_sum: need s,t >= 0 and s+t > 0");
    const double sigma = s + t;
    const cd c = (s * z + t * zp) / sigma;
    const GaussInt c0{static_cast<std::int64_t>(std::llround(c.real())),
                      static_cast<std::int64_t>(std::llround(c.imag()))};
    const auto& reg = real.region;
    int k_max = 0;
    for (int corner = 0; corner < 4; ++corner) {
        const GaussInt n{reg.center.re + (corner & 1 ? 1 : -1) * reg.half_width(),
                         reg.center.im + (corner & 2 ? 1 : -1) * reg.half_width()};
        k_max = std::max<int>(k_max, static_cast<int>((n - c0).norm_inf()));
    }
    if (max_shell >= 0) k_max = std::min(k_max, max_shell);

    double sum = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        for (std::int64_t i = -k; i <= k; ++i)
            for (std::int64_t j = -k; j <= k; ++j) {
                if (std::max(std::llabs(i), std::llabs(j)) != k) continue;
                const GaussInt n{c0.re + i, c0.im + j};
                if (!reg.contains(n)) continue;
                const cd zn = real.zeta_of(reg.index_of(n));
                sum += std::exp(-s * std::norm(z - zn) - t * std::norm(zn - zp));
            }
        if (k >= 2 && sum > 0.0 && detail::shell_tail_bound(sigma, k + 1) < 1e-12 * sum) break;
    }
    return sum;
}

/// Truncated sum over Gaussian integers m of e^{-alpha(|z-m|^gamma + |z'-m|^gamma)}
/// (Lemma 4.3 quantity; the lattice here is the integer grid itself).
inline double subexp_lattice_sum(cd z, cd zp, double alpha, double gamma) {
    if (!(alpha > 1.0)) throw std::invalid_argument("subexp_lattice_sum: need alpha > 1");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("subexp_lattice_sum: need gamma in (0,1)");
    const cd c = 0.5 * (z + zp);
    const GaussInt c0{static_cast<std::int64_t>(std::llround(c.real())),
                      static_cast<std::int64_t>(std::llround(c.imag()))};
    const double rz = std::abs(z - c0.to_complex());
    const double rzp = std::abs(zp - c0.to_complex());

    double sum = 0.0;
    for (int k = 0; k < 100000; ++k) {
        for (std::int64_t i = -k; i <= k; ++i)
            for (std::int64_t j = -k; j <= k; ++j) {
                if (std::max(std::llabs(i), std::llabs(j)) != k) continue;
                const cd m = cd(static_cast<double>(c0.re + i), static_cast<double>(c0.im + j));
                sum += std::exp(-alpha * (std::pow(std::abs(z - m), gamma) +
                                          std::pow(std::abs(zp - m), gamma)));
            }
        const double dz = std::max(0.0, static_cast<double>(k + 1) - rz);
        const double dzp = std::max(0.0, static_cast<double>(k + 1) - rzp);
        const double shell_bound = 8.0 * static_cast<double>(k + 1) *
                                   std::exp(-alpha * (std::pow(dz, gamma) + std::pow(dzp, gamma)));
        if (k > 2 + static_cast<int>(rz + rzp) && sum > 0.0 && shell_bound < 1e-13 * sum) break;
    }
    return sum;
}

/// Reproducible estimate of C0(gamma): the max of sum / e^{-alpha |z-z'|^gamma}
/// over a declared grid of (z, z', alpha). The constant is existential in the
/// statement; downstream bounds only need some finite value.
inline double c0_estimate(double gamma, double alpha) {
    if (!(alpha > 1.0) || !(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("c0_estimate: parameters out of range");
    const cd anchor(0.3, 0.2);
    const double seps[] = {0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0};
    const double dirs[] = {0.0, M_PI / 7.0, M_PI / 3.0, M_PI / 2.0};
    double worst = 0.0;
    for (double d : seps)
        for (double th : dirs) {
            const cd z = anchor;
            const cd zp = anchor + std::polar(d, th);
            const double ratio = subexp_lattice_sum(z, zp, alpha, gamma) /
                                 std::exp(-alpha * std::pow(std::abs(z - zp), gamma));
            worst = std::max(worst, ratio);
        }
    return worst;
}

} // namespace lll
