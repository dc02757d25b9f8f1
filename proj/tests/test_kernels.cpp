#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "lll/kernels.hpp"
#include "lll/quadrature.hpp"
#include "lll/rng.hpp"

using namespace lll;
using Catch::Approx;

TEST_CASE("wedge product") {
    CHECK(wedge(cd(1.0, 0.0), cd(0.0, 1.0)) == 1.0);
    CHECK(wedge(cd(0.7, -0.3), cd(0.7, -0.3)) == 0.0);
    SplitMix64 g(7);
    for (int i = 0; i < 100; ++i) {
        const cd z(g.uniform01() * 4 - 2, g.uniform01() * 4 - 2);
        const cd zp(g.uniform01() * 4 - 2, g.uniform01() * 4 - 2);
        CHECK(wedge(z, zp) == Approx(-wedge(zp, z)).margin(1e-15));
    }
}

TEST_CASE("projection kernel diagonal and modulus") {
    const KernelParams p(3.0);
    CHECK(projection_kernel(cd(0.4, -1.2), cd(0.4, -1.2), p).real() ==
          Approx(2.0 * 3.0 / M_PI).epsilon(1e-14));
    SplitMix64 g(11);
    for (int i = 0; i < 100; ++i) {
        const cd z(g.uniform01() * 4 - 2, g.uniform01() * 4 - 2);
        const cd zp(g.uniform01() * 4 - 2, g.uniform01() * 4 - 2);
        const cd v = projection_kernel(z, zp, p);
        CHECK(std::abs(v) ==
              Approx(p.two_kappa_over_pi * std::exp(-p.kappa * std::norm(z - zp))).epsilon(1e-12));
        // Hermitian kernel
        const cd w = projection_kernel(zp, z, p);
        CHECK(std::abs(v - std::conj(w)) < 1e-14 * std::abs(v) + 1e-300);
    }
}

TEST_CASE("coherent state matches sqrt(pi/2kappa) P0(z, zeta)") {
    const KernelParams p(2.5);
    SplitMix64 g(3);
    for (int i = 0; i < 50; ++i) {
        const cd zeta(g.uniform01() * 2 - 1, g.uniform01() * 2 - 1);
        const cd z(g.uniform01() * 2 - 1, g.uniform01() * 2 - 1);
        const cd lhs = coherent_state(zeta, z, p);
        const cd rhs = p.sqrt_pi_over_2kappa * projection_kernel(z, zeta, p);
        CHECK(std::abs(lhs - rhs) < 1e-13 * std::abs(rhs) + 1e-300);
    }
    // |f_zeta(zeta)| = sqrt(2 kappa / pi)
    const cd zeta(0.3, -0.8);
    CHECK(std::abs(coherent_state(zeta, zeta, p)) ==
          Approx(std::sqrt(p.two_kappa_over_pi)).epsilon(1e-13));
}

TEST_CASE("coherent state norm and overlap by quadrature") {
    const KernelParams p(2.0);
    const cd zeta(0.4, -0.3), zetap(-0.2, 0.5);
    auto f = [&](cd w) { return log_coherent_state(zeta, w, p); };
    auto fp = [&](cd w) { return log_coherent_state(zetap, w, p); };
    const int nodes = quad_nodes_for(p, 1.0);

    const cd nrm = quad_inner_product(f, f, p, zeta, nodes);
    CHECK(nrm.real() == Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(nrm.imag()) < 1e-8);

    const cd ov = quad_inner_product(f, fp, p, 0.5 * (zeta + zetap), nodes);
    const cd closed = p.sqrt_pi_over_2kappa * coherent_state(zetap, zeta, p);
    CHECK(std::abs(ov - closed) < 1e-8 * std::abs(closed));
}

TEST_CASE("reproducing property on a coherent-state combination") {
    const KernelParams p(2.0);
    const cd z1(0.2, 0.1), z2(-0.4, 0.3), z0(0.15, -0.2);
    // phi = f_z1 + 0.5 i f_z2; quadrature of P0(z0, .) phi should return phi(z0)
    auto phi_log = [&](cd w) -> LogComplex {
        const cd v = coherent_state(z1, w, p) + cd(0.0, 0.5) * coherent_state(z2, w, p);
        return {std::log(std::abs(v)), std::arg(v)};
    };
    auto proj_log = [&](cd w) -> LogComplex {
        // conj(P0(z0, w)) so that quad_inner_product's conj(f) g gives P0(z0,.) phi
        const LogComplex l = log_projection_kernel(z0, w, p);
        return {l.log_mod, -l.phase};
    };
    const cd projected = quad_inner_product(proj_log, phi_log, p, z0, quad_nodes_for(p, 1.0));
    const cd direct = coherent_state(z1, z0, p) + cd(0.0, 0.5) * coherent_state(z2, z0, p);
    CHECK(std::abs(projected - direct) < 1e-7 * std::abs(direct));
}

TEST_CASE("K(s) values and monotonicity") {
    CHECK(k_bound(1e6) - 9.0 < 1e-2);
    // direct arithmetic from the printed formula
    CHECK(k_bound(1.0) == Approx(9.0 + 8.0 / M_E + 4.0 * std::sqrt(M_PI) + 4.0).epsilon(1e-15));
    CHECK_THROWS_AS(k_bound(0.0), std::domain_error);
    CHECK_THROWS_AS(k_bound(-2.0), std::domain_error);
    double prev = k_bound(1.0);
    for (double s = 1.5; s < 200.0; s *= 1.5) {
        const double v = k_bound(s);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("threshold where K(s) drops below 10") {
    // bisection oracle on the monotone tail 8 e^{-s} + 4 sqrt(pi/s) + 4/s
    double lo = 1.0, hi = 200.0;
    REQUIRE(k_bound(lo) > 10.0);
    REQUIRE(k_bound(hi) < 10.0);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (k_bound(mid) > 10.0 ? lo : hi) = mid;
    }
    const double threshold = 0.5 * (lo + hi);
    CHECK(threshold > 55.0);
    CHECK(threshold < 60.0);
    // frozen from this bisection
    CHECK(threshold == Approx(57.98957077562915).epsilon(1e-12));
}

TEST_CASE("gaussian lattice sum: single site and truncation stability") {
    DisorderModel m = centers_model();
    const Realization r1 = sample_realization(m, BoxRegion({0, 0}, 1), 5);
    CHECK(gaussian_lattice_sum(cd(0, 0), cd(0, 0), 1.0, 1.0, r1) == Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(gaussian_lattice_sum(cd(0, 0), cd(0, 0), 0.0, 0.0, r1),
                    std::invalid_argument);

    const Realization r = sample_realization(uniform_model(), BoxRegion({0, 0}, 25), 42);
    SplitMix64 g(19);
    for (int i = 0; i < 20; ++i) {
        const double s = 0.5 + 4.0 * g.uniform01();
        const double t = 0.5 + 4.0 * g.uniform01();
        const cd z(2.0 * g.uniform01() - 1.0, 2.0 * g.uniform01() - 1.0);
        const cd zp(2.0 * g.uniform01() - 1.0, 2.0 * g.uniform01() - 1.0);
        const double full = gaussian_lattice_sum(z, zp, s, t, r);
        const double base = gaussian_lattice_sum(z, zp, s, t, r, 5);
        const double doubled = gaussian_lattice_sum(z, zp, s, t, r, 10);
        CHECK(std::abs(doubled - base) < 1e-10 * std::abs(base));
        CHECK(std::abs(full - doubled) < 1e-10 * std::abs(full));
    }
}

TEST_CASE("Lemma 2.1 inequality on random tuples") {
    const Realization r = sample_realization(uniform_model(), BoxRegion({0, 0}, 25), 99);
    SplitMix64 g(23);
    for (int i = 0; i < 1000; ++i) {
        const double s = 0.5 + 7.5 * g.uniform01();
        const double t = 0.5 + 7.5 * g.uniform01();
        const double sep = 6.0 * g.uniform01();
        const double th = 2.0 * M_PI * g.uniform01();
        const cd z(g.uniform01() - 0.5, g.uniform01() - 0.5);
        const cd zp = z + std::polar(sep, th);
        const double lhs = gaussian_lattice_sum(z, zp, s, t, r);
        const double rhs =
            k_bound(s + t) * std::exp(-(s * t / (s + t)) * std::norm(z - zp));
        CHECK(lhs <= rhs);
    }
}

TEST_CASE("Lemma 2.1 at t = 0 reproduces the reconstruction bound") {
    const Realization r = sample_realization(uniform_model(), BoxRegion({0, 0}, 25), 7);
    const double kappa = 3.0;
    SplitMix64 g(29);
    for (int i = 0; i < 50; ++i) {
        const cd z(4.0 * g.uniform01() - 2.0, 4.0 * g.uniform01() - 2.0);
        const double lhs = gaussian_lattice_sum(z, cd(0, 0), kappa / 2.0, 0.0, r);
        CHECK(lhs <= k_bound(kappa / 2.0));
    }
}

TEST_CASE("subexponential lattice sum and C0 estimate") {
    CHECK_THROWS_AS(subexp_lattice_sum(cd(0, 0), cd(0, 0), 0.5, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(subexp_lattice_sum(cd(0, 0), cd(0, 0), 2.0, 1.5), std::invalid_argument);

    // z = z' = 0, large alpha: the m = 0 term dominates and the sum tends to 1
    CHECK(subexp_lattice_sum(cd(0, 0), cd(0, 0), 40.0, 0.5) == Approx(1.0).epsilon(1e-6));

    // ratio bounded on the declared grid; estimate non-increasing in alpha
    double prev = std::numeric_limits<double>::infinity();
    for (double alpha : {1.5, 2.0, 4.0, 8.0}) {
        const double c0 = c0_estimate(0.5, alpha);
        CHECK(std::isfinite(c0));
        CHECK(c0 > 0.0);
        CHECK(c0 <= prev * (1.0 + 1e-12));
        prev = c0;
    }
}

TEST_CASE("|H| kernel bound from Lemma 2.1") {
    const double kappa = 2.0;
    const KernelParams p(kappa);
    DisorderModel model = uniform_model();
    const Realization r = sample_realization(model, BoxRegion({0, 0}, 25), 1);
    const double R = model.strength_radius();
    SplitMix64 g(31);
    for (int i = 0; i < 50; ++i) {
        const cd z(3.0 * g.uniform01() - 1.5, 3.0 * g.uniform01() - 1.5);
        const cd zp(3.0 * g.uniform01() - 1.5, 3.0 * g.uniform01() - 1.5);
        cd acc(0, 0);
        for (std::size_t n = 0; n < r.size(); ++n)
            acc += r.omega[n] * coherent_state(r.zeta_of(n), z, p) *
                   std::conj(coherent_state(r.zeta_of(n), zp, p));
        const double bound = (2.0 * R * kappa / M_PI) * k_bound(2.0 * kappa) *
                             std::exp(-kappa / 2.0 * std::norm(z - zp));
        CHECK(std::abs(acc) <= bound * (1.0 + 1e-12));
    }
}
