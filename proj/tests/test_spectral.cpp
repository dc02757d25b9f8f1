#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <complex>

#include "lll/spectral.hpp"

using namespace lll;
using Catch::Approx;

namespace {

SiteConfig random_sites(std::size_t n, double spread, std::uint64_t seed) {
    SplitMix64 g(seed);
    SiteConfig s;
    for (std::size_t i = 0; i < n; ++i) {
        s.zeta.emplace_back(spread * (g.uniform01() - 0.5), spread * (g.uniform01() - 0.5));
        double w = 2.0 * g.uniform01() - 1.0;
        while (std::abs(w) < 0.05) w = 2.0 * g.uniform01() - 1.0;
        s.omega.push_back(w);
    }
    return s;
}

} // namespace

TEST_CASE("eigendecompose: diagonal, closed form, validation") {
    MatrixXcd d = MatrixXcd::Zero(3, 3);
    d(0, 0) = 0.7;
    d(1, 1) = -1.2;
    d(2, 2) = 0.1;
    const SpectralData sd = eigendecompose(d);
    CHECK(sd.eigenvalues(0) == Approx(-1.2));
    CHECK(sd.eigenvalues(1) == Approx(0.1));
    CHECK(sd.eigenvalues(2) == Approx(0.7));

    // N = 2 quadratic-formula oracle
    MatrixXcd two(2, 2);
    two << cd(0.3, 0.0), cd(0.2, -0.4), cd(0.2, 0.4), cd(-0.5, 0.0);
    const double tr = 0.3 - 0.5;
    const double det = 0.3 * -0.5 - std::norm(cd(0.2, -0.4));
    const double disc = std::sqrt(tr * tr / 4.0 - det);
    const SpectralData s2 = eigendecompose(two);
    CHECK(s2.eigenvalues(0) == Approx(tr / 2.0 - disc).epsilon(1e-12));
    CHECK(s2.eigenvalues(1) == Approx(tr / 2.0 + disc).epsilon(1e-12));

    MatrixXcd nonherm = two;
    nonherm(0, 1) = cd(0.9, 0.0);
    CHECK_THROWS_AS(eigendecompose(nonherm), std::invalid_argument);

    // residual invariant and eigenvector unitarity on a bigger instance
    const ImpurityMatrix m = build_matrix(random_sites(20, 3.0, 5), 0.2, KernelParams(1.5));
    const SpectralData big = eigendecompose(m);
    CHECK(big.residual < 1e-10 * m.m.cwiseAbs().maxCoeff());
    const MatrixXcd vv = big.eigenvectors.adjoint() * big.eigenvectors;
    CHECK((vv - MatrixXcd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("green function basics") {
    const KernelParams p(2.0);

    // diagonal M at E = 0: Gamma_nn = 1/(1 - lambda/omega_n); far-apart sites
    SiteConfig sites{{cd(0, 0), cd(40, 0), cd(0, 40)}, {0.9, -0.7, 0.4}};
    const double lambda = 0.25;
    const ImpurityMatrix m = build_matrix(sites, lambda, p);
    const SpectralData sd = eigendecompose(m);
    for (Eigen::Index i = 0; i < 3; ++i) {
        const double expect = 1.0 / (1.0 - lambda / sites.omega[static_cast<std::size_t>(i)]);
        CHECK(green_entry(sd, 0.0, i, i).real() == Approx(expect).epsilon(1e-10));
    }

    // E at an eigenvalue: distance 0 and the singularity error path
    const double e0 = sd.eigenvalues(1);
    CHECK(distance_to_spectrum(sd, e0) == 0.0);
    CHECK_THROWS_AS(green_matrix(sd, e0), std::runtime_error);

    const SiteConfig rnd = random_sites(10, 2.0, 7);
    const ImpurityMatrix mr = build_matrix(rnd, 0.1, p);
    const SpectralData sr = eigendecompose(mr);
    const double e1 = 3.7, e2 = -2.9; // far from the spectrum
    const MatrixXcd g1 = green_matrix(sr, e1);
    const MatrixXcd g2 = green_matrix(sr, e2);

    // Green symmetry for real E off the spectrum
    CHECK((g1 - g1.adjoint()).cwiseAbs().maxCoeff() < 1e-12);

    // resolvent identity Gamma(E1) - Gamma(E2) = (E1 - E2) Gamma(E1) Gamma(E2)
    const MatrixXcd lhs = g1 - g2;
    const MatrixXcd rhs = (e1 - e2) * g1 * g2;
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);

    // d(E, sigma) = ||(M - E)^{-1}||^{-1}
    Eigen::JacobiSVD<MatrixXcd> svd(mr.m - e1 * MatrixXcd::Identity(10, 10));
    CHECK(distance_to_spectrum(sr, e1) ==
          Approx(svd.singularValues().minCoeff()).epsilon(1e-10));
}

TEST_CASE("spectrum distance is Lipschitz in the perturbation") {
    const KernelParams p(1.2);
    SplitMix64 g(3);
    for (int i = 0; i < 20; ++i) {
        const SiteConfig sites = random_sites(8, 2.0, 50 + static_cast<std::uint64_t>(i));
        const double lambda = 0.6 * g.uniform01();
        const ImpurityMatrix m0 = build_matrix(sites, 0.0, p);
        const ImpurityMatrix ml = build_matrix(sites, lambda, p);
        const double E = 2.0 * g.uniform01() - 1.0;
        Eigen::SelfAdjointEigenSolver<MatrixXcd> diff(ml.m - m0.m, Eigen::EigenvaluesOnly);
        const double perturbation = diff.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(distance_to_spectrum(eigendecompose(ml), E) >=
              distance_to_spectrum(eigendecompose(m0), E) - perturbation - 1e-12);
    }
}

TEST_CASE("large kappa pushes Green to the diagonal resolvent") {
    const DisorderModel model = uniform_model();
    const Realization r = sample_realization(model, BoxRegion({0, 0}, 5), 17);
    const double lambda = 0.3;
    double prev_off = std::numeric_limits<double>::infinity();
    for (double kappa : {50.0, 100.0, 200.0}) {
        const ImpurityMatrix m = build_matrix(r, lambda, KernelParams(kappa));
        const MatrixXcd gm = green_matrix(eigendecompose(m), 0.0);
        double off = 0.0, diag_err = 0.0;
        for (Eigen::Index i = 0; i < gm.rows(); ++i) {
            for (Eigen::Index j = 0; j < gm.cols(); ++j)
                if (i != j) off = std::max(off, std::abs(gm(i, j)));
            diag_err = std::max(diag_err,
                                std::abs(gm(i, i) - cd(1.0 / (1.0 - lambda /
                                                                  r.omega[static_cast<std::size_t>(
                                                                      i)]))));
        }
        CHECK(off <= prev_off + 1e-12);
        prev_off = off;
        if (kappa == 200.0) {
            CHECK(off < 1e-6);
            CHECK(diag_err < 1e-6);
        }
    }
}

TEST_CASE("regularity check geometry and RA") {
    const KernelParams p(200.0);
    const DisorderModel model = uniform_model();
    const RegularityParams rp;

    // single-site box: annulus empty -> parameter error
    const Realization r1 = sample_realization(model, BoxRegion({0, 0}, 1), 3);
    const ImpurityMatrix m1 = build_matrix(r1, 1.0, p);
    CHECK_THROWS_AS(regularity_check(m1, rp, 1.0, 0.0), std::invalid_argument);

    const Realization r = sample_realization(model, BoxRegion({0, 0}, 9), 23);
    const ImpurityMatrix m = build_matrix(r, 1.0, p);
    const SpectralData sd = eigendecompose(m);

    // E placed on an eigenvalue: RA fails
    const RegularityVerdict bad = regularity_check(m, rp, 1.0, sd.eigenvalues(3));
    CHECK_FALSE(bad.ra_pass);
    CHECK_FALSE(bad.overall());

    RegularityParams wrong = rp;
    wrong.s = 0.4;
    CHECK_THROWS_AS(regularity_check(m, wrong, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("RB holds at rate kappa^{1/4} for most high-field configurations") {
    const double kappa = 200.0;
    const KernelParams p(kappa);
    const DisorderModel model = uniform_model();
    const RegularityParams rp;
    const int L = 9;
    const double m0 = std::pow(kappa, 0.25);
    int rb_ok = 0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
        const Realization r =
            sample_realization(model, BoxRegion({0, 0}, L), 40000 + static_cast<std::uint64_t>(t));
        const ImpurityMatrix m = build_matrix(r, 1.0, p);
        if (regularity_check(m, rp, m0, 0.0).rb_pass) rb_ok++;
    }
    const double floor_frac = 1.0 - 2.0 / std::pow(static_cast<double>(L), 4.0);
    CHECK(static_cast<double>(rb_ok) / trials >= floor_frac);
}

TEST_CASE("eigenfunction reconstruction at sites") {
    const KernelParams p(2.0);
    const DisorderModel model = uniform_model();

    // single site: psi proportional to f_zeta0
    const Realization r1 = sample_realization(model, BoxRegion({0, 0}, 1), 5);
    VectorXcd xi1(1);
    xi1 << cd(0.8, -0.2);
    const double lam1 = r1.omega[0];
    SplitMix64 g(9);
    for (int i = 0; i < 20; ++i) {
        const cd z(2.0 * g.uniform01() - 1.0, 2.0 * g.uniform01() - 1.0);
        const cd psi = reconstruct_eigenfunction(xi1, r1, lam1, p, z);
        // psi = xi_0 sqrt(pi/2kappa)/lambda * f_zeta0
        const cd expect =
            xi1(0) * p.sqrt_pi_over_2kappa / lam1 * coherent_state(r1.zeta_of(0), z, p);
        CHECK(std::abs(psi - expect) < 1e-12 * std::abs(expect) + 1e-300);
    }

    CHECK_THROWS_AS(reconstruct_eigenfunction(xi1, r1, 0.0, p, cd(0, 0)), std::invalid_argument);

    // kernel vectors of M^lambda reproduce xi at the sites (site equation)
    const Realization r = sample_realization(model, BoxRegion({0, 0}, 3), 44);
    const HamiltonianRestriction hr = build_hamiltonian_restriction(r, p);
    // pick the eigenvalue of largest modulus: safely nonzero
    Eigen::Index kbig = 0;
    hr.eigenvalues.cwiseAbs().maxCoeff(&kbig);
    const double lambda = hr.eigenvalues(kbig);
    const ImpurityMatrix m = build_matrix(r, lambda, p);
    const SpectralData sd = eigendecompose(m);
    Eigen::Index k0 = 0;
    sd.eigenvalues.cwiseAbs().minCoeff(&k0);
    const VectorXcd xi = sd.eigenvectors.col(k0);
    REQUIRE(std::abs(sd.eigenvalues(k0)) < 1e-10);

    const double scale = xi.cwiseAbs().maxCoeff();
    for (std::size_t n = 0; n < r.size(); ++n) {
        const cd psi = reconstruct_eigenfunction(xi, r, lambda, p, r.zeta_of(n));
        CHECK(std::abs(r.omega[n] * psi - xi(static_cast<Eigen::Index>(n))) < 1e-8 * scale);
    }
}

TEST_CASE("decay transfer: exponential xi gives exponentially bounded psi") {
    const KernelParams p(2.0);
    const Realization r = sample_realization(uniform_model(), BoxRegion({0, 0}, 7), 13);
    const double lambda = 0.5, m_rate = 1.0;
    VectorXcd xi(static_cast<Eigen::Index>(r.size()));
    SplitMix64 g(2);
    for (std::size_t n = 0; n < r.size(); ++n)
        xi(static_cast<Eigen::Index>(n)) =
            std::polar(std::exp(-m_rate * std::abs(r.zeta_of(n))) * (0.5 + 0.5 * g.uniform01()),
                       2.0 * M_PI * g.uniform01());
    double c = 0.0;
    for (std::size_t n = 0; n < r.size(); ++n)
        c = std::max(c, std::abs(xi(static_cast<Eigen::Index>(n))) *
                            std::exp(m_rate * std::abs(r.zeta_of(n))));
    const double pref = (c / lambda) * std::exp(m_rate * m_rate / (2.0 * p.kappa)) *
                        k_bound(p.kappa / 2.0);
    for (int i = 0; i < 100; ++i) {
        const cd z(8.0 * g.uniform01() - 4.0, 8.0 * g.uniform01() - 4.0);
        const cd psi = reconstruct_eigenfunction(xi, r, lambda, p, z);
        CHECK(std::abs(psi) <= pref * std::exp(-m_rate * std::abs(z)) * (1.0 + 1e-12));
    }
}

TEST_CASE("decay rate fit") {
    // exact exponential on a centers-only configuration (peak exactly at 0)
    const Realization r = sample_realization(centers_model(), BoxRegion({0, 0}, 7), 1);
    VectorXcd xi(static_cast<Eigen::Index>(r.size()));
    for (std::size_t n = 0; n < r.size(); ++n)
        xi(static_cast<Eigen::Index>(n)) = std::exp(-3.0 * std::abs(r.zeta_of(n)));
    const DecayFit f = decay_rate_fit(xi, r);
    CHECK(f.rate == Approx(3.0).margin(1e-6));
    CHECK(f.r_squared == Approx(1.0).margin(1e-9));

    // constant vector: zero rate
    VectorXcd flat = VectorXcd::Constant(static_cast<Eigen::Index>(r.size()), cd(0.3, 0.1));
    CHECK(decay_rate_fit(flat, r).rate == Approx(0.0).margin(1e-12));

    // fewer than 3 usable points
    VectorXcd sparse = VectorXcd::Zero(static_cast<Eigen::Index>(r.size()));
    sparse(0) = 1.0;
    sparse(1) = 0.5;
    CHECK_THROWS_AS(decay_rate_fit(sparse, r), std::invalid_argument);
}

TEST_CASE("mid-spectrum eigenvectors localize at high field") {
    const double kappa = 200.0;
    const KernelParams p(kappa);
    const DisorderModel model = uniform_model();
    std::vector<double> rates;
    for (std::uint64_t t = 0; t < 10; ++t) {
        const Realization r = sample_realization(model, BoxRegion({0, 0}, 11), 7000 + t);
        const HamiltonianRestriction hr = build_hamiltonian_restriction(r, p);
        // eigenvalue nearest mid-band 0.5
        Eigen::Index k = 0;
        (hr.eigenvalues.array() - 0.5).abs().minCoeff(&k);
        VectorXcd xi(hr.size());
        for (Eigen::Index n = 0; n < hr.size(); ++n)
            xi(n) = hr.omega(n) * hr.overlaps(n, k);
        rates.push_back(decay_rate_fit(xi, r).rate);
    }
    std::sort(rates.begin(), rates.end());
    const double median = rates[rates.size() / 2];
    INFO("median fitted rate = " << median);
    CHECK(median >= std::pow(kappa, 0.25));
}

TEST_CASE("eigenvalue motion matches the overlap identity") {
    const KernelParams p(1.6);

    // rank one: derivative is exactly 1
    SiteConfig one{{cd(0.1, -0.3)}, {0.5}};
    const HamiltonianRestriction h1 = build_hamiltonian_restriction(one, p);
    const EigenvalueMotion m1 = eigenvalue_motion(h1, 0, 0, 1e-6);
    CHECK(m1.overlap_sq == Approx(1.0).epsilon(1e-12));
    CHECK(m1.derivative_fd == Approx(1.0).epsilon(1e-8));

    // random instances: central difference vs |<f, psi>|^2
    for (std::uint64_t inst = 0; inst < 20; ++inst) {
        const SiteConfig sites = random_sites(8, 2.5, 300 + inst);
        const HamiltonianRestriction hr = build_hamiltonian_restriction(sites, p);
        for (Eigen::Index k = 0; k < hr.size(); ++k) {
            EigenvalueMotion em;
            try {
                em = eigenvalue_motion(hr, 2, k, 1e-5);
            } catch (const std::runtime_error&) {
                continue; // near-degenerate refused
            }
            CHECK(std::abs(em.derivative_fd - em.overlap_sq) < 1e-6);
        }
    }

    // monotonicity: every sorted eigenvalue is nondecreasing in omega_n
    const SiteConfig sites = random_sites(6, 2.0, 999);
    const HamiltonianRestriction hr = build_hamiltonian_restriction(sites, p);
    VectorXd prev;
    for (int step = 0; step < 20; ++step) {
        VectorXd w = hr.omega;
        w(1) = -1.0 + 2.0 * step / 19.0;
        const VectorXd spec = hr.spectrum_with(w);
        if (step > 0)
            for (Eigen::Index k = 0; k < spec.size(); ++k)
                CHECK(spec(k) >= prev(k) - 1e-12);
        prev = spec;
    }

    // coincident strengths at far-separated sites: near-degenerate is refused
    SiteConfig degen{{cd(0, 0), cd(30, 0)}, {0.5, 0.5}};
    const HamiltonianRestriction hd = build_hamiltonian_restriction(degen, p);
    CHECK_THROWS_AS(eigenvalue_motion(hd, 0, 0, 1e-5), std::runtime_error);
}
