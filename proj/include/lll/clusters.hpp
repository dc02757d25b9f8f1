#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include <quadmath.h>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "lll/operator.hpp"

namespace lll {

// ---------------------------------------------------------------------------
// geometric clusters: components of the 1/8-proximity graph
// ---------------------------------------------------------------------------

struct ClusterDecomposition {
    std::vector<std::vector<std::size_t>> clusters; // site indices per cluster
    double threshold = 0.125;
    int max_cluster_size = 0;
    std::optional<Eigen::MatrixXd> intercluster_distance; // filled on request
};

namespace detail {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

} // namespace detail

/// Connected components of the graph with edges exactly where
/// |zeta_m - zeta_n| < threshold. For thresholds <= 1 only pairs in adjacent
/// boxes can be edges (|dn|_inf >= 2 forces distance >= 1), so the scan is
/// bucketed; a full pair scan backs larger thresholds. A component of five or
/// more sites is geometrically impossible at the default threshold and is
/// reported as an error.
inline ClusterDecomposition build_cluster_graph(const Realization& real,
                                                double threshold = 0.125,
                                                bool with_distance_matrix = false) {
    const std::size_t n = real.size();
    detail::UnionFind uf(n);
    const double t2 = threshold * threshold;
    if (threshold <= 1.0) {
        const auto& reg = real.region;
        for (std::size_t k = 0; k < n; ++k) {
            const GaussInt g = reg.site(k);
            for (int di = 0; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    if (di == 0 && dj <= 0) continue;
                    const GaussInt gg{g.re + di, g.im + dj};
                    if (!reg.contains(gg)) continue;
                    const std::size_t kk = reg.index_of(gg);
                    if (std::norm(real.separation(k, kk)) < t2) uf.unite(k, kk);
                }
        }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (std::norm(real.separation(i, j)) < t2) uf.unite(i, j);
    }

    std::vector<std::vector<std::size_t>> by_root(n);
    for (std::size_t k = 0; k < n; ++k) by_root[uf.find(k)].push_back(k);
    ClusterDecomposition dec;
    dec.threshold = threshold;
    for (auto& c : by_root)
        if (!c.empty()) {
            dec.max_cluster_size = std::max<int>(dec.max_cluster_size, static_cast<int>(c.size()));
            dec.clusters.push_back(std::move(c));
        }
    if (dec.max_cluster_size > 4)
        throw std::runtime_error("build_cluster_graph: cluster with more than 4 sites");

    if (with_distance_matrix) {
        const auto nc = static_cast<Eigen::Index>(dec.clusters.size());
        Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nc, nc);
        for (Eigen::Index a = 0; a < nc; ++a)
            for (Eigen::Index b = a + 1; b < nc; ++b) {
                double best = std::numeric_limits<double>::infinity();
                for (std::size_t i : dec.clusters[static_cast<std::size_t>(a)])
                    for (std::size_t j : dec.clusters[static_cast<std::size_t>(b)])
                        best = std::min(best, std::abs(real.separation(i, j)));
                d(a, b) = d(b, a) = best;
            }
        dec.intercluster_distance = std::move(d);
    }
    return dec;
}

/// Minimum distance between sites of different clusters. The bucketed scan
/// covers all pairs within |dn|_inf <= 2 and reports 2.0 when every farther
/// pair (distance >= 2) would exceed that; pass exact=true for the full scan.
inline double min_intercluster_distance(const Realization& real, const ClusterDecomposition& dec,
                                        bool exact = false) {
    const std::size_t n = real.size();
    std::vector<std::size_t> label(n, 0);
    for (std::size_t c = 0; c < dec.clusters.size(); ++c)
        for (std::size_t k : dec.clusters[c]) label[k] = c;
    double best = std::numeric_limits<double>::infinity();
    if (exact) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if (label[i] != label[j])
                    best = std::min(best, std::abs(real.separation(i, j)));
        return best;
    }
    const auto& reg = real.region;
    for (std::size_t k = 0; k < n; ++k) {
        const GaussInt g = reg.site(k);
        for (int di = 0; di <= 2; ++di)
            for (int dj = -2; dj <= 2; ++dj) {
                if (di == 0 && dj <= 0) continue;
                const GaussInt gg{g.re + di, g.im + dj};
                if (!reg.contains(gg)) continue;
                const std::size_t kk = reg.index_of(gg);
                if (label[k] != label[kk])
                    best = std::min(best, std::abs(real.separation(k, kk)));
            }
    }
    return std::min(best, 2.0);
}

// ---------------------------------------------------------------------------
// cluster blocks and the Lemma 4.7 determinant bound
// ---------------------------------------------------------------------------

struct ClusterBlock {
    MatrixXcd block;
    cd det{0.0, 0.0};
    double inverse_norm = 0.0;
};

inline ClusterBlock cluster_block(const ImpurityMatrix& m, const std::vector<std::size_t>& sites) {
    ClusterBlock cb;
    const auto k = static_cast<Eigen::Index>(sites.size());
    cb.block.resize(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = 0; j < k; ++j)
            cb.block(i, j) = m.m(static_cast<Eigen::Index>(sites[static_cast<std::size_t>(i)]),
                                 static_cast<Eigen::Index>(sites[static_cast<std::size_t>(j)]));
    cb.det = cb.block.determinant();
    Eigen::JacobiSVD<MatrixXcd> svd(cb.block);
    const double smin = svd.singularValues().minCoeff();
    if (!(smin > 0.0)) throw std::runtime_error("cluster_block: singular block");
    cb.inverse_norm = 1.0 / smin;
    return cb;
}

/// Lemma 4.7 lower bound with the numerically observed constant C = 1:
/// prod_{m<n} (1 - e^{-kappa |zeta_m - zeta_n|^2}). Accepts 1 to 4 positions;
/// near-coincident positions are rejected, the bound vanishes there and the
/// determinants underflow.
inline double det_lower_bound(const std::vector<cd>& positions, double kappa) {
    if (positions.empty() || positions.size() > 4)
        throw std::invalid_argument("det_lower_bound: need 1 to 4 positions");
    double prod = 1.0;
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (std::size_t j = i + 1; j < positions.size(); ++j) {
            const double d = std::abs(positions[i] - positions[j]);
            if (d < 1e-8) throw std::invalid_argument("det_lower_bound: coincident positions");
            prod *= -std::expm1(-kappa * d * d);
        }
    return prod;
}

// ---------------------------------------------------------------------------
// closed-form cluster determinants G3, G4 and the ratios f3, f4
//
// Evaluated in long double: near the factorization zeros the determinant is
// a tiny difference of order-one terms.
// ---------------------------------------------------------------------------

namespace detail {

using ld = long double;

inline constexpr ld pi_ld = 3.14159265358979323846264338327950288L;

// scalar shims so the determinant forms can run in long double or __float128
inline ld fp_exp(ld x) { return std::exp(x); }
inline ld fp_cos(ld x) { return std::cos(x); }
inline ld fp_sin(ld x) { return std::sin(x); }
inline ld fp_expm1(ld x) { return std::expm1(x); }
inline __float128 fp_exp(__float128 x) { return expq(x); }
inline __float128 fp_cos(__float128 x) { return cosq(x); }
inline __float128 fp_sin(__float128 x) { return sinq(x); }
inline __float128 fp_expm1(__float128 x) { return expm1q(x); }

inline ld reduce_angle_even(ld phi) {
    phi = std::fmod(phi, 2.0L * pi_ld);
    if (phi < 0.0L) phi = -phi;
    if (phi > pi_ld) phi = 2.0L * pi_ld - phi;
    return phi;
}

template <class T>
T g3_impl(T a, T b, T phi) {
    const T c2 = a * a + b * b - T(2) * a * b * fp_cos(phi);
    return T(1) - fp_exp(T(-2) * a * a) - fp_exp(T(-2) * b * b) - fp_exp(T(-2) * c2) +
           T(2) * fp_exp(-(a * a + b * b + c2)) * fp_cos(T(2) * a * b * fp_sin(phi));
}

template <class T>
struct G4Geometry {
    T u2, v2, w2, d_abu, d_acv, d_bcw, d_uvw;
};

template <class T>
G4Geometry<T> g4_geometry(T a, T b, T c, T phi, T psi) {
    G4Geometry<T> g;
    g.u2 = b * b + a * a - T(2) * b * a * fp_cos(phi);
    g.v2 = c * c + a * a - T(2) * a * c * fp_cos(psi);
    g.w2 = b * b + c * c - T(2) * b * c * fp_cos(phi + psi);
    g.d_abu = T(0.5) * b * a * fp_sin(phi);
    g.d_acv = T(0.5) * a * c * fp_sin(psi);
    g.d_bcw = T(0.5) * b * c * fp_sin(phi + psi);
    g.d_uvw = g.d_abu + g.d_acv - g.d_bcw;
    return g;
}

template <class T>
T g4_impl(T a, T b, T c, T phi, T psi) {
    const T a2 = a * a, b2 = b * b, c2 = c * c;
    const G4Geometry<T> g = g4_geometry(a, b, c, phi, psi);
    T r = T(1);
    r -= fp_exp(T(-2) * a2) + fp_exp(T(-2) * b2) + fp_exp(T(-2) * c2);
    r -= fp_exp(T(-2) * g.u2) + fp_exp(T(-2) * g.v2) + fp_exp(T(-2) * g.w2);
    r += fp_exp(T(-2) * (b2 + g.v2)) + fp_exp(T(-2) * (a2 + g.w2)) +
         fp_exp(T(-2) * (c2 + g.u2));
    r += T(2) * fp_exp(-(a2 + b2 + g.u2)) * fp_cos(T(4) * g.d_abu);
    r += T(2) * fp_exp(-(b2 + c2 + g.w2)) * fp_cos(T(4) * g.d_bcw);
    r += T(2) * fp_exp(-(a2 + c2 + g.v2)) * fp_cos(T(4) * g.d_acv);
    r += T(2) * fp_exp(-(g.u2 + g.v2 + g.w2)) * fp_cos(T(4) * g.d_uvw);
    r -= T(2) * fp_exp(-(b2 + c2 + g.u2 + g.v2)) * fp_cos(T(4) * (g.d_acv + g.d_abu));
    r -= T(2) * fp_exp(-(a2 + c2 + g.u2 + g.w2)) * fp_cos(T(4) * (g.d_abu - g.d_bcw));
    r -= T(2) * fp_exp(-(a2 + b2 + g.v2 + g.w2)) * fp_cos(T(4) * (g.d_acv - g.d_bcw));
    return r;
}

template <class T>
T one_minus_exp(T x2) { return -fp_expm1(-x2); }

template <class T>
T f3_impl(T a, T b, T phi) {
    const T c2 = a * a + b * b - T(2) * a * b * fp_cos(phi);
    return g3_impl(a, b, phi) / (one_minus_exp(a * a) * one_minus_exp(b * b) * one_minus_exp(c2));
}

template <class T>
T f4_impl(T a, T b, T c, T phi, T psi) {
    const G4Geometry<T> g = g4_geometry(a, b, c, phi, psi);
    const T denom = one_minus_exp(a * a) * one_minus_exp(b * b) * one_minus_exp(c * c) *
                    one_minus_exp(g.u2) * one_minus_exp(g.v2) * one_minus_exp(g.w2);
    return g4_impl(a, b, c, phi, psi) / denom;
}

} // namespace detail

/// G3(a,b,phi): determinant of a three-site cluster block at lambda = 0 in the
/// scaled variables a = sqrt(kappa)|zeta2-zeta1|, b = sqrt(kappa)|zeta3-zeta1|,
/// phi the angle between them.
inline double g3(double a, double b, double phi) {
    if (a < 0.0 || b < 0.0) throw std::invalid_argument("g3: lengths must be nonnegative");
    return static_cast<double>(
        detail::g3_impl(static_cast<detail::ld>(a), static_cast<detail::ld>(b),
                        detail::reduce_angle_even(static_cast<detail::ld>(phi))));
}

/// f3 = G3 / ((1-e^{-a^2})(1-e^{-b^2})(1-e^{-c^2})); the paper's compactness
/// argument bounds it below, and numerically the infimum is 1.
inline double f3(double a, double b, double phi) {
    if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("f3: need a, b > 0");
    const auto al = static_cast<detail::ld>(a);
    const auto bl = static_cast<detail::ld>(b);
    const detail::ld ph = detail::reduce_angle_even(static_cast<detail::ld>(phi));
    const detail::ld c2 = al * al + bl * bl - 2.0L * al * bl * std::cos(ph);
    if (!(c2 > 0.0L)) throw std::invalid_argument("f3: degenerate c = 0");
    return static_cast<double>(detail::f3_impl(al, bl, ph));
}

/// lim f3(h,h,phi) as h -> 0, i.e. the factored value g3(0,0,phi) = 4, by
/// Richardson extrapolation in quad precision (the determinant cancels to
/// O(h^6) and needs the extra mantissa).
inline double f3_zero_limit(double phi) {
    const __float128 ph = static_cast<__float128>(detail::reduce_angle_even(phi));
    const __float128 h = __float128(0.05);
    const __float128 f1 = detail::f3_impl(h, h, ph);
    const __float128 f2 = detail::f3_impl(h / 2, h / 2, ph);
    return static_cast<double>((__float128(4) * f2 - f1) / __float128(3));
}

/// G4(a,b,c,phi,psi): determinant of a four-site cluster block at lambda = 0.
inline double g4(double a, double b, double c, double phi, double psi) {
    if (a < 0.0 || b < 0.0 || c < 0.0)
        throw std::invalid_argument("g4: lengths must be nonnegative");
    auto ph = static_cast<detail::ld>(phi);
    auto ps = static_cast<detail::ld>(psi);
    ph = std::fmod(ph, 2.0L * detail::pi_ld);
    ps = std::fmod(ps, 2.0L * detail::pi_ld);
    if (ph < 0.0L) { ph = -ph; ps = -ps; } // G4 is even under joint conjugation
    return static_cast<double>(detail::g4_impl(static_cast<detail::ld>(a),
                                               static_cast<detail::ld>(b),
                                               static_cast<detail::ld>(c), ph, ps));
}

inline double f4(double a, double b, double c, double phi, double psi) {
    if (!(a > 0.0 && b > 0.0 && c > 0.0)) throw std::invalid_argument("f4: need a, b, c > 0");
    const auto al = static_cast<detail::ld>(a);
    const auto bl = static_cast<detail::ld>(b);
    const auto cl = static_cast<detail::ld>(c);
    const auto ph = static_cast<detail::ld>(phi);
    const auto ps = static_cast<detail::ld>(psi);
    const detail::G4Geometry<detail::ld> g = detail::g4_geometry(al, bl, cl, ph, ps);
    if (!(g.u2 > 0.0L && g.v2 > 0.0L && g.w2 > 0.0L))
        throw std::invalid_argument("f4: degenerate geometry (u, v or w vanishes)");
    return static_cast<double>(detail::f4_impl(al, bl, cl, ph, ps));
}

/// lim f4(h,h,h,phi,psi) as h -> 0: the factored value g4(0,0,0,phi,psi) = 16/3.
inline double f4_zero_limit(double phi, double psi) {
    const auto ph = static_cast<__float128>(phi);
    const auto ps = static_cast<__float128>(psi);
    const __float128 h = __float128(0.05);
    const __float128 f1 = detail::f4_impl(h, h, h, ph, ps);
    const __float128 f2 = detail::f4_impl(h / 2, h / 2, h / 2, ph, ps);
    return static_cast<double>((__float128(4) * f2 - f1) / __float128(3));
}

/// lim f4(a,b,c,phi,psi) as (a,b) -> 0 in quad precision: the closed form is
/// 4 e^{-2c^2}(e^{2c^2} - 1 - 2c^2 - 2c^4)/(1 - e^{-c^2})^3. The expansion in
/// h carries odd powers (c stays fixed), so the Richardson step is linear.
inline double f4_ab_zero_limit(double c, double phi, double psi) {
    const auto cl = static_cast<__float128>(c);
    const auto ph = static_cast<__float128>(phi);
    const auto ps = static_cast<__float128>(psi);
    const __float128 h = __float128(1e-4);
    const __float128 f1 = detail::f4_impl(h, h, cl, ph, ps);
    const __float128 f2 = detail::f4_impl(h / 2, h / 2, cl, ph, ps);
    return static_cast<double>(__float128(2) * f2 - f1);
}

// ---------------------------------------------------------------------------
// auxiliary bound chain of the four-site proof: h, S, j, k1, k2, k3
// ---------------------------------------------------------------------------

/// h(b,c,theta): the a -> 0 limit core of G4, with w^2 = b^2+c^2-2bc cos(theta).
inline double h_bound(double b, double c, double theta) {
    using detail::ld;
    const auto bl = static_cast<ld>(b), cl = static_cast<ld>(c), th = static_cast<ld>(theta);
    const ld b2 = bl * bl, c2 = cl * cl;
    const ld w2 = b2 + c2 - 2.0L * bl * cl * std::cos(th);
    const ld f = std::exp(-(b2 + c2 + w2));
    const ld s = std::sin(th), co = std::cos(th);
    const ld arg = 2.0L * bl * cl * s;
    ld r = 1.0L;
    r -= (1.0L + 2.0L * b2) * std::exp(-2.0L * b2);
    r -= (1.0L + 2.0L * c2) * std::exp(-2.0L * c2);
    r -= std::exp(-2.0L * w2);
    r += 2.0L * w2 * std::exp(-2.0L * (b2 + c2));
    r += 2.0L * f * std::cos(arg);
    r += 4.0L * bl * cl * f * (co * std::cos(arg) + s * std::sin(arg));
    return static_cast<double>(r);
}

/// S(x,theta) = sin(theta)(cosh(2x cos theta) - cos(2x sin theta)) - x sin(2x sin theta);
/// dh/dtheta = 8 b c e^{-(b^2+c^2+w^2)} S(bc, theta).
inline double s_factor(double x, double theta) {
    const double ct = std::cos(theta), st = std::sin(theta);
    return st * (std::cosh(2.0 * x * ct) - std::cos(2.0 * x * st)) - x * std::sin(2.0 * x * st);
}

/// j(x,theta): S >= (2/45) x^4 j(x,theta) sin(theta); positive for x <= 2.4.
inline double j_poly(double x, double theta) {
    const double s2 = std::sin(theta) * std::sin(theta);
    const double s4 = s2 * s2, s6 = s4 * s2, s8 = s4 * s4;
    const double x2 = x * x, x4 = x2 * x2, x6 = x4 * x2;
    return 15.0 + 2.0 * x2 * s6 - 6.0 * x2 * s4 + (4.0 / 7.0) * x4 * s6 - (1.0 / 7.0) * x4 * s8 -
           (2.0 / 63.0) * x6 * s8;
}

/// S1(x,y) = sinh^2 y - 2y + (2+y)(x^2-y^2) - y^2; controls dk1/dtheta.
inline double s1_factor(double x, double y) {
    const double sh = std::sinh(y);
    return sh * sh - 2.0 * y + (2.0 + y) * (x * x - y * y) - y * y;
}

/// S2(b,c,theta) = 2 sinh^2(bc cos theta) - 4bc cos theta + 3 b^2 c^2 sin^2 theta.
inline double s2_factor(double b, double c, double theta) {
    const double y = b * c * std::cos(theta);
    const double sh = std::sinh(y);
    return 2.0 * sh * sh - 4.0 * y + 3.0 * b * b * c * c * std::sin(theta) * std::sin(theta);
}

namespace detail {

inline ld hk_common(ld b2, ld c2, ld w2) {
    return 1.0L - (1.0L + 2.0L * b2) * std::exp(-2.0L * b2) -
           (1.0L + 2.0L * c2) * std::exp(-2.0L * c2) - std::exp(-2.0L * w2) +
           2.0L * w2 * std::exp(-2.0L * (b2 + c2));
}

} // namespace detail

/// k1: lower bound for h on [0, pi/2] from cos t >= 1 - t^2/2 and sin t >= -t.
inline double k1_bound(double b, double c, double theta) {
    using detail::ld;
    const auto bl = static_cast<ld>(b), cl = static_cast<ld>(c), th = static_cast<ld>(theta);
    const ld b2 = bl * bl, c2 = cl * cl, x = bl * cl;
    const ld w2 = b2 + c2 - 2.0L * x * std::cos(th);
    const ld f = std::exp(-(b2 + c2 + w2));
    const ld s = std::sin(th), co = std::cos(th);
    const ld trunc = 1.0L - 2.0L * x * x * s * s;
    return static_cast<double>(detail::hk_common(b2, c2, w2) + 2.0L * f * trunc +
                               4.0L * x * f * (co * trunc - 2.0L * x * s * s));
}

/// k2: lower bound for h on [pi/2, pi]; the cos(theta) term bounds cos(...) by 1.
inline double k2_bound(double b, double c, double theta) {
    using detail::ld;
    const auto bl = static_cast<ld>(b), cl = static_cast<ld>(c), th = static_cast<ld>(theta);
    const ld b2 = bl * bl, c2 = cl * cl, x = bl * cl;
    const ld w2 = b2 + c2 - 2.0L * x * std::cos(th);
    const ld f = std::exp(-(b2 + c2 + w2));
    const ld s = std::sin(th), co = std::cos(th);
    const ld trunc = 1.0L - 2.0L * x * x * s * s;
    return static_cast<double>(detail::hk_common(b2, c2, w2) + 2.0L * f * trunc +
                               4.0L * x * f * (co - 2.0L * x * s * s));
}

/// tilde-h(s,r): h at theta = 0 after s = 2b^2, r = 2b(c-b), stripped of the
/// positive prefactor (s/r^2) e^s e^{r^2/s}.
inline double h_tilde(double s, double r) {
    using detail::ld;
    const auto sl = static_cast<ld>(s), rl = static_cast<ld>(r);
    const ld em_r = -std::expm1(-rl);     // 1 - e^{-r}
    const ld em_s = -std::expm1(-sl);     // 1 - e^{-s}
    const ld es1s = std::expm1(sl) - sl;  // e^s - 1 - s
    const ld t1 = std::expm1(rl * rl / sl) * sl * es1s / (rl * rl);
    const ld t2 = 2.0L * std::exp(-rl) * sl * em_r / rl;
    const ld t3 = std::exp(-2.0L * rl) * em_s;
    const ld t4 = sl * (1.0L + sl) * em_r * em_r / (rl * rl);
    return static_cast<double>(t1 + t2 - t3 - t4);
}

/// k3: tilde-h with its first term lowered via e^x - 1 >= x + x^2/2;
/// increasing in r with limit 2(cosh s - 1 - s^2/2) > 0 at r -> 0.
inline double k3_bound(double s, double r) {
    if (!(s > 0.0 && r > 0.0)) throw std::invalid_argument("k3_bound: need s, r > 0");
    using detail::ld;
    const auto sl = static_cast<ld>(s), rl = static_cast<ld>(r);
    const ld em_r = -std::expm1(-rl);
    const ld em_s = -std::expm1(-sl);
    const ld es1s = std::expm1(sl) - sl;
    const ld t1 = (1.0L + rl * rl / (2.0L * sl)) * es1s;
    const ld t2 = 2.0L * std::exp(-rl) * sl * em_r / rl;
    const ld t3 = std::exp(-2.0L * rl) * em_s;
    const ld t4 = sl * (1.0L + sl) * em_r * em_r / (rl * rl);
    return static_cast<double>(t1 + t2 - t3 - t4);
}

inline double k3_r0_limit(double s) { return 2.0 * (std::cosh(s) - 1.0 - s * s / 2.0); }

struct AuxBounds {
    double h = 0.0;
    double S = 0.0;
    double j = 0.0;
    int k1_slope_sign = 0;
    int k2_slope_sign = 0;
    double k3 = 0.0;
    double k3_limit = 0.0;
};

inline AuxBounds aux_bounds(double b, double c, double theta, double s, double r) {
    if (!(theta >= 0.0 && theta <= M_PI))
        throw std::invalid_argument("aux_bounds: theta out of [0, pi]");
    AuxBounds out;
    out.h = h_bound(b, c, theta);
    out.S = s_factor(b * c, theta);
    out.j = j_poly(b * c, theta);
    const double st = std::sin(theta);
    const double s1 = s1_factor(b * c, b * c * std::cos(theta));
    const double s2 = s2_factor(b, c, theta);
    auto sgn = [](double x) { return x > 0.0 ? 1 : (x < 0.0 ? -1 : 0); };
    out.k1_slope_sign = sgn(st * s1); // dk1/dtheta = 16 b c sin(theta) F S1
    out.k2_slope_sign = sgn(st * s2); // dk2/dtheta =  8 b c sin(theta) F S2
    out.k3 = k3_bound(s, r);
    out.k3_limit = k3_r0_limit(s);
    return out;
}

// ---------------------------------------------------------------------------
// Lemma 4.8 block machinery
// ---------------------------------------------------------------------------

struct BlockNormReport {
    double script_e = 0.0;   // sup_i ||M_i^{-1}||
    double delta_norm = 0.0; // ||M - Mtilde||, the inter-cluster remainder
    double delta_bound = 0.0; // e^{-kappa/64}
    bool delta_ok = false;    // delta_norm <= bound (asserted for kappa >= pi/2)
};

inline BlockNormReport block_inverse_norm(const ClusterDecomposition& dec,
                                          const ImpurityMatrix& m) {
    BlockNormReport rep;
    for (const auto& c : dec.clusters)
        rep.script_e = std::max(rep.script_e, cluster_block(m, c).inverse_norm);

    MatrixXcd delta = m.m;
    for (const auto& c : dec.clusters)
        for (std::size_t i : c)
            for (std::size_t j : c)
                delta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cd(0.0, 0.0);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(delta, Eigen::EigenvaluesOnly);
    rep.delta_norm = es.eigenvalues().cwiseAbs().maxCoeff();
    rep.delta_bound = std::exp(-m.kappa / 64.0);
    rep.delta_ok = rep.delta_norm <= rep.delta_bound;
    return rep;
}

} // namespace lll
