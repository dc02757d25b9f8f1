#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lll/lattice.hpp"
#include "lll/rng.hpp"

namespace lll {

/// Strengths with |omega| below this floor are redrawn during sampling: the
/// strength measure is absolutely continuous, so omega = 0 has probability
/// zero, but floating-point sampling can still produce it and lambda/omega
/// must stay finite.
inline constexpr double omega_floor = 1e-12;

enum class DensityKind { uniform, table, point };

inline std::string to_string(DensityKind k) {
    switch (k) {
        case DensityKind::uniform: return "uniform";
        case DensityKind::table: return "table";
        case DensityKind::point: return "point";
    }
    return "?";
}

inline DensityKind density_kind_from(const std::string& s) {
    if (s == "uniform") return DensityKind::uniform;
    if (s == "table") return DensityKind::table;
    if (s == "point") return DensityKind::point;
    throw std::invalid_argument("unknown density kind: " + s);
}

/// Probability density on [a,b], either uniform or piecewise constant on an
/// equispaced grid. The declared bound is what downstream Wegner constants
/// consume; it is validated to dominate the table, never re-estimated.
struct StrengthDensity {
    DensityKind kind = DensityKind::uniform;
    double a = -1.0;
    double b = 1.0;
    std::vector<double> table; // cell values, piecewise constant on [a,b]
    double bound = 0.5;        // rho_b

    void validate() const {
        if (!(a <= 0.0 && 0.0 <= b) || !(a < b))
            throw std::invalid_argument("strength density: need a <= 0 <= b with a < b");
        if (kind == DensityKind::point)
            throw std::invalid_argument("strength density: point mass not allowed");
        if (kind == DensityKind::uniform) {
            if (bound < 1.0 / (b - a) - 1e-12)
                throw std::invalid_argument("strength density: declared rho_b below uniform density");
            return;
        }
        if (table.empty()) throw std::invalid_argument("strength density: empty table");
        double mass = 0.0;
        const double w = (b - a) / static_cast<double>(table.size());
        for (double v : table) {
            if (!(v >= 0.0)) throw std::invalid_argument("strength density: negative table value");
            if (v > bound + 1e-12)
                throw std::invalid_argument("strength density: table exceeds declared rho_b");
            mass += v * w;
        }
        if (std::abs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("strength density: table does not integrate to 1");
    }

    double pdf(double x) const {
        if (x < a || x > b) return 0.0;
        if (kind == DensityKind::uniform) return 1.0 / (b - a);
        const double w = (b - a) / static_cast<double>(table.size());
        auto c = std::min(table.size() - 1, static_cast<std::size_t>((x - a) / w));
        return table[c];
    }

    double cdf(double x) const {
        if (x <= a) return 0.0;
        if (x >= b) return 1.0;
        if (kind == DensityKind::uniform) return (x - a) / (b - a);
        const double w = (b - a) / static_cast<double>(table.size());
        double acc = 0.0;
        for (std::size_t c = 0; c < table.size(); ++c) {
            const double hi = a + w * static_cast<double>(c + 1);
            if (x >= hi) {
                acc += table[c] * w;
            } else {
                acc += table[c] * (x - (hi - w));
                break;
            }
        }
        return acc;
    }

    double sample(double u) const {
        if (kind == DensityKind::uniform) return a + (b - a) * u;
        const double w = (b - a) / static_cast<double>(table.size());
        double acc = 0.0;
        for (std::size_t c = 0; c < table.size(); ++c) {
            const double dm = table[c] * w;
            if (u <= acc + dm || c + 1 == table.size()) {
                const double frac = dm > 0.0 ? (u - acc) / dm : 0.5;
                return a + w * (static_cast<double>(c) + std::clamp(frac, 0.0, 1.0));
            }
            acc += dm;
        }
        return b;
    }
};

/// Density of the in-box displacement on B0 = [-1/2,1/2)^2. `point` is the
/// degenerate preset that pins every impurity to its box center.
struct PositionDensity {
    DensityKind kind = DensityKind::uniform;
    std::vector<std::vector<double>> table; // k x k cells over B0, row = x cell
    double bound = 1.0;                     // r_b

    void validate() const {
        if (kind == DensityKind::uniform) {
            if (bound < 1.0 - 1e-12)
                throw std::invalid_argument("position density: declared r_b below uniform density");
            return;
        }
        if (kind == DensityKind::point) return;
        if (table.empty()) throw std::invalid_argument("position density: empty table");
        const std::size_t k = table.size();
        const double cell = 1.0 / static_cast<double>(k);
        double mass = 0.0;
        for (const auto& row : table) {
            if (row.size() != k) throw std::invalid_argument("position density: table not square");
            for (double v : row) {
                if (!(v >= 0.0)) throw std::invalid_argument("position density: negative table value");
                if (v > bound + 1e-12)
                    throw std::invalid_argument("position density: table exceeds declared r_b");
                mass += v * cell * cell;
            }
        }
        if (std::abs(mass - 1.0) > 1e-9)
            throw std::invalid_argument("position density: table does not integrate to 1");
    }

    /// Draws the displacement from two uniforms; the point preset consumes none.
    cd sample(SplitMix64& g) const {
        if (kind == DensityKind::point) return cd(0.0, 0.0);
        if (kind == DensityKind::uniform) {
            const double x = g.uniform01() - 0.5;
            const double y = g.uniform01() - 0.5;
            return cd(x, y);
        }
        const std::size_t k = table.size();
        const double cell = 1.0 / static_cast<double>(k);
        double u = g.uniform01();
        double acc = 0.0;
        std::size_t ci = 0, cj = 0;
        bool found = false;
        for (std::size_t i = 0; i < k && !found; ++i)
            for (std::size_t j = 0; j < k && !found; ++j) {
                const double dm = table[i][j] * cell * cell;
                if (u <= acc + dm) { ci = i; cj = j; found = true; }
                acc += dm;
            }
        if (!found) { ci = k - 1; cj = k - 1; }
        const double x = -0.5 + cell * (static_cast<double>(ci) + g.uniform01());
        const double y = -0.5 + cell * (static_cast<double>(cj) + g.uniform01());
        return cd(x, y);
    }
};

struct DisorderModel {
    std::string id = "uniform";
    StrengthDensity strength;
    PositionDensity position;

    void validate() const {
        strength.validate();
        position.validate();
    }

    double a() const { return strength.a; }
    double b() const { return strength.b; }
    double rho_b() const { return strength.bound; }
    double r_b() const { return position.bound; }
    /// R = max(|a|,|b|); the operator norm scale.
    double strength_radius() const { return std::max(std::abs(strength.a), std::abs(strength.b)); }
    /// Rbar = 40 R, valid as a norm bound once K(2 kappa) < 10.
    double r_bar() const { return 40.0 * strength_radius(); }
};

inline DisorderModel uniform_model(double a = -1.0, double b = 1.0) {
    DisorderModel m;
    m.id = "uniform";
    m.strength.kind = DensityKind::uniform;
    m.strength.a = a;
    m.strength.b = b;
    m.strength.bound = 1.0 / (b - a);
    m.position.kind = DensityKind::uniform;
    m.position.bound = 1.0;
    m.validate();
    return m;
}

/// Uniform strengths, impurities pinned to the box centers.
inline DisorderModel centers_model(double a = -1.0, double b = 1.0) {
    DisorderModel m = uniform_model(a, b);
    m.id = "centers";
    m.position.kind = DensityKind::point;
    return m;
}

inline nlohmann::ordered_json to_json(const DisorderModel& m) {
    nlohmann::ordered_json j;
    j["id"] = m.id;
    j["a"] = m.strength.a;
    j["b"] = m.strength.b;
    j["strength_density"]["kind"] = to_string(m.strength.kind);
    if (m.strength.kind == DensityKind::table) j["strength_density"]["table"] = m.strength.table;
    j["position_density"]["kind"] = to_string(m.position.kind);
    if (m.position.kind == DensityKind::table) j["position_density"]["table"] = m.position.table;
    j["rho_b"] = m.strength.bound;
    j["r_b"] = m.position.bound;
    return j;
}

inline DisorderModel model_from_json(const nlohmann::json& j) {
    DisorderModel m;
    m.id = j.value("id", "custom");
    m.strength.a = j.at("a").get<double>();
    m.strength.b = j.at("b").get<double>();
    m.strength.kind = density_kind_from(j.at("strength_density").at("kind").get<std::string>());
    if (m.strength.kind == DensityKind::table)
        m.strength.table = j.at("strength_density").at("table").get<std::vector<double>>();
    m.strength.bound = j.at("rho_b").get<double>();
    m.position.kind = density_kind_from(j.at("position_density").at("kind").get<std::string>());
    if (m.position.kind == DensityKind::table)
        m.position.table = j.at("position_density").at("table").get<std::vector<std::vector<double>>>();
    m.position.bound = j.at("r_b").get<double>();
    m.validate();
    return m;
}

/// One sampled disorder configuration on a finite box. The stored randomness
/// is the in-box displacement tilde_n; the absolute position is
/// zeta_n = n + tilde_n. Translations relabel displacements bitwise, which
/// keeps the group law and pairwise distances exactly translation invariant.
/// Immutable after construction; safe to share across concurrent trials.
struct Realization {
    BoxRegion region;
    std::vector<double> omega; // strengths, region site order
    std::vector<cd> tilde;     // in-box displacements, region site order
    std::uint64_t seed = 0;
    std::string model_id;

    std::size_t size() const { return omega.size(); }
    double omega_at(GaussInt n) const { return omega[region.index_of(n)]; }
    cd zeta_of(std::size_t k) const { return region.site(k).to_complex() + tilde[k]; }
    cd zeta_at(GaussInt n) const { return zeta_of(region.index_of(n)); }

    std::vector<cd> positions() const {
        std::vector<cd> out(size());
        for (std::size_t k = 0; k < size(); ++k) out[k] = zeta_of(k);
        return out;
    }

    /// Pins site k to an absolute position (test and witness constructions).
    void set_position(std::size_t k, cd zeta) {
        tilde[k] = zeta - region.site(k).to_complex();
    }

    /// Exact separation: integer site difference plus displacement difference.
    cd separation(std::size_t j, std::size_t k) const {
        return (region.site(j) - region.site(k)).to_complex() + (tilde[j] - tilde[k]);
    }
};

inline double sample_strength(const StrengthDensity& d, SplitMix64& g) {
    double w = d.sample(g.uniform01());
    while (std::abs(w) < omega_floor) w = d.sample(g.uniform01());
    return w;
}

/// i.i.d. draws per site from per-site streams keyed by (seed, site), so the
/// same site carries the same draw in any region containing it.
inline Realization sample_realization(const DisorderModel& model, const BoxRegion& region,
                                      std::uint64_t seed) {
    model.validate();
    if (region.size() == 0) throw std::invalid_argument("sample_realization: empty region");
    Realization r;
    r.region = region;
    r.seed = seed;
    r.model_id = model.id;
    r.omega.resize(region.size());
    r.tilde.resize(region.size());
    for (std::size_t k = 0; k < region.size(); ++k) {
        const GaussInt n = region.site(k);
        SplitMix64 g = site_stream(seed, n);
        r.tilde[k] = model.position.sample(g);
        r.omega[k] = sample_strength(model.strength, g);
    }
    return r;
}

/// (tau_m(omega,zeta))_n = (omega_{n-m}, zeta_{n-m}); positions shift by m so
/// each stays in its own unit box.
inline Realization translate_realization(const Realization& real, GaussInt m) {
    Realization out;
    out.region = BoxRegion(real.region.center + m, real.region.side);
    out.seed = real.seed;
    out.model_id = real.model_id;
    out.omega.resize(real.size());
    out.tilde.resize(real.size());
    for (std::size_t k = 0; k < out.region.size(); ++k) {
        const GaussInt n = out.region.site(k);
        const std::size_t src = real.region.index_of(n - m);
        out.omega[k] = real.omega[src];
        out.tilde[k] = real.tilde[src];
    }
    return out;
}

namespace detail {

inline double min_dist2_scan(const Realization& r) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = i + 1; j < r.size(); ++j)
            best = std::min(best, std::norm(r.separation(i, j)));
    return best;
}

// Pairs separated by |dn|_inf >= 4 are at distance >= 3, while some adjacent
// pair is at distance <= 2*sqrt(2) < 3, so scanning |dn|_inf <= 3 is exact.
inline double min_dist2_bucketed(const Realization& r) {
    double best = std::numeric_limits<double>::infinity();
    const auto& reg = r.region;
    for (std::size_t k = 0; k < r.size(); ++k) {
        const GaussInt n = reg.site(k);
        for (int di = 0; di <= 3; ++di)
            for (int dj = -3; dj <= 3; ++dj) {
                if (di == 0 && dj <= 0) continue; // each unordered pair once
                const GaussInt nn{n.re + di, n.im + dj};
                if (!reg.contains(nn)) continue;
                best = std::min(best, std::norm(r.separation(k, reg.index_of(nn))));
            }
    }
    return best;
}

} // namespace detail

/// Minimum over distinct site pairs of |zeta_n - zeta_n'|. Exact pairwise scan
/// for L <= 64; grid-bucketed beyond that (identical result).
inline double min_pairwise_distance(const Realization& r) {
    if (r.size() < 2) throw std::invalid_argument("min_pairwise_distance: need at least 2 sites");
    const double d2 =
        r.region.side <= 64 ? detail::min_dist2_scan(r) : detail::min_dist2_bucketed(r);
    return std::sqrt(d2);
}

/// CSV dump, one row per site: n_re, n_im, omega, zeta_re, zeta_im.
inline std::string realization_csv(const Realization& r) {
    auto num = [](double v) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    std::string out = "n_re,n_im,omega,zeta_re,zeta_im\n";
    for (std::size_t k = 0; k < r.size(); ++k) {
        const GaussInt n = r.region.site(k);
        const cd z = r.zeta_of(k);
        out += std::to_string(n.re) + "," + std::to_string(n.im) + "," + num(r.omega[k]) + "," +
               num(z.real()) + "," + num(z.imag()) + "\n";
    }
    return out;
}

} // namespace lll
