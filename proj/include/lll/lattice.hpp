#pragma once

#include <complex>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lll {

using cd = std::complex<double>;

/// A Gaussian integer n = n1 + i*n2.
struct GaussInt {
    std::int64_t re = 0;
    std::int64_t im = 0;

    friend GaussInt operator+(GaussInt a, GaussInt b) { return {a.re + b.re, a.im + b.im}; }
    friend GaussInt operator-(GaussInt a, GaussInt b) { return {a.re - b.re, a.im - b.im}; }
    friend bool operator==(GaussInt a, GaussInt b) { return a.re == b.re && a.im == b.im; }
    friend bool operator!=(GaussInt a, GaussInt b) { return !(a == b); }

    std::int64_t norm_inf() const { return std::max(std::llabs(re), std::llabs(im)); }
    cd to_complex() const { return cd(static_cast<double>(re), static_cast<double>(im)); }
};

/// Square region of Gaussian integers: all n' with |n' - n|_inf < L/2.
/// L must be odd so the site count is exactly L^2. Enumeration is row-major
/// over (n1, n2) with n2 fastest; this order is fixed globally so matrices
/// built on the same region are comparable across runs.
struct BoxRegion {
    GaussInt center;
    int side = 1;

    BoxRegion() = default;
    BoxRegion(GaussInt c, int L) : center(c), side(L) {
        if (L < 1 || L % 2 == 0)
            throw std::invalid_argument("BoxRegion: side must be odd and positive");
    }

    int half_width() const { return (side - 1) / 2; }
    std::size_t size() const { return static_cast<std::size_t>(side) * side; }

    bool contains(GaussInt n) const {
        // strict inequality |n' - n|_inf < L/2; for odd L this is |.|_inf <= (L-1)/2
        return (n - center).norm_inf() <= half_width();
    }

    GaussInt site(std::size_t idx) const {
        const int h = half_width();
        const int w = side;
        const int i = static_cast<int>(idx) / w;
        const int j = static_cast<int>(idx) % w;
        return {center.re - h + i, center.im - h + j};
    }

    std::size_t index_of(GaussInt n) const {
        if (!contains(n)) throw std::out_of_range("BoxRegion::index_of: site not in region");
        const int h = half_width();
        const auto i = n.re - (center.re - h);
        const auto j = n.im - (center.im - h);
        return static_cast<std::size_t>(i) * side + static_cast<std::size_t>(j);
    }

    std::vector<GaussInt> sites() const {
        std::vector<GaussInt> out;
        out.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) out.push_back(site(k));
        return out;
    }
};

/// Sites of Lambda_L(n) \ Lambda_{L-L^s}(n): the boundary annulus used by the
/// (m,E)-regularity definition. Throws if the shrunken box would be empty or
/// the annulus contains no sites (L too small for the chosen s).
inline std::vector<std::size_t> annulus_indices(const BoxRegion& region, double s_exponent) {
    const double L = static_cast<double>(region.side);
    const double Ltilde = L - std::pow(L, s_exponent);
    if (Ltilde < 1.0)
        throw std::invalid_argument("annulus_indices: shrunken box empty (L too small for s)");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < region.size(); ++k) {
        const auto d = (region.site(k) - region.center).norm_inf();
        if (static_cast<double>(d) >= Ltilde / 2.0) out.push_back(k);
    }
    if (out.empty()) throw std::invalid_argument("annulus_indices: empty annulus");
    return out;
}

} // namespace lll
