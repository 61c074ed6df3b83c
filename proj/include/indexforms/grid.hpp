#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace indexforms {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

/// Flat periodic base torus T^dim with a uniform grid, dim in {0,1,2}.
/// dim == 0 is a single point (no forms above degree 0).
struct BaseGrid {
    int dim = 0;
    int points_per_axis = 1;

    BaseGrid() = default;
    BaseGrid(int dimension, int n) : dim(dimension), points_per_axis(n) {
        if (dim < 0 || dim > 2) throw std::invalid_argument("BaseGrid: dim must be 0, 1 or 2");
        if (dim == 0) {
            points_per_axis = 1;
        } else if (n < 8) {
            throw std::invalid_argument("BaseGrid: points_per_axis must be >= 8");
        }
    }

    double spacing() const { return dim == 0 ? 0.0 : kTwoPi / points_per_axis; }

    int points() const {
        int p = 1;
        for (int a = 0; a < dim; ++a) p *= points_per_axis;
        return p;
    }

    int index(int i, int j = 0) const {
        return wrap(i) + (dim == 2 ? points_per_axis * wrap(j) : 0);
    }

    int wrap(int i) const {
        if (dim == 0) return 0;
        const int n = points_per_axis;
        i %= n;
        return i < 0 ? i + n : i;
    }

    /// Grid point shifted by `step` along `axis` (periodic).
    int shift(int p, int axis, int step) const {
        const int n = points_per_axis;
        if (dim == 1) return wrap(p + step);
        const int i = p % n;
        const int j = p / n;
        return axis == 0 ? index(i + step, j) : index(i, j + step);
    }

    /// Coordinate of grid point p along `axis`, in [0, 2*pi).
    double coord(int p, int axis) const {
        if (dim == 0) return 0.0;
        const int n = points_per_axis;
        const int i = (axis == 0) ? p % n : p / n;
        return spacing() * i;
    }

    bool operator==(const BaseGrid& o) const {
        return dim == o.dim && points_per_axis == o.points_per_axis;
    }
};

/// Multi-indices for form components are bitmasks over axes: bit a set means
/// the factor ds_a is present. Degree = popcount, axes implicitly sorted.
using Mask = unsigned;

inline int mask_degree(Mask m) {
    int d = 0;
    while (m) { d += m & 1u; m >>= 1; }
    return d;
}

/// Sign of merging two disjoint sorted axis sets (counts transpositions).
inline int merge_sign(Mask a, Mask b) {
    int sign = 1;
    for (int bit = 0; bit < 8; ++bit) {
        if (!(b & (1u << bit))) continue;
        // axes of a strictly greater than this axis of b must move past it
        int higher = 0;
        for (int c = bit + 1; c < 8; ++c)
            if (a & (1u << c)) ++higher;
        if (higher & 1) sign = -sign;
    }
    return sign;
}

inline std::vector<Mask> masks_of_degree(int dim, int degree) {
    std::vector<Mask> out;
    for (Mask m = 0; m < (1u << dim); ++m)
        if (mask_degree(m) == degree) out.push_back(m);
    return out;
}

}  // namespace indexforms
