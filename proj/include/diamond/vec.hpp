#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace diamond {

using Vec = std::vector<double>;

inline void check_same_dim(const Vec& a, const Vec& b, const char* where) {
    if (a.size() != b.size()) {
        throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    }
}

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(const Vec& a) {
    for (double x : a)
        if (!std::isfinite(x)) return false;
    return true;
}

// a += c*b
inline void axpy(double c, const Vec& b, Vec& a) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += c * b[i];
}

// Row-major H x W grid of reals. Doubles as decoded "image" space and as an
// artifact mask (values in [0,1]).
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec v;

    Grid() = default;
    Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), v(r * c, fill) {}

    std::size_t size() const { return rows * cols; }
    double& at(std::size_t i, std::size_t j) { return v[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols + j]; }

    bool same_shape(const Grid& o) const { return rows == o.rows && cols == o.cols; }
};

inline void check_same_shape(const Grid& a, const Grid& b, const char* where) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(where) + ": grid shape mismatch");
    }
}

}  // namespace diamond
