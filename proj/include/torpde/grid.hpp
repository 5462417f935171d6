#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "torpde/expr.hpp"
#include "torpde/io.hpp"

namespace torpde {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Wrap a coordinate into [0, 2pi).
inline double wrap_coord(double x) {
    double r = std::fmod(x, two_pi);
    if (r < 0.0) r += two_pi;
    return r;
}

/// Distance between two angles on the circle.
inline double circle_dist(double a, double b) {
    double d = std::fabs(wrap_coord(a) - wrap_coord(b));
    return d > std::numbers::pi ? two_pi - d : d;
}

/// Uniform periodic grid on [0,2pi)^m, m in {1,2}.
struct TorusGrid {
    int dim = 1;
    int n = 8;  // points per axis
    double h = two_pi / 8;

    TorusGrid() = default;
    TorusGrid(int dim_, int n_) : dim(dim_), n(n_), h(two_pi / n_) {
        if (dim != 1 && dim != 2) throw std::invalid_argument("grid dimension must be 1 or 2");
        if (n < 8) throw std::invalid_argument("grid needs at least 8 points per axis");
    }

    int node_count() const { return dim == 1 ? n : n * n; }

    int wrap(int i) const {
        i %= n;
        return i < 0 ? i + n : i;
    }

    // x1 varies fastest
    int index(int i, int j = 0) const { return dim == 1 ? wrap(i) : wrap(i) + n * wrap(j); }

    std::array<double, 2> point(int idx) const {
        if (dim == 1) return {idx * h, 0.0};
        return {(idx % n) * h, (idx / n) * h};
    }

    bool operator==(const TorusGrid& o) const { return dim == o.dim && n == o.n; }
};

/// Real values on a TorusGrid with periodic indexing.
struct GridFunction {
    TorusGrid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const TorusGrid& g, double fill = 0.0)
        : grid(g), values(static_cast<std::size_t>(g.node_count()), fill) {}

    double& at(int i, int j = 0) { return values[static_cast<std::size_t>(grid.index(i, j))]; }
    double at(int i, int j = 0) const { return values[static_cast<std::size_t>(grid.index(i, j))]; }

    bool all_finite() const {
        for (double v : values)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

enum class Scheme { upwind, centered };

inline const char* scheme_name(Scheme s) { return s == Scheme::upwind ? "upwind" : "centered"; }

/// Pointwise evaluation of an expression at the grid nodes. Expressions
/// containing `lam` require a lambda_field giving the frozen value per node.
inline GridFunction sample(const FieldExpr& e, const TorusGrid& grid,
                           const GridFunction* lambda_field = nullptr) {
    if (e.depends_on_lambda() && lambda_field == nullptr)
        throw std::invalid_argument("expression depends on lam but no lambda_field was supplied");
    if (lambda_field != nullptr && !(lambda_field->grid == grid))
        throw std::invalid_argument("lambda_field grid mismatch");
    GridFunction out(grid);
    for (int idx = 0; idx < grid.node_count(); ++idx) {
        auto p = grid.point(idx);
        double lam = lambda_field ? lambda_field->values[static_cast<std::size_t>(idx)] : 0.0;
        out.values[static_cast<std::size_t>(idx)] = e.eval(p.data(), lam);
    }
    return out;
}

/// Minus the second central difference sum over axes, divided by h^2.
/// Matches the sign convention where the Laplacian is -div grad, so the
/// operator is positive semidefinite and annihilates constants.
inline GridFunction neg_laplacian(const GridFunction& u) {
    const TorusGrid& g = u.grid;
    GridFunction out(g);
    double inv_h2 = 1.0 / (g.h * g.h);
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) {
            double c = u.at(i);
            out.at(i) = (2.0 * c - u.at(i + 1) - u.at(i - 1)) * inv_h2;
        }
    } else {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                double c = u.at(i, j);
                out.at(i, j) = (4.0 * c - u.at(i + 1, j) - u.at(i - 1, j) - u.at(i, j + 1) -
                                u.at(i, j - 1)) *
                               inv_h2;
            }
    }
    return out;
}

/// <b, grad u> by upwind or centered differencing. Upwind takes the backward
/// difference where the component is positive and the forward difference
/// otherwise, which orients the stencil against the local flow.
inline GridFunction advect(const std::vector<GridFunction>& b, const GridFunction& u, Scheme scheme) {
    const TorusGrid& g = u.grid;
    if (static_cast<int>(b.size()) != g.dim)
        throw std::invalid_argument("advect: need one field component per axis");
    for (const auto& comp : b)
        if (!(comp.grid == g)) throw std::invalid_argument("advect: component grid mismatch");
    GridFunction out(g);
    double inv_h = 1.0 / g.h;
    auto axis_term = [&](int i, int j, int axis) {
        double bv = b[static_cast<std::size_t>(axis)].at(i, j);
        int di = axis == 0 ? 1 : 0;
        int dj = axis == 1 ? 1 : 0;
        if (scheme == Scheme::centered)
            return bv * (u.at(i + di, j + dj) - u.at(i - di, j - dj)) * (0.5 * inv_h);
        if (bv > 0.0) return bv * (u.at(i, j) - u.at(i - di, j - dj)) * inv_h;
        return bv * (u.at(i + di, j + dj) - u.at(i, j)) * inv_h;
    };
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) out.at(i) = axis_term(i, 0, 0);
    } else {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) out.at(i, j) = axis_term(i, j, 0) + axis_term(i, j, 1);
    }
    return out;
}

inline double sup_norm(const GridFunction& u) {
    double m = 0.0;
    for (double v : u.values) m = std::max(m, std::fabs(v));
    return m;
}

inline double sup_dist(const GridFunction& a, const GridFunction& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        m = std::max(m, std::fabs(a.values[i] - b.values[i]));
    return m;
}

/// Discrete stand-in for the Lipschitz constant: max over axes and nodes of
/// |forward difference| / h.
inline double lip_estimate(const GridFunction& u) {
    const TorusGrid& g = u.grid;
    double m = 0.0;
    double inv_h = 1.0 / g.h;
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) m = std::max(m, std::fabs(u.at(i + 1) - u.at(i)) * inv_h);
    } else {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                m = std::max(m, std::fabs(u.at(i + 1, j) - u.at(i, j)) * inv_h);
                m = std::max(m, std::fabs(u.at(i, j + 1) - u.at(i, j)) * inv_h);
            }
    }
    return m;
}

/// Max second difference quotient |u(i+1) - 2u(i) + u(i-1)| / h^2 over axes.
inline double max_second_difference(const GridFunction& u) {
    const TorusGrid& g = u.grid;
    double m = 0.0;
    double inv_h2 = 1.0 / (g.h * g.h);
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i)
            m = std::max(m, std::fabs(u.at(i + 1) - 2.0 * u.at(i) + u.at(i - 1)) * inv_h2);
    } else {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i) {
                m = std::max(m, std::fabs(u.at(i + 1, j) - 2.0 * u.at(i, j) + u.at(i - 1, j)) * inv_h2);
                m = std::max(m, std::fabs(u.at(i, j + 1) - 2.0 * u.at(i, j) + u.at(i, j - 1)) * inv_h2);
            }
    }
    return m;
}

/// Multilinear periodic interpolation. Preserves the sup norm and the
/// discrete Lipschitz estimate of the grid values.
inline double interpolate(const GridFunction& u, const double* x) {
    const TorusGrid& g = u.grid;
    double s1 = wrap_coord(x[0]) / g.h;
    int i0 = static_cast<int>(std::floor(s1));
    double t1 = s1 - i0;
    if (g.dim == 1) {
        return (1.0 - t1) * u.at(i0) + t1 * u.at(i0 + 1);
    }
    double s2 = wrap_coord(x[1]) / g.h;
    int j0 = static_cast<int>(std::floor(s2));
    double t2 = s2 - j0;
    double lo = (1.0 - t1) * u.at(i0, j0) + t1 * u.at(i0 + 1, j0);
    double hi = (1.0 - t1) * u.at(i0, j0 + 1) + t1 * u.at(i0 + 1, j0 + 1);
    return (1.0 - t2) * lo + t2 * hi;
}

/// Translate all values by `shift` nodes along `axis` (u_out(i) = u(i - shift)).
inline GridFunction translate(const GridFunction& u, int shift, int axis = 0) {
    const TorusGrid& g = u.grid;
    GridFunction out(g);
    if (g.dim == 1) {
        for (int i = 0; i < g.n; ++i) out.at(i) = u.at(i - shift);
    } else {
        for (int j = 0; j < g.n; ++j)
            for (int i = 0; i < g.n; ++i)
                out.at(i, j) = axis == 0 ? u.at(i - shift, j) : u.at(i, j - shift);
    }
    return out;
}

/// CSV serialization: one row per node, columns x1[,x2],value.
inline std::string to_csv(const GridFunction& u) {
    CsvTable t;
    t.header = u.grid.dim == 1 ? std::vector<std::string>{"x1", "value"}
                               : std::vector<std::string>{"x1", "x2", "value"};
    for (int idx = 0; idx < u.grid.node_count(); ++idx) {
        auto p = u.grid.point(idx);
        std::vector<std::string> row;
        row.push_back(num17(p[0]));
        if (u.grid.dim == 2) row.push_back(num17(p[1]));
        row.push_back(num17(u.values[static_cast<std::size_t>(idx)]));
        t.add_row(std::move(row));
    }
    return t.str();
}

}  // namespace torpde
