#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "torpde/characteristics.hpp"
#include "torpde/constants.hpp"
#include "torpde/grid.hpp"
#include "torpde/problem.hpp"

namespace torpde {

/// Sparse row-form discretization of eps*L + B_adv + diag(c). Off-diagonal
/// entries are assembled first; the diagonal is then defined as
/// c_i - (sum of off-diagonal entries, in increasing column order), so the
/// stencil identity "row sum equals c_i" holds at the level of the stored
/// floating-point values.
struct LinearSystem {
    TorusGrid grid;
    double eps = 0.0;
    Scheme scheme = Scheme::upwind;
    std::vector<int> row_ptr;
    std::vector<int> col;
    std::vector<double> val;
    std::vector<int> diag_pos;  // index into col/val per row
    GridFunction rhs;
    GridFunction c_values;
    bool m_matrix = false;

    int rows() const { return grid.node_count(); }

    double row_off_diag_sum(int i) const {
        double s = 0.0;
        for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
            if (col[static_cast<std::size_t>(k)] != i) s += val[static_cast<std::size_t>(k)];
        return s;
    }

    void apply(const std::vector<double>& u, std::vector<double>& out) const {
        for (int i = 0; i < rows(); ++i) {
            double s = 0.0;
            for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
                s += val[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
            out[static_cast<std::size_t>(i)] = s;
        }
    }

    double residual_sup(const std::vector<double>& u) const {
        double m = 0.0;
        for (int i = 0; i < rows(); ++i) {
            double s = 0.0;
            for (int k = row_ptr[static_cast<std::size_t>(i)]; k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
                s += val[static_cast<std::size_t>(k)] * u[static_cast<std::size_t>(col[static_cast<std::size_t>(k)])];
            m = std::max(m, std::fabs(rhs.values[static_cast<std::size_t>(i)] - s));
        }
        return m;
    }
};

struct SolveReport {
    GridFunction solution;
    double residual_sup = 0.0;
    long iterations = 0;
    double eps = 0.0;
    bool converged = false;
};

/// Discretize eps*L + B_adv + diag(c) from fields already sampled on the
/// grid. The sign convention has the Laplacian positive semidefinite, so eps
/// contributes +eps*L.
inline LinearSystem assemble_fields(const TorusGrid& g, double eps, Scheme scheme,
                                    const std::vector<GridFunction>& b, const GridFunction& c,
                                    const GridFunction& f) {
    if (eps < 0.0) throw std::invalid_argument("assemble: eps must be nonnegative");
    if (eps == 0.0 && scheme == Scheme::centered)
        throw std::invalid_argument("assemble: centered scheme requires eps > 0");

    LinearSystem sys;
    sys.grid = g;
    sys.eps = eps;
    sys.scheme = scheme;
    sys.c_values = c;
    sys.rhs = f;

    double inv_h = 1.0 / g.h;
    double le = eps * inv_h * inv_h;
    int nrows = g.node_count();
    sys.row_ptr.reserve(static_cast<std::size_t>(nrows) + 1);
    sys.row_ptr.push_back(0);

    bool off_sign_ok = true;
    for (int idx = 0; idx < nrows; ++idx) {
        int i = g.dim == 1 ? idx : idx % g.n;
        int j = g.dim == 1 ? 0 : idx / g.n;
        std::map<int, double> off;
        auto add_off = [&](int col_idx, double v) { off[col_idx] += v; };

        for (int axis = 0; axis < g.dim; ++axis) {
            int di = axis == 0 ? 1 : 0;
            int dj = axis == 1 ? 1 : 0;
            int east = g.index(i + di, j + dj);
            int west = g.index(i - di, j - dj);
            if (eps > 0.0) {
                add_off(east, -le);
                add_off(west, -le);
            }
            double bv = b[static_cast<std::size_t>(axis)].values[static_cast<std::size_t>(idx)];
            if (scheme == Scheme::centered) {
                add_off(east, 0.5 * bv * inv_h);
                add_off(west, -0.5 * bv * inv_h);
            } else if (bv > 0.0) {
                add_off(west, -bv * inv_h);
            } else if (bv < 0.0) {
                add_off(east, bv * inv_h);
            }
        }
        off.erase(idx);  // defensive; neighbors are distinct from idx for n >= 8

        double s = 0.0;
        for (const auto& [cidx, v] : off) {
            s += v;
            if (v > 0.0) off_sign_ok = false;
        }
        double diag = sys.c_values.values[static_cast<std::size_t>(idx)] - s;

        bool placed = false;
        for (const auto& [cidx, v] : off) {
            if (!placed && cidx > idx) {
                sys.diag_pos.push_back(static_cast<int>(sys.col.size()));
                sys.col.push_back(idx);
                sys.val.push_back(diag);
                placed = true;
            }
            sys.col.push_back(cidx);
            sys.val.push_back(v);
        }
        if (!placed) {
            sys.diag_pos.push_back(static_cast<int>(sys.col.size()));
            sys.col.push_back(idx);
            sys.val.push_back(diag);
        }
        sys.row_ptr.push_back(static_cast<int>(sys.col.size()));
    }

    double c_min = std::numeric_limits<double>::infinity();
    for (double v : sys.c_values.values) c_min = std::min(c_min, v);
    sys.m_matrix = off_sign_ok && c_min > 0.0;
    return sys;
}

/// Sample the problem coefficients (optionally frozen at an iterate) and
/// discretize.
inline LinearSystem assemble(const ProblemSpec& p, double eps, Scheme scheme,
                             const GridFunction* lambda_field = nullptr) {
    TorusGrid g = p.make_grid();
    std::vector<GridFunction> b;
    for (const auto& comp : p.b) b.push_back(sample(comp, g, lambda_field));
    return assemble_fields(g, eps, scheme, b, sample(p.c, g, lambda_field), sample(p.f, g));
}

/// Successive-displacement (Gauss-Seidel) relaxation until the sup-norm
/// residual drops below tol. With an M-matrix the sweeps converge; the report
/// carries a failure flag otherwise.
inline SolveReport solve(const LinearSystem& sys, double tol, long max_iter,
                         const GridFunction* initial = nullptr) {
    SolveReport rep;
    rep.eps = sys.eps;
    rep.solution = initial ? *initial : GridFunction(sys.grid);
    std::vector<double>& u = rep.solution.values;

    long sweeps = 0;
    double res = sys.residual_sup(u);
    while (res > tol && sweeps < max_iter) {
        for (int i = 0; i < sys.rows(); ++i) {
            double s = 0.0;
            double diag = 0.0;
            for (int k = sys.row_ptr[static_cast<std::size_t>(i)];
                 k < sys.row_ptr[static_cast<std::size_t>(i) + 1]; ++k) {
                int c = sys.col[static_cast<std::size_t>(k)];
                double v = sys.val[static_cast<std::size_t>(k)];
                if (c == i)
                    diag = v;
                else
                    s += v * u[static_cast<std::size_t>(c)];
            }
            u[static_cast<std::size_t>(i)] = (sys.rhs.values[static_cast<std::size_t>(i)] - s) / diag;
        }
        ++sweeps;
        res = sys.residual_sup(u);
    }
    rep.iterations = sweeps;
    rep.residual_sup = res;
    rep.converged = res <= tol;
    return rep;
}

enum class SweepReference { characteristics, none };

struct SweepRow {
    double eps = 0.0;
    double sup_error = 0.0;  // distance to the characteristic reference (0 if none)
    long iterations = 0;
    double residual = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    GridFunction reference;   // characteristic-formula solution on the grid
    GridFunction last;        // solution at the smallest eps
    bool has_reference = false;
    bool monotone = true;     // sup errors trend downward along the ladder
    bool all_converged = true;
};

/// Solve along a decreasing eps ladder and record the sup distance to the
/// characteristic-formula reference on the grid.
inline SweepResult viscosity_sweep(const ProblemSpec& p, const std::vector<double>& eps_ladder,
                                   SweepReference reference) {
    for (std::size_t i = 0; i < eps_ladder.size(); ++i) {
        if (eps_ladder[i] <= 0.0) throw std::invalid_argument("eps ladder must be positive");
        if (i > 0 && eps_ladder[i] >= eps_ladder[i - 1])
            throw std::invalid_argument("eps ladder must be decreasing");
    }
    SweepResult out;
    TorusGrid g = p.make_grid();
    if (reference == SweepReference::characteristics) {
        out.reference = GridFunction(g);
        for (int idx = 0; idx < g.node_count(); ++idx) {
            auto pt = g.point(idx);
            out.reference.values[static_cast<std::size_t>(idx)] =
                solve_by_characteristics(p, {pt[0], pt[1]}, p.tol_quad);
        }
        out.has_reference = true;
    }
    double prev = std::numeric_limits<double>::infinity();
    for (double eps : eps_ladder) {
        LinearSystem sys = assemble(p, eps, p.scheme);
        SolveReport rep = solve(sys, p.tol_solver, p.max_iter);
        out.all_converged = out.all_converged && rep.converged;
        SweepRow row;
        row.eps = eps;
        row.iterations = rep.iterations;
        row.residual = rep.residual_sup;
        if (out.has_reference) {
            row.sup_error = sup_dist(rep.solution, out.reference);
            if (row.sup_error > prev * 1.05) out.monotone = false;
            prev = row.sup_error;
        }
        out.rows.push_back(row);
        out.last = rep.solution;
    }
    return out;
}

}  // namespace torpde
