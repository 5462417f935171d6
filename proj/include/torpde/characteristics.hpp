#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "torpde/constants.hpp"
#include "torpde/expr.hpp"
#include "torpde/grid.hpp"
#include "torpde/problem.hpp"

namespace torpde {

/// Vector field evaluator b_u(x) = b(u(x), x). With no frozen iterate the
/// components must be lambda-free. Coordinates are wrapped to the fundamental
/// domain before every evaluation.
class FlowField {
  public:
    FlowField(const std::vector<FieldExpr>& b, const GridFunction* lambda_field = nullptr)
        : b_(&b), lam_(lambda_field) {
        dim_ = static_cast<int>(b.size());
        bool lambda_dep = false;
        for (const auto& comp : b) lambda_dep = lambda_dep || comp.depends_on_lambda();
        if (lambda_dep && lam_ == nullptr)
            throw std::invalid_argument("lambda-dependent field needs a frozen iterate");
        if (!lambda_dep) {
            const char* axes[2] = {"x1", "x2"};
            for (const auto& comp : b) {
                std::vector<FieldExpr> row;
                for (int a = 0; a < dim_; ++a) row.push_back(differentiate(comp, axes[a]));
                jac_.push_back(std::move(row));
            }
        }
    }

    int dim() const { return dim_; }

    void eval(const double* x, double* out) const {
        double w[2] = {wrap_coord(x[0]), dim_ == 2 ? wrap_coord(x[1]) : 0.0};
        double lam = lam_ ? interpolate(*lam_, w) : 0.0;
        for (int i = 0; i < dim_; ++i) out[i] = (*b_)[static_cast<std::size_t>(i)].eval(w, lam);
    }

    bool has_jacobian() const { return !jac_.empty(); }

    void jacobian(const double* x, double* out) const {
        if (jac_.empty()) throw std::logic_error("jacobian unavailable for lambda-dependent fields");
        double w[2] = {wrap_coord(x[0]), dim_ == 2 ? wrap_coord(x[1]) : 0.0};
        for (int i = 0; i < dim_; ++i)
            for (int a = 0; a < dim_; ++a)
                out[i * dim_ + a] = jac_[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)].eval(w, 0.0);
    }

  private:
    const std::vector<FieldExpr>* b_;
    const GridFunction* lam_;
    int dim_;
    std::vector<std::vector<FieldExpr>> jac_;
};

/// Scalar evaluator along trajectories, optionally with a frozen iterate in
/// the lam slot.
class FrozenScalar {
  public:
    FrozenScalar(const FieldExpr& e, const GridFunction* lambda_field = nullptr)
        : e_(&e), lam_(lambda_field) {
        if (e.depends_on_lambda() && lam_ == nullptr)
            throw std::invalid_argument("lambda-dependent scalar needs a frozen iterate");
    }

    double operator()(const double* x) const {
        double w[2] = {wrap_coord(x[0]), e_->dimension() == 2 ? wrap_coord(x[1]) : 0.0};
        double lam = lam_ ? interpolate(*lam_, w) : 0.0;
        return e_->eval(w, lam);
    }

  private:
    const FieldExpr* e_;
    const GridFunction* lam_;
};

namespace detail {

inline void rk4_flow_step(const FlowField& b, double* x, double dt) {
    int m = b.dim();
    double k1[2], k2[2], k3[2], k4[2], t[2];
    b.eval(x, k1);
    for (int i = 0; i < m; ++i) t[i] = x[i] + 0.5 * dt * k1[i];
    b.eval(t, k2);
    for (int i = 0; i < m; ++i) t[i] = x[i] + 0.5 * dt * k2[i];
    b.eval(t, k3);
    for (int i = 0; i < m; ++i) t[i] = x[i] + dt * k3[i];
    b.eval(t, k4);
    for (int i = 0; i < m; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

}  // namespace detail

/// States of one trajectory of b sampled at uniform time steps.
struct Trajectory {
    std::array<double, 2> start{0.0, 0.0};
    double dt = 0.0;
    int direction = +1;  // sign of the integration time
    std::vector<std::array<double, 2>> states;  // unwrapped coordinates
};

/// Classical 4th-order one-step integration of the flow of b, composed
/// ceil(|t|/dt) times. Returns coordinates wrapped to [0,2pi)^m.
inline std::array<double, 2> flow(const FlowField& b, std::array<double, 2> x0, double t, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("flow: dt must be positive");
    if (t == 0.0) return {wrap_coord(x0[0]), b.dim() == 2 ? wrap_coord(x0[1]) : 0.0};
    long steps = static_cast<long>(std::ceil(std::fabs(t) / dt));
    double step = t / static_cast<double>(steps);
    double x[2] = {x0[0], x0[1]};
    for (long k = 0; k < steps; ++k) detail::rk4_flow_step(b, x, step);
    return {wrap_coord(x[0]), b.dim() == 2 ? wrap_coord(x[1]) : 0.0};
}

inline Trajectory sample_trajectory(const FlowField& b, std::array<double, 2> x0, double t, double dt) {
    Trajectory tr;
    tr.start = x0;
    tr.dt = dt;
    tr.direction = t >= 0.0 ? +1 : -1;
    long steps = static_cast<long>(std::ceil(std::fabs(t) / std::max(dt, 1e-12)));
    double step = steps > 0 ? t / static_cast<double>(steps) : 0.0;
    double x[2] = {x0[0], x0[1]};
    tr.states.push_back({x[0], x[1]});
    for (long k = 0; k < steps; ++k) {
        detail::rk4_flow_step(b, x, step);
        tr.states.push_back({x[0], x[1]});
    }
    return tr;
}

/// Tangent mapping of the flow: integrates the variational equation
/// dV/dt = (grad b) V alongside the trajectory. Row-major m x m output.
inline std::array<double, 4> tangent_flow(const FlowField& b, std::array<double, 2> x0, double t,
                                          double dt) {
    if (dt <= 0.0) throw std::invalid_argument("tangent_flow: dt must be positive");
    int m = b.dim();
    double x[2] = {x0[0], x0[1]};
    std::array<double, 4> v{1.0, 0.0, 0.0, 1.0};
    if (m == 1) v = {1.0, 0.0, 0.0, 0.0};
    if (t == 0.0) return v;
    long steps = static_cast<long>(std::ceil(std::fabs(t) / dt));
    double step = t / static_cast<double>(steps);

    auto rhs = [&](const double* xx, const std::array<double, 4>& vv, std::array<double, 4>& out) {
        double j[4];
        b.jacobian(xx, j);
        if (m == 1) {
            out = {j[0] * vv[0], 0.0, 0.0, 0.0};
        } else {
            out[0] = j[0] * vv[0] + j[1] * vv[2];
            out[1] = j[0] * vv[1] + j[1] * vv[3];
            out[2] = j[2] * vv[0] + j[3] * vv[2];
            out[3] = j[2] * vv[1] + j[3] * vv[3];
        }
    };

    for (long k = 0; k < steps; ++k) {
        double xs[4][2];
        double kx[4][2];
        std::array<double, 4> kv[4];
        // stage 1
        b.eval(x, kx[0]);
        rhs(x, v, kv[0]);
        // stage 2
        for (int i = 0; i < m; ++i) xs[1][i] = x[i] + 0.5 * step * kx[0][i];
        std::array<double, 4> v2;
        for (int i = 0; i < 4; ++i) v2[i] = v[i] + 0.5 * step * kv[0][i];
        b.eval(xs[1], kx[1]);
        rhs(xs[1], v2, kv[1]);
        // stage 3
        for (int i = 0; i < m; ++i) xs[2][i] = x[i] + 0.5 * step * kx[1][i];
        std::array<double, 4> v3;
        for (int i = 0; i < 4; ++i) v3[i] = v[i] + 0.5 * step * kv[1][i];
        b.eval(xs[2], kx[2]);
        rhs(xs[2], v3, kv[2]);
        // stage 4
        for (int i = 0; i < m; ++i) xs[3][i] = x[i] + step * kx[2][i];
        std::array<double, 4> v4;
        for (int i = 0; i < 4; ++i) v4[i] = v[i] + step * kv[2][i];
        b.eval(xs[3], kx[3]);
        rhs(xs[3], v4, kv[3]);

        for (int i = 0; i < m; ++i)
            x[i] += step / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
        for (int i = 0; i < 4; ++i)
            v[i] += step / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
    }
    return v;
}

/// Operator 2-norm of the (row-major) m x m tangent matrix.
inline double matrix_norm(const std::array<double, 4>& v, int m) {
    if (m == 1) return std::fabs(v[0]);
    // largest singular value of a 2x2 matrix
    double a = v[0], b = v[1], c = v[2], d = v[3];
    double q = a * a + b * b + c * c + d * d;
    double det = a * d - b * c;
    double disc = std::sqrt(std::max(0.0, q * q - 4.0 * det * det));
    return std::sqrt(0.5 * (q + disc));
}

/// Truncation horizon T* = ln(|f| / (c0 tol)) / c0: the discarded tail of the
/// backward integral is at most tol since min c >= c0 > 0.
inline double truncation_horizon(double c0, double f_sup, double tol) {
    if (c0 <= 0.0) throw GateError("truncation horizon requires c0 > 0");
    if (f_sup <= 0.0) return 0.0;
    double ratio = f_sup / (c0 * tol);
    return ratio <= 1.0 ? 0.0 : std::log(ratio) / c0;
}

/// u(P) = integral over s in (-T*, 0] of f(x_P(s)) exp(-int_s^0 c(x_P)) ds
/// by backward RK4 flow with trapezoidal quadrature of both integrals.
inline double backward_characteristic_value(const FlowField& b, const FrozenScalar& c,
                                            const FrozenScalar& f, double c0, double f_sup,
                                            std::array<double, 2> P, double tol, double dt) {
    double horizon = truncation_horizon(c0, f_sup, tol);
    if (horizon == 0.0) return 0.0;
    long steps = std::max<long>(2, static_cast<long>(std::ceil(horizon / dt)));
    double step = horizon / static_cast<double>(steps);

    double x[2] = {P[0], P[1]};
    double inner = 0.0;  // int_s^0 c along the trajectory
    double c_prev = c(x);
    double g_prev = f(x);  // f * exp(-inner) at s = 0
    double value = 0.0;
    for (long k = 0; k < steps; ++k) {
        detail::rk4_flow_step(b, x, -step);
        double c_here = c(x);
        inner += 0.5 * step * (c_prev + c_here);
        double g_here = f(x) * std::exp(-inner);
        value += 0.5 * step * (g_prev + g_here);
        c_prev = c_here;
        g_prev = g_here;
    }
    return value;
}

namespace detail {

/// Step size for the characteristic quadrature so that the trapezoid error
/// stays commensurate with tol.
inline double quad_step(double tol, double c_sup) {
    double dt = 0.5 * std::sqrt(tol) / (1.0 + c_sup);
    return std::min(0.02, std::max(dt, 1e-7));
}

}  // namespace detail

/// Characteristic-formula solution of the linear problem at one point.
/// An optional frozen iterate turns this into one step of the nonlinear
/// integral-equation map.
inline double solve_by_characteristics(const ProblemSpec& p, std::array<double, 2> P, double tol,
                                       const GridFunction* lambda_field = nullptr) {
    FlowField b(p.b, lambda_field);
    FrozenScalar c(p.c, lambda_field);
    FrozenScalar f(p.f);
    TorusGrid g = p.make_grid();
    double c0 = std::numeric_limits<double>::infinity();
    double c_sup = 0.0, f_sup = 0.0;
    for (int idx = 0; idx < g.node_count(); ++idx) {
        auto pt = g.point(idx);
        double cv = c(pt.data());
        c0 = std::min(c0, cv);
        c_sup = std::max(c_sup, cv);
        f_sup = std::max(f_sup, std::fabs(f(pt.data())));
    }
    if (c0 <= 0.0) throw GateError("solve_by_characteristics requires min c > 0");
    double dt = detail::quad_step(tol, c_sup);
    return backward_characteristic_value(b, c, f, c0, f_sup, P, tol, dt);
}

/// At a singular point of b the trajectory is constant and the integral
/// collapses to f(P)/c(P). Linear (lambda-free) data expected.
inline double fixed_point_value(const ProblemSpec& p, std::array<double, 2> P) {
    if (p.lambda_dependent())
        throw std::invalid_argument("fixed_point_value applies to lambda-free problems");
    double w[2] = {wrap_coord(P[0]), p.dim == 2 ? wrap_coord(P[1]) : 0.0};
    double norm2 = 0.0;
    for (const auto& comp : p.b) {
        double v = comp.eval(w, 0.0);
        norm2 += v * v;
    }
    if (std::sqrt(norm2) > 1e-10)
        throw std::invalid_argument("point is not a singular point of b");
    double cv = p.c.eval(w, 0.0);
    if (cv == 0.0) throw EvalError("division by zero: c vanishes at the singular point");
    return p.f.eval(w, 0.0) / cv;
}

/// A periodic trajectory on S^1 with its decay data along one period.
/// Cumulative integrals are stored per node together with their derivatives,
/// so intermediate times use cubic Hermite interpolation.
struct OrbitData {
    double start = 0.0;
    double period = 0.0;
    int direction = +1;  // +1 if b > 0 (increasing coordinate)
    std::vector<double> pos;     // unwrapped p(t_k), k = 0..N
    std::vector<double> decay_a; // a(t_k) = int_0^{t_k} c(p(s)) ds
    std::vector<double> growth_q;  // q(t_k) = int_0^{t_k} f(p(s)) e^{a(s)} ds
    std::vector<double> dpos, ddecay, dgrowth;  // derivatives at nodes

    int segments() const { return static_cast<int>(pos.size()) - 1; }
    double dt() const { return period / segments(); }

    double decay_at(double t) const { return hermite(decay_a, ddecay, t); }
    double growth_at(double t) const { return hermite(growth_q, dgrowth, t); }
    double pos_at(double t) const { return hermite(pos, dpos, t); }

    /// C(t) = exp(-int_0^t c(p(s)) ds)
    double C(double t) const { return std::exp(-decay_at(t)); }

  private:
    double hermite(const std::vector<double>& y, const std::vector<double>& dy, double t) const {
        double step = dt();
        double s = t / step;
        int k = std::clamp(static_cast<int>(std::floor(s)), 0, segments() - 1);
        double u = s - k;
        double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
        double h10 = u * (1 - u) * (1 - u);
        double h01 = u * u * (3 - 2 * u);
        double h11 = u * u * (u - 1);
        std::size_t kk = static_cast<std::size_t>(k);
        return h00 * y[kk] + h10 * step * dy[kk] + h01 * y[kk + 1] + h11 * step * dy[kk + 1];
    }
};

/// Period of the S^1 orbit of a nonvanishing field: T = int_0^{2pi} dx / |b|,
/// by adaptive Simpson quadrature. Builds the decay and growth integrals
/// along the orbit as a side product.
inline OrbitData find_period_s1(const ProblemSpec& p, double tol, double start = 0.0,
                                int segments = 8192) {
    if (p.dim != 1) throw std::invalid_argument("find_period_s1 requires m = 1");
    if (p.lambda_dependent())
        throw std::invalid_argument("find_period_s1 applies to lambda-free problems");
    const FieldExpr& b = p.b[0];

    // refuse fields that vanish (or nearly vanish) somewhere
    int scan = 4096;
    double min_abs = std::numeric_limits<double>::infinity();
    bool positive = b.eval1(0.0) > 0.0;
    for (int i = 0; i < scan; ++i) {
        double v = b.eval1(i * two_pi / scan);
        min_abs = std::min(min_abs, std::fabs(v));
        if ((v > 0.0) != positive) min_abs = 0.0;
    }
    if (min_abs <= 1e-6) throw GateError("field vanishes on S^1: no global periodic orbit");

    // adaptive Simpson for T = | int dx / b |
    std::function<double(double, double, double, double, double, double)> simpson =
        [&](double a, double bb, double fa, double fm, double fb, double tol_here) -> double {
        double m = 0.5 * (a + bb);
        double lm = 0.5 * (a + m), rm = 0.5 * (m + bb);
        double flm = 1.0 / b.eval1(lm), frm = 1.0 / b.eval1(rm);
        double whole = (bb - a) / 6.0 * (fa + 4.0 * fm + fb);
        double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        double right = (bb - m) / 6.0 * (fm + 4.0 * frm + fb);
        if (std::fabs(left + right - whole) < 15.0 * tol_here || (bb - a) < 1e-9)
            return left + right + (left + right - whole) / 15.0;
        return simpson(a, m, fa, flm, fm, 0.5 * tol_here) + simpson(m, bb, fm, frm, fb, 0.5 * tol_here);
    };
    double f0v = 1.0 / b.eval1(0.0), f1v = 1.0 / b.eval1(std::numbers::pi), f2v = 1.0 / b.eval1(two_pi);
    double T = std::fabs(simpson(0.0, two_pi, f0v, f1v, f2v, std::min(tol, 1e-10)));

    OrbitData orbit;
    orbit.start = start;
    orbit.period = T;
    orbit.direction = positive ? +1 : -1;

    // augmented RK4 for (p, a, q): p' = b, a' = c(p), q' = f(p) e^{a}
    int N = segments;
    double step = T / N;
    orbit.pos.resize(static_cast<std::size_t>(N) + 1);
    orbit.decay_a.resize(static_cast<std::size_t>(N) + 1);
    orbit.growth_q.resize(static_cast<std::size_t>(N) + 1);
    orbit.dpos.resize(static_cast<std::size_t>(N) + 1);
    orbit.ddecay.resize(static_cast<std::size_t>(N) + 1);
    orbit.dgrowth.resize(static_cast<std::size_t>(N) + 1);

    auto rhs = [&](const double* y, double* dy) {
        double w = wrap_coord(y[0]);
        dy[0] = b.eval1(w);
        dy[1] = p.c.eval(&w, 0.0);
        dy[2] = p.f.eval(&w, 0.0) * std::exp(y[1]);
    };
    double y[3] = {start, 0.0, 0.0};
    for (int k = 0; k <= N; ++k) {
        double dy[3];
        rhs(y, dy);
        std::size_t kk = static_cast<std::size_t>(k);
        orbit.pos[kk] = y[0];
        orbit.decay_a[kk] = y[1];
        orbit.growth_q[kk] = y[2];
        orbit.dpos[kk] = dy[0];
        orbit.ddecay[kk] = dy[1];
        orbit.dgrowth[kk] = dy[2];
        if (k == N) break;
        double k1[3], k2[3], k3[3], k4[3], t[3];
        rhs(y, k1);
        for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * step * k1[i];
        rhs(t, k2);
        for (int i = 0; i < 3; ++i) t[i] = y[i] + 0.5 * step * k2[i];
        rhs(t, k3);
        for (int i = 0; i < 3; ++i) t[i] = y[i] + step * k3[i];
        rhs(t, k4);
        for (int i = 0; i < 3; ++i) y[i] += step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }

    double closure = std::fabs(orbit.pos.back() - orbit.pos.front() - orbit.direction * two_pi);
    if (closure > 1e-8) throw GateError("orbit failed to close within 1e-8");
    if (orbit.decay_a.back() <= 0.0) throw GateError("int c over the period is not positive");
    if (orbit.decay_a.back() > 600.0)
        throw GateError("decay exponent over the period exceeds double range; rescale c");
    for (std::size_t k = 1; k < orbit.decay_a.size(); ++k)
        if (orbit.decay_a[k] <= orbit.decay_a[k - 1])
            throw GateError("decay C(t) is not strictly decreasing (c <= 0 on the orbit)");
    return orbit;
}

/// Value of the unique solution on the periodic orbit:
///   u(p(t)) = C(t) [ C(T)/(1-C(T)) int_t^T f/C + 1/(1-C(T)) int_0^t f/C ].
inline double periodic_orbit_value(const OrbitData& orbit, double t) {
    double T = orbit.period;
    t = std::fmod(t, T);
    if (t < 0.0) t += T;
    double CT = std::exp(-orbit.decay_a.back());
    if (CT >= 1.0) throw GateError("C(T) >= 1: decay condition fails");
    double qT = orbit.growth_q.back();
    double qt = orbit.growth_at(t);
    double Ct = orbit.C(t);
    return Ct * (CT / (1.0 - CT) * (qT - qt) + 1.0 / (1.0 - CT) * qt);
}

/// The same quantity assembled with the two integral coefficients swapped.
/// Kept only for the comparison report; it does not satisfy the equation.
inline double periodic_orbit_value_swapped(const OrbitData& orbit, double t) {
    double T = orbit.period;
    t = std::fmod(t, T);
    if (t < 0.0) t += T;
    double CT = std::exp(-orbit.decay_a.back());
    if (CT >= 1.0) throw GateError("C(T) >= 1: decay condition fails");
    double qT = orbit.growth_q.back();
    double qt = orbit.growth_at(t);
    double Ct = orbit.C(t);
    return Ct * (CT / (1.0 - CT) * qt + 1.0 / (1.0 - CT) * (qT - qt));
}

}  // namespace torpde
