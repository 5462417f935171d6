#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "torpde/characteristics.hpp"
#include "torpde/constants.hpp"
#include "torpde/elliptic.hpp"
#include "torpde/grid.hpp"
#include "torpde/problem.hpp"

namespace torpde {

/// Record of one Picard run: increment norms w_k = |u_{k+1} - u_k|, observed
/// ratios, and the theoretical contraction ratio (beta R(eps) + gamma)/c0.
struct PicardTrace {
    std::vector<double> w_norms;  // w_norms[k-1] = |u_k - u_{k-1}|, k = 1..
    std::vector<double> ratios;   // ratios[k-2] = w_k / w_{k-1}, k = 2..
    std::vector<double> lip_estimates;  // discrete Lipschitz estimate of each iterate
    std::vector<double> min_values;     // pointwise minimum of each iterate
    double rho_star = 0.0;
    long iterations = 0;
    bool converged = false;
    bool diverged = false;
    double nonlinear_residual = 0.0;
};

/// Frozen-coefficient Picard iteration for the regularized equation:
/// solve eps*Delta u_{k+1} + <b_{u_k}, grad u_{k+1}> + c_{u_k} u_{k+1} = f
/// until the sup increment drops below tol.
inline std::pair<SolveReport, PicardTrace> picard_elliptic(const ProblemSpec& p, double eps,
                                                           const GridFunction& u0, double tol,
                                                           long max_iter,
                                                           const ConstantsReport* constants = nullptr) {
    if (eps <= 0.0) throw std::invalid_argument("picard_elliptic: eps must be positive");
    ConstantsReport rep_local;
    if (!constants) {
        rep_local = compute_constants(p, default_lambda_box(p), 128);
        constants = &rep_local;
    }
    if (!constants->gate()) throw GateError("hyperbolicity conditions not satisfied");

    PicardTrace trace;
    trace.rho_star = (constants->beta * r_of_eps(*constants, eps) + constants->gamma) / constants->c0;

    GridFunction u = u0;
    SolveReport last;
    double prev_w = 0.0;
    int bad_streak = 0;
    for (long k = 1; k <= max_iter; ++k) {
        LinearSystem sys = assemble(p, eps, p.scheme, &u);
        last = solve(sys, p.tol_solver, p.max_iter, &u);
        double w = sup_dist(last.solution, u);
        trace.w_norms.push_back(w);
        trace.lip_estimates.push_back(lip_estimate(last.solution));
        trace.min_values.push_back(*std::min_element(last.solution.values.begin(),
                                                     last.solution.values.end()));
        if (k >= 2 && prev_w > 0.0) {
            double rho = w / prev_w;
            trace.ratios.push_back(rho);
            bad_streak = rho >= 1.0 ? bad_streak + 1 : 0;
        }
        u = last.solution;
        trace.iterations = k;
        if (w < tol) {
            trace.converged = true;
            break;
        }
        if (bad_streak >= 5) {
            trace.diverged = true;  // divergence declared after 5 consecutive ratios >= 1
            break;
        }
        prev_w = w;
    }

    LinearSystem frozen = assemble(p, eps, p.scheme, &u);
    trace.nonlinear_residual = frozen.residual_sup(u.values);
    last.solution = u;
    return {last, trace};
}

struct IntegralPicardResult {
    GridFunction u;
    long iterations = 0;
    bool converged = false;
    bool contraction_failed = false;
    double last_increment = 0.0;
};

/// Fixed point of the nonlinear integral representation: iterate the
/// backward-characteristic quadrature with the frozen field b_{u_k} and the
/// frozen zero-order coefficient c(u_k(.), .).
inline IntegralPicardResult picard_integral(const ProblemSpec& p, const GridFunction& u0, double tol,
                                            long max_iter,
                                            const ConstantsReport* constants = nullptr) {
    ConstantsReport rep_local;
    if (!constants) {
        rep_local = compute_constants(p, default_lambda_box(p), 128);
        constants = &rep_local;
    }
    if (!constants->gate()) throw GateError("hyperbolicity conditions not satisfied");

    TorusGrid g = p.make_grid();
    GridFunction f_grid = sample(p.f, g);
    double f_sup = sup_norm(f_grid);

    IntegralPicardResult out;
    out.u = u0;
    double prev_w = 0.0;
    int bad_streak = 0;
    for (long k = 1; k <= max_iter; ++k) {
        GridFunction c_grid = sample(p.c, g, &out.u);
        double c0 = std::numeric_limits<double>::infinity();
        double c_sup = 0.0;
        for (double v : c_grid.values) {
            c0 = std::min(c0, v);
            c_sup = std::max(c_sup, v);
        }
        if (c0 <= 0.0) throw GateError("picard_integral: min c along the iterate is not positive");
        double dt = detail::quad_step(p.tol_quad, c_sup);

        FlowField b(p.b, &out.u);
        FrozenScalar c(p.c, &out.u);
        FrozenScalar f(p.f);
        GridFunction next(g);
        for (int idx = 0; idx < g.node_count(); ++idx) {
            auto pt = g.point(idx);
            next.values[static_cast<std::size_t>(idx)] =
                backward_characteristic_value(b, c, f, c0, f_sup, {pt[0], pt[1]}, p.tol_quad, dt);
        }
        double w = sup_dist(next, out.u);
        out.u = next;
        out.iterations = k;
        out.last_increment = w;
        if (w < tol) {
            out.converged = true;
            break;
        }
        if (k >= 2 && prev_w > 0.0 && w / prev_w >= 1.0) {
            if (++bad_streak >= 5) {
                out.contraction_failed = true;
                break;
            }
        } else {
            bad_streak = 0;
        }
        prev_w = w;
    }
    return out;
}

struct NonlinearLimitResult {
    std::vector<double> eps;
    std::vector<double> consecutive_dist;  // |u_{eps_i} - u_{eps_{i+1}}|
    std::vector<PicardTrace> traces;
    GridFunction limit;
    bool cauchy = true;
    double first_order_residual = 0.0;  // eps = 0 upwind operator applied to the limit
    bool residual_ok = false;
};

/// Run the Picard solver down the eps ladder and certify that the sequence
/// is settling: consecutive sup distances must trend downward and the final
/// iterate must satisfy the first-order upwind equation within tol.
inline NonlinearLimitResult viscosity_limit_nonlinear(const ProblemSpec& p,
                                                      const std::vector<double>& eps_ladder,
                                                      double tol) {
    ConstantsReport rep = compute_constants(p, default_lambda_box(p), 128);
    if (!rep.gate()) throw GateError("hyperbolicity conditions not satisfied");

    NonlinearLimitResult out;
    GridFunction prev;
    bool have_prev = false;
    double prev_dist = std::numeric_limits<double>::infinity();
    for (double eps : eps_ladder) {
        auto [srep, trace] = picard_elliptic(p, eps, GridFunction(p.make_grid()), p.tol_picard,
                                             200, &rep);
        out.traces.push_back(trace);
        out.eps.push_back(eps);
        if (have_prev) {
            double d = sup_dist(srep.solution, prev);
            out.consecutive_dist.push_back(d);
            if (d > prev_dist * 1.5) out.cauchy = false;
            prev_dist = d;
        }
        prev = srep.solution;
        have_prev = true;
    }
    out.limit = prev;
    LinearSystem first_order = assemble(p, 0.0, Scheme::upwind, &out.limit);
    out.first_order_residual = first_order.residual_sup(out.limit.values);
    out.residual_ok = out.first_order_residual <= tol;
    return out;
}

struct GronwallReport {
    double max_ratio = 0.0;   // observed distance over certified bound
    bool pass = false;
    double v_norm = 0.0;      // |u_b - u_a|
    double rate = 0.0;        // b0 + M beta
    long samples_checked = 0;
};

/// Certify the flow-distance bound
///   d(phi^{u_b}(t,x), phi^{u_a}(t,x)) <= beta |u_b-u_a| e^{|t|(b0+M beta)} / (b0+M beta)
/// by integrating both frozen flows from sampled starting points.
inline GronwallReport gronwall_certificate(const ProblemSpec& p, const GridFunction& u_a,
                                           const GridFunction& u_b, double M, double t_max,
                                           int samples,
                                           const ConstantsReport* constants = nullptr) {
    if (lip_estimate(u_a) > M || lip_estimate(u_b) > M)
        throw std::invalid_argument("gronwall_certificate: iterates exceed the Lipschitz bound M");
    ConstantsReport rep_local;
    if (!constants) {
        rep_local = compute_constants(p, default_lambda_box(p), 128);
        constants = &rep_local;
    }
    double b0 = constants->b0;
    double beta = constants->beta;
    double rate = b0 + beta * M;

    GronwallReport out;
    out.v_norm = sup_dist(u_a, u_b);
    out.rate = rate;

    TorusGrid g = p.make_grid();
    FlowField fa(p.b, &u_a);
    FlowField fb(p.b, &u_b);

    if (beta == 0.0) {
        // lambda-independent field: the flows coincide and the bound degenerates
        out.max_ratio = 0.0;
        out.pass = true;
        double probe[2] = {0.3, 0.7};
        double va[2], vb[2];
        fa.eval(probe, va);
        fb.eval(probe, vb);
        for (int i = 0; i < g.dim; ++i)
            if (std::fabs(va[i] - vb[i]) > 0.0) out.pass = false;
        return out;
    }
    if (rate <= 0.0) throw std::invalid_argument("gronwall_certificate: b0 + beta M must be positive");

    int n_points = std::max(1, std::min(samples, g.node_count()));
    int stride = std::max(1, g.node_count() / n_points);
    const int n_times = 16;
    double dt = 0.005;

    for (int sgn = -1; sgn <= 1; sgn += 2) {
        for (int idx = 0; idx < g.node_count(); idx += stride) {
            auto pt = g.point(idx);
            double xa[2] = {pt[0], pt[1]};
            double xb[2] = {pt[0], pt[1]};
            for (int ti = 1; ti <= n_times; ++ti) {
                double t0 = t_max * (ti - 1) / n_times;
                double t1 = t_max * ti / n_times;
                long steps = std::max<long>(1, static_cast<long>(std::ceil((t1 - t0) / dt)));
                double step = sgn * (t1 - t0) / static_cast<double>(steps);
                for (long s = 0; s < steps; ++s) {
                    detail::rk4_flow_step(fa, xa, step);
                    detail::rk4_flow_step(fb, xb, step);
                }
                double d2 = 0.0;
                for (int i = 0; i < g.dim; ++i) {
                    double di = circle_dist(xa[i], xb[i]);
                    d2 += di * di;
                }
                double dist = std::sqrt(d2);
                double bound = beta * out.v_norm * std::exp(t1 * rate) / rate;
                ++out.samples_checked;
                if (bound < 1e-14) {
                    if (dist > 1e-10) out.max_ratio = std::max(out.max_ratio, 1e6);
                } else {
                    out.max_ratio = std::max(out.max_ratio, dist / bound);
                }
            }
        }
    }
    out.pass = out.max_ratio <= 1.0 + 1e-2;
    return out;
}

}  // namespace torpde
