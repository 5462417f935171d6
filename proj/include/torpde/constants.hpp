#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "torpde/expr.hpp"
#include "torpde/grid.hpp"
#include "torpde/io.hpp"
#include "torpde/problem.hpp"

namespace torpde {

/// Raised when an operation requires the hyperbolicity gate (or another
/// stated precondition) that the given constants do not satisfy.
class GateError : public std::runtime_error {
  public:
    explicit GateError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
};

/// Extended value with explicit sentinels; reports never carry floating-point
/// infinities.
struct Extended {
    enum class Kind { finite, plus_infinity, undefined };
    Kind kind = Kind::undefined;
    double value = 0.0;
    std::string note;

    static Extended finite(double v) { return {Kind::finite, v, ""}; }
    static Extended plus_infinity() { return {Kind::plus_infinity, 0.0, ""}; }
    static Extended undefined(std::string why) { return {Kind::undefined, 0.0, std::move(why)}; }

    bool is_finite() const { return kind == Kind::finite; }
    bool is_infinite() const { return kind == Kind::plus_infinity; }

    std::string str() const {
        switch (kind) {
            case Kind::finite: return num17(value);
            case Kind::plus_infinity: return "+inf";
            default: return note.empty() ? "undefined" : "undefined: " + note;
        }
    }
};

/// Every named constant of the estimates, plus the hyperbolicity verdicts.
/// On flat tori the curvature bound r0 is exactly 0; tests may inject a
/// hypothetical r0 to exercise the curvature-dependent formulas.
struct ConstantsReport {
    double b0 = 0.0;     // sup of <grad_X b, X> over unit X: largest eigenvalue of the symmetrized Jacobian
    double beta = 0.0;   // sup |db/dlam|
    double c0 = 0.0;     // inf c
    double f0 = 0.0;     // |df| + |f||dc|/c0
    double gamma = 0.0;  // sup |dc/dlam| * |f| / c0
    double r0 = 0.0;

    bool c0_positive = false;
    bool cond1 = false;  // c0 - b0 - gamma > 0
    bool cond2 = false;  // (c0 - b0 - gamma)^2 - 4 f0 beta > 0
    Interval lambda_box;
    bool lambda_box_contains_apriori = false;
    int samples = 0;

    // auxiliary suprema the explicit bounds are built from
    double f_sup = 0.0;
    double df_sup = 0.0;
    double dc_sup = 0.0;
    double dc_dlam_sup = 0.0;
    double b_sup = 0.0;
    double c_sup = 0.0;

    bool gate() const { return c0_positive && cond1 && cond2; }
};

namespace detail {

struct DerivativeSet {
    // spatial partials of b components, db/dlam, spatial partials of c, dc/dlam, df
    std::vector<std::vector<FieldExpr>> db_dx;  // [comp][axis]
    std::vector<FieldExpr> db_dlam;
    std::vector<FieldExpr> dc_dx;
    FieldExpr dc_dlam;
    std::vector<FieldExpr> df_dx;
};

inline DerivativeSet build_derivatives(const ProblemSpec& p) {
    DerivativeSet d;
    std::vector<std::string> axes = {"x1", "x2"};
    for (const auto& comp : p.b) {
        std::vector<FieldExpr> row;
        for (int a = 0; a < p.dim; ++a) row.push_back(differentiate(comp, axes[static_cast<std::size_t>(a)]));
        d.db_dx.push_back(std::move(row));
        d.db_dlam.push_back(differentiate(comp, "lam"));
    }
    for (int a = 0; a < p.dim; ++a) d.dc_dx.push_back(differentiate(p.c, axes[static_cast<std::size_t>(a)]));
    d.dc_dlam = differentiate(p.c, "lam");
    for (int a = 0; a < p.dim; ++a) d.df_dx.push_back(differentiate(p.f, axes[static_cast<std::size_t>(a)]));
    return d;
}

/// Largest eigenvalue of the symmetrized Jacobian, closed form for 1x1/2x2.
inline double sym_jacobian_max_eig(const double* j, int dim) {
    if (dim == 1) return j[0];
    double s11 = j[0], s22 = j[3];
    double s12 = 0.5 * (j[1] + j[2]);
    double mean = 0.5 * (s11 + s22);
    double off = std::sqrt(0.25 * (s11 - s22) * (s11 - s22) + s12 * s12);
    return mean + off;
}

template <typename F>
inline void for_each_sample(const ProblemSpec& p, Interval box, int samples, bool lambda_used, F&& fn) {
    double step = two_pi / samples;
    int lam_count = lambda_used ? samples : 1;
    for (int li = 0; li < lam_count; ++li) {
        double lam = lambda_used && samples > 1
                         ? box.lo + (box.hi - box.lo) * li / (samples - 1)
                         : 0.0;
        if (!lambda_used) lam = 0.0;
        if (p.dim == 1) {
            double x[2] = {0.0, 0.0};
            for (int i = 0; i < samples; ++i) {
                x[0] = i * step;
                fn(x, lam);
            }
        } else {
            double x[2];
            for (int j = 0; j < samples; ++j)
                for (int i = 0; i < samples; ++i) {
                    x[0] = i * step;
                    x[1] = j * step;
                    fn(x, lam);
                }
        }
    }
}

}  // namespace detail

/// Suprema and infima by dense sampling of the symbolic derivatives over
/// grid x lambda_box. A c0 <= 0 outcome is reported as a gate failure in the
/// returned record, not as an exception.
inline ConstantsReport compute_constants(const ProblemSpec& p, Interval lambda_box, int samples = 128) {
    if (samples < 64) throw std::invalid_argument("compute_constants needs samples >= 64 per axis");
    detail::DerivativeSet d = detail::build_derivatives(p);
    bool lambda_used = p.lambda_dependent();

    ConstantsReport rep;
    rep.lambda_box = lambda_box;
    rep.samples = samples;
    rep.r0 = 0.0;  // flat metric

    double b0 = -std::numeric_limits<double>::infinity();
    double beta = 0.0, c_min = std::numeric_limits<double>::infinity();
    double c_max = -std::numeric_limits<double>::infinity();
    double dc = 0.0, dcl = 0.0, fs = 0.0, dfs = 0.0, bs = 0.0;
    double f_min = std::numeric_limits<double>::infinity();
    double f_max = -std::numeric_limits<double>::infinity();

    detail::for_each_sample(p, lambda_box, samples, lambda_used, [&](const double* x, double lam) {
        double jac[4] = {0, 0, 0, 0};
        for (int i = 0; i < p.dim; ++i)
            for (int a = 0; a < p.dim; ++a)
                jac[2 * i + a] = d.db_dx[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)].eval(x, lam);
        b0 = std::max(b0, detail::sym_jacobian_max_eig(jac, p.dim));

        double bl2 = 0.0, bv2 = 0.0;
        for (int i = 0; i < p.dim; ++i) {
            double g = d.db_dlam[static_cast<std::size_t>(i)].eval(x, lam);
            bl2 += g * g;
            double bv = p.b[static_cast<std::size_t>(i)].eval(x, lam);
            bv2 += bv * bv;
        }
        beta = std::max(beta, std::sqrt(bl2));
        bs = std::max(bs, std::sqrt(bv2));

        double cv = p.c.eval(x, lam);
        c_min = std::min(c_min, cv);
        c_max = std::max(c_max, cv);
        double dc2 = 0.0;
        for (int a = 0; a < p.dim; ++a) {
            double g = d.dc_dx[static_cast<std::size_t>(a)].eval(x, lam);
            dc2 += g * g;
        }
        dc = std::max(dc, std::sqrt(dc2));
        dcl = std::max(dcl, std::fabs(d.dc_dlam.eval(x, lam)));

        double fv = p.f.eval(x, 0.0);
        fs = std::max(fs, std::fabs(fv));
        f_min = std::min(f_min, fv);
        f_max = std::max(f_max, fv);
        double df2 = 0.0;
        for (int a = 0; a < p.dim; ++a) {
            double g = d.df_dx[static_cast<std::size_t>(a)].eval(x, 0.0);
            df2 += g * g;
        }
        dfs = std::max(dfs, std::sqrt(df2));
    });

    rep.b0 = b0;
    rep.beta = beta;
    rep.c0 = c_min;
    rep.c_sup = c_max;
    rep.dc_sup = dc;
    rep.dc_dlam_sup = dcl;
    rep.f_sup = fs;
    rep.df_sup = dfs;
    rep.b_sup = bs;

    rep.c0_positive = c_min > 0.0;
    if (rep.c0_positive) {
        rep.f0 = dfs + fs * dc / c_min;
        rep.gamma = dcl * fs / c_min;
        double a = c_min - b0 - rep.gamma;
        rep.cond1 = a > 0.0;
        rep.cond2 = a * a - 4.0 * rep.f0 * beta > 0.0;
        // a-priori range of u implied by the maximum principle
        double lo = std::min(f_min / c_min, f_min / c_max);
        double hi = std::max(f_max / c_min, f_max / c_max);
        rep.lambda_box_contains_apriori = lambda_box.contains(Interval{lo, hi});
    }
    return rep;
}

/// Widen a lambda interval until it contains the maximum-principle range of u
/// computed over that same interval (fixed point of the box map).
inline Interval default_lambda_box(const ProblemSpec& p, int samples = 128) {
    if (p.lambda_box_override) return Interval{p.lambda_box_override->first, p.lambda_box_override->second};
    Interval box{0.0, 0.0};
    bool lambda_used = p.lambda_dependent();
    for (int round = 0; round < 8; ++round) {
        double c_min = std::numeric_limits<double>::infinity();
        double c_max = -std::numeric_limits<double>::infinity();
        double f_min = std::numeric_limits<double>::infinity();
        double f_max = -std::numeric_limits<double>::infinity();
        detail::for_each_sample(p, box, samples, lambda_used, [&](const double* x, double lam) {
            double cv = p.c.eval(x, lam);
            c_min = std::min(c_min, cv);
            c_max = std::max(c_max, cv);
            double fv = p.f.eval(x, 0.0);
            f_min = std::min(f_min, fv);
            f_max = std::max(f_max, fv);
        });
        if (c_min <= 0.0)
            throw GateError("cannot derive a lambda box: min c <= 0 on the current box");
        double lo = std::min({0.0, f_min / c_min, f_min / c_max});
        double hi = std::max({0.0, f_max / c_min, f_max / c_max});
        double margin = 1e-6 * (hi - lo) + 1e-9;
        Interval next{std::min(box.lo, lo - margin), std::max(box.hi, hi + margin)};
        if (next.lo >= box.lo - 1e-12 && next.hi <= box.hi + 1e-12) return box;
        box = next;
    }
    throw GateError("lambda box iteration did not settle; override it explicitly");
}

/// Smaller positive root of beta X^2 - X (c0 - b0 - eps r0 - gamma) + f0 = 0.
/// Degenerates to f0 / (c0 - b0 - eps r0 - gamma) when beta = 0.
inline double r_of_eps(const ConstantsReport& rep, double eps) {
    if (!rep.gate()) throw GateError("hyperbolicity conditions not satisfied");
    if (eps < 0.0) throw std::invalid_argument("eps must be nonnegative");
    double a = rep.c0 - rep.b0 - eps * rep.r0 - rep.gamma;
    if (a <= 0.0) throw GateError("c0 - b0 - eps r0 - gamma <= 0 at this eps");
    if (rep.beta == 0.0) return rep.f0 / a;
    double disc = a * a - 4.0 * rep.f0 * rep.beta;
    if (disc <= 0.0) throw GateError("eps at or beyond eps_bar: no real root");
    return 2.0 * rep.f0 / (a + std::sqrt(disc));
}

/// (c0 - b0 - gamma - 2 sqrt(f0 beta)) / r0. On flat tori r0 = 0, so the
/// admissible eps range is unbounded whenever condition 2 holds.
inline Extended eps_bar(const ConstantsReport& rep) {
    if (!rep.c0_positive || !rep.cond2)
        return Extended::undefined("condition 2 fails: no positive roots");
    double num = rep.c0 - rep.b0 - rep.gamma - 2.0 * std::sqrt(rep.f0 * rep.beta);
    if (rep.r0 == 0.0) return Extended::plus_infinity();
    return Extended::finite(num / rep.r0);
}

/// Lipschitz bound for the linear regularized solution:
/// (|df| + |f||dc|/c0) / (c0 - eps r0 - b0).
inline double lip_bound_linear(const ConstantsReport& rep, double eps) {
    if (!rep.c0_positive) throw GateError("c0 <= 0");
    double den = rep.c0 - eps * rep.r0 - rep.b0;
    if (den <= 0.0) throw GateError("c0 - eps r0 - b0 <= 0");
    return (rep.df_sup + rep.f_sup * rep.dc_sup / rep.c0) / den;
}

/// Radius of the uniqueness neighborhood in the C^{0,1} norm: below this
/// bound on ||f||_{C^{0,1}} at most one M-Lipschitz solution exists.
inline Extended uniqueness_radius(const ConstantsReport& rep, double M) {
    if (!rep.c0_positive) return Extended::undefined("c0 <= 0");
    if (rep.beta == 0.0 && rep.dc_dlam_sup == 0.0)
        return Extended::plus_infinity();  // linear case: unconditional uniqueness
    double term1 = 0.0;
    if (rep.beta > 0.0) {
        if (rep.b0 <= 0.0) return Extended::undefined("degenerate: formula divides by b0 = 0");
        double den = rep.c0 - rep.b0 - M * rep.beta;
        if (den <= 0.0) return Extended::undefined("c0 - b0 - M beta <= 0");
        term1 = rep.beta / (den * rep.b0) * (1.0 + M * rep.dc_dlam_sup + rep.dc_sup);
    }
    double term2 = rep.dc_dlam_sup / (rep.c0 * rep.c0);
    return Extended::finite(1.0 / (term1 + term2));
}

inline std::string constants_to_json(const ConstantsReport& rep) {
    FlatJson j;
    j.add_number("b0", rep.b0);
    j.add_number("beta", rep.beta);
    j.add_number("c0", rep.c0);
    j.add_number("f0", rep.f0);
    j.add_number("gamma", rep.gamma);
    j.add_number("r0", rep.r0);
    j.add_bool("c0_positive", rep.c0_positive);
    j.add_bool("cond1", rep.cond1);
    j.add_bool("cond2", rep.cond2);
    j.add_number("lambda_lo", rep.lambda_box.lo);
    j.add_number("lambda_hi", rep.lambda_box.hi);
    j.add_bool("lambda_box_contains_apriori", rep.lambda_box_contains_apriori);
    j.add_int("samples", rep.samples);
    j.add_number("f_sup", rep.f_sup);
    j.add_number("df_sup", rep.df_sup);
    j.add_number("dc_sup", rep.dc_sup);
    j.add_number("dc_dlam_sup", rep.dc_dlam_sup);
    j.add_number("b_sup", rep.b_sup);
    j.add_number("c_sup", rep.c_sup);
    j.add_string("eps_bar", eps_bar(rep).str());
    if (rep.gate()) j.add_number("r_eps0", r_of_eps(rep, 0.0));
    return j.str();
}

}  // namespace torpde
