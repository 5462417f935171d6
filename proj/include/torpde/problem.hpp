#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "torpde/expr.hpp"
#include "torpde/grid.hpp"

namespace torpde {

/// Configuration error with file position diagnostics.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& msg, int line = 0, const std::string& field = "")
        : std::runtime_error(field.empty() ? msg + (line > 0 ? " (line " + std::to_string(line) + ")" : "")
                                           : msg + " (field '" + field + "'" +
                                                 (line > 0 ? ", line " + std::to_string(line) : "") + ")"),
          line_(line),
          field_(field) {}
    int line() const { return line_; }
    const std::string& field() const { return field_; }

  private:
    int line_;
    std::string field_;
};

/// The quadruple (m, b, c, f) plus solver knobs; the single source of truth
/// for a PDE instance.
struct ProblemSpec {
    int dim = 1;
    std::vector<std::string> b_source;  // one expression per component
    std::string c_source;
    std::string f_source;

    std::vector<FieldExpr> b;
    FieldExpr c;
    FieldExpr f;

    int n = 512;
    Scheme scheme = Scheme::upwind;
    double tol_solver = 1e-8;
    double tol_quad = 1e-8;
    double tol_picard = 1e-8;
    long max_iter = 2000000;
    std::vector<double> eps_ladder = {0.4, 0.2, 0.1, 0.05, 0.025};
    std::optional<std::pair<double, double>> lambda_box_override;

    TorusGrid make_grid() const { return TorusGrid(dim, n); }

    bool lambda_dependent() const {
        if (c.depends_on_lambda()) return true;
        for (const auto& comp : b)
            if (comp.depends_on_lambda()) return true;
        return false;
    }
};

/// Assemble and validate a ProblemSpec from its raw pieces.
inline ProblemSpec make_problem(int dim, std::vector<std::string> b_src, std::string c_src,
                                std::string f_src) {
    if (dim != 1 && dim != 2) throw ConfigError("m must be 1 or 2", 0, "m");
    ProblemSpec p;
    p.dim = dim;
    p.n = dim == 1 ? 512 : 128;
    p.b_source = std::move(b_src);
    p.c_source = std::move(c_src);
    p.f_source = std::move(f_src);
    if (static_cast<int>(p.b_source.size()) != dim)
        throw ConfigError("need one b component per dimension", 0, "b");
    try {
        for (const auto& s : p.b_source) p.b.push_back(parse_field_expr(s, dim));
    } catch (const ParseError& e) {
        throw ConfigError(std::string("cannot parse b: ") + e.what(), 0, "b1");
    }
    try {
        p.c = parse_field_expr(p.c_source, dim);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("cannot parse c: ") + e.what(), 0, "c");
    }
    try {
        p.f = parse_field_expr(p.f_source, dim);
        if (p.f.depends_on_lambda()) throw ConfigError("f must not depend on lam", 0, "f");
    } catch (const ParseError& e) {
        throw ConfigError(std::string("cannot parse f: ") + e.what(), 0, "f");
    }
    return p;
}

inline void validate_problem(const ProblemSpec& p) {
    if (p.n < 8) throw ConfigError("n must be at least 8", 0, "n");
    if (p.eps_ladder.empty()) throw ConfigError("eps_ladder must not be empty", 0, "eps_ladder");
    for (std::size_t i = 0; i < p.eps_ladder.size(); ++i) {
        if (p.eps_ladder[i] <= 0.0)
            throw ConfigError("eps_ladder entries must be positive", 0, "eps_ladder");
        if (i > 0 && p.eps_ladder[i] >= p.eps_ladder[i - 1])
            throw ConfigError("eps_ladder must be strictly decreasing", 0, "eps_ladder");
    }
    if (p.tol_solver <= 0 || p.tol_quad <= 0 || p.tol_picard <= 0)
        throw ConfigError("tolerances must be positive", 0, "tol");
}

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_double_list(const std::string& s, int line, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty entry in list", line, field);
        char* end = nullptr;
        double v = std::strtod(item.c_str(), &end);
        if (end != item.c_str() + item.size()) throw ConfigError("malformed number '" + item + "'", line, field);
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("empty list", line, field);
    return out;
}

inline double parse_one_double(const std::string& s, int line, const std::string& field) {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str() + s.size() || s.empty())
        throw ConfigError("malformed number '" + s + "'", line, field);
    return v;
}

}  // namespace detail

/// Parse the flat key=value problem format. Lines starting with '#' are
/// comments; array values are comma separated.
inline ProblemSpec parse_problem_config(std::istream& in) {
    std::map<std::string, std::pair<std::string, int>> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", lineno);
        std::string key = detail::trim(t.substr(0, eq));
        std::string val = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw ConfigError("empty key", lineno);
        if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'", lineno, key);
        kv[key] = {val, lineno};
    }

    auto take = [&](const std::string& key) -> std::optional<std::pair<std::string, int>> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        auto v = it->second;
        kv.erase(it);
        return v;
    };
    auto require = [&](const std::string& key) {
        auto v = take(key);
        if (!v) throw ConfigError("missing required field '" + key + "'", 0, key);
        return *v;
    };

    auto [m_str, m_line] = require("m");
    int dim = 0;
    if (m_str == "1") dim = 1;
    else if (m_str == "2") dim = 2;
    else throw ConfigError("m must be 1 or 2", m_line, "m");

    std::vector<std::string> b_src;
    b_src.push_back(require("b1").first);
    if (dim == 2) b_src.push_back(require("b2").first);
    std::string c_src = require("c").first;
    std::string f_src = require("f").first;

    ProblemSpec p = make_problem(dim, b_src, c_src, f_src);

    if (auto v = take("n")) p.n = static_cast<int>(detail::parse_one_double(v->first, v->second, "n"));
    if (auto v = take("scheme")) {
        if (v->first == "upwind") p.scheme = Scheme::upwind;
        else if (v->first == "centered") p.scheme = Scheme::centered;
        else throw ConfigError("scheme must be 'upwind' or 'centered'", v->second, "scheme");
    }
    if (auto v = take("tol_solver")) p.tol_solver = detail::parse_one_double(v->first, v->second, "tol_solver");
    if (auto v = take("tol_quad")) p.tol_quad = detail::parse_one_double(v->first, v->second, "tol_quad");
    if (auto v = take("tol_picard")) p.tol_picard = detail::parse_one_double(v->first, v->second, "tol_picard");
    if (auto v = take("max_iter"))
        p.max_iter = static_cast<long>(detail::parse_one_double(v->first, v->second, "max_iter"));
    if (auto v = take("eps_ladder")) p.eps_ladder = detail::parse_double_list(v->first, v->second, "eps_ladder");
    if (auto v = take("lambda_box")) {
        auto box = detail::parse_double_list(v->first, v->second, "lambda_box");
        if (box.size() != 2 || box[0] >= box[1])
            throw ConfigError("lambda_box needs two increasing numbers", v->second, "lambda_box");
        p.lambda_box_override = {box[0], box[1]};
    }
    if (!kv.empty()) {
        auto it = kv.begin();
        throw ConfigError("unknown field '" + it->first + "'", it->second.second, it->first);
    }

    validate_problem(p);
    return p;
}

inline ProblemSpec load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open problem file: " + path);
    return parse_problem_config(in);
}

}  // namespace torpde
