#include "wrinkle/relaxed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wrinkle::relaxed {

void LameConfig::validate() const {
    if (!is_finite(T_in) || !is_finite(T_out) || !is_finite(R_in) || !is_finite(R_out))
        throw InvalidConfigError("LameConfig: non-finite entry");
    if (T_in <= 0.0 || T_out <= 0.0) throw InvalidConfigError("LameConfig: loads must be positive");
    if (R_in <= 0.0 || R_out <= R_in) throw InvalidConfigError("LameConfig: need 0 < R_in < R_out");
}

HypothesisReport check_hypothesis(const LameConfig& cfg) {
    cfg.validate();
    HypothesisReport rep;
    rep.load_moment_lhs = cfg.T_in * cfg.R_in;
    rep.load_moment_rhs = cfg.T_out * cfg.R_out;
    rep.load_moment_ok = rep.load_moment_lhs < rep.load_moment_rhs;
    rep.load_ratio_lhs = cfg.T_in / cfg.T_out;
    rep.load_ratio_rhs = 2.0 * sq(cfg.R_out) / (sq(cfg.R_in) + sq(cfg.R_out));
    rep.load_ratio_ok = rep.load_ratio_lhs > rep.load_ratio_rhs;
    rep.admissible = rep.load_moment_ok && rep.load_ratio_ok;
    return rep;
}

FreeBoundary solve_free_boundary(const LameConfig& cfg) {
    cfg.validate();
    const double a = cfg.T_in * cfg.R_in;
    const double m = cfg.T_out * cfg.R_out;
    const double disc = sq(m) - sq(a);  // discriminant / (4 R_out^2)
    if (disc < -1e-14 * sq(m))
        throw InternalInconsistencyError("solve_free_boundary: negative discriminant (T_out R_out < T_in R_in)");
    const double root = cfg.R_out * std::sqrt(std::max(disc, 0.0));
    const double larger = (cfg.T_out * sq(cfg.R_out) + root) / a;
    const double R0 = sq(cfg.R_out) / larger;  // product of roots is R_out^2
    if (!(R0 > cfg.R_in) || !(R0 <= cfg.R_out * (1.0 + 1e-12)))
        throw InfeasibleGeometryError("solve_free_boundary: no root in (R_in, R_out]");

    // Remark-style fully-taut constants; u' matches both boundary loads but
    // jumps at the resulting zero of u. Reported for cross-checking only.
    const double A_taut = (cfg.T_in - cfg.T_out) / (1.0 / sq(cfg.R_out) - 1.0 / sq(cfg.R_in));
    const double B_taut = (cfg.T_out * sq(cfg.R_out) - cfg.T_in * sq(cfg.R_in)) / (sq(cfg.R_out) - sq(cfg.R_in));
    FreeBoundary fb;
    fb.R0 = std::min(R0, cfg.R_out);
    fb.R0_taut_form = (A_taut < 0.0 && B_taut > 0.0) ? std::sqrt(-A_taut / B_taut)
                                                     : std::numeric_limits<double>::quiet_NaN();
    return fb;
}

RelaxedSolution RelaxedSolution::build(const LameConfig& cfg) {
    const auto rep = check_hypothesis(cfg);
    if (!rep.admissible && !(rep.load_ratio_ok && rep.load_moment_lhs <= rep.load_moment_rhs))
        throw InvalidConfigError("RelaxedSolution: config violates the admissibility inequalities");
    const auto fb = solve_free_boundary(cfg);

    RelaxedSolution s;
    s.cfg_ = cfg;
    s.R0_ = fb.R0;
    s.R0_taut_ = fb.R0_taut_form;
    s.B_ = cfg.T_out * sq(cfg.R_out) / (sq(cfg.R_out) + sq(fb.R0));
    s.A_ = -s.B_ * sq(fb.R0);

    // E0 in closed form. The boundary terms of the relaxed energy equal the
    // negative of the bulk integral for the Euler-Lagrange solution, so
    // E0 = -pi * (inner log-branch integral + outer branch integral).
    const double a = cfg.T_in * cfg.R_in;
    const double bulk_in = sq(a) * std::log(fb.R0 / cfg.R_in);
    const double bulk_out = sq(s.B_) * sq(cfg.R_out) - sq(s.A_) / sq(cfg.R_out);
    const double pi = std::acos(-1.0);
    s.E0_ = -pi * (bulk_in + bulk_out);

    const double boundary = a * s.u(cfg.R_in) - cfg.T_out * cfg.R_out * s.u(cfg.R_out);
    const double direct = 2.0 * pi * (0.5 * (bulk_in + bulk_out) + boundary);
    if (std::abs(direct - s.E0_) > 1e-10 * (1.0 + std::abs(s.E0_)))
        throw InternalInconsistencyError("RelaxedSolution: closed-form energy routes disagree");
    return s;
}

void RelaxedSolution::check_domain(double r) const {
    const double tol = 1e-12 * cfg_.R_out;
    if (!(r >= cfg_.R_in - tol && r <= cfg_.R_out + tol))
        throw OutOfRangeError("RelaxedSolution: radius outside [R_in, R_out]");
}

double RelaxedSolution::u(double r) const {
    check_domain(r);
    if (r <= R0_) return cfg_.T_in * cfg_.R_in * std::log(r / R0_);
    return A_ / r + B_ * r;
}

double RelaxedSolution::du(double r) const {
    check_domain(r);
    if (r <= R0_) return cfg_.T_in * cfg_.R_in / r;
    return -A_ / sq(r) + B_;
}

double RelaxedSolution::ddu(double r) const {
    check_domain(r);
    if (r <= R0_) return -cfg_.T_in * cfg_.R_in / sq(r);
    return 2.0 * A_ / (r * sq(r));
}

double RelaxedSolution::beta(double r) const {
    check_domain(r);
    if (r > R0_ * (1.0 + 1e-12)) throw OutOfRangeError("beta: requires r <= R0");
    return std::sqrt(std::max(-u(std::min(r, R0_)) * r, 0.0));
}

double RelaxedSolution::excess_arclength(double r) const { return -2.0 * r * u(r); }

double RelaxedSolution::d_excess_arclength(double r) const { return -2.0 * (u(r) + r * du(r)); }

double relaxed_energy_E0(const RelaxedSolution& sol, const RadialGrid& grid) {
    const auto& cfg = sol.config();
    const double tol = 1e-9 * cfg.R_out;
    if (std::abs(grid.front() - cfg.R_in) > tol || std::abs(grid.back() - cfg.R_out) > tol)
        throw DomainMismatchError("relaxed_energy_E0: grid must span [R_in, R_out]");
    const auto w = grid.trapezoid_weights();
    double bulk = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double r = grid.node(i);
        bulk += w[i] * (sq(pos(sol.du(r))) + sq(pos(sol.u(r)) / r)) * r;
    }
    const double boundary = cfg.T_in * cfg.R_in * sol.u(cfg.R_in) - cfg.T_out * cfg.R_out * sol.u(cfg.R_out);
    const double pi = std::acos(-1.0);
    return 2.0 * pi * (0.5 * bulk + boundary);
}

namespace {

struct DiscreteRelaxed {
    const LameConfig& cfg;
    const std::vector<double>& r;
    double h;
    std::vector<double> rmid;    // cell midpoints of r
    std::vector<double> wtrap;   // nodal trapezoid weights

    explicit DiscreteRelaxed(const LameConfig& c, const RadialGrid& grid)
        : cfg(c), r(grid.nodes()), h(grid.spacing()) {
        rmid.resize(r.size() - 1);
        for (std::size_t i = 0; i + 1 < r.size(); ++i) rmid[i] = 0.5 * (r[i] + r[i + 1]);
        wtrap = grid.trapezoid_weights();
    }

    double objective(const std::vector<double>& v) const {
        double s_mem = 0.0;
        for (std::size_t i = 0; i + 1 < v.size(); ++i)
            s_mem += h * sq(pos((v[i + 1] - v[i]) / h)) * rmid[i];
        double s_hoop = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) s_hoop += wtrap[i] * sq(pos(v[i] / r[i])) * r[i];
        const double pi = std::acos(-1.0);
        return 2.0 * pi * (0.5 * (s_mem + s_hoop) + cfg.T_in * cfg.R_in * v.front() -
                           cfg.T_out * cfg.R_out * v.back());
    }

    void gradient(const std::vector<double>& v, std::vector<double>& g) const {
        const std::size_t n = v.size();
        g.assign(n, 0.0);
        const double pi = std::acos(-1.0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double d = pos((v[i + 1] - v[i]) / h);
            if (d > 0.0) {
                g[i] -= d * rmid[i];
                g[i + 1] += d * rmid[i];
            }
        }
        for (std::size_t i = 0; i < n; ++i) g[i] += wtrap[i] * pos(v[i] / r[i]);
        for (std::size_t i = 0; i < n; ++i) g[i] *= 2.0 * pi;
        g.front() += 2.0 * pi * cfg.T_in * cfg.R_in;
        g.back() -= 2.0 * pi * cfg.T_out * cfg.R_out;
    }

    double lipschitz() const {
        const double pi = std::acos(-1.0);
        return 2.0 * pi * (2.0 * cfg.R_out / h + h / cfg.R_in) + 1.0;
    }
};

}  // namespace

double relaxed_objective(const LameConfig& cfg, const RadialGrid& grid, const std::vector<double>& v) {
    if (v.size() != grid.size()) throw DomainMismatchError("relaxed_objective: size mismatch");
    return DiscreteRelaxed(cfg, grid).objective(v);
}

void relaxed_gradient(const LameConfig& cfg, const RadialGrid& grid, const std::vector<double>& v,
                      std::vector<double>& grad) {
    if (v.size() != grid.size()) throw DomainMismatchError("relaxed_gradient: size mismatch");
    DiscreteRelaxed(cfg, grid).gradient(v, grad);
}

RelaxedMinimizeResult minimize_relaxed_numeric(const LameConfig& cfg, const RadialGrid& grid,
                                               const RelaxedMinimizeOptions& opts) {
    const auto rep = check_hypothesis(cfg);
    if (!rep.admissible) throw InvalidConfigError("minimize_relaxed_numeric: config not admissible");
    if (!grid.is_uniform()) throw InvalidConfigError("minimize_relaxed_numeric: grid must be uniform");

    const DiscreteRelaxed prob(cfg, grid);
    const std::size_t n = grid.size();
    const double step = 1.0 / prob.lipschitz();

    std::vector<double> x(n, 0.0), x_prev(n, 0.0), y(n, 0.0), g(n), gx(n), x_next(n);
    double t_acc = 1.0;
    double fx = prob.objective(x);
    double grad_norm = std::numeric_limits<double>::infinity();
    long it = 0;
    for (; it < opts.max_iterations; ++it) {
        if (it % 32 == 0) {
            prob.gradient(x, gx);
            grad_norm = 0.0;
            for (std::size_t i = 0; i < n; ++i) grad_norm = std::max(grad_norm, std::abs(gx[i]));
            if (grad_norm <= opts.grad_tolerance) break;
        }
        prob.gradient(y, g);
        for (std::size_t i = 0; i < n; ++i) x_next[i] = y[i] - step * g[i];
        const double f_next = prob.objective(x_next);
        if (f_next > fx) {
            // Adaptive restart: drop momentum and step from the last iterate.
            t_acc = 1.0;
            prob.gradient(x, g);
            for (std::size_t i = 0; i < n; ++i) x_next[i] = x[i] - step * g[i];
            x_prev = x;
            x = x_next;
            fx = prob.objective(x);
            y = x;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        const double momentum = (t_acc - 1.0) / t_next;
        x_prev.swap(x);
        x.swap(x_next);
        fx = f_next;
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + momentum * (x[i] - x_prev[i]);
        t_acc = t_next;
    }
    if (grad_norm > opts.grad_tolerance)
        throw ConvergenceFailureError("minimize_relaxed_numeric: iteration budget exhausted", grad_norm, it);

    RelaxedMinimizeResult res;
    res.objective = prob.objective(x);
    res.grad_norm = grad_norm;
    res.iterations = it;
    res.sign_change_radius = std::numeric_limits<double>::quiet_NaN();
    const auto& r = grid.nodes();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (x[i] < 0.0 && x[i + 1] >= 0.0) {
            const double t = -x[i] / (x[i + 1] - x[i]);
            res.sign_change_radius = r[i] + t * (r[i + 1] - r[i]);
            break;
        }
    }
    res.v = std::move(x);
    return res;
}

double wrel(double f11, double f12, double f22) {
    if (!is_finite(f11) || !is_finite(f12) || !is_finite(f22))
        throw InvalidConfigError("wrel: non-finite strain");
    const double mean = 0.5 * (f11 + f22);
    const double rad = std::hypot(0.5 * (f11 - f22), f12);
    return sq(pos(mean + rad)) + sq(pos(mean - rad));
}

std::vector<double> el_residual(const RelaxedSolution& sol, const RadialGrid& grid) {
    const auto& r = grid.nodes();
    const std::size_t n = r.size();
    std::vector<double> flux(n), res(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) flux[i] = r[i] * sol.du(r[i]);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double d = (flux[i + 1] - flux[i - 1]) / (r[i + 1] - r[i - 1]);
        res[i] = d - pos(sol.u(r[i])) / r[i];
    }
    return res;
}

}  // namespace wrinkle::relaxed
