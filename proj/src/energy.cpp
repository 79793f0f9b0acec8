#include "wrinkle/energy.hpp"

#include <cmath>

#include "wrinkle/parallel.hpp"

namespace wrinkle::energy {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kSqrt2 = 1.41421356237309504880168872420969808;

using spectral::Fft;
using spectral::TrigSeries;

// Radial derivative of every theta column, second order, preferring exact
// channels when the field carries them.
Array2D radial_derivative(const RadialGrid& grid, const Array2D& f) {
    const std::size_t nr = f.rows(), nt = f.cols();
    Array2D out(nr, nt);
    const auto& r = grid.nodes();
    par::for_each_index(nt, [&](std::size_t j) {
        std::vector<double> col(nr);
        for (std::size_t i = 0; i < nr; ++i) col[i] = f(i, j);
        const auto d = derivative_samples(r, col);
        for (std::size_t i = 0; i < nr; ++i) out(i, j) = d[i];
    });
    return out;
}

Array2D radial_second_derivative(const RadialGrid& grid, const Array2D& f) {
    const std::size_t nr = f.rows(), nt = f.cols();
    Array2D out(nr, nt);
    const auto& r = grid.nodes();
    par::for_each_index(nt, [&](std::size_t j) {
        for (std::size_t i = 1; i + 1 < nr; ++i) {
            const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
            out(i, j) = 2.0 * (f(i - 1, j) / (hm * (hm + hp)) - f(i, j) / (hm * hp) +
                               f(i + 1, j) / (hp * (hm + hp)));
        }
        if (grid.is_uniform() && nr >= 4) {
            const double h2 = sq(grid.spacing());
            out(0, j) = (2.0 * f(0, j) - 5.0 * f(1, j) + 4.0 * f(2, j) - f(3, j)) / h2;
            out(nr - 1, j) =
                (2.0 * f(nr - 1, j) - 5.0 * f(nr - 2, j) + 4.0 * f(nr - 3, j) - f(nr - 4, j)) / h2;
        } else {
            out(0, j) = out(1, j);
            out(nr - 1, j) = out(nr - 2, j);
        }
    });
    return out;
}

// Spectral theta derivative of every row; optionally reports the worst
// spectral tail fraction beyond m_cut (aliasing guard).
Array2D theta_derivative(const Array2D& f, double period, int order, std::size_t m_cut,
                         double* worst_tail) {
    const std::size_t nr = f.rows(), nt = f.cols();
    Array2D out(nr, nt);
    const Fft plan(nt);
    std::vector<double> tails(nr, 0.0);
    par::for_each_index(nr, [&](std::size_t i) {
        std::vector<double> row(f.row(i), f.row(i) + nt);
        TrigSeries ts = trig_forward(row, period, plan);
        if (worst_tail && ts.energy() > 1e-30) tails[i] = spectral::tail_energy_fraction(ts, m_cut);
        ts.nyquist_c = 0.0;  // derivative of the Nyquist mode is not representable
        for (int o = 0; o < order; ++o) ts = trig_derivative(ts);
        const auto d = trig_inverse(ts, plan);
        for (std::size_t j = 0; j < nt; ++j) out(i, j) = d[j];
    });
    if (worst_tail) {
        *worst_tail = 0.0;
        for (double t : tails) *worst_tail = std::max(*worst_tail, t);
    }
    return out;
}

struct Work {
    std::size_t nr = 0, nt = 0;
    Array2D dur, duth, dxi, ddxi, dxith;  // radial derivatives + d2(xi)/dr dtheta
    Array2D tur, tuth, txi, ttxi;         // theta derivatives
};

Work build_work(const DisplacementField& f) {
    f.validate();
    Work w;
    w.nr = f.grid.size();
    w.nt = f.theta_count();
    if (f.has_exact_derivatives()) {
        w.dur = f.du_r;
        w.duth = f.du_theta;
        w.dxi = f.dxi;
        w.ddxi = f.ddxi;
    } else {
        w.dur = radial_derivative(f.grid, f.u_r);
        w.duth = radial_derivative(f.grid, f.u_theta);
        w.dxi = radial_derivative(f.grid, f.xi);
        w.ddxi = radial_second_derivative(f.grid, f.xi);
    }
    double tail_xi = 0.0, tail_ur = 0.0, tail_uth = 0.0;
    const std::size_t quartic_cut = (w.nt - 1) / 4;
    const std::size_t quad_cut = w.nt / 2 - 1;
    w.txi = theta_derivative(f.xi, f.period, 1, quartic_cut, &tail_xi);
    w.ttxi = theta_derivative(f.xi, f.period, 2, quartic_cut, nullptr);
    w.tur = theta_derivative(f.u_r, f.period, 1, quad_cut, &tail_ur);
    w.tuth = theta_derivative(f.u_theta, f.period, 1, quad_cut, &tail_uth);
    w.dxith = theta_derivative(w.dxi, f.period, 1, quartic_cut, nullptr);
    if (tail_xi > 1e-9 || tail_ur > 1e-9 || tail_uth > 1e-9)
        throw AliasingError("theta resolution insufficient for the field bandwidth");
    return w;
}

std::vector<double> quad_weights(const RadialGrid& g) {
    return g.is_uniform() ? g.simpson_weights() : g.trapezoid_weights();
}

double eval_Eh_impl(const DisplacementField& f, const Work& w, double h,
                    const relaxed::RelaxedSolution& sol) {
    const auto& cfg = sol.config();
    const auto wq = quad_weights(f.grid);
    std::vector<double> node_vals(w.nr, 0.0);
    par::for_each_index(w.nr, [&](std::size_t i) {
        const double r = f.grid.node(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < w.nt; ++j) {
            const double X = w.dur(i, j) + 0.5 * sq(w.dxi(i, j));
            const double Y = f.u_r(i, j) / r + w.tuth(i, j) / r + sq(w.txi(i, j)) / (2.0 * sq(r));
            const double SH = w.tur(i, j) / (2.0 * r) + 0.5 * w.duth(i, j) -
                              f.u_theta(i, j) / (2.0 * r) + w.dxi(i, j) * w.txi(i, j) / (2.0 * r);
            const double BEND = sq(w.ddxi(i, j)) + 2.0 * sq(w.dxith(i, j)) / sq(r) +
                                sq(w.ttxi(i, j)) / sq(sq(r));
            acc += sq(X) + sq(Y) + 2.0 * sq(SH) + sq(h) * BEND;
        }
        node_vals[i] = 0.5 * r * acc / double(w.nt);
    });
    double bulk = 0.0;
    for (std::size_t i = 0; i < w.nr; ++i) bulk += wq[i] * node_vals[i];
    double mean_in = 0.0, mean_out = 0.0;
    for (std::size_t j = 0; j < w.nt; ++j) {
        mean_in += f.u_r(0, j);
        mean_out += f.u_r(w.nr - 1, j);
    }
    mean_in /= double(w.nt);
    mean_out /= double(w.nt);
    return 2.0 * kPi * (bulk + cfg.T_in * cfg.R_in * mean_in - cfg.T_out * cfg.R_out * mean_out);
}

double excess_form_impl(const DisplacementField& f, const Work& w, double h,
                        const relaxed::RelaxedSolution& sol) {
    const auto wq = quad_weights(f.grid);
    std::vector<double> node_vals(w.nr, 0.0);
    par::for_each_index(w.nr, [&](std::size_t i) {
        const double r = f.grid.node(i);
        const double du = sol.du(r);
        const double upos = pos(sol.u(r));
        double acc = 0.0;
        for (std::size_t j = 0; j < w.nt; ++j) {
            const double X = w.dur(i, j) + 0.5 * sq(w.dxi(i, j));
            const double Y = f.u_r(i, j) / r + w.tuth(i, j) / r + sq(w.txi(i, j)) / (2.0 * sq(r));
            const double SH = w.tur(i, j) / (2.0 * r) + 0.5 * w.duth(i, j) -
                              f.u_theta(i, j) / (2.0 * r) + w.dxi(i, j) * w.txi(i, j) / (2.0 * r);
            const double BEND = sq(w.ddxi(i, j)) + 2.0 * sq(w.dxith(i, j)) / sq(r) +
                                sq(w.ttxi(i, j)) / sq(sq(r));
            // Completed squares with the pure solution squares split off;
            // those integrate in closed form (they sum to -E0).
            acc += du * sq(w.dxi(i, j)) + sq(X) - 2.0 * X * du +
                   upos * sq(w.txi(i, j)) / (r * sq(r)) + sq(Y) - 2.0 * Y * upos / r +
                   2.0 * sq(SH) + sq(h) * BEND;
        }
        node_vals[i] = 0.5 * r * acc / double(w.nt);
    });
    double bulk = 0.0;
    for (std::size_t i = 0; i < w.nr; ++i) bulk += wq[i] * node_vals[i];
    return 2.0 * kPi * bulk - sol.E0();
}

}  // namespace

void DisplacementField::validate() const {
    const std::size_t nr = grid.size();
    const std::size_t nt = xi.cols();
    if (nt < 4 || nt % 2 != 0) throw InvalidConfigError("DisplacementField: theta count must be even, >= 4");
    auto check = [&](const Array2D& a, const char* name) {
        if (a.rows() != nr || a.cols() != nt)
            throw DomainMismatchError(std::string("DisplacementField: bad shape for ") + name);
    };
    check(u_r, "u_r");
    check(u_theta, "u_theta");
    check(xi, "xi");
    if (!(period > 0.0)) throw InvalidConfigError("DisplacementField: period must be positive");
    if (has_exact_derivatives()) {
        check(du_r, "du_r");
        check(du_theta, "du_theta");
        check(dxi, "dxi");
        check(ddxi, "ddxi");
    }
}

double eval_Eh(const DisplacementField& field, double h, const relaxed::RelaxedSolution& sol) {
    const auto& cfg = sol.config();
    if (std::abs(field.period - 2.0 * kPi) > 1e-9)
        throw InvalidConfigError("eval_Eh: physical fields must have period 2 pi");
    const double tol = 1e-9 * cfg.R_out;
    if (std::abs(field.grid.front() - cfg.R_in) > tol || std::abs(field.grid.back() - cfg.R_out) > tol)
        throw DomainMismatchError("eval_Eh: grid must span the annulus");
    const Work w = build_work(field);
    return eval_Eh_impl(field, w, h, sol);
}

double excess_form(const DisplacementField& field, double h, const relaxed::RelaxedSolution& sol) {
    const Work w = build_work(field);
    return excess_form_impl(field, w, h, sol);
}

ExcessCheck excess_identity_check(const DisplacementField& field, double h,
                                  const relaxed::RelaxedSolution& sol) {
    const Work w = build_work(field);
    ExcessCheck out;
    out.eh = eval_Eh_impl(field, w, h, sol);
    out.excess = excess_form_impl(field, w, h, sol);
    out.residual_abs = std::abs((out.eh - sol.E0()) - out.excess);
    out.residual_rel =
        out.residual_abs / (std::abs(out.eh) + std::abs(sol.E0()) + std::abs(out.excess) + 1e-300);
    return out;
}

EnergyBreakdown eval_FL(const DisplacementField& field, double L, const relaxed::RelaxedSolution& sol) {
    if (!(L > 0.0)) throw InvalidConfigError("eval_FL: L must be positive");
    const Work w = build_work(field);
    const auto wq = quad_weights(field.grid);
    Array2D node_terms(w.nr, 6);
    par::for_each_index(w.nr, [&](std::size_t i) {
        const double r = field.grid.node(i);
        const double du = sol.du(r);
        const double upos = pos(sol.u(r));
        double t[6] = {0, 0, 0, 0, 0, 0};
        for (std::size_t j = 0; j < w.nt; ++j) {
            const double dur = w.dur(i, j), dxi = w.dxi(i, j), txi = w.txi(i, j);
            t[0] += sq(L) * sq(dur + sq(dxi) / (2.0 * sq(L)) - du);
            t[1] += sq(L) * upos * sq(txi) / (r * sq(r));
            t[2] += sq(L) * sq(field.u_r(i, j) / r + w.tuth(i, j) / r + sq(txi) / (2.0 * sq(r)) -
                               upos / r);
            t[3] += 2.0 * sq(sq(L) * w.tur(i, j) / (2.0 * r) + 0.5 * w.duth(i, j) -
                             field.u_theta(i, j) / (2.0 * r) + dxi * txi / (2.0 * r));
            t[4] += du * sq(dxi) + sq(w.ttxi(i, j)) / sq(sq(r));
            t[5] += (sq(w.ddxi(i, j)) / sq(L) + 2.0 * sq(w.dxith(i, j)) / sq(r)) / sq(L);
        }
        for (int q = 0; q < 6; ++q) node_terms(i, q) = t[q] * r / double(w.nt);
    });
    EnergyBreakdown out;
    for (int q = 0; q < 6; ++q) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.nr; ++i) acc += wq[i] * node_terms(i, q);
        out.term[q] = kPi * acc;
        out.total += out.term[q];
    }
    return out;
}

double leading_term(const spectral::FourierField& ff, const relaxed::RelaxedSolution& sol) {
    const std::size_t nr = ff.grid.size();
    const std::size_t nk = ff.k.size();
    const auto wq = quad_weights(ff.grid);
    const auto& r = ff.grid.nodes();
    std::vector<double> per_k(nk, 0.0);
    par::for_each_index(nk, [&](std::size_t j) {
        std::vector<double> col(nr);
        for (std::size_t i = 0; i < nr; ++i) col[i] = ff.coef(i, j);
        const auto dcol = derivative_samples(r, col);
        const double k4 = sq(sq(ff.k[j]));
        double acc = 0.0;
        for (std::size_t i = 0; i < nr; ++i)
            acc += wq[i] * (sol.du(r[i]) * sq(dcol[i]) + sq(col[i]) * k4 / sq(sq(r[i]))) * r[i];
        per_k[j] = acc;
    });
    return kPi * par::ordered_sum(per_k);
}

DisplacementField make_bandlimited_field(const RadialGrid& grid, std::size_t theta_count, double period,
                                         std::uint64_t seed, const TestFieldOptions& opts) {
    DisplacementField f;
    f.grid = grid;
    f.period = period;
    const std::size_t nr = grid.size(), nt = theta_count;
    f.u_r = Array2D(nr, nt);
    f.u_theta = Array2D(nr, nt);
    f.xi = Array2D(nr, nt);
    if (opts.exact_derivatives) {
        f.du_r = Array2D(nr, nt);
        f.du_theta = Array2D(nr, nt);
        f.dxi = Array2D(nr, nt);
        f.ddxi = Array2D(nr, nt);
    }
    const double a = grid.front(), b = grid.back(), span = b - a;
    const std::size_t mmax = opts.max_harmonic ? opts.max_harmonic : theta_count / 8;
    Rng rng(seed);
    const double omega = 2.0 * kPi / period;

    struct ModeSet {
        Array2D* val;
        Array2D* d1;
        Array2D* d2_xi;  // only xi needs the second radial derivative
    };
    Array2D* d2xi = opts.exact_derivatives ? &f.ddxi : nullptr;
    ModeSet sets[3] = {{&f.u_r, opts.exact_derivatives ? &f.du_r : nullptr, nullptr},
                       {&f.u_theta, opts.exact_derivatives ? &f.du_theta : nullptr, nullptr},
                       {&f.xi, opts.exact_derivatives ? &f.dxi : nullptr, d2xi}};

    for (auto& ms : sets) {
        for (std::size_t mode = 0; mode < opts.radial_modes; ++mode) {
            const double coef = opts.amplitude * rng.uniform(-1.0, 1.0);
            const double q = double(rng.below(4)) * kPi;
            const double phase = rng.uniform(0.0, 2.0 * kPi);
            const std::size_t m = rng.below(mmax + 1);
            const double alpha = rng.uniform(-1.0, 1.0), beta_c = rng.uniform(-1.0, 1.0);
            for (std::size_t i = 0; i < nr; ++i) {
                const double z = (grid.node(i) - a) / span;
                const double u = z * (1.0 - z);
                const double W = 64.0 * u * u * u;
                const double Wp = 64.0 * 3.0 * u * u * (1.0 - 2.0 * z);
                const double Wpp = 64.0 * (6.0 * u * sq(1.0 - 2.0 * z) - 6.0 * u * u);
                const double cr = std::cos(q * z + phase), sr = std::sin(q * z + phase);
                const double R0v = W * cr;
                const double R1v = (Wp * cr - W * q * sr) / span;
                const double R2v = (Wpp * cr - 2.0 * Wp * q * sr - W * q * q * cr) / sq(span);
                for (std::size_t j = 0; j < nt; ++j) {
                    const double th = period * double(j) / double(nt);
                    const double T = (m == 0) ? 1.0
                                              : alpha * kSqrt2 * std::sin(double(m) * omega * th) +
                                                    beta_c * kSqrt2 * std::cos(double(m) * omega * th);
                    (*ms.val)(i, j) += coef * R0v * T;
                    if (ms.d1) (*ms.d1)(i, j) += coef * R1v * T;
                    if (ms.d2_xi) (*ms.d2_xi)(i, j) += coef * R2v * T;
                }
            }
        }
    }
    return f;
}

}  // namespace wrinkle::energy
