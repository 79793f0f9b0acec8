#include "wrinkle/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "wrinkle/parallel.hpp"

namespace wrinkle::measure {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
const double kInf = std::numeric_limits<double>::infinity();
}

void FrequencyMeasure::validate() const {
    if (b.rows() != grid.size() || b.cols() != k.size())
        throw DomainMismatchError("FrequencyMeasure: table shape mismatch");
    for (std::size_t j = 1; j < k.size(); ++j)
        if (!(k[j] > k[j - 1])) throw InvalidMeasureError("FrequencyMeasure: frequencies must increase");
    if (!k.empty() && !(k.front() > 0.0))
        throw InvalidMeasureError("FrequencyMeasure: frequencies must be positive");
    for (double v : b.data())
        if (!(v >= 0.0)) throw InvalidMeasureError("FrequencyMeasure: negative density");
}

std::vector<double> FrequencyMeasure::radial_weights() const {
    return grid.cell_width() > 0.0 ? grid.cell_weights() : grid.trapezoid_weights();
}

Array2D FrequencyMeasure::db_dr() const {
    const std::size_t nr = grid.size(), nk = k.size();
    Array2D d(nr, nk);
    const auto& r = grid.nodes();
    for (std::size_t j = 0; j < nk; ++j) {
        for (std::size_t i = 0; i < nr; ++i) {
            const std::size_t lo = (i == 0) ? 0 : i - 1;
            const std::size_t hi = (i + 1 == nr) ? i : i + 1;
            d(i, j) = (b(hi, j) - b(lo, j)) / (r[hi] - r[lo]);
        }
    }
    return d;
}

double FrequencyMeasure::total_mass() const {
    const auto w = radial_weights();
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t j = 0; j < k.size(); ++j) m += w[i] * b(i, j);
    return m;
}

double FrequencyMeasure::column_mass(std::size_t j) const {
    const auto w = radial_weights();
    double m = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) m += w[i] * b(i, j);
    return m;
}

std::vector<double> marginal_profile(const relaxed::RelaxedSolution& sol, const RadialGrid& grid) {
    std::vector<double> g(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        g[i] = sol.excess_arclength(grid.node(i));
        if (!(g[i] > 0.0))
            throw DomainMismatchError("marginal_profile: nonpositive target (node not inside (R_in, R0))");
    }
    return g;
}

double constraint_residual(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol) {
    const auto g = marginal_profile(sol, mu.grid);
    double worst = 0.0;
    for (std::size_t i = 0; i < mu.grid.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < mu.k.size(); ++j) s += mu.b(i, j);
        worst = std::max(worst, std::abs(s - g[i]));
    }
    return worst;
}

namespace {

struct Coeffs {
    std::vector<double> stretch_cell;  // u'(r_i) r_i * gap_i / 4, cells i < n-1
    std::vector<double> bend_node;     // w_i / r_i^3
    std::vector<double> gap;           // r_{i+1} - r_i
    std::vector<double> profile;       // marginal target
};

Coeffs make_coeffs(const FrequencyMeasure& shape, const relaxed::RelaxedSolution& sol) {
    Coeffs c;
    const auto& r = shape.grid.nodes();
    const std::size_t nr = r.size();
    const auto w = shape.radial_weights();
    c.stretch_cell.resize(nr - 1);
    c.gap.resize(nr - 1);
    c.bend_node.resize(nr);
    for (std::size_t i = 0; i + 1 < nr; ++i) {
        c.gap[i] = r[i + 1] - r[i];
        c.stretch_cell[i] = 0.25 * sol.du(r[i]) * r[i] * c.gap[i];
    }
    for (std::size_t i = 0; i < nr; ++i) c.bend_node[i] = w[i] / (r[i] * r[i] * r[i]);
    c.profile = marginal_profile(sol, shape.grid);
    return c;
}

// Single column contributions; also used by the serial reference.
void column_energy(const double* bcol, std::size_t nr, std::size_t stride, double k,
                   const Coeffs& c, bool strict, const PerspectiveFloors& fl, double& stretch,
                   double& bend) {
    stretch = 0.0;
    bend = 0.0;
    const double inv_k2 = 1.0 / (k * k);
    for (std::size_t i = 0; i < nr; ++i) bend += c.bend_node[i] * bcol[i * stride];
    bend *= k * k;
    for (std::size_t i = 0; i + 1 < nr; ++i) {
        const double bi = bcol[i * stride];
        const double diff = bcol[(i + 1) * stride] - bi;
        const double dd = diff / c.gap[i];
        const double floor_b = fl.density_rel * c.profile[i];
        if (bi < floor_b) {
            if (std::abs(dd) < fl.derivative_abs) continue;
            if (strict) {
                stretch = kInf;
                return;
            }
            stretch += c.stretch_cell[i] * inv_k2 * dd * dd / floor_b;
            continue;
        }
        stretch += c.stretch_cell[i] * inv_k2 * dd * dd / bi;
    }
}

void column_gradient(const double* bcol, std::size_t nr, std::size_t stride, double k,
                     const Coeffs& c, const PerspectiveFloors& fl, double* gcol) {
    const double inv_k2 = 1.0 / (k * k);
    for (std::size_t i = 0; i < nr; ++i) gcol[i * stride] = kPi * k * k * c.bend_node[i];
    for (std::size_t i = 0; i + 1 < nr; ++i) {
        const double bi = bcol[i * stride];
        const double diff = bcol[(i + 1) * stride] - bi;
        const double dd = diff / c.gap[i];
        const double floor_b = fl.density_rel * c.profile[i];
        const double coef = kPi * c.stretch_cell[i] * inv_k2 / (c.gap[i] * c.gap[i]);
        if (bi < floor_b) {
            if (std::abs(dd) < fl.derivative_abs) continue;
            gcol[i * stride] += coef * (-2.0 * diff) / floor_b;
            gcol[(i + 1) * stride] += coef * 2.0 * diff / floor_b;
            continue;
        }
        gcol[i * stride] += coef * (-2.0 * diff * bi - diff * diff) / (bi * bi);
        gcol[(i + 1) * stride] += coef * 2.0 * diff / bi;
    }
}

}  // namespace

double finfty_objective(const Array2D& b, const FrequencyMeasure& shape,
                        const relaxed::RelaxedSolution& sol, bool strict,
                        const PerspectiveFloors& floors) {
    const Coeffs c = make_coeffs(shape, sol);
    const std::size_t nk = shape.k.size(), nr = shape.grid.size();
    std::vector<double> per_k(nk, 0.0);
    par::for_each_index(nk, [&](std::size_t j) {
        double s = 0.0, be = 0.0;
        column_energy(b.data().data() + j, nr, nk, shape.k[j], c, strict, floors, s, be);
        per_k[j] = s + be;
    });
    return kPi * par::ordered_sum(per_k);
}

void finfty_gradient(const Array2D& b, const FrequencyMeasure& shape,
                     const relaxed::RelaxedSolution& sol, const PerspectiveFloors& floors,
                     Array2D& grad) {
    const Coeffs c = make_coeffs(shape, sol);
    const std::size_t nk = shape.k.size(), nr = shape.grid.size();
    if (grad.rows() != nr || grad.cols() != nk) grad = Array2D(nr, nk);
    par::for_each_index(nk, [&](std::size_t j) {
        column_gradient(b.data().data() + j, nr, nk, shape.k[j], c, floors,
                        grad.data().data() + j);
    });
}

EnergySplit eval_Finfty(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol, bool strict,
                        const PerspectiveFloors& floors) {
    mu.validate();
    const Coeffs c = make_coeffs(mu, sol);
    const std::size_t nk = mu.k.size(), nr = mu.grid.size();
    std::vector<double> per_k_s(nk, 0.0), per_k_b(nk, 0.0);
    par::for_each_index(nk, [&](std::size_t j) {
        column_energy(mu.b.data().data() + j, nr, nk, mu.k[j], c, strict, floors, per_k_s[j],
                      per_k_b[j]);
    });
    EnergySplit out;
    out.stretching = kPi * par::ordered_sum(per_k_s);
    out.bending = kPi * par::ordered_sum(per_k_b);
    out.total = out.stretching + out.bending;
    return out;
}

void project_rows_onto_simplex(Array2D& b, const std::vector<double>& targets) {
    const std::size_t nr = b.rows(), nk = b.cols();
    if (targets.size() != nr) throw DomainMismatchError("project: target size mismatch");
    par::for_each_index(nr, [&](std::size_t i) {
        const double T = targets[i];
        double* row = b.row(i);
        std::vector<double> u(row, row + nk);
        std::sort(u.begin(), u.end(), std::greater<double>());
        double cum = 0.0, tau = 0.0;
        std::size_t rho = 0;
        for (std::size_t j = 0; j < nk; ++j) {
            cum += u[j];
            const double cand = (cum - T) / double(j + 1);
            if (u[j] - cand > 0.0) {
                rho = j + 1;
                tau = cand;
            }
        }
        if (rho == 0) tau = (cum - T) / double(nk);
        for (std::size_t j = 0; j < nk; ++j) row[j] = std::max(row[j] - tau, 0.0);
    });
}

FrequencyMeasure project_constraint(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol) {
    mu.validate();
    FrequencyMeasure out = mu;
    const auto g = marginal_profile(sol, mu.grid);
    project_rows_onto_simplex(out.b, g);
    return out;
}

MinimizeResult minimize_Finfty(const relaxed::RelaxedSolution& sol, const RadialGrid& grid,
                               std::vector<double> k_set, const MinimizeOptions& opts) {
    if (k_set.empty()) throw InvalidConfigError("minimize_Finfty: empty frequency set");
    std::sort(k_set.begin(), k_set.end());
    if (!(k_set.front() > 0.0)) throw InvalidConfigError("minimize_Finfty: frequencies must be positive");

    FrequencyMeasure shape;
    shape.grid = grid;
    shape.k = k_set;
    shape.b = Array2D(grid.size(), k_set.size(), 0.0);
    const auto g = marginal_profile(sol, grid);
    const PerspectiveFloors floors;

    const std::size_t nr = grid.size(), nk = k_set.size();
    // Start from the per-node pointwise optimum of A/k^2 + B k^2 spread over
    // a wide log-frequency window; far better conditioned than uniform mass.
    Array2D b(nr, nk);
    {
        const auto& r = grid.nodes();
        for (std::size_t i = 0; i < nr; ++i) {
            const double dg = std::abs(sol.d_excess_arclength(r[i])) + 1e-12;
            const double kopt2 = r[i] * r[i] * std::sqrt(sol.du(r[i])) * dg / (2.0 * g[i]);
            const double kopt = std::sqrt(std::max(kopt2, k_set.front() * k_set.front()));
            double wsum = 0.0;
            std::vector<double> wj(nk);
            for (std::size_t j = 0; j < nk; ++j) {
                const double x = std::log(k_set[j] / kopt);
                wj[j] = std::exp(-2.0 * x * x);
                wsum += wj[j];
            }
            for (std::size_t j = 0; j < nk; ++j) b(i, j) = g[i] * wj[j] / wsum;
        }
    }

    auto F = [&](const Array2D& x) { return finfty_objective(x, shape, sol, false, floors); };

    Array2D grad(nr, nk), gy(nr, nk);
    Array2D x = b, x_prev = b, y = b, cand(nr, nk);
    double fx = F(x);
    double t_acc = 1.0;
    double step = 0.0;
    {
        finfty_gradient(x, shape, sol, floors, grad);
        double gmax = 1e-300, bmax = 0.0;
        for (double v : grad.data()) gmax = std::max(gmax, std::abs(v));
        for (double v : x.data()) bmax = std::max(bmax, v);
        step = 0.25 * std::max(bmax, 1e-12) / gmax;
    }
    const double pg_scale = [&] {
        double s = 0.0;
        for (double v : grad.data()) s += std::abs(v);
        return s / double(grad.data().size());
    }();
    const double pg_tol = opts.pg_rel_tolerance * (pg_scale + 1e-300);

    MinimizeResult res;
    long stall = 0;
    long it = 0;
    double pg_norm = kInf;
    const std::size_t total = nr * nk;
    auto inner = [&](const Array2D& u, const Array2D& v) {
        double s = 0.0;
        for (std::size_t q = 0; q < total; ++q) s += u.data()[q] * v.data()[q];
        return s;
    };
    auto dist2 = [&](const Array2D& u, const Array2D& v) {
        double s = 0.0;
        for (std::size_t q = 0; q < total; ++q) s += sq(u.data()[q] - v.data()[q]);
        return s;
    };

    for (; it < opts.max_iterations; ++it) {
        finfty_gradient(y, shape, sol, floors, gy);
        const double fy = F(y);
        bool accepted = false;
        double f_cand = 0.0;
        for (int bt = 0; bt < 60 && !accepted; ++bt) {
            for (std::size_t q = 0; q < total; ++q)
                cand.data()[q] = y.data()[q] - step * gy.data()[q];
            project_rows_onto_simplex(cand, g);
            f_cand = F(cand);
            const double quad = fy + inner(gy, cand) - inner(gy, y) + dist2(cand, y) / (2.0 * step);
            if (std::isfinite(f_cand) && f_cand <= quad + 1e-14 * (1.0 + std::abs(fy))) {
                accepted = true;
            } else {
                step *= 0.5;
            }
        }
        if (!accepted)
            throw ConvergenceFailureError("minimize_Finfty: backtracking failed", pg_norm, it);

        if (f_cand > fx + 1e-12 * (1.0 + std::abs(fx))) {
            // Restart: momentum overshoot; fall back to a plain step from x.
            t_acc = 1.0;
            y = x;
            continue;
        }

        // Projected-gradient norm at the new iterate, measured with the
        // current step: || (x - Proj(x - s grad)) / s ||_inf.
        const double delta_rel = (fx - f_cand) / (std::abs(fx) + 1e-300);
        x_prev.data().swap(x.data());
        x.data().swap(cand.data());
        fx = f_cand;
        if (opts.record_trace) res.trace.push_back(fx);

        stall = (delta_rel < opts.stall_rel) ? stall + 1 : 0;
        if (stall >= opts.stall_window || (it % 50 == 0)) {
            finfty_gradient(x, shape, sol, floors, grad);
            Array2D probe = x;
            for (std::size_t q = 0; q < total; ++q)
                probe.data()[q] = x.data()[q] - step * grad.data()[q];
            project_rows_onto_simplex(probe, g);
            pg_norm = 0.0;
            for (std::size_t q = 0; q < total; ++q)
                pg_norm = std::max(pg_norm, std::abs(x.data()[q] - probe.data()[q]) / step);
            if (stall >= opts.stall_window && pg_norm <= pg_tol) break;
            if (stall >= opts.stall_window && pg_norm > pg_tol) stall = opts.stall_window / 2;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        const double mom = (t_acc - 1.0) / t_next;
        for (std::size_t q = 0; q < total; ++q)
            y.data()[q] = x.data()[q] + mom * (x.data()[q] - x_prev.data()[q]);
        project_rows_onto_simplex(y, g);
        t_acc = t_next;
        step *= 1.2;  // allow recovery after backtracking
    }
    if (it >= opts.max_iterations)
        throw ConvergenceFailureError("minimize_Finfty: iteration budget exhausted", pg_norm, it);

    // Floor-level cleanup. Sub-floor residue is zeroed where the forward
    // difference stays below the derivative floor (the 0-convention); cells
    // that would be infinity-flagged are lifted to the density floor. Mass is
    // rebalanced inside each row so the marginal stays exact.
    {
        const auto& rr = grid.nodes();
        std::vector<double> shiftrow(nr, 0.0);
        for (std::size_t j = 0; j < nk; ++j) {
            for (std::size_t ii = nr; ii-- > 0;) {
                const double fl = floors.density_rel * g[ii];
                if (x(ii, j) >= fl) continue;
                const double up = (ii + 1 < nr) ? x(ii + 1, j) : 0.0;
                const double gap = (ii + 1 < nr) ? rr[ii + 1] - rr[ii] : 1.0;
                if (std::abs(up - 0.0) / gap < floors.derivative_abs) {
                    shiftrow[ii] += x(ii, j);
                    x(ii, j) = 0.0;
                } else if (std::abs(up - x(ii, j)) / gap >= floors.derivative_abs) {
                    shiftrow[ii] -= fl - x(ii, j);
                    x(ii, j) = fl;
                }
            }
        }
        for (std::size_t ii = 0; ii < nr; ++ii) {
            if (shiftrow[ii] == 0.0) continue;
            std::size_t jmax = 0;
            for (std::size_t j = 1; j < nk; ++j)
                if (x(ii, j) > x(ii, jmax)) jmax = j;
            x(ii, jmax) += shiftrow[ii];
        }
    }

    res.mu = shape;
    res.mu.b = x;
    res.energy = eval_Finfty(res.mu, sol, true, floors);
    if (!std::isfinite(res.energy.total))
        throw ConvergenceFailureError("minimize_Finfty: strict evaluation not finite at the iterate",
                                      pg_norm, it);
    res.iterations = it;
    res.pg_norm = pg_norm;
    res.constraint_residual = constraint_residual(res.mu, sol);
    return res;
}

EquipartitionReport equipartition_report(const FrequencyMeasure& mu,
                                         const relaxed::RelaxedSolution& sol) {
    mu.validate();
    const double total = mu.total_mass();
    if (!(total > 0.0)) throw InvalidMeasureError("equipartition_report: zero total mass");
    const Coeffs c = make_coeffs(mu, sol);
    const PerspectiveFloors floors;
    EquipartitionReport rep;
    for (std::size_t j = 0; j < mu.k.size(); ++j) {
        FiberReport fr;
        fr.k = mu.k[j];
        fr.mass = mu.column_mass(j);
        if (fr.mass <= 1e-14 * total) {
            fr.skipped = true;
            rep.per_k.push_back(fr);
            continue;
        }
        double s = 0.0, be = 0.0;
        column_energy(mu.b.data().data() + j, mu.grid.size(), mu.k.size(), mu.k[j], c, true, floors,
                      s, be);
        rep.bending_total += kPi * be;
        rep.stretching_total += kPi * s;
        fr.bending_int = be / fr.mass;
        fr.stretching_int = s / fr.mass;
        fr.gap = std::abs(be - s) / (be + s + 1e-300);
        rep.per_k.push_back(fr);
    }
    rep.global_gap = std::abs(rep.bending_total - rep.stretching_total) /
                     (rep.bending_total + rep.stretching_total + 1e-300);
    return rep;
}

double smallk_mass(const FrequencyMeasure& mu, double threshold) {
    if (!(threshold > 0.0)) throw InvalidConfigError("smallk_mass: threshold must be positive");
    double m = 0.0;
    for (std::size_t j = 0; j < mu.k.size(); ++j)
        if (mu.k[j] < threshold) m += mu.column_mass(j);
    return m;
}

SmallkSweep smallk_threshold_sweep(const FrequencyMeasure& mu, double fraction_tol) {
    const double total = mu.total_mass();
    SmallkSweep out;
    double below = 0.0;
    out.threshold = mu.k.empty() ? 0.0 : mu.k.front();
    for (std::size_t j = 0; j < mu.k.size(); ++j) {
        if (below <= fraction_tol * total) {
            out.threshold = mu.k[j];
            out.mass_below = below;
        } else {
            break;
        }
        below += mu.column_mass(j);
    }
    out.fraction_below = total > 0.0 ? out.mass_below / total : 0.0;
    return out;
}

FrequencyMeasure k_discretize(const FrequencyMeasure& mu, double L0) {
    mu.validate();
    if (!(L0 > 0.0)) throw InvalidConfigError("k_discretize: L0 must be positive");
    std::vector<double> new_k;
    std::vector<std::size_t> col_of(mu.k.size());
    for (std::size_t j = 0; j < mu.k.size(); ++j) {
        const double m = std::ceil(mu.k[j] * L0 - 1e-9);
        const double kq = m / L0;
        auto it = std::lower_bound(new_k.begin(), new_k.end(), kq - 1e-12);
        if (it == new_k.end() || std::abs(*it - kq) > 1e-12) it = new_k.insert(it, kq);
        col_of[j] = std::size_t(it - new_k.begin());
    }
    // Column indices may shift as later insertions happen; rebuild the map.
    for (std::size_t j = 0; j < mu.k.size(); ++j) {
        const double m = std::ceil(mu.k[j] * L0 - 1e-9);
        const double kq = m / L0;
        col_of[j] = std::size_t(std::lower_bound(new_k.begin(), new_k.end(), kq - 1e-12) -
                                new_k.begin());
    }
    FrequencyMeasure out;
    out.grid = mu.grid;
    out.k = new_k;
    out.b = Array2D(mu.grid.size(), new_k.size(), 0.0);
    for (std::size_t i = 0; i < mu.grid.size(); ++i)
        for (std::size_t j = 0; j < mu.k.size(); ++j) out.b(i, col_of[j]) += mu.b(i, j);
    return out;
}

FrequencyMeasure measure_from_field(const spectral::FourierField& ff,
                                    const relaxed::RelaxedSolution& sol) {
    std::vector<double> radii;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ff.grid.size(); ++i) {
        if (ff.grid.node(i) < sol.R0() * (1.0 - 1e-12)) {
            radii.push_back(ff.grid.node(i));
            keep.push_back(i);
        }
    }
    if (radii.size() < 2) throw DomainMismatchError("measure_from_field: too few nodes below R0");
    std::vector<double> kpos;
    for (double kv : ff.k)
        if (kv > 0.0) kpos.push_back(kv);
    std::sort(kpos.begin(), kpos.end());
    FrequencyMeasure out;
    out.grid = RadialGrid::from_nodes(radii);
    out.k = kpos;
    out.b = Array2D(radii.size(), kpos.size(), 0.0);
    for (std::size_t jj = 0; jj < kpos.size(); ++jj) {
        const std::size_t jp = ff.find_k(kpos[jj]);
        const std::size_t jn = ff.find_k(-kpos[jj]);
        for (std::size_t ii = 0; ii < keep.size(); ++ii) {
            const double a2 = sq(ff.coef(keep[ii], jp)) + sq(ff.coef(keep[ii], jn));
            out.b(ii, jj) = sq(kpos[jj]) * a2;
        }
    }
    return out;
}

FrequencyMeasure single_frequency_baseline(const relaxed::RelaxedSolution& sol,
                                           const RadialGrid& grid, double k0) {
    FrequencyMeasure out;
    out.grid = grid;
    out.k = {k0};
    const auto g = marginal_profile(sol, grid);
    out.b = Array2D(grid.size(), 1);
    for (std::size_t i = 0; i < grid.size(); ++i) out.b(i, 0) = g[i];
    return out;
}

std::vector<double> hybrid_k_set(std::size_t nk, double k_min, double k_mid, double k_max) {
    if (!(0.0 < k_min && k_min < k_mid && k_mid < k_max) || nk < 8)
        throw InvalidConfigError("hybrid_k_set: need 0 < k_min < k_mid < k_max and nk >= 8");
    const std::size_t n_geo = (3 * nk) / 4;
    const std::size_t n_tail = nk - n_geo;
    std::vector<double> k;
    const double rho = std::pow(k_mid / k_min, 1.0 / double(n_geo - 1));
    for (std::size_t j = 0; j < n_geo; ++j) k.push_back(k_min * std::pow(rho, double(j)));
    const double dk = (k_max - k_mid) / double(n_tail);
    for (std::size_t j = 1; j <= n_tail; ++j) k.push_back(k_mid + dk * double(j));
    return k;
}

std::vector<double> suggest_k_set(const relaxed::RelaxedSolution& sol, const RadialGrid& grid,
                                  std::size_t nk) {
    // Pointwise balance frequency k_bal(r)^2 = r^2 sqrt(u') |g'| / (2 g): the
    // ladder starts below the inner-edge value (so the small-k exclusion is
    // observable) and tops out above the value at the last node before R0.
    auto kbal = [&](double r) {
        const double g = sol.excess_arclength(r);
        const double dg = std::abs(sol.d_excess_arclength(r));
        return std::sqrt(r * r * std::sqrt(sol.du(r)) * dg / (2.0 * g));
    };
    const double k_lo = kbal(grid.front());
    const double k_hi = kbal(grid.back());
    return hybrid_k_set(nk, 0.45 * k_lo, std::max(4.0 * k_lo, 0.5 * k_hi), 1.25 * k_hi);
}

}  // namespace wrinkle::measure
