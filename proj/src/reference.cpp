#include "wrinkle/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wrinkle::ref {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

double finfty_objective(const Array2D& b, const measure::FrequencyMeasure& shape,
                        const relaxed::RelaxedSolution& sol, bool strict,
                        const measure::PerspectiveFloors& floors) {
    const auto& r = shape.grid.nodes();
    const std::size_t nr = r.size(), nk = shape.k.size();
    const auto w = shape.radial_weights();
    const auto g = measure::marginal_profile(sol, shape.grid);
    double total = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
        const double k = shape.k[j];
        double col = 0.0;
        for (std::size_t i = 0; i < nr; ++i) col += w[i] / (r[i] * r[i] * r[i]) * b(i, j);
        col *= k * k;
        double stretch = 0.0;
        for (std::size_t i = 0; i + 1 < nr; ++i) {
            const double gap = r[i + 1] - r[i];
            const double cell = 0.25 * sol.du(r[i]) * r[i] * gap;
            const double bi = b(i, j);
            const double dd = (b(i + 1, j) - bi) / gap;
            const double fl = floors.density_rel * g[i];
            if (bi < fl) {
                if (std::abs(dd) < floors.derivative_abs) continue;
                if (strict) return std::numeric_limits<double>::infinity();
                stretch += cell / (k * k) * dd * dd / fl;
                continue;
            }
            stretch += cell / (k * k) * dd * dd / bi;
        }
        total += stretch + col;
    }
    return kPi * total;
}

void finfty_gradient(const Array2D& b, const measure::FrequencyMeasure& shape,
                     const relaxed::RelaxedSolution& sol, const measure::PerspectiveFloors& floors,
                     Array2D& grad) {
    const auto& r = shape.grid.nodes();
    const std::size_t nr = r.size(), nk = shape.k.size();
    const auto w = shape.radial_weights();
    const auto g = measure::marginal_profile(sol, shape.grid);
    if (grad.rows() != nr || grad.cols() != nk) grad = Array2D(nr, nk);
    for (std::size_t j = 0; j < nk; ++j) {
        const double k = shape.k[j];
        for (std::size_t i = 0; i < nr; ++i)
            grad(i, j) = kPi * k * k * w[i] / (r[i] * r[i] * r[i]);
        for (std::size_t i = 0; i + 1 < nr; ++i) {
            const double gap = r[i + 1] - r[i];
            const double coef = kPi * 0.25 * sol.du(r[i]) * r[i] * gap / (k * k * gap * gap);
            const double bi = b(i, j);
            const double diff = b(i + 1, j) - bi;
            const double fl = floors.density_rel * g[i];
            if (bi < fl) {
                if (std::abs(diff / gap) < floors.derivative_abs) continue;
                grad(i, j) += coef * (-2.0 * diff) / fl;
                grad(i + 1, j) += coef * 2.0 * diff / fl;
                continue;
            }
            grad(i, j) += coef * (-2.0 * diff * bi - diff * diff) / (bi * bi);
            grad(i + 1, j) += coef * 2.0 * diff / bi;
        }
    }
}

void project_rows_onto_simplex(Array2D& b, const std::vector<double>& targets) {
    const std::size_t nr = b.rows(), nk = b.cols();
    for (std::size_t i = 0; i < nr; ++i) {
        double* row = b.row(i);
        std::vector<bool> active(nk, true);
        for (int pass = 0; pass < 1000; ++pass) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t j = 0; j < nk; ++j)
                if (active[j]) {
                    sum += row[j];
                    ++count;
                }
            if (count == 0) break;
            const double tau = (sum - targets[i]) / double(count);
            bool changed = false;
            for (std::size_t j = 0; j < nk; ++j) {
                if (active[j] && row[j] - tau < 0.0) {
                    active[j] = false;
                    changed = true;
                }
            }
            if (!changed) {
                for (std::size_t j = 0; j < nk; ++j) row[j] = active[j] ? row[j] - tau : 0.0;
                break;
            }
        }
    }
}

double leading_term(const spectral::FourierField& ff, const relaxed::RelaxedSolution& sol) {
    const std::size_t nr = ff.grid.size();
    const auto wq = ff.grid.is_uniform() ? ff.grid.simpson_weights() : ff.grid.trapezoid_weights();
    const auto& r = ff.grid.nodes();
    double total = 0.0;
    for (std::size_t j = 0; j < ff.k.size(); ++j) {
        std::vector<double> col(nr);
        for (std::size_t i = 0; i < nr; ++i) col[i] = ff.coef(i, j);
        const auto dcol = derivative_samples(r, col);
        const double k4 = sq(sq(ff.k[j]));
        double acc = 0.0;
        for (std::size_t i = 0; i < nr; ++i)
            acc += wq[i] * (sol.du(r[i]) * sq(dcol[i]) + sq(col[i]) * k4 / sq(sq(r[i]))) * r[i];
        total += acc;
    }
    return kPi * total;
}

}  // namespace wrinkle::ref
