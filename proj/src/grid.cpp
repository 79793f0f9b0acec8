#include "wrinkle/grid.hpp"

#include <algorithm>
#include <cmath>

namespace wrinkle {

RadialGrid RadialGrid::closed_uniform(double a, double b, std::size_t n) {
    if (!(b > a) || n < 2) throw InvalidConfigError("closed_uniform: need b > a and n >= 2");
    RadialGrid g;
    g.nodes_.resize(n);
    const double h = (b - a) / double(n - 1);
    for (std::size_t i = 0; i < n; ++i) g.nodes_[i] = a + h * double(i);
    g.nodes_.back() = b;
    g.uniform_ = true;
    g.spacing_ = h;
    return g;
}

RadialGrid RadialGrid::cell_centered(double a, double b, std::size_t n) {
    if (!(b > a) || n < 1) throw InvalidConfigError("cell_centered: need b > a and n >= 1");
    RadialGrid g;
    g.nodes_.resize(n);
    const double h = (b - a) / double(n);
    for (std::size_t i = 0; i < n; ++i) g.nodes_[i] = a + h * (double(i) + 0.5);
    g.uniform_ = true;
    g.spacing_ = h;
    g.cell_width_ = h;
    return g;
}

RadialGrid RadialGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.size() < 2) throw InvalidConfigError("from_nodes: need at least 2 nodes");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1])) throw InvalidConfigError("from_nodes: nodes must be strictly increasing");
    RadialGrid g;
    g.nodes_ = std::move(nodes);
    const double h0 = g.nodes_[1] - g.nodes_[0];
    g.uniform_ = true;
    for (std::size_t i = 1; i + 1 < g.nodes_.size(); ++i) {
        if (std::abs((g.nodes_[i + 1] - g.nodes_[i]) - h0) > 1e-12 * h0) {
            g.uniform_ = false;
            break;
        }
    }
    g.spacing_ = g.uniform_ ? h0 : 0.0;
    return g;
}

double RadialGrid::spacing() const {
    if (!uniform_) throw InvalidConfigError("spacing: grid is not uniform");
    return spacing_;
}

std::vector<double> RadialGrid::trapezoid_weights() const {
    const std::size_t n = nodes_.size();
    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = nodes_[i + 1] - nodes_[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

std::vector<double> RadialGrid::simpson_weights() const {
    const std::size_t n = nodes_.size();
    if (!uniform_ || n < 4) return trapezoid_weights();
    std::vector<double> w(n, 0.0);
    const double h = spacing_;
    std::size_t m = n - 1;  // interval count
    std::size_t start = 0;
    if (m % 2 != 0) {
        // 3/8 rule on the first three intervals keeps fourth order.
        w[0] += 3.0 * h / 8.0;
        w[1] += 9.0 * h / 8.0;
        w[2] += 9.0 * h / 8.0;
        w[3] += 3.0 * h / 8.0;
        start = 3;
    }
    for (std::size_t i = start; i + 2 <= n - 1; i += 2) {
        w[i] += h / 3.0;
        w[i + 1] += 4.0 * h / 3.0;
        w[i + 2] += h / 3.0;
    }
    return w;
}

std::vector<double> RadialGrid::cell_weights() const {
    if (cell_width_ <= 0.0) throw InvalidConfigError("cell_weights: not a cell-centered grid");
    return std::vector<double>(nodes_.size(), cell_width_);
}

double RadialGrid::integrate(const std::vector<double>& f, const std::vector<double>& w) const {
    if (f.size() != w.size() || f.size() != nodes_.size())
        throw DomainMismatchError("integrate: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
}

std::vector<double> derivative_samples(const std::vector<double>& r, const std::vector<double>& f) {
    const std::size_t n = r.size();
    if (f.size() != n || n < 3) throw DomainMismatchError("derivative_samples: need >= 3 nodes");
    std::vector<double> d(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
        d[i] = (f[i + 1] * hm * hm - f[i - 1] * hp * hp + f[i] * (hp * hp - hm * hm)) /
               (hm * hp * (hm + hp));
    }
    {
        const double h0 = r[1] - r[0], h1 = r[2] - r[1];
        d[0] = (-f[0] * (2.0 * h0 + h1) / (h0 * (h0 + h1)) + f[1] * (h0 + h1) / (h0 * h1) -
                f[2] * h0 / (h1 * (h0 + h1)));
        const double g1 = r[n - 1] - r[n - 2], g0 = r[n - 2] - r[n - 3];
        d[n - 1] = (f[n - 1] * (2.0 * g1 + g0) / (g1 * (g0 + g1)) - f[n - 2] * (g0 + g1) / (g0 * g1) +
                    f[n - 3] * g1 / (g0 * (g0 + g1)));
    }
    return d;
}

double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double xq) {
    if (xq <= x.front()) return y.front();
    if (xq >= x.back()) return y.back();
    auto it = std::upper_bound(x.begin(), x.end(), xq);
    const std::size_t j = std::size_t(it - x.begin());
    const double t = (xq - x[j - 1]) / (x[j] - x[j - 1]);
    return y[j - 1] + t * (y[j] - y[j - 1]);
}

}  // namespace wrinkle
