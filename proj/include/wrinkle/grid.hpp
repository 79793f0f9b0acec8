#pragma once

#include <cstddef>
#include <vector>

#include "wrinkle/common.hpp"

namespace wrinkle {

// Strictly increasing radial sample points. Closed grids include both
// endpoints; cell-centered grids sample midpoints of n equal cells, which is
// what the frequency-measure module uses on the open interval (R_in, R0):
// the constraint profile vanishes at R0 and the perspective term is singular
// there, so R0 itself is never a node.
class RadialGrid {
  public:
    static RadialGrid closed_uniform(double a, double b, std::size_t n);
    static RadialGrid cell_centered(double a, double b, std::size_t n);
    static RadialGrid from_nodes(std::vector<double> nodes);

    const std::vector<double>& nodes() const { return nodes_; }
    double node(std::size_t i) const { return nodes_[i]; }
    std::size_t size() const { return nodes_.size(); }
    double front() const { return nodes_.front(); }
    double back() const { return nodes_.back(); }
    bool is_uniform() const { return uniform_; }
    double spacing() const;  // throws unless uniform
    double cell_width() const { return cell_width_; }  // cell-centered grids

    // Composite trapezoid weights over [front, back] (any grid).
    std::vector<double> trapezoid_weights() const;
    // Composite Simpson weights (uniform grids; 3/8 rule absorbs an odd
    // interval count). Fourth order on smooth integrands.
    std::vector<double> simpson_weights() const;
    // Midpoint weights for cell-centered grids: each node owns one cell.
    std::vector<double> cell_weights() const;

    double integrate(const std::vector<double>& f, const std::vector<double>& w) const;

  private:
    std::vector<double> nodes_;
    bool uniform_ = false;
    double spacing_ = 0.0;
    double cell_width_ = 0.0;
};

// Second-order first-derivative samples of f on a (possibly nonuniform)
// grid: three-point central stencils inside, one-sided at the ends.
std::vector<double> derivative_samples(const std::vector<double>& r, const std::vector<double>& f);

// Linear interpolation with constant extension outside the node range.
double interp_linear(const std::vector<double>& x, const std::vector<double>& y, double xq);

}  // namespace wrinkle
