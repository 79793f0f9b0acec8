#pragma once

#include <optional>
#include <vector>

#include "wrinkle/common.hpp"
#include "wrinkle/grid.hpp"

namespace wrinkle::relaxed {

// Radial dead loads and annulus geometry.
struct LameConfig {
    double T_in = 0.0;   // load at inner boundary
    double T_out = 0.0;  // load at outer boundary
    double R_in = 0.0;   // inner radius
    double R_out = 0.0;  // outer radius

    void validate() const;  // finiteness/positivity/ordering only
};

struct HypothesisReport {
    bool admissible = false;
    // T_in * R_in < T_out * R_out
    bool load_moment_ok = false;
    double load_moment_lhs = 0.0, load_moment_rhs = 0.0;
    // T_in / T_out > 2 R_out^2 / (R_in^2 + R_out^2)
    bool load_ratio_ok = false;
    double load_ratio_lhs = 0.0, load_ratio_rhs = 0.0;
};

HypothesisReport check_hypothesis(const LameConfig& cfg);

struct FreeBoundary {
    double R0 = 0.0;            // root of the C1-matching quadratic in (R_in, R_out]
    double R0_taut_form = 0.0;  // sqrt(-A/B) from the fully-taut Lame constants, for cross-reporting
};

// R0 solves  T_in R_in x^2 - 2 T_out R_out^2 x + T_in R_in R_out^2 = 0.
// The quadratic is positive at R_in and negative at R_out exactly when the
// two admissibility inequalities hold, so the smaller root is bracketed.
FreeBoundary solve_free_boundary(const LameConfig& cfg);

// Closed-form solution of the radial relaxed problem:
//   u(r) = T_in R_in log(r / R0)            on (R_in, R0)
//   u(r) = A/r + B r                        on (R0, R_out)
// with (A, B) fixed by u(R0) = 0 and u'(R_out) = T_out; r u'(r) is then
// continuous across R0 by the choice of R0.
class RelaxedSolution {
  public:
    static RelaxedSolution build(const LameConfig& cfg);

    const LameConfig& config() const { return cfg_; }
    double R0() const { return R0_; }
    double R0_taut_form() const { return R0_taut_; }
    double E0() const { return E0_; }  // closed-form relaxed energy
    double outer_A() const { return A_; }
    double outer_B() const { return B_; }

    double u(double r) const;
    double du(double r) const;
    double ddu(double r) const;
    // sqrt(-u(r) r); wrinkled-region diagnostic, requires r <= R0.
    double beta(double r) const;

    // Excess arclength profile g(r) = -2 r u(r) and its derivative.
    double excess_arclength(double r) const;
    double d_excess_arclength(double r) const;

  private:
    void check_domain(double r) const;
    LameConfig cfg_;
    double R0_ = 0.0, R0_taut_ = 0.0, A_ = 0.0, B_ = 0.0, E0_ = 0.0;
};

// Trapezoid quadrature of the relaxed energy on a grid spanning the annulus.
double relaxed_energy_E0(const RelaxedSolution& sol, const RadialGrid& grid);

// Discrete relaxed functional F(v): forward differences for the membrane
// part, nodal positive parts for the hoop part, trapezoid weights, boundary
// load terms. Convex and differentiable.
double relaxed_objective(const LameConfig& cfg, const RadialGrid& grid, const std::vector<double>& v);
void relaxed_gradient(const LameConfig& cfg, const RadialGrid& grid, const std::vector<double>& v,
                      std::vector<double>& grad);

struct RelaxedMinimizeOptions {
    long max_iterations = 2'000'000;
    double grad_tolerance = 1e-8;  // infinity norm of the gradient
};

struct RelaxedMinimizeResult {
    std::vector<double> v;
    double objective = 0.0;
    double grad_norm = 0.0;
    long iterations = 0;
    // Radius where v crosses from negative to positive (linear interpolation),
    // or NaN when v has no sign change.
    double sign_change_radius = 0.0;
};

// Independent oracle for the closed form: accelerated gradient descent on the
// discrete functional.
RelaxedMinimizeResult minimize_relaxed_numeric(const LameConfig& cfg, const RadialGrid& grid,
                                               const RelaxedMinimizeOptions& opts = {});

// Relaxed energy density: squared positive parts of the eigenvalues of a
// symmetric 2x2 strain.
double wrel(double f11, double f12, double f22);

// Discrete Euler-Lagrange residual d/dr(r u') - (u/r)_+ of the closed form,
// central differences on sampled r u'. Entries 1..n-2; ends are zero.
std::vector<double> el_residual(const RelaxedSolution& sol, const RadialGrid& grid);

}  // namespace wrinkle::relaxed
