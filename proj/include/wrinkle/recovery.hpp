#pragma once

#include <vector>

#include "wrinkle/common.hpp"
#include "wrinkle/energy.hpp"
#include "wrinkle/measure.hpp"
#include "wrinkle/relaxed.hpp"

namespace wrinkle::recovery {

// Coupled scale parameters of the recovery construction at main scale L:
// M = floor(L^{1/4}), eps = L^{-2/3} M^{7/8}, delta = eps / M, and the block
// period divisor n with L0 = L/n in [M^{1/8}, 2 M^{1/8}).
struct RecoveryParams {
    double L = 0.0;
    int M = 0;
    double eps = 0.0;
    double delta = 0.0;
    long n = 0;
    double L0 = 0.0;
};

RecoveryParams schedule(double L);

// Grid node in (R_in, R_in + sqrt(eps)/2) minimizing sum_k k^2 b(r,k)/r^3,
// ties broken left. Requires eps < (R0 - R_in)^2 / 4.
double select_lambda(const measure::FrequencyMeasure& bbar, double eps,
                     const relaxed::RelaxedSolution& sol);

// Globally piecewise-linear densities on the line: constant b(lambda, k) for
// r <= r_eps, dilated pullback b(g_eps^{-1}(r), k) on (r_eps, R0), zero
// beyond R0.
struct ExtendedDensity {
    double lambda = 0.0, r_eps = 0.0, m_eps = 0.0, M0 = 0.0, R0 = 0.0;
    std::vector<double> x;   // breakpoints, x.front() = r_eps, x.back() = R0
    std::vector<double> k;   // positive frequencies
    Array2D values;          // [breakpoint][k]

    double eval(std::size_t j, double r) const;
};

ExtendedDensity extend_density(const measure::FrequencyMeasure& bbar, double lambda, double eps,
                               const relaxed::RelaxedSolution& sol);

// Exact convolution with the exponential kernel e^{-|t|/eps}/(2 eps):
// one-sided integrals are swept segment by segment in closed form, so
// a >= 0 and |a'| <= a/eps hold structurally, and a'' = (a - b)/eps^2.
class MollifiedDensity {
  public:
    MollifiedDensity(const ExtendedDensity& src, double eps, std::vector<double> radii);

    const std::vector<double>& radii() const { return radii_; }
    const std::vector<double>& k() const { return k_; }
    double eps() const { return eps_; }
    double a(std::size_t node, std::size_t j) const { return a_(node, j); }
    double da(std::size_t node, std::size_t j) const { return da_(node, j); }
    double dda(std::size_t node, std::size_t j) const {
        return (a_(node, j) - src_(node, j)) / (eps_ * eps_);
    }
    double source(std::size_t node, std::size_t j) const { return src_(node, j); }
    double half_sum(std::size_t node) const;  // A^L = (1/2) sum_k a
    // max over the table of |a'| - a/eps (roundoff-level when correct)
    double kernel_bound_excess() const;

  private:
    std::vector<double> radii_, k_;
    double eps_ = 0.0;
    Array2D a_, da_, src_;
};

struct GammaOptions {
    std::size_t base_radial = 600;   // base resolution across the wrinkled band
    std::size_t min_theta = 32;
    double tail_span_eps = 12.0;     // evaluation tail beyond R0, in units of eps
    std::size_t outer_nodes = 48;    // coarse nodes on the taut region
};

struct GammaRow {
    RecoveryParams params;
    double lambda = 0.0;
    energy::EnergyBreakdown fl;
    double finfty_target = 0.0;       // F_infinity of the target on its grid
    double finfty_discretized = 0.0;  // after binning onto Z/L0
    double lead_precutoff = 0.0;      // leading term of the pre-cutoff synthesis
    double measure_discrepancy = 0.0; // normalized L1 distance of recovered densities
    double constraint_max_rel = 0.0;  // exact-constraint defect on the cutoff region
    double periodicity_defect = 0.0;  // secular coefficients, normalized
    double kernel_bound_excess = 0.0;
};

GammaRow run_single_L(const measure::FrequencyMeasure& target, double L,
                      const relaxed::RelaxedSolution& sol, const GammaOptions& opts = {});

std::vector<GammaRow> run_gamma_limsup(const measure::FrequencyMeasure& target,
                                       const std::vector<double>& L_values,
                                       const relaxed::RelaxedSolution& sol,
                                       const GammaOptions& opts = {});

// Materialized recovery triple on the construction grid (rescaled variables,
// 2 pi L0 periodic, exact radial-derivative channels).
energy::DisplacementField sample_recovery_field(const measure::FrequencyMeasure& target, double L,
                                                const relaxed::RelaxedSolution& sol,
                                                const GammaOptions& opts = {});

// Same construction mapped back to physical variables on a uniform annulus
// grid: u_r(r, t) = u_r^L(r, L t), u_theta = u_theta^L / L, xi = xi^L / L.
energy::DisplacementField sample_recovery_field_physical(const measure::FrequencyMeasure& target,
                                                         double L,
                                                         const relaxed::RelaxedSolution& sol,
                                                         std::size_t radial_nodes,
                                                         std::size_t theta_count,
                                                         const GammaOptions& opts = {});

}  // namespace wrinkle::recovery
