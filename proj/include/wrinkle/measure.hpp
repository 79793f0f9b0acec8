#pragma once

#include <vector>

#include "wrinkle/common.hpp"
#include "wrinkle/fourier.hpp"
#include "wrinkle/grid.hpp"
#include "wrinkle/relaxed.hpp"

namespace wrinkle::measure {

// Discrete wrinkle-frequency measure: nonnegative densities b(r_i, k_j) with
// respect to dr x delta_k on a radial grid inside (R_in, R0) and a finite set
// of positive frequencies. Signed +-k content is folded onto k > 0 since both
// the energy and the constraint see k^2 only. Frequencies are kept sorted.
struct FrequencyMeasure {
    RadialGrid grid;
    std::vector<double> k;
    Array2D b;

    void validate() const;
    std::vector<double> radial_weights() const;  // cell weights when available
    Array2D db_dr() const;                       // central-difference view
    double total_mass() const;
    double column_mass(std::size_t j) const;
};

// Excess-arclength profile -2 r u*(r) sampled on a grid; must be positive.
std::vector<double> marginal_profile(const relaxed::RelaxedSolution& sol, const RadialGrid& grid);

// Max over nodes of |sum_k b - profile|.
double constraint_residual(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol);

struct EnergySplit {
    double stretching = 0.0;
    double bending = 0.0;
    double total = 0.0;
};

// Perspective-term conventions at vanishing density: zero when both the
// density and the forward difference are below floor, infinite when the
// density is below floor but the difference is not.
struct PerspectiveFloors {
    double density_rel = 1e-12;    // relative to the marginal profile
    double derivative_abs = 1e-10;
};

// pi * sum_k int [ u'(r)/(4k^2) (d_r b)^2 / b + k^2 b / r^4 ] r dr with
// forward differences per adjacent-node cell. strict = true applies the
// infinite flag; strict = false floors the denominator instead (used inside
// the optimizer so rejected configurations stay rankable).
EnergySplit eval_Finfty(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol,
                        bool strict = true, const PerspectiveFloors& floors = {});

double finfty_objective(const Array2D& b, const FrequencyMeasure& shape,
                        const relaxed::RelaxedSolution& sol, bool strict,
                        const PerspectiveFloors& floors);
void finfty_gradient(const Array2D& b, const FrequencyMeasure& shape,
                     const relaxed::RelaxedSolution& sol, const PerspectiveFloors& floors,
                     Array2D& grad);

// Euclidean projection of every radial slice onto the scaled simplex
// { b >= 0, sum_k b = -2 r u*(r) }. Idempotent.
FrequencyMeasure project_constraint(const FrequencyMeasure& mu, const relaxed::RelaxedSolution& sol);
void project_rows_onto_simplex(Array2D& b, const std::vector<double>& targets);

struct MinimizeOptions {
    long max_iterations = 400'000;
    long stall_window = 400;
    double stall_rel = 1e-9;
    double pg_rel_tolerance = 1e-8;  // projected-gradient norm, relative to initial scale
    bool record_trace = true;
};

struct MinimizeResult {
    FrequencyMeasure mu;
    EnergySplit energy;
    std::vector<double> trace;  // objective after each accepted step
    long iterations = 0;
    double pg_norm = 0.0;
    double constraint_residual = 0.0;
};

// Accelerated projected gradient (FISTA with backtracking and adaptive
// restart) over the product of per-radius simplices. Deterministic for fixed
// inputs; frequencies are processed in ascending order regardless of the
// order supplied.
MinimizeResult minimize_Finfty(const relaxed::RelaxedSolution& sol, const RadialGrid& grid,
                               std::vector<double> k_set, const MinimizeOptions& opts = {});

struct FiberReport {
    double k = 0.0;
    double mass = 0.0;
    double bending_int = 0.0;    // int k^2/r^3 g_k dr with g_k the normalized slice
    double stretching_int = 0.0; // int u' r/(4k^2) (b'/b)^2 g_k dr
    double gap = 0.0;            // |bend - stretch| / (bend + stretch)
    bool skipped = false;        // zero-mass fiber
};

struct EquipartitionReport {
    std::vector<FiberReport> per_k;
    double bending_total = 0.0;
    double stretching_total = 0.0;
    double global_gap = 0.0;
};

EquipartitionReport equipartition_report(const FrequencyMeasure& mu,
                                         const relaxed::RelaxedSolution& sol);

double smallk_mass(const FrequencyMeasure& mu, double threshold);

struct SmallkSweep {
    double threshold = 0.0;      // largest empirically mass-free threshold
    double mass_below = 0.0;
    double fraction_below = 0.0;
};

SmallkSweep smallk_threshold_sweep(const FrequencyMeasure& mu, double fraction_tol = 1e-9);

// Bins each radial slice into intervals ((m-1)/L0, m/L0], assigning mass to
// the right endpoint. Preserves the marginal exactly.
FrequencyMeasure k_discretize(const FrequencyMeasure& mu, double L0);

// b(r,k) = k^2 (a_k^2 + a_{-k}^2), restricted to radii below R0.
FrequencyMeasure measure_from_field(const spectral::FourierField& ff,
                                    const relaxed::RelaxedSolution& sol);

// All excess arclength carried by one frequency.
FrequencyMeasure single_frequency_baseline(const relaxed::RelaxedSolution& sol,
                                           const RadialGrid& grid, double k0);

// Geometric-plus-uniform frequency ladder; bounds auto-calibrated from the
// pointwise stretching/bending balance when not supplied.
std::vector<double> suggest_k_set(const relaxed::RelaxedSolution& sol, const RadialGrid& grid,
                                  std::size_t nk);
std::vector<double> hybrid_k_set(std::size_t nk, double k_min, double k_mid, double k_max);

}  // namespace wrinkle::measure
