#pragma once

#include <array>
#include <cstdint>

#include "wrinkle/common.hpp"
#include "wrinkle/fourier.hpp"
#include "wrinkle/grid.hpp"
#include "wrinkle/relaxed.hpp"

namespace wrinkle::energy {

// Sampled displacement triple on an (r, theta) lattice, theta-periodic with
// the stated period. Radial-derivative channels are optional; when present
// they are used instead of finite differences (the recovery construction
// fills them from closed forms).
struct DisplacementField {
    RadialGrid grid;
    double period = 0.0;
    Array2D u_r, u_theta, xi;
    Array2D du_r, du_theta, dxi, ddxi;  // exact radial derivatives, may be empty

    std::size_t theta_count() const { return xi.cols(); }
    bool has_exact_derivatives() const { return !du_r.empty(); }
    void validate() const;
};

struct EnergyBreakdown {
    // Grouped integrands of the rescaled excess functional:
    // 1 membrane mismatch, 2 taut-region coupling, 3 hoop mismatch,
    // 4 shear, 5 leading stretching/bending, 6 residual bending.
    std::array<double, 6> term{};
    double total = 0.0;
};

// Foppl-von Karman energy in polar coordinates with boundary load terms.
// Requires the physical 2*pi period. Theta derivatives are spectral, radial
// ones second-order central unless exact channels are present.
double eval_Eh(const DisplacementField& field, double h, const relaxed::RelaxedSolution& sol);

// Completed-square form of E_h - E0. The pure solution-squared parts
// integrate in closed form; everything carrying the field is quadratured.
double excess_form(const DisplacementField& field, double h, const relaxed::RelaxedSolution& sol);

struct ExcessCheck {
    double eh = 0.0;
    double excess = 0.0;
    double residual_abs = 0.0;
    double residual_rel = 0.0;
};

ExcessCheck excess_identity_check(const DisplacementField& field, double h,
                                  const relaxed::RelaxedSolution& sol);

// Rescaled excess functional; field is 2 pi L periodic (or any divisor
// period) in the rescaled angular variable.
EnergyBreakdown eval_FL(const DisplacementField& field, double L, const relaxed::RelaxedSolution& sol);

// Frequency-space form of the leading term, pi * sum_k int (u' a_k'^2 +
// a_k^2 k^4 / r^4) r dr, same radial stencils and quadrature as eval_FL.
double leading_term(const spectral::FourierField& ff, const relaxed::RelaxedSolution& sol);

struct TestFieldOptions {
    std::size_t radial_modes = 3;
    std::size_t max_harmonic = 0;  // 0: theta_count / 8
    double amplitude = 0.1;
    bool exact_derivatives = false;
};

// Deterministic band-limited test field: smooth radial window vanishing to
// third order at both boundaries times low trigonometric harmonics.
DisplacementField make_bandlimited_field(const RadialGrid& grid, std::size_t theta_count, double period,
                                         std::uint64_t seed, const TestFieldOptions& opts = {});

}  // namespace wrinkle::energy
