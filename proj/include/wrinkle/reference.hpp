#pragma once

#include "wrinkle/measure.hpp"

// Plain serial reference implementations of the hot kernels. Kept for
// testing the OpenMP paths and for the benchmark target; no tiling, no
// manual unrolling, straightforward loops.
namespace wrinkle::ref {

double finfty_objective(const Array2D& b, const measure::FrequencyMeasure& shape,
                        const relaxed::RelaxedSolution& sol, bool strict,
                        const measure::PerspectiveFloors& floors);

void finfty_gradient(const Array2D& b, const measure::FrequencyMeasure& shape,
                     const relaxed::RelaxedSolution& sol, const measure::PerspectiveFloors& floors,
                     Array2D& grad);

// Michelot-style alternating projection onto the scaled simplex; independent
// of the sort-based production routine.
void project_rows_onto_simplex(Array2D& b, const std::vector<double>& targets);

double leading_term(const spectral::FourierField& ff, const relaxed::RelaxedSolution& sol);

}  // namespace wrinkle::ref
