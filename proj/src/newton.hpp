#pragma once

#include <span>
#include <vector>

#include "mna.hpp"

namespace ldosim::detail {

struct NewtonOutcome {
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;  ///< max KCL residual, amps
    std::size_t worstRow = 0;  ///< unknown with the largest residual on exit
};

/// Damped Newton on the real MNA system; `x` is the starting point and
/// receives the last iterate. Throws SingularMatrixError naming the unknown.
NewtonOutcome newton_solve(const Circuit& circuit, const MnaLayout& layout, std::span<const double> sourceValues,
                           double scale, const CapacitorCompanion* companion, std::vector<double>& x, double tol,
                           int maxIter);

double conductance_scale(const MnaLayout& layout, const RealMatrix& jacobian);

}  // namespace ldosim::detail
