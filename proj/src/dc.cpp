#include <algorithm>
#include <cmath>

#include "ldosim/analysis.hpp"
#include "ldosim/errors.hpp"
#include "mna.hpp"
#include "newton.hpp"

namespace ldosim {

namespace detail {

double conductance_scale(const MnaLayout& layout, const RealMatrix& j) {
    double m = 0.0;
    for (std::size_t r = 0; r < layout.node_unknowns(); ++r) m = std::max(m, std::abs(j(r, r)));
    return m > 0.0 ? m : 1.0;
}

NewtonOutcome newton_solve(const Circuit& circuit, const MnaLayout& layout, std::span<const double> sourceValues,
                           double scale, const CapacitorCompanion* companion, std::vector<double>& x, double tol,
                           int maxIter) {
    RealSystem sys;
    RealSystem trial;
    NewtonOutcome outcome;
    const std::size_t nodes = layout.node_unknowns();

    auto merit = [&](const RealSystem& s, double gscale) {
        double m = kcl_norm(layout, s.residual) / gscale;
        for (std::size_t r = nodes; r < s.residual.size(); ++r) m = std::max(m, std::abs(s.residual[r]));
        return m;
    };

    assemble_real(circuit, layout, x, sourceValues, scale, companion, sys);
    for (int iter = 1; iter <= maxIter; ++iter) {
        outcome.iterations = iter;
        const double gscale = conductance_scale(layout, sys.jacobian);
        const double m0 = merit(sys, gscale);

        std::vector<double> dx;
        try {
            LuFactor<double> lu(sys.jacobian);
            std::vector<double> rhs(sys.residual.size());
            for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -sys.residual[i];
            dx = lu.solve(rhs);
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError("singular Jacobian at " + layout.describe(circuit, e.pivot()), e.pivot());
        }

        double lambda = 1.0;
        std::vector<double> xt(x.size());
        for (int halving = 0;; ++halving) {
            for (std::size_t i = 0; i < x.size(); ++i) xt[i] = x[i] + lambda * dx[i];
            assemble_real(circuit, layout, xt, sourceValues, scale, companion, trial);
            if (merit(trial, gscale) <= m0 || halving == 10) break;
            lambda *= 0.5;
        }

        double step = 0.0;
        for (std::size_t i = 0; i < nodes; ++i) step = std::max(step, std::abs(lambda * dx[i]));
        x.swap(xt);
        std::swap(sys, trial);
        outcome.residual = kcl_norm(layout, sys.residual);
        for (std::size_t r = 0; r < sys.residual.size(); ++r)
            if (std::abs(sys.residual[r]) > std::abs(sys.residual[outcome.worstRow])) outcome.worstRow = r;

        double branchResidual = 0.0;
        for (std::size_t r = nodes; r < sys.residual.size(); ++r)
            branchResidual = std::max(branchResidual, std::abs(sys.residual[r]));
        if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); })) break;
        if (step < tol && outcome.residual < tol * conductance_scale(layout, sys.jacobian) && branchResidual < tol) {
            outcome.converged = true;
            return outcome;
        }
    }
    return outcome;
}

}  // namespace detail

namespace {

OperatingPoint to_operating_point(const Circuit& circuit, const detail::MnaLayout& layout, const std::vector<double>& x,
                                  const detail::NewtonOutcome& outcome) {
    OperatingPoint op;
    op.nodeVoltages.assign(circuit.node_count(), 0.0);
    for (std::size_t n = 1; n < circuit.node_count(); ++n) op.nodeVoltages[n] = x[n - 1];
    op.branchCurrents.assign(circuit.element_count(), 0.0);
    for (std::size_t i = 0; i < circuit.element_count(); ++i)
        if (auto k = layout.branch(i)) op.branchCurrents[i] = x[*k];
    op.iterations = outcome.iterations;
    op.residual = outcome.residual;
    return op;
}

}  // namespace

OperatingPoint dc_operating_point(const Circuit& circuit, const DcOptions& options) {
    return dc_operating_point(circuit, detail::dc_source_values(circuit), options);
}

OperatingPoint dc_operating_point(const Circuit& circuit, const std::vector<double>& sourceValues,
                                  const DcOptions& options) {
    if (sourceValues.size() != circuit.element_count()) throw ArgumentError("source value count does not match circuit");
    if (options.maxIter < 1) throw ArgumentError("maxIter must be >= 1");
    const detail::MnaLayout layout(circuit);
    std::vector<double> guess(layout.unknowns(), 0.0);
    for (std::size_t n = 1; n < std::min(options.initialGuess.size(), circuit.node_count()); ++n)
        guess[n - 1] = options.initialGuess[n];

    std::vector<double> x = guess;
    auto outcome = detail::newton_solve(circuit, layout, sourceValues, 1.0, nullptr, x, options.newtonTol, options.maxIter);
    if (outcome.converged) return to_operating_point(circuit, layout, x, outcome);

    double lastResidual = outcome.residual;
    if (options.sourceStepping) {
        x = guess;
        bool ok = true;
        int total = 0;
        constexpr int kSteps = 20;
        for (int s = 1; s <= kSteps && ok; ++s) {
            auto step = detail::newton_solve(circuit, layout, sourceValues, static_cast<double>(s) / kSteps, nullptr, x,
                                             options.newtonTol, options.maxIter);
            total += step.iterations;
            lastResidual = step.residual;
            ok = step.converged;
        }
        if (ok) {
            outcome.iterations = total;
            outcome.residual = lastResidual;
            return to_operating_point(circuit, layout, x, outcome);
        }
    }
    throw ConvergenceError("DC operating point did not converge after " + std::to_string(options.maxIter) +
                               " Newton iterations (last KCL residual " + std::to_string(lastResidual) + " A)",
                           lastResidual);
}

Circuit linearize(const Circuit& circuit, const OperatingPoint& op) {
    Circuit out = circuit;
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const auto* nl = std::get_if<NonlinearVccs>(&circuit.elements()[i]);
        if (!nl) continue;
        const double slope = evaluate(nl->law, op.v(nl->ctrlPos) - op.v(nl->ctrlNeg)).slope;
        out.element(ElementId{i}) = Vccs{nl->ctrlPos, nl->ctrlNeg, nl->outPos, nl->outNeg, slope};
    }
    return out;
}

double kcl_residual(const Circuit& circuit, const OperatingPoint& op) {
    const detail::MnaLayout layout(circuit);
    std::vector<double> x(layout.unknowns(), 0.0);
    for (std::size_t n = 1; n < circuit.node_count(); ++n) x[n - 1] = op.nodeVoltages.at(n);
    for (std::size_t i = 0; i < circuit.element_count(); ++i)
        if (auto k = layout.branch(i)) x[*k] = op.branchCurrents.at(i);
    detail::RealSystem sys;
    const auto values = detail::dc_source_values(circuit);
    detail::assemble_real(circuit, layout, x, values, 1.0, nullptr, sys);
    return detail::kcl_norm(layout, sys.residual);
}

}  // namespace ldosim
