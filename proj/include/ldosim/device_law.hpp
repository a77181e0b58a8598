#pragma once

#include <map>
#include <string>
#include <variant>

namespace ldosim {

/// Current and its derivative with respect to the control voltage.
struct LawPoint {
    double current;
    double slope;
};

/// i = k*(v - vth)^2 above threshold, 0 below. C1 at threshold.
struct SquareLaw {
    double k;
    double vth;
    [[nodiscard]] LawPoint eval(double v) const noexcept;
};

/// i = i0 + imax*tanh(gm*(v - v0)/imax): a transconductor whose output
/// current clamps at +-imax around i0.
struct TanhLaw {
    double gm;
    double imax;
    double v0 = 0.0;
    double i0 = 0.0;
    [[nodiscard]] LawPoint eval(double v) const noexcept;
};

/// Transconductor with different clamp levels for positive (sourcing) and
/// negative (sinking) output current. Slope is gm at v = 0 from both sides.
struct AsymTanhLaw {
    double gm;
    double iPos;
    double iNeg;
    [[nodiscard]] LawPoint eval(double v) const noexcept;
};

using DeviceLaw = std::variant<SquareLaw, TanhLaw, AsymTanhLaw>;

/// Model ids: "square" (k, vth), "tanh" (gm, imax, [v0], [i0]),
/// "asym_tanh" (gm, ipos, ineg). Throws StructuralError otherwise.
DeviceLaw compile_law(const std::string& modelId, const std::map<std::string, double>& params);

LawPoint evaluate(const DeviceLaw& law, double v) noexcept;

}  // namespace ldosim
