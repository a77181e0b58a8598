#include "ldosim/device_law.hpp"

#include <cmath>

#include "ldosim/errors.hpp"

namespace ldosim {

LawPoint SquareLaw::eval(double v) const noexcept {
    const double ov = v - vth;
    if (ov <= 0.0) return {0.0, 0.0};
    return {k * ov * ov, 2.0 * k * ov};
}

LawPoint TanhLaw::eval(double v) const noexcept {
    const double t = std::tanh(gm * (v - v0) / imax);
    return {i0 + imax * t, gm * (1.0 - t * t)};
}

LawPoint AsymTanhLaw::eval(double v) const noexcept {
    const double x = gm * v;
    const double lim = x >= 0.0 ? iPos : iNeg;
    const double t = std::tanh(x / lim);
    return {lim * t, gm * (1.0 - t * t)};
}

namespace {

double require(const std::map<std::string, double>& params, const std::string& model, const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) throw StructuralError("model '" + model + "' needs parameter '" + key + "'");
    if (!std::isfinite(it->second)) throw StructuralError("model '" + model + "': parameter '" + key + "' is not finite");
    return it->second;
}

double optional(const std::map<std::string, double>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

}  // namespace

DeviceLaw compile_law(const std::string& modelId, const std::map<std::string, double>& params) {
    if (modelId == "square") {
        SquareLaw law{require(params, modelId, "k"), require(params, modelId, "vth")};
        if (law.k <= 0.0) throw StructuralError("model 'square': k must be > 0");
        return law;
    }
    if (modelId == "tanh") {
        TanhLaw law{require(params, modelId, "gm"), require(params, modelId, "imax"), optional(params, "v0", 0.0),
                    optional(params, "i0", 0.0)};
        if (law.imax <= 0.0) throw StructuralError("model 'tanh': imax must be > 0");
        return law;
    }
    if (modelId == "asym_tanh") {
        AsymTanhLaw law{require(params, modelId, "gm"), require(params, modelId, "ipos"),
                        require(params, modelId, "ineg")};
        if (law.iPos <= 0.0 || law.iNeg <= 0.0) throw StructuralError("model 'asym_tanh': ipos/ineg must be > 0");
        return law;
    }
    throw StructuralError("unknown nonlinear model '" + modelId + "'");
}

LawPoint evaluate(const DeviceLaw& law, double v) noexcept {
    return std::visit([v](const auto& l) { return l.eval(v); }, law);
}

}  // namespace ldosim
