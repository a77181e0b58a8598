#pragma once

// MNA layout and stamping shared by the DC, AC and transient engines.

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ldosim/circuit.hpp"
#include "ldosim/linalg.hpp"

namespace ldosim::detail {

/// Unknown ordering: node voltages 1..N-1 first, then one branch current per
/// VSource and per (closed) BreakPort, in element order.
class MnaLayout {
public:
    explicit MnaLayout(const Circuit& circuit);

    [[nodiscard]] std::size_t unknowns() const noexcept { return unknowns_; }
    [[nodiscard]] std::size_t node_unknowns() const noexcept { return nodeCount_ - 1; }
    [[nodiscard]] std::optional<std::size_t> row(NodeId node) const noexcept {
        if (node.index == 0) return std::nullopt;
        return node.index - 1;
    }
    [[nodiscard]] std::optional<std::size_t> branch(std::size_t element) const noexcept { return branch_[element]; }

    /// Human-readable name of an unknown ("node V_OUT", "branch of element 3").
    [[nodiscard]] std::string describe(const Circuit& circuit, std::size_t unknown) const;

private:
    std::size_t nodeCount_;
    std::size_t unknowns_;
    std::vector<std::optional<std::size_t>> branch_;
};

/// Capacitor companion: current leaving terminal a is geq*(va-vb) + ieq.
struct CapacitorCompanion {
    std::vector<double> geq;
    std::vector<double> ieq;
};

struct RealSystem {
    RealMatrix jacobian;
    std::vector<double> residual;
};

/// Residual f(x) and Jacobian of the DC (caps open) or transient (caps
/// replaced by `companion`) system. `sourceValues[i]` overrides the value of
/// source element i; `scale` multiplies every independent source.
void assemble_real(const Circuit& circuit, const MnaLayout& layout, std::span<const double> x,
                   std::span<const double> sourceValues, double scale, const CapacitorCompanion* companion,
                   RealSystem& out);

/// Default per-element source values (DC values of V/I sources, 0 otherwise).
std::vector<double> dc_source_values(const Circuit& circuit);

/// Complex system (G + jwC) x = b of a linear circuit with every AC magnitude applied.
void assemble_complex(const Circuit& circuit, const MnaLayout& layout, double omega, ComplexMatrix& a,
                      std::vector<std::complex<double>>& b);

inline double node_voltage(std::span<const double> x, const MnaLayout& layout, NodeId node) {
    auto r = layout.row(node);
    return r ? x[*r] : 0.0;
}

/// Max abs over node (KCL) rows of a residual vector.
double kcl_norm(const MnaLayout& layout, std::span<const double> residual);

}  // namespace ldosim::detail
