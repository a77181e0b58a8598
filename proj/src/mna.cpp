#include "mna.hpp"

#include <algorithm>
#include <cmath>

#include "ldosim/errors.hpp"

namespace ldosim::detail {

MnaLayout::MnaLayout(const Circuit& circuit)
    : nodeCount_(circuit.node_count()), unknowns_(circuit.node_count() - 1), branch_(circuit.element_count()) {
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        if (std::holds_alternative<VSource>(el) || std::holds_alternative<BreakPort>(el)) branch_[i] = unknowns_++;
    }
}

std::string MnaLayout::describe(const Circuit& circuit, std::size_t unknown) const {
    if (unknown < nodeCount_ - 1) return "node " + circuit.node_name(NodeId{unknown + 1});
    for (std::size_t i = 0; i < branch_.size(); ++i)
        if (branch_[i] == unknown) return "branch of " + element_kind(circuit.elements()[i]) + " element " + std::to_string(i);
    return "unknown " + std::to_string(unknown);
}

namespace {

template <class T>
struct Stamper {
    const MnaLayout& layout;
    Matrix<T>& a;

    void add(NodeId r, NodeId c, T v) {
        auto rr = layout.row(r);
        auto cc = layout.row(c);
        if (rr && cc) a(*rr, *cc) += v;
    }
    void admittance(NodeId p, NodeId n, T y) {
        add(p, p, y);
        add(n, n, y);
        add(p, n, -y);
        add(n, p, -y);
    }
    void transconductance(NodeId cp, NodeId cn, NodeId op, NodeId on, T g) {
        add(op, cp, g);
        add(op, cn, -g);
        add(on, cp, -g);
        add(on, cn, g);
    }
    void branch(NodeId p, NodeId n, std::size_t k) {
        if (auto r = layout.row(p)) {
            a(*r, k) += T(1);
            a(k, *r) += T(1);
        }
        if (auto r = layout.row(n)) {
            a(*r, k) -= T(1);
            a(k, *r) -= T(1);
        }
    }
};

}  // namespace

std::vector<double> dc_source_values(const Circuit& circuit) {
    std::vector<double> values(circuit.element_count(), 0.0);
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        if (const auto* v = std::get_if<VSource>(&el)) values[i] = v->dcVolts;
        if (const auto* s = std::get_if<ISource>(&el)) values[i] = s->dcAmps;
    }
    return values;
}

void assemble_real(const Circuit& circuit, const MnaLayout& layout, std::span<const double> x,
                   std::span<const double> sourceValues, double scale, const CapacitorCompanion* companion,
                   RealSystem& out) {
    const std::size_t n = layout.unknowns();
    if (out.jacobian.size() != n) out.jacobian = RealMatrix(n);
    out.jacobian.fill(0.0);
    out.residual.assign(n, 0.0);
    Stamper<double> st{layout, out.jacobian};
    auto& f = out.residual;
    auto v = [&](NodeId node) { return node_voltage(x, layout, node); };
    auto inject = [&](NodeId leaving, NodeId entering, double current) {
        if (auto r = layout.row(leaving)) f[*r] += current;
        if (auto r = layout.row(entering)) f[*r] -= current;
    };

    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        if (const auto* e = std::get_if<Resistor>(&el)) {
            const double g = 1.0 / e->ohms;
            st.admittance(e->a, e->b, g);
            inject(e->a, e->b, g * (v(e->a) - v(e->b)));
        } else if (const auto* e = std::get_if<Capacitor>(&el)) {
            if (!companion) continue;
            const double g = companion->geq[i];
            st.admittance(e->a, e->b, g);
            inject(e->a, e->b, g * (v(e->a) - v(e->b)) + companion->ieq[i]);
        } else if (const auto* e = std::get_if<Vccs>(&el)) {
            st.transconductance(e->ctrlPos, e->ctrlNeg, e->outPos, e->outNeg, e->siemens);
            inject(e->outPos, e->outNeg, e->siemens * (v(e->ctrlPos) - v(e->ctrlNeg)));
        } else if (const auto* e = std::get_if<NonlinearVccs>(&el)) {
            const LawPoint p = evaluate(e->law, v(e->ctrlPos) - v(e->ctrlNeg));
            st.transconductance(e->ctrlPos, e->ctrlNeg, e->outPos, e->outNeg, p.slope);
            inject(e->outPos, e->outNeg, p.current);
        } else if (const auto* e = std::get_if<VSource>(&el)) {
            const std::size_t k = *layout.branch(i);
            st.branch(e->pos, e->neg, k);
            inject(e->pos, e->neg, x[k]);
            f[k] = v(e->pos) - v(e->neg) - scale * sourceValues[i];
        } else if (const auto* e = std::get_if<ISource>(&el)) {
            inject(e->pos, e->neg, scale * sourceValues[i]);
        } else if (const auto* e = std::get_if<BreakPort>(&el)) {
            const std::size_t k = *layout.branch(i);
            st.branch(e->fromNode, e->toNode, k);
            inject(e->fromNode, e->toNode, x[k]);
            f[k] = v(e->fromNode) - v(e->toNode);
        }
    }
}

void assemble_complex(const Circuit& circuit, const MnaLayout& layout, double omega, ComplexMatrix& a,
                      std::vector<std::complex<double>>& b) {
    using C = std::complex<double>;
    const std::size_t n = layout.unknowns();
    if (a.size() != n) a = ComplexMatrix(n);
    a.fill(C{});
    b.assign(n, C{});
    Stamper<C> st{layout, a};
    auto source = [&](NodeId leaving, NodeId entering, double current) {
        if (auto r = layout.row(leaving)) b[*r] -= current;
        if (auto r = layout.row(entering)) b[*r] += current;
    };

    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        if (const auto* e = std::get_if<Resistor>(&el)) {
            st.admittance(e->a, e->b, C(1.0 / e->ohms, 0.0));
        } else if (const auto* e = std::get_if<Capacitor>(&el)) {
            st.admittance(e->a, e->b, C(0.0, omega * e->farads));
        } else if (const auto* e = std::get_if<Vccs>(&el)) {
            st.transconductance(e->ctrlPos, e->ctrlNeg, e->outPos, e->outNeg, C(e->siemens, 0.0));
        } else if (std::holds_alternative<NonlinearVccs>(el)) {
            throw StructuralError("assemble_complex: circuit must be linearized first");
        } else if (const auto* e = std::get_if<VSource>(&el)) {
            const std::size_t k = *layout.branch(i);
            st.branch(e->pos, e->neg, k);
            b[k] = e->acMagnitudeVolts;
        } else if (const auto* e = std::get_if<ISource>(&el)) {
            source(e->pos, e->neg, e->acMagnitudeAmps);
        } else if (const auto* e = std::get_if<BreakPort>(&el)) {
            st.branch(e->fromNode, e->toNode, *layout.branch(i));
        }
    }
}

double kcl_norm(const MnaLayout& layout, std::span<const double> residual) {
    double m = 0.0;
    for (std::size_t r = 0; r < layout.node_unknowns(); ++r) m = std::max(m, std::abs(residual[r]));
    return m;
}

}  // namespace ldosim::detail
