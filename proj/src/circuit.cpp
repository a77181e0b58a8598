#include "ldosim/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ldosim/errors.hpp"

namespace ldosim {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class DisjointSet {
public:
    explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace

NonlinearVccs make_nonlinear_vccs(NodeId ctrlPos, NodeId ctrlNeg, NodeId outPos, NodeId outNeg, std::string modelId,
                                  std::map<std::string, double> modelParams) {
    DeviceLaw law = compile_law(modelId, modelParams);
    return NonlinearVccs{ctrlPos, ctrlNeg, outPos, outNeg, std::move(modelId), std::move(modelParams), law};
}

std::string element_kind(const Element& element) {
    return std::visit(Overloaded{
                          [](const Resistor&) { return std::string("R"); },
                          [](const Capacitor&) { return std::string("C"); },
                          [](const Vccs&) { return std::string("G"); },
                          [](const VSource&) { return std::string("V"); },
                          [](const ISource&) { return std::string("I"); },
                          [](const NonlinearVccs&) { return std::string("X"); },
                          [](const BreakPort&) { return std::string("BREAK"); },
                      },
                      element);
}

std::vector<NodeId> element_terminals(const Element& element) {
    return std::visit(Overloaded{
                          [](const Resistor& e) { return std::vector<NodeId>{e.a, e.b}; },
                          [](const Capacitor& e) { return std::vector<NodeId>{e.a, e.b}; },
                          [](const Vccs& e) { return std::vector<NodeId>{e.ctrlPos, e.ctrlNeg, e.outPos, e.outNeg}; },
                          [](const VSource& e) { return std::vector<NodeId>{e.pos, e.neg}; },
                          [](const ISource& e) { return std::vector<NodeId>{e.pos, e.neg}; },
                          [](const NonlinearVccs& e) {
                              return std::vector<NodeId>{e.ctrlPos, e.ctrlNeg, e.outPos, e.outNeg};
                          },
                          [](const BreakPort& e) { return std::vector<NodeId>{e.fromNode, e.toNode}; },
                      },
                      element);
}

Circuit::Circuit(std::size_t nodeCount) : nodeCount_(std::max<std::size_t>(nodeCount, 1)), growable_(false) {}

NodeId Circuit::add_node(const std::string& label) {
    NodeId id{nodeCount_++};
    if (!label.empty()) set_label(label, id);
    return id;
}

void Circuit::require_node(NodeId node) const {
    if (node.index >= nodeCount_)
        throw StructuralError("unknown node " + std::to_string(node.index) + " (circuit has " +
                              std::to_string(nodeCount_) + " nodes)");
}

ElementId Circuit::add_element(Element element, std::string name) {
    const auto terminals = element_terminals(element);
    if (growable_) {
        for (NodeId t : terminals) nodeCount_ = std::max(nodeCount_, t.index + 1);
    } else {
        for (NodeId t : terminals) require_node(t);
    }
    elements_.push_back(std::move(element));
    names_.push_back(std::move(name));
    return ElementId{elements_.size() - 1};
}

void Circuit::set_label(const std::string& label, NodeId node) {
    if (growable_)
        nodeCount_ = std::max(nodeCount_, node.index + 1);
    else
        require_node(node);
    labels_.emplace_back(label, node);
}

const Element& Circuit::element(ElementId id) const {
    if (id.index >= elements_.size()) throw StructuralError("unknown element " + std::to_string(id.index));
    return elements_[id.index];
}

Element& Circuit::element(ElementId id) {
    if (id.index >= elements_.size()) throw StructuralError("unknown element " + std::to_string(id.index));
    return elements_[id.index];
}

const std::string& Circuit::element_name(ElementId id) const {
    if (id.index >= names_.size()) throw StructuralError("unknown element " + std::to_string(id.index));
    return names_[id.index];
}

std::optional<ElementId> Circuit::find_element(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return ElementId{i};
    return std::nullopt;
}

std::optional<NodeId> Circuit::find_node(const std::string& label) const {
    for (const auto& [name, node] : labels_)
        if (name == label) return node;
    return std::nullopt;
}

NodeId Circuit::node(const std::string& label) const {
    if (auto n = find_node(label)) return *n;
    throw StructuralError("unknown node label '" + label + "'");
}

std::string Circuit::node_name(NodeId node) const {
    for (const auto& [name, id] : labels_)
        if (id == node) return name;
    return std::to_string(node.index);
}

std::optional<ElementId> Circuit::find_break_port(const std::string& label) const {
    for (std::size_t i = 0; i < elements_.size(); ++i)
        if (const auto* bp = std::get_if<BreakPort>(&elements_[i]); bp && bp->label == label) return ElementId{i};
    return std::nullopt;
}

Circuit Circuit::permuted(const std::vector<std::size_t>& order) const {
    if (order.size() != elements_.size()) throw ArgumentError("permutation size does not match element count");
    Circuit out = *this;
    out.elements_.clear();
    out.names_.clear();
    for (std::size_t i : order) {
        out.elements_.push_back(elements_.at(i));
        out.names_.push_back(names_.at(i));
    }
    return out;
}

ValidationReport validate(const Circuit& circuit) {
    ValidationReport report;
    const std::size_t n = circuit.node_count();
    DisjointSet connected(n);
    std::vector<bool> touched(n, false);
    touched[0] = true;

    auto add = [&](Violation::Kind kind, std::string message, std::optional<NodeId> node,
                   std::optional<ElementId> element) {
        report.violations.push_back(Violation{kind, std::move(message), node, element});
    };
    auto link = [&](NodeId a, NodeId b) {
        if (a.index >= n || b.index >= n) return;
        touched[a.index] = touched[b.index] = true;
        connected.unite(a.index, b.index);
    };

    std::set<std::string> breakLabels;
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        const ElementId id{i};
        const std::string where = element_kind(el) + " element " + std::to_string(i);
        for (NodeId t : element_terminals(el))
            if (t.index >= n) add(Violation::Kind::UnknownNode, where + " references unknown node " + std::to_string(t.index), t, id);

        auto positive = [&](double v, const char* what) {
            if (!std::isfinite(v))
                add(Violation::Kind::NonfiniteValue, where + ": " + what + " is not finite", std::nullopt, id);
            else if (v <= 0.0)
                add(Violation::Kind::NonpositiveValue, where + ": " + what + " must be > 0", std::nullopt, id);
        };
        auto finite = [&](double v, const char* what) {
            if (!std::isfinite(v)) add(Violation::Kind::NonfiniteValue, where + ": " + what + " is not finite", std::nullopt, id);
        };

        std::visit(Overloaded{
                       [&](const Resistor& e) { positive(e.ohms, "ohms"); link(e.a, e.b); },
                       [&](const Capacitor& e) { positive(e.farads, "farads"); link(e.a, e.b); },
                       [&](const Vccs& e) { finite(e.siemens, "siemens"); link(e.outPos, e.outNeg); },
                       [&](const VSource& e) {
                           finite(e.dcVolts, "dc");
                           finite(e.acMagnitudeVolts, "ac");
                           link(e.pos, e.neg);
                       },
                       [&](const ISource& e) {
                           finite(e.dcAmps, "dc");
                           finite(e.acMagnitudeAmps, "ac");
                           link(e.pos, e.neg);
                       },
                       [&](const NonlinearVccs& e) { link(e.outPos, e.outNeg); },
                       [&](const BreakPort& e) {
                           link(e.fromNode, e.toNode);
                           if (!breakLabels.insert(e.label).second)
                               add(Violation::Kind::DuplicateBreakLabel, "duplicate break label '" + e.label + "'",
                                   std::nullopt, id);
                       },
                   },
                   el);
    }

    for (std::size_t node = 1; node < n; ++node) {
        if (!touched[node] || connected.find(node) != connected.find(0)) {
            NodeId id{node};
            add(Violation::Kind::FloatingNode, "node " + circuit.node_name(id) + " (" + std::to_string(node) +
                                                   ") has no element path to ground",
                id, std::nullopt);
        }
    }

    std::set<std::string> seen;
    for (const auto& [label, node] : circuit.labels())
        if (!seen.insert(label).second)
            add(Violation::Kind::DuplicateLabel, "duplicate node label '" + label + "'", node, std::nullopt);

    return report;
}

}  // namespace ldosim
