#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ldosim/device_law.hpp"

namespace ldosim {

/// Index of a circuit node. Node 0 is the ground reference.
struct NodeId {
    std::size_t index = 0;
    constexpr auto operator<=>(const NodeId&) const = default;
};

inline constexpr NodeId kGround{0};

/// Stable position of an element inside its circuit.
struct ElementId {
    std::size_t index = 0;
    constexpr auto operator<=>(const ElementId&) const = default;
};

struct Resistor {
    NodeId a, b;
    double ohms;
};

struct Capacitor {
    NodeId a, b;
    double farads;
};

/// Linear transconductor. Current siemens*(v(ctrlPos)-v(ctrlNeg)) flows from
/// outPos through the element to outNeg (SPICE G convention): it is drawn out
/// of outPos and injected into outNeg. Negative siemens is allowed.
struct Vccs {
    NodeId ctrlPos, ctrlNeg, outPos, outNeg;
    double siemens;
};

/// Independent voltage source, v(pos)-v(neg) = dcVolts (+ acMagnitudeVolts in AC).
struct VSource {
    NodeId pos, neg;
    double dcVolts = 0.0;
    double acMagnitudeVolts = 0.0;
};

/// Independent current source; the current flows from pos through the source to neg.
struct ISource {
    NodeId pos, neg;
    double dcAmps = 0.0;
    double acMagnitudeAmps = 0.0;
};

/// Transconductor with a nonlinear law of its control voltage, same
/// orientation as Vccs.
struct NonlinearVccs {
    NodeId ctrlPos, ctrlNeg, outPos, outNeg;
    std::string modelId;
    std::map<std::string, double> modelParams;
    DeviceLaw law;  ///< compiled from modelId/modelParams by make_nonlinear_vccs
};

/// Loop-break marker. Shorts fromNode to toNode in every analysis except
/// loop_gain on its label, where the connection is opened: toNode is the
/// forward (injection) side and fromNode the return side.
struct BreakPort {
    NodeId fromNode, toNode;
    std::string label;
};

using Element = std::variant<Resistor, Capacitor, Vccs, VSource, ISource, NonlinearVccs, BreakPort>;

/// Builds a NonlinearVccs, compiling its law. Throws StructuralError for an
/// unknown model or missing parameter.
NonlinearVccs make_nonlinear_vccs(NodeId ctrlPos, NodeId ctrlNeg, NodeId outPos, NodeId outNeg,
                                  std::string modelId, std::map<std::string, double> modelParams);

/// Single-letter kind used by the netlist format ("R", "C", "G", "V", "I", "X", "BREAK").
std::string element_kind(const Element& element);

/// Terminals of an element in declaration order.
std::vector<NodeId> element_terminals(const Element& element);

/// Node/element graph consumed by every analysis.
///
/// A default-constructed circuit grows its node set on demand as elements
/// reference new indices. A circuit constructed with an explicit node count
/// is fixed-size and rejects out-of-range terminals.
class Circuit {
public:
    Circuit() = default;
    explicit Circuit(std::size_t nodeCount);

    /// Appends a node and returns it. Works for fixed-size circuits too.
    NodeId add_node(const std::string& label = {});

    /// Appends an element and returns its id. Throws StructuralError when a
    /// terminal references a node that does not exist (fixed-size circuits).
    ElementId add_element(Element element, std::string name = {});

    /// Attaches a label to a node. Duplicate labels are stored and reported by validate().
    void set_label(const std::string& label, NodeId node);

    [[nodiscard]] std::size_t node_count() const noexcept { return nodeCount_; }
    [[nodiscard]] std::size_t element_count() const noexcept { return elements_.size(); }
    [[nodiscard]] const std::vector<Element>& elements() const noexcept { return elements_; }
    [[nodiscard]] const Element& element(ElementId id) const;
    Element& element(ElementId id);
    [[nodiscard]] const std::string& element_name(ElementId id) const;
    [[nodiscard]] std::optional<ElementId> find_element(const std::string& name) const;

    [[nodiscard]] const std::vector<std::pair<std::string, NodeId>>& labels() const noexcept { return labels_; }
    [[nodiscard]] std::optional<NodeId> find_node(const std::string& label) const;
    /// Throws StructuralError for an unknown label.
    [[nodiscard]] NodeId node(const std::string& label) const;
    /// First label of a node, or its decimal index when unlabeled.
    [[nodiscard]] std::string node_name(NodeId node) const;

    [[nodiscard]] std::optional<ElementId> find_break_port(const std::string& label) const;

    /// Reorders elements by `order` (a permutation of element indices). Names follow.
    [[nodiscard]] Circuit permuted(const std::vector<std::size_t>& order) const;

private:
    void require_node(NodeId node) const;

    std::size_t nodeCount_ = 1;
    bool growable_ = true;
    std::vector<Element> elements_;
    std::vector<std::string> names_;
    std::vector<std::pair<std::string, NodeId>> labels_;
};

struct Violation {
    enum class Kind { FloatingNode, NonpositiveValue, NonfiniteValue, DuplicateLabel, DuplicateBreakLabel, UnknownNode };
    Kind kind;
    std::string message;
    std::optional<NodeId> node;
    std::optional<ElementId> element;
    friend bool operator==(const Violation&, const Violation&) = default;
};

struct ValidationReport {
    std::vector<Violation> violations;
    [[nodiscard]] bool ok() const noexcept { return violations.empty(); }
    friend bool operator==(const ValidationReport&, const ValidationReport&) = default;
};

/// Structural checks: floating nodes, nonpositive R/C, nonfinite values,
/// duplicate labels. Pure; never throws.
ValidationReport validate(const Circuit& circuit);

}  // namespace ldosim
