#include "ldosim/netlist.hpp"

#include <charconv>
#include <sstream>

#include "ldosim/errors.hpp"
#include "ldosim/kvfile.hpp"
#include "ldosim/units.hpp"

namespace ldosim {

namespace {

std::vector<std::string> split(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    for (std::string tok; in >> tok;) out.push_back(tok);
    return out;
}

NodeId parse_node(const std::string& tok, int line) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || p != tok.data() + tok.size()) throw ParseError("bad node '" + tok + "'", line);
    return NodeId{v};
}

double parse_value(const std::string& tok, int line) {
    auto v = parse_si(tok);
    if (!v) throw ParseError("bad value '" + tok + "'", line);
    return *v;
}

void expect_fields(const std::vector<std::string>& f, std::size_t lo, std::size_t hi, int line) {
    if (f.size() < lo || f.size() > hi)
        throw ParseError(f[0] + " expects " + std::to_string(lo - 1) + (lo == hi ? "" : "-" + std::to_string(hi - 1)) +
                             " fields, got " + std::to_string(f.size() - 1),
                         line);
}

std::string num(double v) { return format_sci(v, 17); }

}  // namespace

Circuit parse_netlist(std::string_view text) {
    Circuit circuit;
    std::vector<std::pair<std::string, std::size_t>> labels;
    int lineNo = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineNo;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const auto f = split(line);
        if (f.empty()) continue;

        const std::string& head = f[0];
        if (head == ".label") {
            expect_fields(f, 3, 3, lineNo);
            labels.emplace_back(f[1], parse_node(f[2], lineNo).index);
            continue;
        }
        if (head == "BREAK") {
            expect_fields(f, 4, 4, lineNo);
            circuit.add_element(BreakPort{parse_node(f[1], lineNo), parse_node(f[2], lineNo), f[3]});
            continue;
        }

        const char kind = static_cast<char>(std::toupper(static_cast<unsigned char>(head[0])));
        const std::string name = head.size() > 1 ? head : std::string{};
        auto node = [&](std::size_t i) { return parse_node(f[i], lineNo); };
        auto value = [&](std::size_t i) { return parse_value(f[i], lineNo); };
        try {
            switch (kind) {
                case 'R':
                    expect_fields(f, 4, 4, lineNo);
                    circuit.add_element(Resistor{node(1), node(2), value(3)}, name);
                    break;
                case 'C':
                    expect_fields(f, 4, 4, lineNo);
                    circuit.add_element(Capacitor{node(1), node(2), value(3)}, name);
                    break;
                case 'G':
                    expect_fields(f, 6, 6, lineNo);
                    circuit.add_element(Vccs{node(1), node(2), node(3), node(4), value(5)}, name);
                    break;
                case 'V':
                    expect_fields(f, 4, 5, lineNo);
                    circuit.add_element(VSource{node(1), node(2), value(3), f.size() > 4 ? value(4) : 0.0}, name);
                    break;
                case 'I':
                    expect_fields(f, 4, 5, lineNo);
                    circuit.add_element(ISource{node(1), node(2), value(3), f.size() > 4 ? value(4) : 0.0}, name);
                    break;
                case 'X': {
                    if (f.size() < 6) throw ParseError("X expects 4 nodes and a model", lineNo);
                    std::map<std::string, double> params;
                    for (std::size_t i = 6; i < f.size(); ++i) {
                        const auto eq = f[i].find('=');
                        if (eq == std::string::npos || eq == 0)
                            throw ParseError("model parameter '" + f[i] + "' is not k=v", lineNo);
                        params[f[i].substr(0, eq)] = parse_value(f[i].substr(eq + 1), lineNo);
                    }
                    circuit.add_element(make_nonlinear_vccs(node(1), node(2), node(3), node(4), f[5], params), name);
                    break;
                }
                default:
                    throw ParseError("unknown element '" + head + "'", lineNo);
            }
        } catch (const StructuralError& e) {
            throw ParseError(e.what(), lineNo);
        }
    }
    for (const auto& [label, index] : labels) {
        while (circuit.node_count() <= index) circuit.add_node();
        circuit.set_label(label, NodeId{index});
    }
    return circuit;
}

Circuit load_netlist(const std::string& path) { return parse_netlist(read_file(path)); }

std::string write_netlist(const Circuit& circuit) {
    std::ostringstream out;
    for (std::size_t i = 0; i < circuit.element_count(); ++i) {
        const Element& el = circuit.elements()[i];
        const std::string& name = circuit.element_name(ElementId{i});
        std::string head = element_kind(el);
        if (head != "BREAK" && !name.empty() && std::toupper(static_cast<unsigned char>(name[0])) == head[0] && name.size() > 1)
            head = name;
        out << head;
        if (const auto* bp = std::get_if<BreakPort>(&el)) {
            out << ' ' << bp->fromNode.index << ' ' << bp->toNode.index << ' ' << bp->label << '\n';
            continue;
        }
        for (NodeId n : element_terminals(el)) out << ' ' << n.index;
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, Resistor>) out << ' ' << num(e.ohms);
                else if constexpr (std::is_same_v<T, Capacitor>) out << ' ' << num(e.farads);
                else if constexpr (std::is_same_v<T, Vccs>) out << ' ' << num(e.siemens);
                else if constexpr (std::is_same_v<T, VSource>) out << ' ' << num(e.dcVolts) << ' ' << num(e.acMagnitudeVolts);
                else if constexpr (std::is_same_v<T, ISource>) out << ' ' << num(e.dcAmps) << ' ' << num(e.acMagnitudeAmps);
                else if constexpr (std::is_same_v<T, NonlinearVccs>) {
                    out << ' ' << e.modelId;
                    for (const auto& [k, v] : e.modelParams) out << ' ' << k << '=' << num(v);
                }
            },
            el);
        out << '\n';
    }
    for (const auto& [label, node] : circuit.labels()) out << ".label " << label << ' ' << node.index << '\n';
    return out.str();
}

}  // namespace ldosim
