#pragma once

#include <string>
#include <string_view>

#include "ldosim/circuit.hpp"

namespace ldosim {

/// Parses the line-oriented netlist format:
///
///     R <a> <b> <ohms>
///     C <a> <b> <farads>
///     G <cp> <cn> <op> <on> <siemens>
///     V <p> <n> <dc> [ac]
///     I <p> <n> <dc> [ac]
///     X <cp> <cn> <op> <on> <model> <k=v...>
///     BREAK <from> <to> <label>
///     .label <name> <node>
///
/// The kind letter may carry a name suffix (`Rload`, `Vin`), which becomes
/// the element name. `#` starts a comment. Nodes are integers; values accept
/// SI suffixes. Throws ParseError carrying the 1-based line number.
Circuit parse_netlist(std::string_view text);

Circuit load_netlist(const std::string& path);

/// Inverse of parse_netlist; values written at 17 significant digits so a
/// round trip is exact.
std::string write_netlist(const Circuit& circuit);

}  // namespace ldosim
