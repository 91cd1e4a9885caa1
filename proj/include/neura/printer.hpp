// Canonical textual form of the IR. Printing renumbers values (%0... in
// definition order, params as %argN) and blocks (bb0... in list order) so
// that structurally identical functions print byte-identically.
#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <unordered_map>

#include "neura/ir.hpp"

namespace neura {

namespace detail {

inline std::string formatFloat(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  std::string s = os.str();
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

inline std::string formatAttribute(const Attribute &a) {
  std::string s;
  switch (a.kind) {
  case Attribute::Kind::Int: s = std::to_string(a.i); break;
  case Attribute::Kind::Float: s = formatFloat(a.f); break;
  case Attribute::Kind::Str: s = "\"" + a.s + "\""; break;
  }
  if (a.type) s += " : " + a.type->str();
  return s;
}

class NameMap {
public:
  explicit NameMap(const Function &fn) {
    for (size_t i = 0; i < fn.params.size(); ++i)
      values_[fn.params[i].value] = "%arg" + std::to_string(i);
    int nextValue = 0;
    int nextBlock = 0;
    for (const auto &b : fn.blocks) {
      blocks_[b.id] = "bb" + std::to_string(nextBlock++);
      for (const auto &a : b.args)
        values_[a.value] = "%" + std::to_string(nextValue++);
      for (const auto &op : b.ops)
        for (const auto &r : op.results)
          values_[r.value] = "%" + std::to_string(nextValue++);
    }
  }

  std::string value(ValueId v) const {
    auto it = values_.find(v);
    return it == values_.end() ? "%<bad:" + std::to_string(v) + ">"
                               : it->second;
  }
  std::string block(BlockId b) const {
    auto it = blocks_.find(b);
    return it == blocks_.end() ? "bb<bad:" + std::to_string(b) + ">"
                               : it->second;
  }

private:
  std::unordered_map<ValueId, std::string> values_;
  std::unordered_map<BlockId, std::string> blocks_;
};

inline void printOperation(std::ostream &os, const Operation &op,
                           const NameMap &names) {
  os << "  ";
  if (!op.results.empty()) {
    for (size_t i = 0; i < op.results.size(); ++i) {
      if (i) os << ", ";
      os << names.value(op.results[i].value);
    }
    os << " = ";
  }
  os << "neura." << opcodeName(op.opcode);

  bool firstItem = true;
  auto sep = [&]() { os << (firstItem ? " " : ", "); firstItem = false; };

  AttributeMap attrs = op.attributes;
  if (op.opcode == Opcode::Constant) {
    auto it = attrs.find("value");
    if (it != attrs.end()) {
      sep();
      os << formatAttribute(it->second);
      attrs.erase(it);
    }
  }
  for (ValueId v : op.operands) {
    sep();
    os << names.value(v);
  }
  for (const auto &succ : op.successors) {
    sep();
    os << names.block(succ.block);
    os << "(";
    for (size_t i = 0; i < succ.args.size(); ++i) {
      if (i) os << ", ";
      os << names.value(succ.args[i]);
    }
    os << ")";
  }
  if (!attrs.empty()) {
    os << " {";
    bool first = true;
    for (const auto &[k, v] : attrs) {
      if (!first) os << ", ";
      first = false;
      os << k << " = " << formatAttribute(v);
    }
    os << "}";
  }
  if (!op.results.empty()) {
    os << " : ";
    for (size_t i = 0; i < op.results.size(); ++i) {
      if (i) os << ", ";
      os << op.results[i].type.str();
    }
  }
  os << "\n";
}

}  // namespace detail

inline std::string printFunction(const Function &fn) {
  detail::NameMap names(fn);
  std::ostringstream os;
  os << "func @" << fn.name << "(";
  for (size_t i = 0; i < fn.params.size(); ++i) {
    if (i) os << ", ";
    os << "%arg" << i << ": " << fn.params[i].type.str();
  }
  os << ")";
  if (fn.returnType) os << " -> " << fn.returnType->str();
  os << " {\n";
  for (const auto &b : fn.blocks) {
    os << names.block(b.id);
    if (!b.args.empty()) {
      os << "(";
      for (size_t i = 0; i < b.args.size(); ++i) {
        if (i) os << ", ";
        os << names.value(b.args[i].value) << ": " << b.args[i].type.str();
      }
      os << ")";
    }
    os << ":\n";
    for (const auto &op : b.ops) detail::printOperation(os, op, names);
  }
  os << "}\n";
  return os.str();
}

// Pre: every function verifies. Throws IrError otherwise so broken IR never
// reaches golden files.
inline std::string printModule(const Module &m) {
  std::string out;
  for (size_t i = 0; i < m.functions.size(); ++i) {
    auto report = verify(m.functions[i]);
    if (!report.empty())
      throw IrError("cannot print unverifiable function @" +
                    m.functions[i].name + ":\n" + violationSummary(report));
    if (i) out += "\n";
    out += printFunction(m.functions[i]);
  }
  return out;
}

}  // namespace neura
