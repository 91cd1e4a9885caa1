// Conservative memory-dependence analysis on dataflow form. Address roots
// are traced to the argument constant that provides the array base; two
// memory ops are ordered when they resolve to exactly the same single
// base argument and at least one of them writes. Distinct base arguments
// are assumed to address disjoint arrays (the corpus contract), and
// indirect addressing widens a root set to unknown, which never orders.
#pragma once

#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

namespace detail {

struct RootSet {
  std::set<int> args;  // argument indices
  bool unknown = false;

  void merge(const RootSet &o) {
    for (int a : o.args) args.insert(a);
    unknown = unknown || o.unknown;
  }
  bool singleArg() const { return !unknown && args.size() == 1; }
};

class AddressRoots {
public:
  explicit AddressRoots(const Function &fn) : fn_(fn) {
    for (const auto &b : fn.blocks) {
      for (const auto &op : b.ops) {
        for (const auto &r : op.results) producer_[r.value] = &op;
        if (op.opcode == Opcode::CtrlMov && op.operands.size() == 2)
          feeder_[op.operands[1]] = op.operands[0];
      }
    }
  }

  RootSet of(ValueId v) {
    std::unordered_set<ValueId> visiting;
    return walk(v, visiting);
  }

private:
  RootSet walk(ValueId v, std::unordered_set<ValueId> &visiting) {
    if (visiting.count(v)) return {};  // recurrence: contributes nothing new
    visiting.insert(v);
    auto cached = cache_.find(v);
    if (cached != cache_.end()) return cached->second;

    RootSet out;
    auto it = producer_.find(v);
    if (it == producer_.end()) {
      out.unknown = true;  // function parameter or unresolved
    } else {
      const Operation &op = *it->second;
      switch (op.opcode) {
      case Opcode::Constant:
        if (const Attribute *a = op.attr("arg"))
          out.args.insert(int(a->i));
        else
          out.unknown = true;  // literal address
        break;
      case Opcode::Add:
      case Opcode::Sub:
        // Every non-immediate component may carry the base.
        for (ValueId o : op.operands) out.merge(walk(o, visiting));
        if (op.operands.empty()) out.unknown = true;
        break;
      case Opcode::GrantOnce:
      case Opcode::GrantPredicate:
      case Opcode::Cast:
        if (!op.operands.empty())
          out.merge(walk(op.operands[0], visiting));
        else
          out.unknown = true;
        break;
      case Opcode::Phi:
        for (ValueId o : op.operands) out.merge(walk(o, visiting));
        break;
      case Opcode::Reserve: {
        auto f = feeder_.find(v);
        if (f != feeder_.end())
          out.merge(walk(f->second, visiting));
        else
          out.unknown = true;
        break;
      }
      case Opcode::LoopControl:
        break;  // pure index stream, no base component
      default:
        out.unknown = true;
        break;
      }
    }
    cache_[v] = out;
    return out;
  }

  const Function &fn_;
  std::unordered_map<ValueId, const Operation *> producer_;
  std::unordered_map<ValueId, ValueId> feeder_;
  std::unordered_map<ValueId, RootSet> cache_;
};

}  // namespace detail

// An ordered pair of memory ops: `before` must complete its k-th firing
// before `after` performs its own k-th (textual order breaks the tie).
struct MemOrderPair {
  OpId before = -1;
  OpId after = -1;
};

// Returns the ordered pairs among memory ops of a dataflow function: pairs
// whose addresses resolve to the same single base argument, where at least
// one op stores. Loads against loads always commute.
inline std::vector<MemOrderPair> memoryOrderPairs(const Function &fn) {
  std::vector<MemOrderPair> out;
  if (fn.form != IrForm::Dataflow) return out;
  detail::AddressRoots roots(fn);

  struct MemOp {
    OpId id;
    bool isStore;
    detail::RootSet root;
  };
  std::vector<MemOp> mem;
  for (const auto &b : fn.blocks) {
    for (const auto &op : b.ops) {
      ValueId addr = kInvalidValue;
      bool isStore = false;
      switch (op.opcode) {
      case Opcode::Load:
      case Opcode::LoadIndexed:
        if (!op.operands.empty()) addr = op.operands[0];
        break;
      case Opcode::Store: {
        isStore = true;
        // Address is logical slot 1; find the matching SSA operand.
        auto los = op.operands;
        if (op.hasAttr("const0") && !los.empty()) addr = los[0];
        else if (los.size() >= 2) addr = los[1];
        break;
      }
      default:
        continue;
      }
      detail::RootSet r;
      if (addr != kInvalidValue) r = roots.of(addr);
      else r.unknown = true;
      mem.push_back({op.id, isStore, std::move(r)});
    }
  }
  for (size_t i = 0; i < mem.size(); ++i) {
    for (size_t j = i + 1; j < mem.size(); ++j) {
      if (!mem[i].isStore && !mem[j].isStore) continue;
      if (!mem[i].root.singleArg() || !mem[j].root.singleArg()) continue;
      if (mem[i].root.args != mem[j].root.args) continue;
      out.push_back({mem[i].id, mem[j].id});
    }
  }
  return out;
}

}  // namespace neura
