// CDFG analyses: live-in computation (fixed point), CFG edge
// classification, and a trivial dead-code sweep used before live-in
// canonicalization.
#pragma once

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

// ---------------------------------------------------------------------------
// Live-in analysis
// ---------------------------------------------------------------------------

// Per-block set of values that are live into the block: used in the block
// (or needed by a successor) but defined outside it. The entry block's set
// is empty by construction.
struct LiveInTable {
  std::unordered_map<BlockId, std::set<ValueId>> liveIn;

  const std::set<ValueId> &of(BlockId b) const {
    static const std::set<ValueId> empty;
    auto it = liveIn.find(b);
    return it == liveIn.end() ? empty : it->second;
  }
};

namespace detail {

inline std::set<ValueId> definedIn(const Function &fn, const Block &b,
                                   bool isEntry) {
  std::set<ValueId> defs;
  if (isEntry)
    for (const auto &p : fn.params) defs.insert(p.value);
  for (const auto &a : b.args) defs.insert(a.value);
  for (const auto &op : b.ops)
    for (const auto &r : op.results) defs.insert(r.value);
  return defs;
}

// Values used in b but not defined in it. Uses in the terminator's
// successor-argument lists count as uses in b.
inline std::set<ValueId> directLiveIns(const Function &fn, const Block &b,
                                       bool isEntry) {
  std::set<ValueId> defs = definedIn(fn, b, isEntry);
  std::set<ValueId> live;
  auto use = [&](ValueId v) {
    if (!defs.count(v)) live.insert(v);
  };
  for (const auto &op : b.ops) {
    for (ValueId v : op.operands) use(v);
    for (const auto &s : op.successors)
      for (ValueId v : s.args) use(v);
  }
  return live;
}

}  // namespace detail

// Fixed-point backward propagation:
//   L_in[B] = DirectLiveIns(B) ∪ ⋃_{S ∈ succ(B)} (L_in[S] \ DefinedIn(B))
inline LiveInTable computeLiveIns(const Function &fn) {
  LiveInTable table;
  if (fn.blocks.empty()) return table;
  BlockId entryId = fn.blocks.front().id;
  std::unordered_map<BlockId, std::set<ValueId>> defs;
  for (const auto &b : fn.blocks) {
    defs[b.id] = detail::definedIn(fn, b, b.id == entryId);
    if (b.id != entryId)
      table.liveIn[b.id] = detail::directLiveIns(fn, b, false);
    else
      table.liveIn[b.id] = {};
  }
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto &b : fn.blocks) {
      if (b.id == entryId) continue;
      auto &mine = table.liveIn[b.id];
      for (BlockId s : blockSuccessors(b)) {
        for (ValueId v : table.of(s)) {
          if (defs[b.id].count(v)) continue;
          if (mine.insert(v).second) changed = true;
        }
      }
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// CFG edge classification
// ---------------------------------------------------------------------------

// One of the eight edge categories: direction x terminator x value-passing.
// Categories 1-4 are exactly the value-free edges and must be gone after
// live-in canonicalization.
struct EdgeClass {
  bool backward = false;
  bool condBr = false;
  bool carriesValues = false;

  int category() const {
    return 1 + (carriesValues ? 4 : 0) + (backward ? 2 : 0) + (condBr ? 1 : 0);
  }
};

struct ClassifiedEdge {
  BlockId source = -1;
  BlockId target = -1;
  int succIndex = 0;  // position in the terminator's successor list
  EdgeClass cls;
};

// Classifies every (terminator, successor) pair of reachable blocks. A
// backward edge is a natural loop back-edge: its target dominates its
// source. A retreating edge whose target does not dominate the source means
// irreducible control flow and is rejected.
inline std::vector<ClassifiedEdge> classifyCfgEdges(const Function &fn) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("classify-cfg-edges requires CDFG form");
  std::vector<BlockId> rpo = reversePostOrder(fn);
  std::unordered_map<BlockId, int> rpoIndex;
  for (size_t i = 0; i < rpo.size(); ++i) rpoIndex[rpo[i]] = int(i);
  auto idom = computeDominators(fn);

  std::vector<ClassifiedEdge> out;
  for (BlockId id : rpo) {
    const Block *b = fn.block(id);
    const Operation *term = b->terminator();
    if (!term || !isBranch(term->opcode)) continue;
    for (size_t i = 0; i < term->successors.size(); ++i) {
      const SuccessorRef &s = term->successors[i];
      ClassifiedEdge e;
      e.source = id;
      e.target = s.block;
      e.succIndex = int(i);
      e.cls.condBr = term->opcode == Opcode::CondBr;
      e.cls.carriesValues = !s.args.empty();
      if (dominates(idom, s.block, id)) {
        e.cls.backward = true;
      } else if (rpoIndex.count(s.block) &&
                 rpoIndex[s.block] <= rpoIndex[id]) {
        throw IrError("irreducible control flow: edge bb" +
                      std::to_string(id) + " -> bb" +
                      std::to_string(s.block));
      }
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trivial dead code elimination
// ---------------------------------------------------------------------------

inline bool hasUnreachableBlocks(const Function &fn) {
  std::unordered_set<BlockId> reachable;
  for (BlockId b : reversePostOrder(fn)) reachable.insert(b);
  return reachable.size() != fn.blocks.size();
}

// Drops unreachable blocks and (iteratively) side-effect-free ops whose
// results are all unused. Terminators are never dropped.
inline void eliminateDeadCode(Function &fn) {
  std::unordered_set<BlockId> reachable;
  for (BlockId b : reversePostOrder(fn)) reachable.insert(b);
  std::erase_if(fn.blocks,
                [&](const Block &b) { return !reachable.count(b.id); });

  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_set<ValueId> used;
    for (const auto &b : fn.blocks)
      for (const auto &op : b.ops) {
        for (ValueId v : op.operands) used.insert(v);
        for (const auto &s : op.successors)
          for (ValueId v : s.args) used.insert(v);
      }
    for (auto &b : fn.blocks) {
      size_t before = b.ops.size();
      std::erase_if(b.ops, [&](const Operation &op) {
        const OpcodeInfo &oi = info(op.opcode);
        if (oi.cdfgTerminator || oi.hasSideEffect || isBranch(op.opcode))
          return false;
        if (op.opcode == Opcode::Reserve || op.opcode == Opcode::GrantOnce ||
            op.opcode == Opcode::LoopControl)
          return false;  // stateful or channel-backed
        for (const auto &r : op.results)
          if (used.count(r.value)) return false;
        return true;
      });
      if (b.ops.size() != before) changed = true;
    }
  }
}

}  // namespace neura
