// Hardware-specific rewrites on dataflow form: fused indexed loads, fused
// multiply-add, and loop-control streaming. Matching is greedy in textual
// order; overlapping matches resolve to the first found, so results are
// deterministic. Each fusion is meant to run only when the target declares
// the matching FU capability tag.
#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

namespace detail {

// A logical operand is either an SSA value or a folded immediate.
struct LogicalOperand {
  std::optional<Attribute> imm;
  ValueId value = kInvalidValue;

  bool isImm() const { return imm.has_value(); }
};

inline std::vector<LogicalOperand> logicalOperands(const Operation &op) {
  std::vector<LogicalOperand> out;
  int logical = op.logicalOperandCount();
  size_t next = 0;
  for (int pos = 0; pos < logical; ++pos) {
    const Attribute *a = op.attr("const" + std::to_string(pos));
    LogicalOperand lo;
    if (a)
      lo.imm = *a;
    else
      lo.value = op.operands[next++];
    out.push_back(std::move(lo));
  }
  return out;
}

inline void setLogicalOperands(Operation &op,
                               const std::vector<LogicalOperand> &los) {
  op.operands.clear();
  std::erase_if(op.attributes, [](const auto &kv) {
    const std::string &k = kv.first;
    return k.rfind("const", 0) == 0 && k.size() > 5 &&
           k.find_first_not_of("0123456789", 5) == std::string::npos;
  });
  for (size_t pos = 0; pos < los.size(); ++pos) {
    if (los[pos].isImm())
      op.attributes["const" + std::to_string(pos)] = *los[pos].imm;
    else
      op.operands.push_back(los[pos].value);
  }
}

struct UseCount {
  std::unordered_map<ValueId, int> counts;

  explicit UseCount(const Function &fn) {
    for (const auto &b : fn.blocks)
      for (const auto &op : b.ops) {
        for (ValueId v : op.operands) ++counts[v];
        for (const auto &s : op.successors)
          for (ValueId v : s.args) ++counts[v];
      }
  }
  int of(ValueId v) const {
    auto it = counts.find(v);
    return it == counts.end() ? 0 : it->second;
  }
};

inline Operation *defOp(Function &fn, ValueId v) {
  for (auto &b : fn.blocks)
    for (auto &op : b.ops)
      for (const auto &r : op.results)
        if (r.value == v) return &op;
  return nullptr;
}

inline void eraseOps(Function &fn, const std::unordered_set<OpId> &ids) {
  for (auto &b : fn.blocks)
    std::erase_if(b.ops,
                  [&](const Operation &op) { return ids.count(op.id); });
}

// A compile-time literal: a folded immediate or a non-symbolic constant op.
inline std::optional<Attribute> literalOf(Function &fn,
                                          const LogicalOperand &lo) {
  if (lo.isImm()) return lo.imm;
  Operation *def = defOp(fn, lo.value);
  if (!def || def->opcode != Opcode::Constant || def->hasAttr("arg"))
    return std::nullopt;
  const Attribute *v = def->attr("value");
  if (!v) return std::nullopt;
  Attribute out = *v;
  if (!out.type) out.type = def->results[0].type.payload;
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fuse-pattern: load_indexed
// ---------------------------------------------------------------------------

// load(add(base, i)) chains collapse into load_indexed(base, i, ...).
// Nested single-use adds contribute further indices; an address op with a
// second user blocks fusion at that level. Returns the number of fused
// loads.
inline int fuseLoadIndexed(Function &fn) {
  if (fn.form != IrForm::Dataflow)
    throw IrError("fuse-pattern requires dataflow form");
  int fused = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    Block &b = fn.blocks.front();
    for (size_t i = 0; i < b.ops.size(); ++i) {
      Operation &load = b.ops[i];
      if (load.opcode != Opcode::Load || load.operands.empty()) continue;
      detail::UseCount uses(fn);
      Operation *addr = detail::defOp(fn, load.operands[0]);
      if (!addr || addr->opcode != Opcode::Add ||
          uses.of(addr->results[0].value) != 1)
        continue;

      std::vector<detail::LogicalOperand> parts;  // base + indices
      std::unordered_set<OpId> toErase;
      Operation *cur = addr;
      while (true) {
        toErase.insert(cur->id);
        auto los = detail::logicalOperands(*cur);
        parts.push_back(los[1]);  // the index side
        if (los[0].isImm()) {
          parts.push_back(los[0]);  // immediate base
          break;
        }
        Operation *inner = detail::defOp(fn, los[0].value);
        if (inner && inner->opcode == Opcode::Add &&
            uses.of(los[0].value) == 1) {
          cur = inner;
          continue;
        }
        parts.push_back(los[0]);  // SSA base
        break;
      }
      std::reverse(parts.begin(), parts.end());  // base first

      Operation repl;
      repl.id = fn.freshOp();
      repl.opcode = Opcode::LoadIndexed;
      repl.results = load.results;
      repl.span = load.span;
      detail::setLogicalOperands(repl, parts);
      b.ops[i] = std::move(repl);
      detail::eraseOps(fn, toErase);
      ++fused;
      changed = true;
      break;  // op indices are stale after erasure; rescan
    }
  }
  return fused;
}

// ---------------------------------------------------------------------------
// fuse-pattern: muladd
// ---------------------------------------------------------------------------

// add(mul(a, b), c) with a single-use mul becomes muladd(a, b, c); the
// commuted form add(c, mul(a, b)) matches too, as does the fadd/fmul pair
// for float payloads. Returns the number of fused ops.
inline int fuseMulAdd(Function &fn) {
  if (fn.form != IrForm::Dataflow)
    throw IrError("fuse-pattern requires dataflow form");
  int fused = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    Block &b = fn.blocks.front();
    for (size_t i = 0; i < b.ops.size(); ++i) {
      Operation &add = b.ops[i];
      bool isFloat = add.opcode == Opcode::FAdd;
      if (add.opcode != Opcode::Add && !isFloat) continue;
      Opcode mulOpc = isFloat ? Opcode::FMul : Opcode::Mul;
      detail::UseCount uses(fn);

      auto addOps = detail::logicalOperands(add);
      int mulSide = -1;
      Operation *mul = nullptr;
      for (int s = 0; s < 2; ++s) {
        if (addOps[s].isImm()) continue;
        Operation *cand = detail::defOp(fn, addOps[s].value);
        if (cand && cand->opcode == mulOpc &&
            uses.of(addOps[s].value) == 1) {
          mulSide = s;
          mul = cand;
          break;
        }
      }
      if (!mul) continue;

      auto mulOps = detail::logicalOperands(*mul);
      std::vector<detail::LogicalOperand> parts = {mulOps[0], mulOps[1],
                                                   addOps[1 - mulSide]};
      Operation repl;
      repl.id = fn.freshOp();
      repl.opcode = Opcode::MulAdd;
      repl.results = add.results;
      repl.span = add.span;
      detail::setLogicalOperands(repl, parts);
      std::unordered_set<OpId> toErase{mul->id};
      b.ops[i] = std::move(repl);
      detail::eraseOps(fn, toErase);
      ++fused;
      changed = true;
      break;
    }
  }
  return fused;
}

// ---------------------------------------------------------------------------
// fuse-loop-control
// ---------------------------------------------------------------------------

// Recognizes the static-bounded loop-control cluster
//
//   %go  = grant_once(<start>)
//   %rsv = reserve
//   %i   = phi(%go, %rsv)
//   %c   = icmp(%i, <bound>)
//   %gi  = grant_predicate(%i, %c)
//   %i1  = add(%gi, <step>)
//          ctrl_mov(%i1, %rsv)
//
// with literal start/step/bound and replaces it by a single loop_control
// producing (index, valid), removing the inter-iteration dependency.
// Remaining uses of %i rewire to the index stream and uses of %c to the
// valid stream; remaining uses of %gi keep their exact predicate stream via
// grant_predicate(index, valid). Dynamic bounds never match. Returns the
// number of fused loops.
inline int fuseLoopControl(Function &fn) {
  if (fn.form != IrForm::Dataflow)
    throw IrError("fuse-loop-control requires dataflow form");
  int fused = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    Block &b = fn.blocks.front();
    detail::UseCount uses(fn);
    for (size_t pi = 0; pi < b.ops.size(); ++pi) {
      Operation &phi = b.ops[pi];
      if (phi.opcode != Opcode::Phi || phi.operands.size() != 2) continue;
      Operation *go = detail::defOp(fn, phi.operands[0]);
      Operation *rsv = detail::defOp(fn, phi.operands[1]);
      if (!go || !rsv) continue;
      if (go->opcode != Opcode::GrantOnce || rsv->opcode != Opcode::Reserve)
        continue;
      if (uses.of(go->results[0].value) != 1) continue;

      Operation *mov = nullptr;
      for (auto &op : b.ops)
        if (op.opcode == Opcode::CtrlMov && op.operands.size() == 2 &&
            op.operands[1] == rsv->results[0].value)
          mov = &op;
      if (!mov) continue;
      Operation *step = detail::defOp(fn, mov->operands[0]);
      if (!step || step->opcode != Opcode::Add) continue;
      if (uses.of(step->results[0].value) != 1) continue;

      // add(gi, <step literal>) in either operand order.
      auto stepOps = detail::logicalOperands(*step);
      Operation *gi = nullptr;
      std::optional<Attribute> stepLit;
      for (int s = 0; s < 2; ++s) {
        if (stepOps[s].isImm()) continue;
        Operation *cand = detail::defOp(fn, stepOps[s].value);
        if (cand && cand->opcode == Opcode::GrantPredicate &&
            cand->operands.size() == 2 &&
            cand->operands[0] == phi.results[0].value) {
          gi = cand;
          stepLit = detail::literalOf(fn, stepOps[1 - s]);
          break;
        }
      }
      if (!gi || !stepLit) continue;
      Operation *cmp = detail::defOp(fn, gi->operands[1]);
      if (!cmp || cmp->opcode != Opcode::ICmp) continue;
      auto cmpOps = detail::logicalOperands(*cmp);
      if (cmpOps[0].isImm() || cmpOps[0].value != phi.results[0].value)
        continue;
      auto boundLit = detail::literalOf(fn, cmpOps[1]);
      auto startLit = detail::literalOf(fn, detail::logicalOperands(*go)[0]);
      if (!boundLit || !startLit) continue;
      if (!startLit->isInt() || !stepLit->isInt() || !boundLit->isInt())
        continue;
      if (stepLit->i == 0) continue;
      // The step add must be the only consumer of the granted index besides
      // whatever taps we rewire below; the cmp may have other users.
      int giUses = uses.of(gi->results[0].value);
      if (giUses < 1) continue;
      bool giElsewhere = giUses != 1;

      Operation lc;
      lc.id = fn.freshOp();
      lc.opcode = Opcode::LoopControl;
      lc.attributes["start"] = *startLit;
      lc.attributes["step"] = *stepLit;
      lc.attributes["bound"] = *boundLit;
      lc.attributes["cmp"] = *cmp->attr("cmp");
      lc.results.push_back({fn.freshValue(), phi.results[0].type});
      lc.results.push_back(
          {fn.freshValue(), PredicatedType::pred(ScalarType::i1())});
      ValueId indexVal = lc.results[0].value;
      ValueId validVal = lc.results[1].value;

      ValueId oldPhi = phi.results[0].value;
      ValueId oldCmp = cmp->results[0].value;
      ValueId startOperand =
          go->operands.empty() ? kInvalidValue : go->operands[0];

      std::unordered_set<OpId> toErase{go->id, rsv->id, mov->id, step->id,
                                       cmp->id};
      if (!giElsewhere) toErase.insert(gi->id);
      OpId giId = gi->id;
      b.ops[pi] = std::move(lc);
      detail::eraseOps(fn, toErase);

      for (auto &blk : fn.blocks)
        for (auto &op : blk.ops) {
          if (op.id == giId && giElsewhere) {
            op.operands = {indexVal, validVal};
            continue;
          }
          for (auto &v : op.operands) {
            if (v == oldPhi) v = indexVal;
            if (v == oldCmp) v = validVal;
          }
        }
      if (startOperand != kInvalidValue) {
        detail::UseCount after(fn);
        if (after.of(startOperand) == 0) {
          Operation *c = detail::defOp(fn, startOperand);
          if (c && c->opcode == Opcode::Constant)
            detail::eraseOps(fn, {c->id});
        }
      }
      ++fused;
      changed = true;
      break;
    }
  }
  return fused;
}

// ---------------------------------------------------------------------------
// Capability-gated driver
// ---------------------------------------------------------------------------

struct FusionReport {
  int loadIndexed = 0;
  int mulAdd = 0;
  int loopControl = 0;
};

inline FusionReport fusePatterns(Function &fn,
                                 const std::set<std::string> &patterns) {
  FusionReport rep;
  if (patterns.count("load_indexed")) rep.loadIndexed = fuseLoadIndexed(fn);
  if (patterns.count("muladd")) rep.mulAdd = fuseMulAdd(fn);
  return rep;
}

}  // namespace neura
