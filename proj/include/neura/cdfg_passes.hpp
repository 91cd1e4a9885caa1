// Preprocessing passes on CDFG form: function-argument promotion, cast
// canonicalization, constant folding, and the fixed-point live-in
// canonicalization that makes every inter-block data dependency explicit
// along its CFG edge.
#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <vector>

#include "neura/analysis.hpp"
#include "neura/ir.hpp"

namespace neura {

// ---------------------------------------------------------------------------
// promote-func-args
// ---------------------------------------------------------------------------

// Replaces all uses of function parameters with symbolic constants
// materialized in the entry block. Each parameter is materialized exactly
// once, carrying an `arg = k` attribute that the interpreters resolve
// against the runtime argument list.
inline void promoteFunctionArguments(Function &fn) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("promote-func-args requires CDFG form");
  if (fn.params.empty() || fn.blocks.empty()) return;
  std::vector<Operation> promoted;
  std::vector<std::pair<ValueId, ValueId>> replacements;
  for (size_t k = 0; k < fn.params.size(); ++k) {
    Operation c;
    c.id = fn.freshOp();
    c.opcode = Opcode::Constant;
    c.attributes["arg"] = Attribute::intVal(int64_t(k));
    c.results.push_back({fn.freshValue(), fn.params[k].type});
    replacements.push_back({fn.params[k].value, c.results[0].value});
    promoted.push_back(std::move(c));
  }
  Block &entry = fn.entry();
  entry.ops.insert(entry.ops.begin(), promoted.begin(), promoted.end());
  for (auto [oldV, newV] : replacements) replaceAllUses(fn, oldV, newV);
}

// ---------------------------------------------------------------------------
// canonicalize-cast
// ---------------------------------------------------------------------------

// Resolves the abstract index type to a concrete integer width and removes
// redundant casts: identity casts and widen-then-narrow chains back to the
// original width.
inline void canonicalizeCast(Function &fn, int indexWidth) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("canonicalize-cast requires CDFG form");
  if (indexWidth != 32 && indexWidth != 64)
    throw IrError("canonicalize-cast: index width must be 32 or 64");
  ScalarType concrete{TypeKind::Int, indexWidth};
  auto retype = [&](PredicatedType &t) {
    if (t.payload.isIndex()) t.payload = concrete;
  };
  for (auto &p : fn.params) retype(p.type);
  if (fn.returnType) retype(*fn.returnType);
  for (auto &b : fn.blocks) {
    for (auto &a : b.args) retype(a.type);
    for (auto &op : b.ops) {
      for (auto &r : op.results) retype(r.type);
      for (auto &[k, v] : op.attributes)
        if (v.type && v.type->isIndex()) v.type = concrete;
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    FunctionIndex idx(fn);
    // Identity casts: result type equals operand type.
    for (auto &b : fn.blocks) {
      for (auto &op : b.ops) {
        if (op.opcode != Opcode::Cast || op.operands.empty()) continue;
        if (idx.type(op.operands[0]) == op.results[0].type) {
          replaceAllUses(fn, op.results[0].value, op.operands[0]);
          op.opcode = Opcode::Constant;  // tombstone, erased below
          op.attributes.clear();
          op.attributes["__dead"] = Attribute::intVal(1);
          changed = true;
        }
      }
    }
    if (changed) {
      for (auto &b : fn.blocks)
        std::erase_if(b.ops, [](const Operation &op) {
          return op.hasAttr("__dead");
        });
      continue;
    }
    // Widen-then-narrow back to the same integer width.
    for (auto &b : fn.blocks) {
      for (auto &op : b.ops) {
        if (op.opcode != Opcode::Cast || op.operands.empty()) continue;
        const DefSite *d = idx.def(op.operands[0]);
        if (!d || d->kind != DefSite::Kind::OpResult) continue;
        const Block *db = fn.block(d->block);
        const Operation *inner = nullptr;
        for (const auto &o : db->ops)
          if (o.id == d->op) inner = &o;
        if (!inner || inner->opcode != Opcode::Cast ||
            inner->operands.empty())
          continue;
        PredicatedType src = idx.type(inner->operands[0]);
        PredicatedType mid = inner->results[0].type;
        PredicatedType dst = op.results[0].type;
        if (src == dst && src.payload.isInt() && mid.payload.isInt() &&
            mid.payload.width >= src.payload.width) {
          replaceAllUses(fn, op.results[0].value, inner->operands[0]);
          op.attributes["__dead"] = Attribute::intVal(1);
          changed = true;
        }
      }
    }
    for (auto &b : fn.blocks)
      std::erase_if(b.ops, [](const Operation &op) {
        return op.hasAttr("__dead");
      });
    // Unused leftover casts from collapsed chains.
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
        return op.opcode == Opcode::Cast && !op.results.empty() &&
               !used.count(op.results[0].value);
      });
      if (b.ops.size() != before) changed = true;
    }
  }
}

// ---------------------------------------------------------------------------
// fold-constant
// ---------------------------------------------------------------------------

namespace detail {

inline bool foldableConsumer(Opcode op) {
  switch (op) {
  case Opcode::Constant:
  case Opcode::Br:
  case Opcode::CondBr:
  case Opcode::Phi:
  case Opcode::Reserve:
  case Opcode::CtrlMov:
    return false;
  default:
    return true;
  }
}

// Logical position of the j-th SSA operand, skipping folded slots.
inline int logicalPosition(const Operation &op, int physIndex) {
  std::set<int> folded;
  for (const auto &[k, v] : op.attributes)
    if (k.rfind("const", 0) == 0 && k.size() > 5 &&
        k.find_first_not_of("0123456789", 5) == std::string::npos)
      folded.insert(std::stoi(k.substr(5)));
  int logical = 0, seen = 0;
  while (true) {
    if (!folded.count(logical)) {
      if (seen == physIndex) return logical;
      ++seen;
    }
    ++logical;
  }
}

}  // namespace detail

// Embeds constant operands as typed immediate attributes (const0, const1,
// ...) in their consumers and erases constant ops that end up unused.
// Argument-promoted constants are symbolic runtime values and are exempt.
// Runs on either form.
inline void foldConstants(Function &fn) {
  FunctionIndex idx(fn);
  // Map constant result -> its literal attribute.
  std::unordered_map<ValueId, Attribute> literals;
  for (const auto &b : fn.blocks)
    for (const auto &op : b.ops) {
      if (op.opcode != Opcode::Constant || op.hasAttr("arg")) continue;
      const Attribute *v = op.attr("value");
      if (!v) continue;
      Attribute a = *v;
      if (!a.type) a.type = op.results[0].type.payload;
      literals[op.results[0].value] = a;
    }
  if (literals.empty()) return;

  for (auto &b : fn.blocks) {
    for (auto &op : b.ops) {
      if (!detail::foldableConsumer(op.opcode)) continue;
      for (int j = int(op.operands.size()) - 1; j >= 0; --j) {
        auto it = literals.find(op.operands[j]);
        if (it == literals.end()) continue;
        int pos = detail::logicalPosition(op, j);
        op.attributes["const" + std::to_string(pos)] = it->second;
        op.operands.erase(op.operands.begin() + j);
      }
    }
  }

  // Erase constants with no remaining uses (non-foldable uses keep them).
  std::unordered_set<ValueId> used;
  for (const auto &b : fn.blocks)
    for (const auto &op : b.ops) {
      for (ValueId v : op.operands) used.insert(v);
      for (const auto &s : op.successors)
        for (ValueId v : s.args) used.insert(v);
    }
  for (auto &b : fn.blocks)
    std::erase_if(b.ops, [&](const Operation &op) {
      return op.opcode == Opcode::Constant && !op.hasAttr("arg") &&
             !op.results.empty() && literals.count(op.results[0].value) &&
             !used.count(op.results[0].value);
    });
}

// ---------------------------------------------------------------------------
// canonicalize-live-in
// ---------------------------------------------------------------------------

// Rewrites the CDFG so every control-flow edge explicitly passes the
// complete live-in set of its target as successor arguments (appended after
// any pre-existing block arguments, in ascending ValueId order of the
// original definitions). Idempotent: a second run finds empty live-in sets.
inline void canonicalizeLiveIn(Function &fn) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("canonicalize-live-in requires CDFG form");
  if (hasUnreachableBlocks(fn))
    throw IrError(
        "canonicalize-live-in: dead code detected (unreachable block); run "
        "dce first");

  // Normalization: materialized constants left in non-entry blocks (e.g.
  // branch-arm values that resisted folding) are hoisted into the entry
  // block first. Their values then thread through block arguments like any
  // other live-in, so every edge pass carries the proper path predicate
  // after flattening.
  {
    std::vector<Operation> hoisted;
    bool first = true;
    for (auto &b : fn.blocks) {
      if (first) {
        first = false;
        continue;
      }
      for (auto &op : b.ops)
        if (op.opcode == Opcode::Constant) hoisted.push_back(op);
      std::erase_if(b.ops, [](const Operation &op) {
        return op.opcode == Opcode::Constant;
      });
    }
    if (!hoisted.empty()) {
      Block &entry = fn.entry();
      size_t termPos = entry.ops.size();
      for (size_t i = 0; i < entry.ops.size(); ++i)
        if (info(entry.ops[i].opcode).cdfgTerminator) {
          termPos = i;
          break;
        }
      entry.ops.insert(entry.ops.begin() + termPos, hoisted.begin(),
                       hoisted.end());
    }
  }

  LiveInTable live = computeLiveIns(fn);
  FunctionIndex idx(fn);
  BlockId entryId = fn.blocks.front().id;

  // Phase 2a: add block arguments and replace in-block uses.
  std::unordered_map<BlockId, std::map<ValueId, ValueId>> argOf;
  for (auto &b : fn.blocks) {
    if (b.id == entryId) continue;
    const auto &lv = live.of(b.id);
    if (lv.empty()) continue;
    for (ValueId v : lv) {  // std::set iterates ascending
      ValueId arg = fn.freshValue();
      b.args.push_back({arg, idx.type(v)});
      argOf[b.id][v] = arg;
    }
    for (auto &[v, arg] : argOf[b.id]) replaceAllUses(fn, v, arg, b.id);
  }

  // Phase 2b: rewrite every predecessor terminator to pass the live-in
  // values, as visible in the predecessor (its own argument when the value
  // is also live into it, the original definition otherwise).
  for (auto &b : fn.blocks) {
    for (auto &op : b.ops) {
      if (!isBranch(op.opcode)) continue;
      for (auto &succ : op.successors) {
        const auto &lv = live.of(succ.block);
        for (ValueId v : lv) {
          auto bi = argOf.find(b.id);
          ValueId visible = v;
          if (bi != argOf.end()) {
            auto vi = bi->second.find(v);
            if (vi != bi->second.end()) visible = vi->second;
          }
          succ.args.push_back(visible);
        }
      }
    }
  }
}

}  // namespace neura
