// Lowering from canonicalized CDFG form into pure dataflow form. Data
// predication lifts every value into the predicated type system; the
// flattening pass then rewrites the four value-carrying CFG edge categories
// into predicate-management and structural ops and fuses all blocks into
// one:
//
//   (5) forward br      values wired directly (phi at multi-predecessor
//                       merges)
//   (6) forward cond_br values wrapped in grant_predicate on the branch
//                       condition (negated via an explicit not on the false
//                       edge)
//   (7) backward br     loop-carried values routed through reserve/ctrl_mov
//                       into the header phi
//   (8) backward cond_br as (7) with the loop-back value grant_predicate'd
//
// Compile-time initial values feeding a loop-header phi are wrapped in
// grant_once so they contribute exactly one token per kernel invocation.
#pragma once

#include <map>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/analysis.hpp"
#include "neura/ir.hpp"

namespace neura {

// ---------------------------------------------------------------------------
// leverage-predicated-value
// ---------------------------------------------------------------------------

// Converts every SSA value type from τ to its predicated counterpart τ_p
// and (notionally) every op to its predicated variant; block structure is
// untouched, so the delta against the input is type-only.
inline void applyDataPredication(Function &fn) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("leverage-predicated-value requires CDFG form");
  auto lift = [](PredicatedType &t) {
    if (t.payload.isIndex())
      throw IrError("leverage-predicated-value: unresolved index type; run "
                    "canonicalize-cast first");
    t.predicated = true;
  };
  for (auto &p : fn.params) lift(p.type);
  if (fn.returnType) lift(*fn.returnType);
  for (auto &b : fn.blocks) {
    for (auto &a : b.args) lift(a.type);
    for (auto &op : b.ops)
      for (auto &r : op.results) lift(r.type);
  }
}

// ---------------------------------------------------------------------------
// transform-ctrl-to-data-flow
// ---------------------------------------------------------------------------

struct RewriteRecord {
  BlockId source = -1;
  BlockId target = -1;
  EdgeClass cls;
  std::vector<OpId> insertedOps;
};

struct FlattenResult {
  Function fn;
  std::vector<RewriteRecord> records;
};

namespace detail {

class Flattener {
public:
  explicit Flattener(const Function &src) : src_(src) {}

  FlattenResult run() {
    if (src_.form != IrForm::Cdfg)
      throw IrError("transform-ctrl-to-data-flow requires CDFG form");
    if (hasUnreachableBlocks(src_))
      throw IrError("preprocessing incomplete: unreachable block");
    for (const auto &b : src_.blocks)
      for (const auto &a : b.args)
        if (!a.type.predicated)
          throw IrError("preprocessing incomplete: unpredicated value; run "
                        "leverage-predicated-value first");

    edges_ = classifyCfgEdges(src_);
    for (const auto &e : edges_)
      if (!e.cls.carriesValues)
        throw IrError("preprocessing incomplete: edge bb" +
                      std::to_string(e.source) + " -> bb" +
                      std::to_string(e.target) + " is category " +
                      std::to_string(e.cls.category()) +
                      "; run canonicalize-live-in first");

    out_.name = src_.name;
    out_.params = src_.params;
    out_.returnType = src_.returnType;
    out_.form = IrForm::Dataflow;
    out_.nextValue = src_.nextValue;
    out_.nextOp = src_.nextOp;
    Block flat;
    flat.id = 0;
    out_.nextBlock = 1;
    out_.blocks.push_back(std::move(flat));

    rpo_ = reversePostOrder(src_);
    for (size_t i = 0; i < rpo_.size(); ++i) rpoIndex_[rpo_[i]] = int(i);
    for (const auto &e : edges_) records_[edgeKey(e)] = {e.source, e.target,
                                                         e.cls, {}};
    // Parameters are invocation constants, like promoted arg constants.
    for (const auto &p : src_.params) markStatic(p.value, true);

    for (BlockId id : rpo_) processBlock(*src_.block(id));

    FlattenResult res;
    res.fn = std::move(out_);
    for (const auto &e : edges_) res.records.push_back(records_[edgeKey(e)]);
    return res;
  }

private:
  using EdgeKey = std::pair<BlockId, int>;

  static EdgeKey edgeKey(const ClassifiedEdge &e) {
    return {e.source, e.succIndex};
  }

  Block &flat() { return out_.blocks.front(); }

  void markStatic(ValueId v, bool isStatic) {
    if (isStatic) statics_.insert(v);
  }
  bool isStatic(ValueId v) const { return statics_.count(v) != 0; }

  ValueId remap(ValueId v) const {
    auto it = remap_.find(v);
    return it == remap_.end() ? v : it->second;
  }

  PredicatedType typeOf(ValueId newV) {
    for (const auto &p : out_.params)
      if (p.value == newV) return p.type;
    for (const auto &op : flat().ops)
      for (const auto &r : op.results)
        if (r.value == newV) return r.type;
    throw IrError("flatten: untyped value %" + std::to_string(newV));
  }

  Operation &emit(Opcode opc, std::vector<ValueId> operands,
                  PredicatedType resultType, RewriteRecord *rec) {
    Operation op;
    op.id = out_.freshOp();
    op.opcode = opc;
    op.operands = std::move(operands);
    if (info(opc).numResults == 1)
      op.results.push_back({out_.freshValue(), resultType});
    flat().ops.push_back(std::move(op));
    Operation &ref = flat().ops.back();
    if (rec) rec->insertedOps.push_back(ref.id);
    return ref;
  }

  // Pure ops over compile-time values stay compile-time; everything else
  // produces per-activation tokens.
  bool opaqueStatic(const Operation &op) {
    if (op.opcode == Opcode::Constant) return true;
    if (!info(op.opcode).staticEvaluable) return false;
    for (ValueId v : op.operands)
      if (!isStatic(v)) return false;
    return true;
  }

  // Branch condition for a classified cond_br edge, negated on the false
  // successor. The not op is cached per source terminator.
  ValueId condToken(const ClassifiedEdge &e, RewriteRecord *rec) {
    const Operation *term = src_.block(e.source)->terminator();
    ValueId cond = remap(term->operands[0]);
    if (e.succIndex == 0) return cond;
    auto it = notCache_.find(e.source);
    if (it != notCache_.end()) return it->second;
    Operation &n = emit(Opcode::Not, {cond},
                        PredicatedType::pred(ScalarType::i1()), rec);
    notCache_[e.source] = n.results[0].value;
    if (isStatic(cond)) markStatic(n.results[0].value, true);
    return n.results[0].value;
  }

  std::vector<const ClassifiedEdge *> inEdges(BlockId target) {
    std::vector<const ClassifiedEdge *> fwd, back;
    for (const auto &e : edges_) {
      if (e.target != target) continue;
      (e.cls.backward ? back : fwd).push_back(&e);
    }
    auto byRpo = [&](const ClassifiedEdge *a, const ClassifiedEdge *b) {
      if (rpoIndex_[a->source] != rpoIndex_[b->source])
        return rpoIndex_[a->source] < rpoIndex_[b->source];
      return a->succIndex < b->succIndex;
    };
    std::sort(fwd.begin(), fwd.end(), byRpo);
    std::sort(back.begin(), back.end(), byRpo);
    fwd.insert(fwd.end(), back.begin(), back.end());
    return fwd;
  }

  const std::vector<ValueId> &edgeArgs(const ClassifiedEdge &e) {
    const Operation *term = src_.block(e.source)->terminator();
    return term->successors[e.succIndex].args;
  }

  void processBlock(const Block &b) {
    bool isEntry = b.id == rpo_.front();
    if (!isEntry) lowerBlockArgs(b);

    // Copy the body, remapping operands; branches disappear (their edges
    // were handled at the targets), returns and everything else stay.
    for (const auto &op : b.ops) {
      if (isBranch(op.opcode)) continue;
      Operation copy = op;
      copy.id = out_.freshOp();
      for (auto &v : copy.operands) v = remap(v);
      copy.successors.clear();
      for (auto &r : copy.results) {
        ValueId nv = out_.freshValue();
        remap_[r.value] = nv;
        r.value = nv;
      }
      flat().ops.push_back(std::move(copy));
      const Operation &placed = flat().ops.back();
      if (opaqueStatic(placed))
        for (const auto &r : placed.results) markStatic(r.value, true);
    }

    // Close any backward edges sourced here: their headers already emitted
    // the reserves; move the loop-back values into them now.
    for (auto &pend : pending_) {
      if (pend.edge->source != b.id || pend.done) continue;
      RewriteRecord &rec = records_[edgeKey(*pend.edge)];
      ValueId w = remap(edgeArgs(*pend.edge)[pend.argIndex]);
      if (pend.edge->cls.condBr) {
        Operation &g = emit(Opcode::GrantPredicate,
                            {w, condToken(*pend.edge, &rec)}, typeOf(w),
                            &rec);
        w = g.results[0].value;
      }
      Operation &mov = emit(Opcode::CtrlMov, {w, pend.reserve},
                            PredicatedType::pred(ScalarType::i1()), &rec);
      (void)mov;
      pend.done = true;
    }
  }

  void lowerBlockArgs(const Block &b) {
    auto edges = inEdges(b.id);
    if (edges.empty())
      throw IrError("preprocessing incomplete: unreachable block bb" +
                    std::to_string(b.id));
    bool isHeader = false;
    for (const auto *e : edges) isHeader |= e->cls.backward;

    for (size_t t = 0; t < b.args.size(); ++t) {
      std::vector<ValueId> ports;
      for (const auto *e : edges) {
        RewriteRecord &rec = records_[edgeKey(*e)];
        if (e->cls.backward) {
          Operation &rsv =
              emit(Opcode::Reserve, {}, b.args[t].type, &rec);
          pending_.push_back({e, int(t), rsv.results[0].value, false});
          ports.push_back(rsv.results[0].value);
          continue;
        }
        ValueId w = remap(edgeArgs(*e)[t]);
        if (e->cls.condBr) {
          Operation &g = emit(Opcode::GrantPredicate,
                              {w, condToken(*e, &rec)}, typeOf(w), &rec);
          if (isStatic(w) && isStatic(g.operands[1]))
            markStatic(g.results[0].value, true);
          w = g.results[0].value;
        }
        if (isHeader && isStatic(w)) {
          // A compile-time initial value must enter the loop merge exactly
          // once per invocation.
          Operation &g = emit(Opcode::GrantOnce, {w}, typeOf(w), &rec);
          w = g.results[0].value;
        }
        ports.push_back(w);
      }
      if (ports.size() == 1) {
        remap_[b.args[t].value] = ports[0];
      } else {
        Operation &phi = emit(Opcode::Phi, ports, b.args[t].type, nullptr);
        for (const auto *e : edges)
          records_[edgeKey(*e)].insertedOps.push_back(phi.id);
        remap_[b.args[t].value] = phi.results[0].value;
      }
    }
  }

  struct PendingBackEdge {
    const ClassifiedEdge *edge;
    int argIndex;
    ValueId reserve;
    bool done;
  };

  const Function &src_;
  Function out_;
  std::vector<ClassifiedEdge> edges_;
  std::vector<BlockId> rpo_;
  std::unordered_map<BlockId, int> rpoIndex_;
  std::unordered_map<ValueId, ValueId> remap_;
  std::unordered_set<ValueId> statics_;
  std::unordered_map<BlockId, ValueId> notCache_;
  std::vector<PendingBackEdge> pending_;
  std::map<EdgeKey, RewriteRecord> records_;
};

}  // namespace detail

inline FlattenResult flattenToDataflow(const Function &fn) {
  return detail::Flattener(fn).run();
}

}  // namespace neura
