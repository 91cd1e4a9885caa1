// Core IR data model shared by the CDFG and dataflow forms: scalar and
// predicated types, operations in SSA, blocks, functions and modules,
// plus the opcode trait table, the verifier and def-use utilities.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace neura {

using ValueId = int32_t;
using OpId = int32_t;
using BlockId = int32_t;

inline constexpr ValueId kInvalidValue = -1;

// ---------------------------------------------------------------------------
// Source locations and errors
// ---------------------------------------------------------------------------

struct SourceSpan {
  std::string file;
  int line = 0;  // 1-based; 0 means synthesized
  int col = 0;

  std::string str() const {
    std::ostringstream os;
    os << (file.empty() ? "<memory>" : file) << ":" << line << ":" << col;
    return os.str();
  }
};

// Thrown for unrecoverable user-facing failures (parse errors, bad pass
// preconditions, malformed arch specs). Verifier violations are data, not
// exceptions.
class IrError : public std::runtime_error {
public:
  explicit IrError(const std::string &msg) : std::runtime_error(msg) {}
  IrError(const SourceSpan &span, const std::string &msg)
      : std::runtime_error(span.str() + ": " + msg), span_(span) {}

  const std::optional<SourceSpan> &span() const { return span_; }

private:
  std::optional<SourceSpan> span_;
};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

enum class TypeKind : uint8_t { Int, Float, Index };

struct ScalarType {
  TypeKind kind = TypeKind::Int;
  int width = 64;  // bits; unresolved (0) for index

  static ScalarType i1() { return {TypeKind::Int, 1}; }
  static ScalarType i32() { return {TypeKind::Int, 32}; }
  static ScalarType i64() { return {TypeKind::Int, 64}; }
  static ScalarType f32() { return {TypeKind::Float, 32}; }
  static ScalarType f64() { return {TypeKind::Float, 64}; }
  static ScalarType index() { return {TypeKind::Index, 0}; }

  bool isInt() const { return kind == TypeKind::Int; }
  bool isFloat() const { return kind == TypeKind::Float; }
  bool isIndex() const { return kind == TypeKind::Index; }
  bool isBool() const { return isInt() && width == 1; }

  bool operator==(const ScalarType &o) const {
    return kind == o.kind && width == o.width;
  }
  bool operator!=(const ScalarType &o) const { return !(*this == o); }

  std::string str() const {
    switch (kind) {
    case TypeKind::Int: return "i" + std::to_string(width);
    case TypeKind::Float: return "f" + std::to_string(width);
    case TypeKind::Index: return "index";
    }
    return "?";
  }
};

// The value type of both IR forms. `predicated` is false for plain CDFG
// values and true once the kernel has been lifted into the predicated type
// system; the predicate component is always a single boolean bit.
struct PredicatedType {
  ScalarType payload;
  bool predicated = false;

  static PredicatedType plain(ScalarType t) { return {t, false}; }
  static PredicatedType pred(ScalarType t) { return {t, true}; }

  bool operator==(const PredicatedType &o) const {
    return payload == o.payload && predicated == o.predicated;
  }
  bool operator!=(const PredicatedType &o) const { return !(*this == o); }

  std::string str() const {
    return predicated ? "!pred<" + payload.str() + ">" : payload.str();
  }
};

// ---------------------------------------------------------------------------
// Attributes
// ---------------------------------------------------------------------------

// Attribute literals hold immediates (typed ints/floats) and string tags
// such as comparison kinds. After constant folding these are the only
// carriers of constant operands; operand lists never contain literals.
struct Attribute {
  enum class Kind : uint8_t { Int, Float, Str } kind = Kind::Int;
  int64_t i = 0;
  double f = 0.0;
  std::string s;
  std::optional<ScalarType> type;  // present for typed immediates

  static Attribute intVal(int64_t v, std::optional<ScalarType> t = {}) {
    Attribute a;
    a.kind = Kind::Int;
    a.i = v;
    a.type = t;
    return a;
  }
  static Attribute floatVal(double v, std::optional<ScalarType> t = {}) {
    Attribute a;
    a.kind = Kind::Float;
    a.f = v;
    a.type = t;
    return a;
  }
  static Attribute strVal(std::string v) {
    Attribute a;
    a.kind = Kind::Str;
    a.s = std::move(v);
    return a;
  }

  bool isInt() const { return kind == Kind::Int; }
  bool isFloat() const { return kind == Kind::Float; }
  bool isStr() const { return kind == Kind::Str; }

  bool operator==(const Attribute &o) const {
    if (kind != o.kind || type != o.type) return false;
    switch (kind) {
    case Kind::Int: return i == o.i;
    case Kind::Float: return f == o.f;
    case Kind::Str: return s == o.s;
    }
    return false;
  }
};

using AttributeMap = std::map<std::string, Attribute>;

// ---------------------------------------------------------------------------
// Opcodes
// ---------------------------------------------------------------------------

enum class Opcode : uint8_t {
  // CDFG / shared
  Constant,
  Add, Sub, Mul, Div, Rem,
  And, Or, Xor, Shl, AShr,
  Not,
  ICmp,
  FAdd, FSub, FMul, FDiv, FCmp,
  Cast,
  Load, Store,
  Return,
  Br, CondBr,
  // Predicate management
  GrantOnce, GrantPredicate, Phi,
  // Non-materialized structural
  Reserve, CtrlMov,
  // Hardware-specific fused
  LoadIndexed, MulAdd, LoopControl,
};

struct OpcodeInfo {
  Opcode opcode;
  const char *name;
  int minOperands;   // folded immediates count toward arity
  int maxOperands;   // -1 = unbounded
  int numResults;
  bool cdfgTerminator;  // may (and must) end a block in CDFG form
  bool hasSideEffect;   // touches memory / termination / a reserve channel
  bool staticEvaluable; // pure value computation, legal to evaluate once
};

inline const std::vector<OpcodeInfo> &opcodeTable() {
  static const std::vector<OpcodeInfo> table = {
      {Opcode::Constant, "constant", 0, 0, 1, false, false, true},
      {Opcode::Add, "add", 2, 2, 1, false, false, true},
      {Opcode::Sub, "sub", 2, 2, 1, false, false, true},
      {Opcode::Mul, "mul", 2, 2, 1, false, false, true},
      {Opcode::Div, "div", 2, 2, 1, false, false, true},
      {Opcode::Rem, "rem", 2, 2, 1, false, false, true},
      {Opcode::And, "and", 2, 2, 1, false, false, true},
      {Opcode::Or, "or", 2, 2, 1, false, false, true},
      {Opcode::Xor, "xor", 2, 2, 1, false, false, true},
      {Opcode::Shl, "shl", 2, 2, 1, false, false, true},
      {Opcode::AShr, "ashr", 2, 2, 1, false, false, true},
      {Opcode::Not, "not", 1, 1, 1, false, false, true},
      {Opcode::ICmp, "icmp", 2, 2, 1, false, false, true},
      {Opcode::FAdd, "fadd", 2, 2, 1, false, false, true},
      {Opcode::FSub, "fsub", 2, 2, 1, false, false, true},
      {Opcode::FMul, "fmul", 2, 2, 1, false, false, true},
      {Opcode::FDiv, "fdiv", 2, 2, 1, false, false, true},
      {Opcode::FCmp, "fcmp", 2, 2, 1, false, false, true},
      {Opcode::Cast, "cast", 1, 1, 1, false, false, true},
      {Opcode::Load, "load", 1, 1, 1, false, false, false},
      {Opcode::Store, "store", 2, 2, 0, false, true, false},
      {Opcode::Return, "return", 0, 1, 0, true, true, false},
      {Opcode::Br, "br", 0, 0, 0, true, false, false},
      {Opcode::CondBr, "cond_br", 1, 1, 0, true, false, false},
      {Opcode::GrantOnce, "grant_once", 1, 1, 1, false, false, false},
      {Opcode::GrantPredicate, "grant_predicate", 2, 2, 1, false, false, true},
      {Opcode::Phi, "phi", 2, -1, 1, false, false, false},
      {Opcode::Reserve, "reserve", 0, 0, 1, false, false, false},
      {Opcode::CtrlMov, "ctrl_mov", 2, 2, 0, false, true, false},
      {Opcode::LoadIndexed, "load_indexed", 2, -1, 1, false, false, false},
      {Opcode::MulAdd, "muladd", 3, 3, 1, false, false, true},
      {Opcode::LoopControl, "loop_control", 0, 0, 2, false, false, false},
  };
  return table;
}

inline const OpcodeInfo &info(Opcode op) {
  return opcodeTable()[static_cast<size_t>(op)];
}

inline const char *opcodeName(Opcode op) { return info(op).name; }

inline std::optional<Opcode> opcodeByName(const std::string &name) {
  for (const auto &e : opcodeTable())
    if (name == e.name) return e.opcode;
  return std::nullopt;
}

// Reserve and ctrl_mov structure the graph without occupying hardware.
inline bool isMaterialized(Opcode op) {
  return op != Opcode::Reserve && op != Opcode::CtrlMov;
}

inline bool isBranch(Opcode op) {
  return op == Opcode::Br || op == Opcode::CondBr;
}

// ---------------------------------------------------------------------------
// Operations, blocks, functions
// ---------------------------------------------------------------------------

struct OpResult {
  ValueId value = kInvalidValue;
  PredicatedType type;
};

struct SuccessorRef {
  BlockId block = -1;
  std::vector<ValueId> args;
};

struct Operation {
  OpId id = -1;
  Opcode opcode = Opcode::Constant;
  std::vector<ValueId> operands;
  std::vector<OpResult> results;
  AttributeMap attributes;
  std::vector<SuccessorRef> successors;  // nonempty only for br/cond_br
  SourceSpan span;

  bool hasAttr(const std::string &k) const { return attributes.count(k) != 0; }
  const Attribute *attr(const std::string &k) const {
    auto it = attributes.find(k);
    return it == attributes.end() ? nullptr : &it->second;
  }

  // Number of folded immediate operands (attributes const0, const1, ...).
  int foldedOperandCount() const {
    int n = 0;
    for (const auto &[k, v] : attributes)
      if (k.rfind("const", 0) == 0 && k.size() > 5 &&
          k.find_first_not_of("0123456789", 5) == std::string::npos)
        ++n;
    return n;
  }

  // Total logical arity: SSA operands plus folded immediates.
  int logicalOperandCount() const {
    return static_cast<int>(operands.size()) + foldedOperandCount();
  }
};

struct BlockArg {
  ValueId value = kInvalidValue;
  PredicatedType type;
};

struct Block {
  BlockId id = -1;
  std::vector<BlockArg> args;
  std::vector<Operation> ops;

  const Operation *terminator() const {
    for (const auto &op : ops)
      if (info(op.opcode).cdfgTerminator) return &op;
    return nullptr;
  }
};

enum class IrForm : uint8_t { Cdfg, Dataflow };

struct Param {
  ValueId value = kInvalidValue;
  PredicatedType type;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  std::optional<PredicatedType> returnType;
  std::vector<Block> blocks;
  IrForm form = IrForm::Cdfg;

  ValueId nextValue = 0;
  OpId nextOp = 0;
  BlockId nextBlock = 0;

  ValueId freshValue() { return nextValue++; }
  OpId freshOp() { return nextOp++; }
  BlockId freshBlock() { return nextBlock++; }

  Block *block(BlockId id) {
    for (auto &b : blocks)
      if (b.id == id) return &b;
    return nullptr;
  }
  const Block *block(BlockId id) const {
    for (const auto &b : blocks)
      if (b.id == id) return &b;
    return nullptr;
  }
  Block &entry() { return blocks.front(); }
  const Block &entry() const { return blocks.front(); }
};

struct Module {
  std::vector<Function> functions;

  Function *function(const std::string &name) {
    for (auto &f : functions)
      if (f.name == name) return &f;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Def-use utilities
// ---------------------------------------------------------------------------

// Where a value is defined: function parameter, block argument or op result.
struct DefSite {
  enum class Kind : uint8_t { Param, BlockArg, OpResult } kind = Kind::Param;
  BlockId block = -1;   // defining block (entry for params)
  OpId op = -1;         // valid for op results
  int index = 0;        // param/arg/result position
  PredicatedType type;
};

class FunctionIndex {
public:
  explicit FunctionIndex(const Function &fn) {
    for (size_t i = 0; i < fn.params.size(); ++i)
      defs_[fn.params[i].value] = {DefSite::Kind::Param,
                                   fn.blocks.empty() ? -1 : fn.blocks[0].id,
                                   -1, static_cast<int>(i),
                                   fn.params[i].type};
    for (const auto &b : fn.blocks) {
      for (size_t i = 0; i < b.args.size(); ++i)
        defs_[b.args[i].value] = {DefSite::Kind::BlockArg, b.id, -1,
                                  static_cast<int>(i), b.args[i].type};
      for (const auto &op : b.ops)
        for (size_t i = 0; i < op.results.size(); ++i)
          defs_[op.results[i].value] = {DefSite::Kind::OpResult, b.id, op.id,
                                        static_cast<int>(i),
                                        op.results[i].type};
    }
  }

  const DefSite *def(ValueId v) const {
    auto it = defs_.find(v);
    return it == defs_.end() ? nullptr : &it->second;
  }

  PredicatedType type(ValueId v) const {
    const DefSite *d = def(v);
    if (!d) throw IrError("unknown value id " + std::to_string(v));
    return d->type;
  }

private:
  std::unordered_map<ValueId, DefSite> defs_;
};

// Replaces every use of `oldV` by `newV` in operand lists and successor
// argument lists. When `scope` is set, only uses inside that block are
// rewritten. The definition of `oldV` is left untouched.
inline int replaceAllUses(Function &fn, ValueId oldV, ValueId newV,
                          std::optional<BlockId> scope = {}) {
  FunctionIndex idx(fn);
  const DefSite *od = idx.def(oldV);
  const DefSite *nd = idx.def(newV);
  if (!od || !nd) throw IrError("replaceAllUses: unknown value");
  if (od->type != nd->type)
    throw IrError("replaceAllUses: type mismatch between %" +
                  std::to_string(oldV) + " and %" + std::to_string(newV));
  int replaced = 0;
  for (auto &b : fn.blocks) {
    if (scope && b.id != *scope) continue;
    for (auto &op : b.ops) {
      for (auto &v : op.operands)
        if (v == oldV) { v = newV; ++replaced; }
      for (auto &succ : op.successors)
        for (auto &v : succ.args)
          if (v == oldV) { v = newV; ++replaced; }
    }
  }
  return replaced;
}

// ---------------------------------------------------------------------------
// CFG utilities: successors, reverse post-order, dominators
// ---------------------------------------------------------------------------

inline std::vector<BlockId> blockSuccessors(const Block &b) {
  std::vector<BlockId> out;
  for (const auto &op : b.ops)
    for (const auto &s : op.successors) out.push_back(s.block);
  return out;
}

// Reverse post-order over blocks reachable from the entry.
inline std::vector<BlockId> reversePostOrder(const Function &fn) {
  std::unordered_set<BlockId> visited;
  std::vector<BlockId> post;
  // Iterative DFS with an explicit done-flag per frame.
  std::vector<std::pair<BlockId, size_t>> stack;
  if (fn.blocks.empty()) return post;
  stack.push_back({fn.blocks[0].id, 0});
  visited.insert(fn.blocks[0].id);
  std::unordered_map<BlockId, std::vector<BlockId>> succs;
  for (const auto &b : fn.blocks) succs[b.id] = blockSuccessors(b);
  while (!stack.empty()) {
    auto &[id, next] = stack.back();
    const auto &ss = succs[id];
    if (next < ss.size()) {
      BlockId s = ss[next++];
      if (!visited.count(s)) {
        visited.insert(s);
        stack.push_back({s, 0});
      }
    } else {
      post.push_back(id);
      stack.pop_back();
    }
  }
  return {post.rbegin(), post.rend()};
}

// Immediate-dominator map over reachable blocks (iterative fixed point).
// The entry block's idom is itself.
inline std::unordered_map<BlockId, BlockId> computeDominators(
    const Function &fn) {
  std::vector<BlockId> rpo = reversePostOrder(fn);
  std::unordered_map<BlockId, int> rpoIndex;
  for (size_t i = 0; i < rpo.size(); ++i) rpoIndex[rpo[i]] = int(i);
  std::unordered_map<BlockId, std::vector<BlockId>> preds;
  for (const auto &b : fn.blocks)
    for (BlockId s : blockSuccessors(b))
      if (rpoIndex.count(b.id) && rpoIndex.count(s))
        preds[s].push_back(b.id);

  std::unordered_map<BlockId, BlockId> idom;
  if (rpo.empty()) return idom;
  idom[rpo[0]] = rpo[0];
  auto intersect = [&](BlockId a, BlockId b) {
    while (a != b) {
      while (rpoIndex[a] > rpoIndex[b]) a = idom[a];
      while (rpoIndex[b] > rpoIndex[a]) b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < rpo.size(); ++i) {
      BlockId b = rpo[i];
      BlockId newIdom = -1;
      for (BlockId p : preds[b]) {
        if (!idom.count(p)) continue;
        newIdom = newIdom == -1 ? p : intersect(p, newIdom);
      }
      if (newIdom != -1 && (!idom.count(b) || idom[b] != newIdom)) {
        idom[b] = newIdom;
        changed = true;
      }
    }
  }
  return idom;
}

inline bool dominates(const std::unordered_map<BlockId, BlockId> &idom,
                      BlockId a, BlockId b) {
  // Walks the idom chain of b up to the entry.
  BlockId cur = b;
  while (true) {
    if (cur == a) return true;
    auto it = idom.find(cur);
    if (it == idom.end() || it->second == cur) return cur == a;
    cur = it->second;
  }
}

// ---------------------------------------------------------------------------
// Verifier
// ---------------------------------------------------------------------------

struct Violation {
  std::string message;
  OpId op = -1;
  ValueId value = kInvalidValue;
};

namespace detail {

inline void verifyOpShape(const Operation &op,
                          std::vector<Violation> &out) {
  const OpcodeInfo &oi = info(op.opcode);
  int logical = op.logicalOperandCount();
  if (logical < oi.minOperands ||
      (oi.maxOperands >= 0 && logical > oi.maxOperands)) {
    out.push_back({std::string("operand count mismatch for ") + oi.name +
                       " (got " + std::to_string(logical) + ")",
                   op.id});
  }
  if (static_cast<int>(op.results.size()) != oi.numResults)
    out.push_back({std::string("result count mismatch for ") + oi.name,
                   op.id});
  if (!op.successors.empty() && !isBranch(op.opcode))
    out.push_back({std::string("successors on non-branch op ") + oi.name,
                   op.id});
  if (op.opcode == Opcode::Br && op.successors.size() != 1)
    out.push_back({"br must have exactly one successor", op.id});
  if (op.opcode == Opcode::CondBr && op.successors.size() != 2)
    out.push_back({"cond_br must have exactly two successors", op.id});
  if (op.opcode == Opcode::ICmp || op.opcode == Opcode::FCmp) {
    const Attribute *cmp = op.attr("cmp");
    if (!cmp || !cmp->isStr())
      out.push_back({"icmp/fcmp requires a string cmp attribute", op.id});
  }
  if (op.opcode == Opcode::Phi && op.foldedOperandCount() != 0)
    out.push_back({"phi operands cannot be folded immediates", op.id});
  // Folded immediates must occupy distinct positions below the arity.
  if (oi.maxOperands >= 0) {
    for (const auto &[k, v] : op.attributes) {
      if (k.rfind("const", 0) != 0 || k.size() <= 5 ||
          k.find_first_not_of("0123456789", 5) != std::string::npos)
        continue;
      int pos = std::stoi(k.substr(5));
      if (pos < 0 || pos >= oi.maxOperands)
        out.push_back({"folded operand position out of range: " + k, op.id});
    }
  }
}

inline void collectDefs(const Function &fn, std::vector<Violation> &out,
                        std::unordered_map<ValueId, BlockId> &defBlock) {
  auto define = [&](ValueId v, BlockId b) {
    if (v == kInvalidValue) return;
    if (defBlock.count(v))
      out.push_back({"duplicate definition %" + std::to_string(v),
                     -1, v});
    else
      defBlock[v] = b;
  };
  BlockId entryId = fn.blocks.empty() ? -1 : fn.blocks[0].id;
  for (const auto &p : fn.params) define(p.value, entryId);
  for (const auto &b : fn.blocks) {
    for (const auto &a : b.args) define(a.value, b.id);
    for (const auto &op : b.ops)
      for (const auto &r : op.results) define(r.value, b.id);
  }
}

}  // namespace detail

// Structural verification. Returns the list of violated invariants for
// fn.form; an empty report means the function is well formed. Running the
// verifier never mutates the function.
inline std::vector<Violation> verify(const Function &fn) {
  std::vector<Violation> out;
  if (fn.blocks.empty()) {
    out.push_back({"function has no blocks"});
    return out;
  }

  std::unordered_map<ValueId, BlockId> defBlock;
  detail::collectDefs(fn, out, defBlock);

  if (!fn.entry().args.empty())
    out.push_back({"entry block must not declare block arguments"});

  std::unordered_map<BlockId, const Block *> blockById;
  for (const auto &b : fn.blocks) {
    if (blockById.count(b.id))
      out.push_back({"duplicate block id bb" + std::to_string(b.id)});
    blockById[b.id] = &b;
  }

  for (const auto &b : fn.blocks) {
    for (const auto &op : b.ops) {
      detail::verifyOpShape(op, out);
      for (ValueId v : op.operands)
        if (!defBlock.count(v))
          out.push_back({"use of undefined value %" + std::to_string(v),
                         op.id, v});
      for (const auto &succ : op.successors) {
        auto it = blockById.find(succ.block);
        if (it == blockById.end()) {
          out.push_back({"branch to unknown block bb" +
                             std::to_string(succ.block),
                         op.id});
          continue;
        }
        if (succ.args.size() != it->second->args.size())
          out.push_back({"successor argument count mismatch for bb" +
                             std::to_string(succ.block),
                         op.id});
        for (size_t i = 0;
             i < succ.args.size() && i < it->second->args.size(); ++i) {
          if (!defBlock.count(succ.args[i])) {
            out.push_back({"use of undefined value %" +
                               std::to_string(succ.args[i]),
                           op.id, succ.args[i]});
          }
        }
      }
    }
  }

  // Per-form structural rules.
  if (fn.form == IrForm::Cdfg) {
    for (const auto &b : fn.blocks) {
      int terminators = 0;
      for (size_t i = 0; i < b.ops.size(); ++i) {
        if (info(b.ops[i].opcode).cdfgTerminator) {
          ++terminators;
          if (i + 1 != b.ops.size())
            out.push_back({"terminator is not last op in bb" +
                               std::to_string(b.id),
                           b.ops[i].id});
        }
      }
      if (terminators != 1)
        out.push_back({"block bb" + std::to_string(b.id) +
                       " must have exactly one terminator"});
    }
    // Every use must be dominated by its definition. Uses in successor
    // argument lists belong to the branching block.
    auto idom = computeDominators(fn);
    for (const auto &b : fn.blocks) {
      if (!idom.count(b.id)) continue;  // unreachable: no dominance demands
      std::unordered_set<ValueId> definedAbove;
      for (const auto &p : fn.params) definedAbove.insert(p.value);
      for (const auto &a : b.args) definedAbove.insert(a.value);
      auto checkUse = [&](ValueId v, OpId user) {
        auto it = defBlock.find(v);
        if (it == defBlock.end()) return;  // reported already
        if (it->second == b.id) {
          if (!definedAbove.count(v))
            out.push_back({"use of %" + std::to_string(v) +
                               " precedes its definition",
                           user, v});
        } else if (!dominates(idom, it->second, b.id)) {
          out.push_back({"use of %" + std::to_string(v) +
                             " is not dominated by its definition",
                         user, v});
        }
      };
      for (const auto &op : b.ops) {
        for (ValueId v : op.operands) checkUse(v, op.id);
        for (const auto &succ : op.successors)
          for (ValueId v : succ.args) checkUse(v, op.id);
        for (const auto &r : op.results) definedAbove.insert(r.value);
      }
    }
  } else {
    if (fn.blocks.size() != 1)
      out.push_back({"dataflow form requires a single block"});
    std::unordered_map<ValueId, int> reserveFeeds;
    std::unordered_set<ValueId> seen;
    for (const auto &p : fn.params) seen.insert(p.value);
    for (const auto &b : fn.blocks) {
      for (const auto &op : b.ops) {
        if (isBranch(op.opcode))
          out.push_back({"branch op in dataflow form", op.id});
        if (op.opcode == Opcode::Reserve)
          reserveFeeds[op.results[0].value] = 0;
        for (const auto &r : op.results) {
          if (r.type.payload.isIndex())
            out.push_back({"index type in dataflow form", op.id});
          if (!r.type.predicated)
            out.push_back({"unpredicated value %" +
                               std::to_string(r.value) +
                               " in dataflow form",
                           op.id, r.value});
        }
        // Textual def-before-use; reserve is the sanctioned forward decl.
        for (ValueId v : op.operands)
          if (!seen.count(v) && defBlock.count(v))
            out.push_back({"use of %" + std::to_string(v) +
                               " precedes its definition",
                           op.id, v});
        for (const auto &r : op.results) seen.insert(r.value);
      }
      for (const auto &op : b.ops) {
        if (op.opcode != Opcode::CtrlMov) continue;
        if (op.operands.size() == 2) {
          auto it = reserveFeeds.find(op.operands[1]);
          if (it == reserveFeeds.end())
            out.push_back({"ctrl_mov target is not a reserve", op.id});
          else
            ++it->second;
        }
      }
      for (const auto &[v, feeds] : reserveFeeds)
        if (feeds != 1)
          out.push_back({"reserve %" + std::to_string(v) + " has " +
                             std::to_string(feeds) +
                             " ctrl_mov feeders (expected 1)",
                         -1, v});
    }
  }
  return out;
}

inline std::string violationSummary(const std::vector<Violation> &vs) {
  std::ostringstream os;
  for (const auto &v : vs) os << v.message << "\n";
  return os.str();
}

}  // namespace neura
