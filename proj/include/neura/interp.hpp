// Two executable semantics. The CDFG interpreter runs blocks sequentially
// and is the oracle for every lowering pass. The dataflow interpreter drives
// the flattened form with tokens: an op fires when every input port holds a
// token, computes on payloads and ANDs predicates, and side effects happen
// only under all-true predicates. grant_once fires at most once per
// invocation; phi selects the unique true-predicate input.
#pragma once

#include <bit>
#include <cstring>
#include <deque>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

// ---------------------------------------------------------------------------
// Runtime values and arithmetic
// ---------------------------------------------------------------------------

struct RtValue {
  ScalarType type;
  int64_t i = 0;
  double f = 0.0;

  static RtValue ofInt(ScalarType t, int64_t v);
  static RtValue ofFloat(ScalarType t, double v);

  bool isFloat() const { return type.isFloat(); }
  bool asBool() const { return isFloat() ? f != 0.0 : i != 0; }

  // Canonical bit pattern, used for bit-exact comparisons.
  int64_t bits() const {
    if (!isFloat()) return i;
    if (type.width == 32) {
      float g = static_cast<float>(f);
      uint32_t u;
      std::memcpy(&u, &g, 4);
      return int64_t(u);
    }
    int64_t u;
    std::memcpy(&u, &f, 8);
    return u;
  }

  std::string str() const {
    if (isFloat()) {
      std::ostringstream os;
      os << f;
      return os.str();
    }
    return std::to_string(i);
  }
};

inline int64_t wrapInt(int64_t v, int width) {
  if (width >= 64) return v;
  uint64_t mask = (uint64_t(1) << width) - 1;
  uint64_t u = uint64_t(v) & mask;
  if (u & (uint64_t(1) << (width - 1))) u |= ~mask;  // sign extend
  return int64_t(u);
}

inline RtValue RtValue::ofInt(ScalarType t, int64_t v) {
  RtValue r;
  r.type = t;
  r.i = wrapInt(v, t.width);
  return r;
}

inline RtValue RtValue::ofFloat(ScalarType t, double v) {
  RtValue r;
  r.type = t;
  r.f = t.width == 32 ? double(float(v)) : v;
  return r;
}

struct PredicatedValue {
  RtValue value;
  bool pred = true;
};

namespace detail {

inline bool evalCmp(const std::string &kind, bool lt, bool eq, OpId op) {
  if (kind == "eq") return eq;
  if (kind == "ne") return !eq;
  if (kind == "slt" || kind == "lt") return lt;
  if (kind == "sle" || kind == "le") return lt || eq;
  if (kind == "sgt" || kind == "gt") return !lt && !eq;
  if (kind == "sge" || kind == "ge") return !lt;
  throw IrError("unknown cmp kind '" + kind + "' on op " +
                std::to_string(op));
}

inline RtValue evalCast(ScalarType to, const RtValue &a) {
  if (to.isFloat())
    return RtValue::ofFloat(to, a.isFloat() ? a.f : double(a.i));
  return RtValue::ofInt(to, a.isFloat() ? int64_t(a.f) : a.i);
}

// Payload computation for predicated computational ops. Only called when
// every operand predicate is true; invalid firings never reach it.
inline RtValue evalCompute(const Operation &op, ScalarType rt,
                           const std::vector<RtValue> &in) {
  auto iv = [&](size_t k) { return in[k].isFloat() ? int64_t(in[k].f)
                                                   : in[k].i; };
  auto fv = [&](size_t k) { return in[k].isFloat() ? in[k].f
                                                   : double(in[k].i); };
  switch (op.opcode) {
  case Opcode::Add: return RtValue::ofInt(rt, iv(0) + iv(1));
  case Opcode::Sub: return RtValue::ofInt(rt, iv(0) - iv(1));
  case Opcode::Mul: return RtValue::ofInt(rt, iv(0) * iv(1));
  case Opcode::Div:
    if (iv(1) == 0) throw IrError("division by zero");
    return RtValue::ofInt(rt, iv(0) / iv(1));
  case Opcode::Rem:
    if (iv(1) == 0) throw IrError("division by zero");
    return RtValue::ofInt(rt, iv(0) % iv(1));
  case Opcode::And: return RtValue::ofInt(rt, iv(0) & iv(1));
  case Opcode::Or: return RtValue::ofInt(rt, iv(0) | iv(1));
  case Opcode::Xor: return RtValue::ofInt(rt, iv(0) ^ iv(1));
  case Opcode::Shl:
    return RtValue::ofInt(rt, iv(0) << (uint64_t(iv(1)) % rt.width));
  case Opcode::AShr:
    return RtValue::ofInt(rt, iv(0) >> (uint64_t(iv(1)) % rt.width));
  case Opcode::Not: return RtValue::ofInt(rt, iv(0) == 0 ? 1 : 0);
  case Opcode::ICmp: {
    int64_t a = iv(0), b = iv(1);
    return RtValue::ofInt(rt, evalCmp(op.attr("cmp")->s, a < b, a == b,
                                      op.id));
  }
  case Opcode::FCmp: {
    double a = fv(0), b = fv(1);
    return RtValue::ofInt(rt, evalCmp(op.attr("cmp")->s, a < b, a == b,
                                      op.id));
  }
  case Opcode::FAdd: return RtValue::ofFloat(rt, fv(0) + fv(1));
  case Opcode::FSub: return RtValue::ofFloat(rt, fv(0) - fv(1));
  case Opcode::FMul: return RtValue::ofFloat(rt, fv(0) * fv(1));
  case Opcode::FDiv: return RtValue::ofFloat(rt, fv(0) / fv(1));
  case Opcode::Cast: return evalCast(rt, in[0]);
  case Opcode::MulAdd:
    if (rt.isFloat()) return RtValue::ofFloat(rt, fv(0) * fv(1) + fv(2));
    return RtValue::ofInt(rt, iv(0) * iv(1) + iv(2));
  default:
    throw IrError(std::string("not a computational op: ") +
                  opcodeName(op.opcode));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Memory
// ---------------------------------------------------------------------------

// Flat array of 64-bit cells. Typed accesses reinterpret a cell: integers
// are stored wrapped to their width, f64 as its bit pattern, f32 as its bit
// pattern in the low 32 bits.
struct Memory {
  std::vector<int64_t> cells;

  explicit Memory(size_t size = 0) : cells(size, 0) {}

  void check(int64_t addr) const {
    if (addr < 0 || size_t(addr) >= cells.size())
      throw IrError("memory access out of bounds: address " +
                    std::to_string(addr) + " (size " +
                    std::to_string(cells.size()) + ")");
  }

  RtValue load(int64_t addr, ScalarType t) const {
    check(addr);
    int64_t raw = cells[addr];
    if (t.isFloat()) {
      if (t.width == 32) {
        uint32_t u = uint32_t(uint64_t(raw));
        float g;
        std::memcpy(&g, &u, 4);
        return RtValue::ofFloat(t, double(g));
      }
      double d;
      std::memcpy(&d, &raw, 8);
      return RtValue::ofFloat(t, d);
    }
    return RtValue::ofInt(t, raw);
  }

  void store(int64_t addr, const RtValue &v) {
    check(addr);
    cells[addr] = v.bits();
  }

  bool operator==(const Memory &o) const { return cells == o.cells; }
};

// Text image: one `addr: value` line per initialized cell; values are raw
// decimal cell bits or typed floats written as f32:<lit> / f64:<lit>.
struct MemoryImage {
  size_t size = 1024;
  std::vector<std::pair<int64_t, int64_t>> init;

  Memory build() const {
    Memory m(size);
    for (auto [a, v] : init) {
      m.check(a);
      m.cells[a] = v;
    }
    return m;
  }

  void setInt(int64_t addr, int64_t v) { init.push_back({addr, v}); }
  void setF32(int64_t addr, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    init.push_back({addr, int64_t(u)});
  }
  void setF64(int64_t addr, double v) {
    int64_t u;
    std::memcpy(&u, &v, 8);
    init.push_back({addr, u});
  }

  static MemoryImage parse(const std::string &text, size_t size = 1024) {
    MemoryImage img;
    img.size = size;
    std::istringstream is(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(is, line)) {
      ++lineNo;
      auto comment = line.find("//");
      if (comment != std::string::npos) line = line.substr(0, comment);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream ls(line);
      int64_t addr;
      char colon;
      std::string value;
      if (!(ls >> addr >> colon >> value) || colon != ':')
        throw IrError("memory image line " + std::to_string(lineNo) +
                      ": expected 'addr: value'");
      if (value.rfind("f32:", 0) == 0) {
        img.setF32(addr, std::strtof(value.c_str() + 4, nullptr));
      } else if (value.rfind("f64:", 0) == 0) {
        img.setF64(addr, std::strtod(value.c_str() + 4, nullptr));
      } else {
        img.setInt(addr, std::strtoll(value.c_str(), nullptr, 10));
      }
    }
    return img;
  }
};

// ---------------------------------------------------------------------------
// Shared firing context (grant_once / loop_control state, memory)
// ---------------------------------------------------------------------------

struct ExecContext {
  Memory mem;
  std::unordered_set<OpId> grantConsumed;
  struct LoopState {
    int64_t cur = 0;
    bool exhausted = false;
    bool started = false;
  };
  std::unordered_map<OpId, LoopState> loops;
  const std::vector<RtValue> *args = nullptr;
};

struct FiringOutcome {
  std::vector<PredicatedValue> outs;
  bool returned = false;
  std::optional<RtValue> retVal;
};

namespace detail {

inline RtValue attrToValue(const Attribute &a) {
  ScalarType t = a.type ? *a.type : ScalarType::i64();
  if (a.isFloat()) return RtValue::ofFloat(t, a.f);
  if (a.isInt()) return t.isFloat() ? RtValue::ofFloat(t, double(a.i))
                                    : RtValue::ofInt(t, a.i);
  throw IrError("string attribute used as operand immediate");
}

inline RtValue constantValue(const Operation &op,
                             const std::vector<RtValue> &args) {
  ScalarType rt = op.results[0].type.payload;
  if (const Attribute *a = op.attr("arg")) {
    if (a->i < 0 || size_t(a->i) >= args.size())
      throw IrError("missing runtime argument " + std::to_string(a->i));
    const RtValue &v = args[size_t(a->i)];
    return rt.isFloat() ? RtValue::ofFloat(rt, v.isFloat() ? v.f
                                                           : double(v.i))
                        : RtValue::ofInt(rt, v.isFloat() ? int64_t(v.f)
                                                         : v.i);
  }
  const Attribute *a = op.attr("value");
  if (!a) throw IrError("constant without value or arg attribute");
  RtValue v = attrToValue(*a);
  return rt.isFloat() ? RtValue::ofFloat(rt, v.isFloat() ? v.f : double(v.i))
                      : RtValue::ofInt(rt, v.isFloat() ? int64_t(v.f) : v.i);
}

inline int64_t addressOf(const RtValue &v) {
  if (v.isFloat()) throw IrError("float used as memory address");
  return v.i;
}

// One firing of a dataflow op under Fig.-style predicate rules. `ins` holds
// one predicated value per logical operand. Phi selection happens in the
// caller; everything else (PredComp, Load, Store, GrantOnce, GrantPred,
// loop_control streaming) is here so the interpreter and the cycle-accurate
// simulator share one semantics.
inline FiringOutcome fireOp(const Operation &op,
                            const std::vector<PredicatedValue> &ins,
                            ExecContext &ctx) {
  FiringOutcome out;
  auto allTrue = [&]() {
    for (const auto &v : ins)
      if (!v.pred) return false;
    return true;
  };
  auto payloads = [&]() {
    std::vector<RtValue> vs;
    vs.reserve(ins.size());
    for (const auto &v : ins) vs.push_back(v.value);
    return vs;
  };
  switch (op.opcode) {
  case Opcode::Constant:
    out.outs.push_back({constantValue(op, *ctx.args), true});
    return out;
  case Opcode::Load: {
    ScalarType rt = op.results[0].type.payload;
    if (!allTrue()) {
      out.outs.push_back({rt.isFloat() ? RtValue::ofFloat(rt, 0.0)
                                       : RtValue::ofInt(rt, 0),
                          false});
      return out;
    }
    out.outs.push_back({ctx.mem.load(addressOf(ins[0].value), rt), true});
    return out;
  }
  case Opcode::LoadIndexed: {
    ScalarType rt = op.results[0].type.payload;
    if (!allTrue()) {
      out.outs.push_back({rt.isFloat() ? RtValue::ofFloat(rt, 0.0)
                                       : RtValue::ofInt(rt, 0),
                          false});
      return out;
    }
    int64_t addr = addressOf(ins[0].value);
    for (size_t k = 1; k < ins.size(); ++k)
      addr += addressOf(ins[k].value);
    out.outs.push_back({ctx.mem.load(addr, rt), true});
    return out;
  }
  case Opcode::Store:
    if (allTrue())
      ctx.mem.store(addressOf(ins[1].value), ins[0].value);
    return out;
  case Opcode::Return:
    if (ins.empty() || ins[0].pred) {
      out.returned = true;
      if (!ins.empty()) out.retVal = ins[0].value;
    }
    return out;
  case Opcode::GrantOnce:
    ctx.grantConsumed.insert(op.id);
    out.outs.push_back({ins[0].value, true});
    return out;
  case Opcode::GrantPredicate:
    out.outs.push_back(
        {ins[0].value, ins[1].value.asBool() && ins[1].pred});
    return out;
  case Opcode::CtrlMov:
    out.outs.push_back(ins[0]);  // forwarded to the reserve's consumers
    return out;
  case Opcode::LoopControl: {
    auto &st = ctx.loops[op.id];
    if (!st.started) {
      st.cur = op.attr("start")->i;
      st.started = true;
    }
    int64_t bound = op.attr("bound")->i;
    const std::string &kind = op.attr("cmp")->s;
    bool valid = evalCmp(kind, st.cur < bound, st.cur == bound, op.id);
    ScalarType it = op.results[0].type.payload;
    out.outs.push_back({RtValue::ofInt(it, st.cur), true});
    out.outs.push_back({RtValue::ofInt(ScalarType::i1(), valid ? 1 : 0),
                        true});
    if (valid)
      st.cur += op.attr("step")->i;
    else
      st.exhausted = true;
    return out;
  }
  default: {
    // Predicated computational ops: payload op, predicate conjunction.
    ScalarType rt = op.results[0].type.payload;
    if (!allTrue()) {
      out.outs.push_back({rt.isFloat() ? RtValue::ofFloat(rt, 0.0)
                                       : RtValue::ofInt(rt, 0),
                          false});
      return out;
    }
    out.outs.push_back({evalCompute(op, rt, payloads()), true});
    return out;
  }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CDFG interpreter (the oracle)
// ---------------------------------------------------------------------------

struct CdfgResult {
  std::optional<RtValue> ret;
  Memory mem{0};
  int64_t steps = 0;
};

inline CdfgResult interpretCdfg(const Function &fn,
                                const std::vector<RtValue> &args,
                                const MemoryImage &memInit,
                                int64_t fuel = 200000) {
  if (fn.form != IrForm::Cdfg)
    throw IrError("interpret-cdfg requires CDFG form");
  auto report = verify(fn);
  if (!report.empty())
    throw IrError("interpret-cdfg: function does not verify:\n" +
                  violationSummary(report));

  CdfgResult res;
  res.mem = memInit.build();
  std::unordered_map<ValueId, RtValue> env;
  for (size_t k = 0; k < fn.params.size() && k < args.size(); ++k)
    env[fn.params[k].value] = args[k];

  auto operandValues = [&](const Operation &op) {
    std::vector<RtValue> vals;
    int logical = op.logicalOperandCount();
    size_t next = 0;
    for (int pos = 0; pos < logical; ++pos) {
      const Attribute *a = op.attr("const" + std::to_string(pos));
      if (a) {
        vals.push_back(detail::attrToValue(*a));
      } else {
        ValueId v = op.operands[next++];
        auto it = env.find(v);
        if (it == env.end())
          throw IrError("value %" + std::to_string(v) +
                        " evaluated before definition");
        vals.push_back(it->second);
      }
    }
    return vals;
  };

  const Block *cur = &fn.entry();
  while (true) {
    const Block *next = nullptr;
    for (const auto &op : cur->ops) {
      if (res.steps++ >= fuel) throw IrError("fuel exhausted");
      switch (op.opcode) {
      case Opcode::Constant:
        env[op.results[0].value] = detail::constantValue(op, args);
        break;
      case Opcode::Load: {
        auto vals = operandValues(op);
        env[op.results[0].value] =
            res.mem.load(detail::addressOf(vals[0]),
                         op.results[0].type.payload);
        break;
      }
      case Opcode::LoadIndexed: {
        auto vals = operandValues(op);
        int64_t addr = detail::addressOf(vals[0]);
        for (size_t k = 1; k < vals.size(); ++k)
          addr += detail::addressOf(vals[k]);
        env[op.results[0].value] =
            res.mem.load(addr, op.results[0].type.payload);
        break;
      }
      case Opcode::Store: {
        auto vals = operandValues(op);
        res.mem.store(detail::addressOf(vals[1]), vals[0]);
        break;
      }
      case Opcode::Return: {
        auto vals = operandValues(op);
        if (!vals.empty()) res.ret = vals[0];
        return res;
      }
      case Opcode::Br: {
        const SuccessorRef &s = op.successors[0];
        const Block *target = fn.block(s.block);
        std::vector<RtValue> incoming;
        for (ValueId v : s.args) incoming.push_back(env.at(v));
        for (size_t i = 0; i < target->args.size(); ++i)
          env[target->args[i].value] = incoming[i];
        next = target;
        break;
      }
      case Opcode::CondBr: {
        auto vals = operandValues(op);
        const SuccessorRef &s = op.successors[vals[0].asBool() ? 0 : 1];
        const Block *target = fn.block(s.block);
        std::vector<RtValue> incoming;
        for (ValueId v : s.args) incoming.push_back(env.at(v));
        for (size_t i = 0; i < target->args.size(); ++i)
          env[target->args[i].value] = incoming[i];
        next = target;
        break;
      }
      case Opcode::GrantOnce:
      case Opcode::GrantPredicate:
      case Opcode::Phi:
      case Opcode::Reserve:
      case Opcode::CtrlMov:
      case Opcode::LoopControl:
        throw IrError(std::string("dataflow-only op in CDFG execution: ") +
                      opcodeName(op.opcode));
      default: {
        auto vals = operandValues(op);
        env[op.results[0].value] =
            detail::evalCompute(op, op.results[0].type.payload, vals);
        break;
      }
      }
      if (next) break;
    }
    if (!next)
      throw IrError("block fell through without terminator");
    cur = next;
  }
}

// ---------------------------------------------------------------------------
// Dataflow (token-driven) interpreter
// ---------------------------------------------------------------------------

struct FireEvent {
  OpId op = -1;
  int64_t step = 0;
};

struct DataflowResult {
  std::optional<RtValue> ret;
  Memory mem{0};
  std::vector<FireEvent> trace;
  int64_t macroSteps = 0;
};

struct DataflowOptions {
  int64_t fuel = 200000;
  int queueDepth = 8;
};

namespace detail {

// The token machine. Values that are compile-time computable (constants and
// pure ops fed only by them) are evaluated once as always-available static
// sources; a phi port fed by a static value receives a single injected
// token instead, since a phi input models one control-path traversal.
class TokenMachine {
public:
  TokenMachine(const Function &fn, const std::vector<RtValue> &args,
               const MemoryImage &memInit, DataflowOptions opts)
      : fn_(fn), opts_(opts), args_(args) {
    if (fn.form != IrForm::Dataflow)
      throw IrError("interpret-dataflow requires dataflow form");
    auto report = verify(fn);
    if (!report.empty())
      throw IrError("interpret-dataflow: function does not verify:\n" +
                    violationSummary(report));
    ctx_.mem = memInit.build();
    ctx_.args = &args_;
    build();
  }

  DataflowResult run() {
    DataflowResult res;
    int64_t fuel = opts_.fuel;
    bool done = false;
    while (!done) {
      bool fired = false;
      for (size_t i = 0; i < ops_.size() && !done; ++i) {
        if (!canFire(i)) continue;
        if (fuel-- <= 0) throw IrError("fuel exhausted");
        fired = true;
        res.trace.push_back({ops_[i]->id, steps_});
        FiringOutcome out = fireAt(i);
        if (out.returned) {
          res.ret = out.retVal;
          done = true;
        }
      }
      ++steps_;
      if (done) break;
      if (!fired)
        throw IrError("dataflow execution stalled without a completed "
                      "return");
    }
    res.mem = ctx_.mem;
    res.macroSteps = steps_;
    return res;
  }

private:
  struct Port {
    enum class Kind { Immediate, Static, Queue } kind = Kind::Queue;
    Attribute imm;             // Immediate
    PredicatedValue staticVal; // Static
    std::deque<PredicatedValue> queue;
  };
  struct OpState {
    const Operation *op = nullptr;
    std::vector<Port> ports;
    bool isStatic = false;
    bool onceFired = false;
    bool zeroQueuePorts = false;
    // consumers[resultIndex] -> list of (opIndex, portIndex)
    std::vector<std::vector<std::pair<size_t, size_t>>> consumers;
  };

  void build() {
    const Block &b = fn_.blocks.front();
    std::unordered_map<ValueId, std::pair<size_t, int>> producer;
    std::unordered_map<ValueId, size_t> reserveToCtrlMov;

    for (size_t i = 0; i < b.ops.size(); ++i) owned_.push_back(&b.ops[i]);
    ops_ = owned_;
    states_.resize(ops_.size());

    for (size_t i = 0; i < ops_.size(); ++i) {
      states_[i].op = ops_[i];
      for (size_t r = 0; r < ops_[i]->results.size(); ++r)
        producer[ops_[i]->results[r].value] = {i, int(r)};
      states_[i].consumers.resize(
          std::max<size_t>(1, ops_[i]->results.size()));
    }
    // ctrl_mov speaks for the reserve it feeds.
    for (size_t i = 0; i < ops_.size(); ++i) {
      if (ops_[i]->opcode != Opcode::CtrlMov) continue;
      if (ops_[i]->operands.size() == 2)
        reserveToCtrlMov[ops_[i]->operands[1]] = i;
    }

    // Parameters resolve to the invocation arguments.
    for (size_t k = 0; k < fn_.params.size(); ++k) {
      if (k < args_.size())
        statics_[fn_.params[k].value] = {args_[k], true};
    }

    // Static evaluation in textual order.
    for (size_t i = 0; i < ops_.size(); ++i) {
      const Operation &op = *ops_[i];
      if (op.opcode == Opcode::Constant) {
        states_[i].isStatic = true;
        statics_[op.results[0].value] = {constantValue(op, args_), true};
        continue;
      }
      if (!info(op.opcode).staticEvaluable) continue;
      bool allStatic = true;
      for (ValueId v : op.operands)
        if (!statics_.count(v)) allStatic = false;
      if (!allStatic) continue;
      std::vector<PredicatedValue> ins = gatherLogical(op, [&](ValueId v) {
        return statics_.at(v);
      });
      FiringOutcome out = fireOp(op, ins, ctx_);
      states_[i].isStatic = true;
      for (size_t r = 0; r < op.results.size(); ++r)
        statics_[op.results[r].value] = out.outs[r];
    }

    // Ports and edges.
    for (size_t i = 0; i < ops_.size(); ++i) {
      const Operation &op = *ops_[i];
      if (states_[i].isStatic) continue;
      int logical = op.logicalOperandCount();
      size_t next = 0;
      int queuePorts = 0;
      for (int pos = 0; pos < logical; ++pos) {
        Port p;
        const Attribute *a = op.attr("const" + std::to_string(pos));
        if (a) {
          p.kind = Port::Kind::Immediate;
          p.imm = *a;
        } else {
          ValueId v = op.operands[next++];
          if (op.opcode == Opcode::CtrlMov && pos == 1) {
            // The placeholder operand names the channel, it is not data.
            p.kind = Port::Kind::Immediate;
            p.imm = Attribute::intVal(0, ScalarType::i64());
            states_[i].ports.push_back(std::move(p));
            continue;
          }
          if (statics_.count(v)) {
            if (op.opcode == Opcode::Phi) {
              // One control-path traversal: inject a single token.
              p.kind = Port::Kind::Queue;
              PredicatedValue tok = statics_.at(v);
              if (tok.pred) p.queue.push_back(tok);
              ++queuePorts;
            } else {
              p.kind = Port::Kind::Static;
              p.staticVal = statics_.at(v);
            }
          } else {
            p.kind = Port::Kind::Queue;
            ++queuePorts;
            size_t prodIdx;
            int prodRes;
            auto rc = reserveToCtrlMov.find(v);
            if (rc != reserveToCtrlMov.end()) {
              // Tokens reach a reserve's consumers through its ctrl_mov.
              prodIdx = rc->second;
              prodRes = 0;
            } else {
              auto pi = producer.find(v);
              if (pi == producer.end())
                throw IrError("dataflow operand %" + std::to_string(v) +
                              " has no producer");
              prodIdx = pi->second.first;
              prodRes = pi->second.second;
            }
            states_[prodIdx].consumers[prodRes].push_back(
                {i, states_[i].ports.size()});
          }
        }
        states_[i].ports.push_back(std::move(p));
      }
      states_[i].zeroQueuePorts = queuePorts == 0;
    }
  }

  template <typename Resolver>
  std::vector<PredicatedValue> gatherLogical(const Operation &op,
                                             Resolver resolve) {
    std::vector<PredicatedValue> ins;
    int logical = op.logicalOperandCount();
    size_t next = 0;
    for (int pos = 0; pos < logical; ++pos) {
      const Attribute *a = op.attr("const" + std::to_string(pos));
      if (a)
        ins.push_back({attrToValue(*a), true});
      else
        ins.push_back(resolve(op.operands[next++]));
    }
    return ins;
  }

  bool canFire(size_t i) {
    OpState &st = states_[i];
    const Operation &op = *st.op;
    if (st.isStatic) return false;
    if (op.opcode == Opcode::Reserve)
      return false;  // pure channel; its ctrl_mov speaks for it
    switch (op.opcode) {
    case Opcode::LoopControl:
      return !ctx_.loops[op.id].exhausted && outRoom(i);
    case Opcode::GrantOnce:
      if (ctx_.grantConsumed.count(op.id)) {
        // Late tokens are drained silently; the grant can never refire.
        for (auto &p : st.ports)
          if (p.kind == Port::Kind::Queue && !p.queue.empty())
            p.queue.clear();
        return false;
      }
      break;
    case Opcode::Phi: {
      for (const auto &p : st.ports)
        if (p.kind == Port::Kind::Queue && !p.queue.empty()) return true;
      return false;
    }
    default: break;
    }
    if (st.zeroQueuePorts) return !st.onceFired;
    for (const auto &p : st.ports)
      if (p.kind == Port::Kind::Queue && p.queue.empty()) return false;
    return true;
  }

  bool outRoom(size_t i) {
    for (const auto &lst : states_[i].consumers)
      for (auto [ci, pi] : lst)
        if (states_[ci].ports[pi].queue.size() >=
            size_t(opts_.queueDepth))
          return false;
    return true;
  }

  FiringOutcome fireAt(size_t i) {
    OpState &st = states_[i];
    const Operation &op = *st.op;
    st.onceFired = true;

    FiringOutcome out;
    if (op.opcode == Opcode::Phi) {
      int candidate = -1;
      for (size_t p = 0; p < st.ports.size(); ++p) {
        if (st.ports[p].kind != Port::Kind::Queue ||
            st.ports[p].queue.empty())
          continue;
        if (candidate >= 0)
          throw IrError("phi uniqueness violated at op " +
                        std::to_string(op.id));
        candidate = int(p);
      }
      PredicatedValue tok = st.ports[candidate].queue.front();
      st.ports[candidate].queue.pop_front();
      out.outs.push_back({tok.value, true});
    } else {
      std::vector<PredicatedValue> ins;
      for (auto &p : st.ports) {
        switch (p.kind) {
        case Port::Kind::Immediate:
          ins.push_back({attrToValue(p.imm), true});
          break;
        case Port::Kind::Static: ins.push_back(p.staticVal); break;
        case Port::Kind::Queue:
          ins.push_back(p.queue.front());
          p.queue.pop_front();
          break;
        }
      }
      out = fireOp(op, ins, ctx_);
    }

    for (size_t r = 0; r < out.outs.size(); ++r)
      for (auto [ci, pi] : st.consumers[r]) push(ci, pi, out.outs[r]);
    return out;
  }

  void push(size_t consumer, size_t port, const PredicatedValue &tok) {
    OpState &st = states_[consumer];
    // A false token can never be selected by phi; drop it on arrival so
    // long false waves cannot overflow the merge queues.
    if (st.op->opcode == Opcode::Phi && !tok.pred) return;
    auto &q = st.ports[port].queue;
    if (q.size() >= size_t(opts_.queueDepth))
      throw IrError("token queue overflow at op " +
                    std::to_string(st.op->id) + " port " +
                    std::to_string(port));
    q.push_back(tok);
  }

  const Function &fn_;
  DataflowOptions opts_;
  std::vector<RtValue> args_;
  std::vector<const Operation *> owned_;
  std::vector<const Operation *> ops_;
  std::vector<OpState> states_;
  std::unordered_map<ValueId, PredicatedValue> statics_;
  ExecContext ctx_;
  int64_t steps_ = 0;
};

}  // namespace detail

inline DataflowResult interpretDataflow(const Function &fn,
                                        const std::vector<RtValue> &args,
                                        const MemoryImage &memInit,
                                        DataflowOptions opts = {}) {
  detail::TokenMachine machine(fn, args, memInit, opts);
  return machine.run();
}

}  // namespace neura
