// Cycle-accurate execution of a MappingResult. Each cycle, every tile may
// fire the op configured for the current slot (t mod II) when its input
// tokens are present; results travel the routed hops with the declared link
// latency and queue at the consumer. Predicate semantics are shared with
// the dataflow interpreter, so a mapped run must match it functionally.
#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "neura/arch.hpp"
#include "neura/interp.hpp"
#include "neura/mapper.hpp"
#include "neura/memdep.hpp"

namespace neura {

struct TraceReport {
  int64_t totalCycles = 0;
  int64_t tileExecutions = 0;
  int mappingIi = 1;
  int achievedIi = 0;
  std::vector<double> perTileUtilization;

  double ipc() const {
    return totalCycles > 0 ? double(tileExecutions) / double(totalCycles)
                           : 0.0;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "total_cycles = " << totalCycles << "\n";
    os << "tile_executions = " << tileExecutions << "\n";
    os << "mapping_ii = " << mappingIi << "\n";
    os << "achieved_ii = " << achievedIi << "\n";
    os << "ipc = " << ipc() << "\n";
    for (size_t t = 0; t < perTileUtilization.size(); ++t)
      os << "tile_utilization " << t << " = " << perTileUtilization[t]
         << "\n";
    return os.str();
  }
};

struct SimOptions {
  int64_t fuel = 200000;      // max cycles
  int queueDepth = 8;
  int prologueCycles = 0;     // modeled host/offload overhead
  int memPortsPerCycle = 0;   // 0 = unlimited
};

struct SimResult {
  std::optional<RtValue> ret;
  Memory mem{0};
  TraceReport report;
};

// Speedup of run `a` over run `b`.
inline double compareRuns(const TraceReport &a, const TraceReport &b) {
  if (a.totalCycles <= 0) throw IrError("compare-runs: empty report");
  return double(b.totalCycles) / double(a.totalCycles);
}

namespace detail {

class MappedMachine {
public:
  MappedMachine(const Function &fn, const ArchSpec &arch,
                const MappingResult &m, const std::vector<RtValue> &args,
                const MemoryImage &memInit, SimOptions opts)
      : fn_(fn), arch_(arch), m_(m), opts_(opts), args_(args) {
    ctx_.mem = memInit.build();
    ctx_.args = &args_;
    build();
  }

  SimResult run() {
    SimResult res;
    std::vector<int64_t> tileFires(arch_.tileCount(), 0);
    int64_t fired = 0;
    bool done = false;
    int64_t t = 0;
    for (; t < opts_.fuel && !done; ++t) {
      deliver(t);
      int memOps = 0;
      for (size_t u = 0; u < unitOrder_.size() && !done; ++u) {
        size_t i = unitOrder_[u];
        Unit &unit = units_[i];
        if (m_.model == ExecModel::SpatioTemporal &&
            unit.slot != int(t % m_.ii))
          continue;
        if (!canFire(unit, t)) continue;
        bool touchesMem = unit.op->opcode == Opcode::Load ||
                          unit.op->opcode == Opcode::LoadIndexed ||
                          unit.op->opcode == Opcode::Store;
        if (opts_.memPortsPerCycle > 0 && touchesMem &&
            memOps >= opts_.memPortsPerCycle)
          continue;  // port contention: retries next slot occurrence
        if (touchesMem) ++memOps;

        FiringOutcome out = fire(unit, t);
        ++fired;
        ++tileFires[unit.tile];
        if (unit.op->id == markerOp_) markerFires_.push_back(t);
        if (out.returned) {
          res.ret = out.retVal;
          done = true;
        }
      }
    }
    if (!done) throw IrError("simulation fuel exhausted");

    res.mem = ctx_.mem;
    res.report.totalCycles = t + opts_.prologueCycles;
    res.report.tileExecutions = fired;
    res.report.mappingIi = m_.ii;
    res.report.achievedIi = measureIi();
    res.report.perTileUtilization.resize(arch_.tileCount());
    for (int k = 0; k < arch_.tileCount(); ++k)
      res.report.perTileUtilization[k] =
          t > 0 ? double(tileFires[k]) / double(t) : 0.0;
    return res;
  }

private:
  struct Port {
    bool immediate = false;
    Attribute imm;
    std::deque<PredicatedValue> queue;
    int inflight = 0;  // tokens en route toward this port
  };
  struct OutEdge {
    size_t consumerUnit = 0;
    size_t consumerPort = 0;
    int delay = 1;  // producer latency + hops * link latency
  };
  struct Unit {
    const Operation *op = nullptr;
    int tile = 0;
    int slot = 0;
    int textIndex = 0;
    std::vector<Port> ports;
    std::vector<std::vector<OutEdge>> outs;  // per result
    bool zeroEdgeInputs = false;
    bool periodicSource = false;  // constants / all-immediate pure ops
    bool onceFired = false;
    int64_t fireCount = 0;
    // Memory-ordering partners: this unit's k-th firing must wait until
    // `mustTrail` partners completed their k-th and `mustLead` partners
    // completed their (k-1)-th.
    std::vector<size_t> mustTrail, mustLead;
  };

  void build() {
    const Block &b = fn_.blocks.front();
    std::unordered_map<OpId, size_t> unitOf;
    int text = 0;
    for (const auto &op : b.ops) {
      ++text;
      if (!isMaterialized(op.opcode)) continue;
      const MappingResult::Placement *p = m_.placementOf(op.id);
      if (!p)
        throw IrError("simulate: op %" + std::to_string(op.id) +
                      " not placed");
      Unit u;
      u.op = &op;
      u.tile = p->tile;
      u.slot = p->slot;
      u.textIndex = text;
      int logical = op.logicalOperandCount();
      size_t next = 0;
      for (int pos = 0; pos < logical; ++pos) {
        Port port;
        const Attribute *a = op.attr("const" + std::to_string(pos));
        if (a) {
          port.immediate = true;
          port.imm = *a;
        } else {
          ++next;
        }
        u.ports.push_back(std::move(port));
      }
      (void)next;
      u.outs.resize(std::max<size_t>(1, op.results.size()));
      unitOf[op.id] = units_.size();
      units_.push_back(std::move(u));
    }

    // Wire routed edges. Port indices in routes are logical positions.
    for (const auto &r : m_.routes) {
      auto ui = unitOf.find(r.dstOp);
      auto pi = unitOf.find(r.srcOp);
      if (ui == unitOf.end() || pi == unitOf.end())
        throw IrError("simulate: route references unknown op");
      Unit &dst = units_[ui->second];
      if (r.dstPort < 0 || r.dstPort >= int(dst.ports.size()))
        throw IrError("simulate: route port out of range");
      OutEdge e;
      e.consumerUnit = ui->second;
      e.consumerPort = size_t(r.dstPort);
      e.delay = 1 + int(r.hops.size()) * arch_.linkLatency;
      units_[pi->second].outs[size_t(r.srcResult)].push_back(e);
    }

    for (auto &u : units_) {
      bool anyEdge = false;
      for (const auto &p : u.ports)
        if (!p.immediate) anyEdge = true;
      u.zeroEdgeInputs = !anyEdge;
      if (u.zeroEdgeInputs) {
        bool pure = info(u.op->opcode).staticEvaluable;
        u.periodicSource = u.op->opcode == Opcode::Constant ||
                           u.op->opcode == Opcode::LoopControl || pure;
      }
    }

    // Deterministic firing order: tile index, then slot, then text order.
    unitOrder_.resize(units_.size());
    for (size_t i = 0; i < units_.size(); ++i) unitOrder_[i] = i;
    std::sort(unitOrder_.begin(), unitOrder_.end(),
              [&](size_t a, size_t b) {
                const Unit &ua = units_[a], &ub = units_[b];
                if (ua.tile != ub.tile) return ua.tile < ub.tile;
                if (ua.slot != ub.slot) return ua.slot < ub.slot;
                return ua.textIndex < ub.textIndex;
              });

    // Memory-ordering gates between same-array ops (textual order defines
    // the per-iteration sequence; rates match because predicated dataflow
    // fires every op of a loop once per iteration).
    for (const auto &pair : memoryOrderPairs(fn_)) {
      auto bi = unitOf.find(pair.before);
      auto ai = unitOf.find(pair.after);
      if (bi == unitOf.end() || ai == unitOf.end()) continue;
      units_[ai->second].mustTrail.push_back(bi->second);
      units_[bi->second].mustLead.push_back(ai->second);
    }

    // Iteration marker: first loop_control, else first phi.
    int bestText = INT32_MAX;
    for (const auto &u : units_)
      if (u.op->opcode == Opcode::LoopControl && u.textIndex < bestText) {
        bestText = u.textIndex;
        markerOp_ = u.op->id;
      }
    if (markerOp_ < 0)
      for (const auto &u : units_)
        if (u.op->opcode == Opcode::Phi && u.textIndex < bestText) {
          bestText = u.textIndex;
          markerOp_ = u.op->id;
        }
  }

  void deliver(int64_t t) {
    auto it = inflight_.find(t);
    if (it == inflight_.end()) return;
    for (auto &[unitIdx, portIdx, tok] : it->second) {
      Unit &u = units_[unitIdx];
      Port &p = u.ports[portIdx];
      --p.inflight;
      if (u.op->opcode == Opcode::Phi && !tok.pred)
        continue;  // false tokens can never win the merge
      if (p.queue.size() >= size_t(opts_.queueDepth))
        throw IrError("simulate: token queue overflow at op %" +
                      std::to_string(u.op->id));
      p.queue.push_back(tok);
    }
    inflight_.erase(it);
  }

  bool outRoom(const Unit &u) const {
    for (const auto &lst : u.outs)
      for (const auto &e : lst) {
        const Port &p = units_[e.consumerUnit].ports[e.consumerPort];
        if (int(p.queue.size()) + p.inflight >= opts_.queueDepth)
          return false;
      }
    return true;
  }

  bool canFire(Unit &u, int64_t) {
    switch (u.op->opcode) {
    case Opcode::LoopControl:
      return !ctx_.loops[u.op->id].exhausted && outRoom(u);
    case Opcode::GrantOnce:
      if (ctx_.grantConsumed.count(u.op->id)) {
        for (auto &p : u.ports)
          if (!p.immediate) p.queue.clear();
        return false;
      }
      break;
    case Opcode::Phi: {
      for (const auto &p : u.ports)
        if (!p.immediate && !p.queue.empty()) return true;
      return false;
    }
    default: break;
    }
    if (u.zeroEdgeInputs) {
      if (!(u.periodicSource ? outRoom(u) : !u.onceFired)) return false;
    } else {
      for (const auto &p : u.ports)
        if (!p.immediate && p.queue.empty()) return false;
    }
    // Same-array ordering: wait for earlier ops of this iteration and for
    // later ops of the previous iteration.
    for (size_t other : u.mustTrail)
      if (units_[other].fireCount <= u.fireCount) return false;
    for (size_t other : u.mustLead)
      if (units_[other].fireCount < u.fireCount) return false;
    return true;
  }

  FiringOutcome fire(Unit &u, int64_t t) {
    u.onceFired = true;
    ++u.fireCount;
    FiringOutcome out;
    if (u.op->opcode == Opcode::Phi) {
      int candidate = -1;
      for (size_t p = 0; p < u.ports.size(); ++p) {
        if (u.ports[p].immediate || u.ports[p].queue.empty()) continue;
        if (candidate >= 0)
          throw IrError("phi uniqueness violated at op %" +
                        std::to_string(u.op->id));
        candidate = int(p);
      }
      PredicatedValue tok = u.ports[candidate].queue.front();
      u.ports[candidate].queue.pop_front();
      out.outs.push_back({tok.value, true});
    } else {
      std::vector<PredicatedValue> ins;
      for (auto &p : u.ports) {
        if (p.immediate) {
          ins.push_back({attrToValue(p.imm), true});
        } else {
          ins.push_back(p.queue.front());
          p.queue.pop_front();
        }
      }
      out = fireOp(*u.op, ins, ctx_);
    }
    for (size_t r = 0; r < out.outs.size(); ++r)
      for (const auto &e : u.outs[r]) {
        units_[e.consumerUnit].ports[e.consumerPort].inflight++;
        inflight_[t + e.delay].push_back(
            {e.consumerUnit, e.consumerPort, out.outs[r]});
      }
    return out;
  }

  int measureIi() const {
    if (markerFires_.size() < 4) return m_.ii;
    std::vector<int64_t> deltas;
    for (size_t i = 1; i < markerFires_.size(); ++i)
      deltas.push_back(markerFires_[i] - markerFires_[i - 1]);
    // Steady state: median of the second half of the deltas.
    std::vector<int64_t> tail(deltas.begin() + deltas.size() / 2,
                              deltas.end());
    std::sort(tail.begin(), tail.end());
    return int(tail[tail.size() / 2]);
  }

  const Function &fn_;
  const ArchSpec &arch_;
  const MappingResult &m_;
  SimOptions opts_;
  std::vector<RtValue> args_;
  std::vector<Unit> units_;
  std::vector<size_t> unitOrder_;
  std::map<int64_t,
           std::vector<std::tuple<size_t, size_t, PredicatedValue>>>
      inflight_;
  OpId markerOp_ = -1;
  std::vector<int64_t> markerFires_;
  ExecContext ctx_;
};

}  // namespace detail

// Pre: validateMapping(fn, arch, m) is empty.
inline SimResult simulate(const Function &fn, const ArchSpec &arch,
                          const MappingResult &m,
                          const std::vector<RtValue> &args,
                          const MemoryImage &memInit, SimOptions opts = {}) {
  detail::MappedMachine machine(fn, arch, m, args, memInit, opts);
  return machine.run();
}

}  // namespace neura
