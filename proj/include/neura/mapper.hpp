// Places and routes a dataflow-form function onto a declared CGRA. The
// search starts at max(ResMII, RecMII) and increments the II on failure;
// placement is a greedy list schedule over the acyclic condensation with
// seeded randomized restarts. reserve/ctrl_mov collapse into loop-carried
// (distance-1) edges and map to routing, not to FUs.
#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "neura/arch.hpp"
#include "neura/ir.hpp"
#include "neura/memdep.hpp"

namespace neura {

// ---------------------------------------------------------------------------
// Mapping DFG: materialized ops plus distance-annotated edges
// ---------------------------------------------------------------------------

struct DfgNode {
  OpId op = -1;
  Opcode opcode = Opcode::Constant;
  int textIndex = 0;
};

struct DfgEdge {
  int src = -1;       // node index
  int srcResult = 0;
  int dst = -1;       // node index
  int dstPort = 0;    // logical operand position
  int distance = 0;   // iterations crossed (1 for loop-carried)
  bool constraint = false;  // memory-ordering timing edge, never routed
};

struct MappingDfg {
  std::vector<DfgNode> nodes;
  std::vector<DfgEdge> edges;
  std::unordered_map<OpId, int> nodeOf;
  std::vector<std::vector<int>> inEdges, outEdges;  // per node, edge indices
};

inline MappingDfg buildMappingDfg(const Function &fn) {
  if (fn.form != IrForm::Dataflow)
    throw IrError("mapper requires dataflow form");
  MappingDfg g;
  const Block &b = fn.blocks.front();
  std::unordered_map<ValueId, std::pair<int, int>> producer;  // node, result
  std::unordered_map<ValueId, const Operation *> reserveFeeder;
  for (const auto &op : b.ops)
    if (op.opcode == Opcode::CtrlMov && op.operands.size() == 2)
      reserveFeeder[op.operands[1]] = &op;
  std::unordered_map<ValueId, ValueId> reserveResult;
  for (const auto &op : b.ops)
    if (op.opcode == Opcode::Reserve)
      reserveResult[op.results[0].value] = op.results[0].value;

  int text = 0;
  for (const auto &op : b.ops) {
    if (!isMaterialized(op.opcode)) { ++text; continue; }
    int idx = int(g.nodes.size());
    g.nodes.push_back({op.id, op.opcode, text++});
    g.nodeOf[op.id] = idx;
    for (size_t r = 0; r < op.results.size(); ++r)
      producer[op.results[r].value] = {idx, int(r)};
  }
  g.inEdges.resize(g.nodes.size());
  g.outEdges.resize(g.nodes.size());

  for (const auto &op : b.ops) {
    if (!isMaterialized(op.opcode)) continue;
    int dst = g.nodeOf[op.id];
    int logical = op.logicalOperandCount();
    size_t next = 0;
    for (int pos = 0; pos < logical; ++pos) {
      if (op.hasAttr("const" + std::to_string(pos))) continue;
      ValueId v = op.operands[next++];
      int distance = 0;
      ValueId source = v;
      if (reserveResult.count(v)) {
        auto rf = reserveFeeder.find(v);
        if (rf == reserveFeeder.end())
          throw IrError("mapper: reserve without ctrl_mov feeder");
        source = rf->second->operands[0];
        distance = 1;
      }
      auto pi = producer.find(source);
      if (pi == producer.end())
        throw IrError("mapper: operand %" + std::to_string(source) +
                      " has no materialized producer");
      DfgEdge e{pi->second.first, pi->second.second, dst, pos, distance,
                false};
      g.inEdges[dst].push_back(int(g.edges.size()));
      g.outEdges[e.src].push_back(int(g.edges.size()));
      g.edges.push_back(e);
    }
  }

  // Memory-ordering constraints: same-array pairs must keep their textual
  // order within an iteration and across consecutive iterations. These are
  // pure timing edges for the modulo schedule.
  for (const auto &pair : memoryOrderPairs(fn)) {
    auto bi = g.nodeOf.find(pair.before);
    auto ai = g.nodeOf.find(pair.after);
    if (bi == g.nodeOf.end() || ai == g.nodeOf.end()) continue;
    DfgEdge fwd{bi->second, 0, ai->second, -1, 0, true};
    g.inEdges[fwd.dst].push_back(int(g.edges.size()));
    g.outEdges[fwd.src].push_back(int(g.edges.size()));
    g.edges.push_back(fwd);
    DfgEdge back{ai->second, 0, bi->second, -1, 1, true};
    g.inEdges[back.dst].push_back(int(g.edges.size()));
    g.outEdges[back.src].push_back(int(g.edges.size()));
    g.edges.push_back(back);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Minimum II bounds
// ---------------------------------------------------------------------------

// Enumerates elementary cycles (DFS with smallest-start canonicalization)
// and reports the maximum of ceil(weight / distance). Edge weight defaults
// to the producer latency of one cycle; callers may add routing delays.
inline int maxCycleRatio(const MappingDfg &g,
                         const std::vector<int> &edgeWeight) {
  int best = 0;
  size_t n = g.nodes.size();
  std::vector<char> inPath(n, 0);
  std::vector<std::pair<int, size_t>> stack;  // node, next out-edge index
  for (size_t start = 0; start < n; ++start) {
    stack.clear();
    std::fill(inPath.begin(), inPath.end(), 0);
    stack.push_back({int(start), 0});
    inPath[start] = 1;
    std::vector<int> pathEdges;
    while (!stack.empty()) {
      auto &[node, next] = stack.back();
      const auto &outs = g.outEdges[node];
      if (next >= outs.size()) {
        inPath[node] = 0;
        stack.pop_back();
        if (!pathEdges.empty()) pathEdges.pop_back();
        continue;
      }
      int eIdx = outs[next++];
      const DfgEdge &e = g.edges[eIdx];
      if (size_t(e.dst) < start) continue;  // canonical: min node starts
      if (size_t(e.dst) == start) {
        int w = 0, d = 0;
        for (int pe : pathEdges) {
          w += edgeWeight[pe];
          d += g.edges[pe].distance;
        }
        w += edgeWeight[eIdx];
        d += e.distance;
        if (d > 0) best = std::max(best, int((w + d - 1) / d));
        continue;
      }
      if (inPath[e.dst]) continue;
      inPath[e.dst] = 1;
      pathEdges.push_back(eIdx);
      stack.push_back({e.dst, 0});
    }
  }
  return best;
}

struct MinIi {
  int resMii = 1;
  int recMii = 1;
  int bound() const { return std::max(resMii, recMii); }
};

inline MinIi computeMinIi(const MappingDfg &g, const ArchSpec &arch) {
  MinIi m;
  int n = int(g.nodes.size());
  m.resMii = std::max(1, (n + arch.tileCount() - 1) / arch.tileCount());
  std::vector<int> weights(g.edges.size(), 1);  // producer latency
  m.recMii = std::max(1, maxCycleRatio(g, weights));
  return m;
}

inline MinIi computeMinIi(const Function &fn, const ArchSpec &arch) {
  return computeMinIi(buildMappingDfg(fn), arch);
}

// ---------------------------------------------------------------------------
// Mapping result
// ---------------------------------------------------------------------------

struct MappingResult {
  int ii = 1;
  int scheduleLength = 1;
  ExecModel model = ExecModel::SpatioTemporal;
  int rows = 0, cols = 0;

  struct Placement {
    OpId op = -1;
    int tile = 0;
    int slot = 0;
  };
  struct Hop {
    int fromTile = 0;
    int toTile = 0;
    int cycleModIi = 0;  // departure cycle on the link
  };
  struct Route {
    OpId srcOp = -1;
    int srcResult = 0;
    OpId dstOp = -1;
    int dstPort = 0;
    int distance = 0;
    int wait = 0;  // cycles buffered at the consumer tile
    std::vector<Hop> hops;
  };
  std::vector<Placement> placements;
  std::vector<Route> routes;

  const Placement *placementOf(OpId op) const {
    for (const auto &p : placements)
      if (p.op == op) return &p;
    return nullptr;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "ii = " << ii << "\n";
    os << "schedule_length = " << scheduleLength << "\n";
    os << "model = "
       << (model == ExecModel::SpatialOnly ? "spatial_only"
                                           : "spatio_temporal")
       << "\n";
    os << "grid = " << rows << "x" << cols << "\n";
    for (const auto &p : placements)
      os << "op %" << p.op << " -> tile(" << p.tile / cols << ","
         << p.tile % cols << ") slot " << p.slot << "\n";
    for (const auto &r : routes) {
      os << "route %" << r.srcOp << ":" << r.srcResult << " -> %" << r.dstOp
         << ":" << r.dstPort << " dist " << r.distance << " wait " << r.wait
         << "\n";
      for (const auto &h : r.hops)
        os << "hop %" << r.srcOp << ":" << r.srcResult << " -> %" << r.dstOp
           << ":" << r.dstPort << " (" << h.fromTile / cols << ","
           << h.fromTile % cols << ")->(" << h.toTile / cols << ","
           << h.toTile % cols << ") cycle " << h.cycleModIi << "\n";
    }
    return os.str();
  }
};

// ---------------------------------------------------------------------------
// Scheduler internals
// ---------------------------------------------------------------------------

namespace detail {

struct LinkUse {
  // (fromTile, toTile, cycle mod ii) -> used
  std::set<std::tuple<int, int, int>> busy;

  bool free(int from, int to, int cycle) const {
    return !busy.count({from, to, cycle});
  }
  void take(int from, int to, int cycle) { busy.insert({from, to, cycle}); }
};

struct RouteAttempt {
  std::vector<MappingResult::Hop> hops;
  int arrival = 0;
};

// Min-hop BFS from (fromTile, departTime); each hop occupies its link at
// the departure cycle mod ii. Waiting happens only at the consumer.
inline std::optional<RouteAttempt> findRoute(
    const ArchSpec &arch, const LinkUse &links, int ii, int fromTile,
    int departTime, int toTile, int latestArrival,
    const std::vector<MappingResult::Hop> *alsoBusy = nullptr) {
  RouteAttempt res;
  if (fromTile == toTile) {
    res.arrival = departTime;
    return res;
  }
  auto blocked = [&](int f, int t, int cyc) {
    if (!links.free(f, t, cyc)) return true;
    if (alsoBusy)
      for (const auto &h : *alsoBusy)
        if (h.fromTile == f && h.toTile == t && h.cycleModIi == cyc)
          return true;
    return false;
  };
  struct State {
    int tile;
    int depth;
  };
  std::deque<State> frontier{{fromTile, 0}};
  std::map<std::pair<int, int>, std::pair<int, int>> parent;  // (tile,depth)->prev
  std::set<std::pair<int, int>> seen{{fromTile, 0}};
  int maxDepth = arch.rows + arch.cols + 2 * ii + 2;
  while (!frontier.empty()) {
    State s = frontier.front();
    frontier.pop_front();
    int depart = departTime + s.depth * arch.linkLatency;
    if (depart > latestArrival) continue;
    for (int nb : arch.neighbors(s.tile)) {
      int cyc = ((depart % ii) + ii) % ii;
      if (blocked(s.tile, nb, cyc)) continue;
      int arrival = depart + arch.linkLatency;
      if (arrival > latestArrival) continue;
      std::pair<int, int> key{nb, s.depth + 1};
      if (seen.count(key)) continue;
      seen.insert(key);
      parent[key] = {s.tile, s.depth};
      if (nb == toTile) {
        // Reconstruct.
        std::vector<MappingResult::Hop> rev;
        std::pair<int, int> cur = key;
        while (cur.second > 0) {
          auto prev = parent[cur];
          int dep = departTime + prev.second * arch.linkLatency;
          rev.push_back({prev.first, cur.first, ((dep % ii) + ii) % ii});
          cur = prev;
        }
        std::reverse(rev.begin(), rev.end());
        res.hops = std::move(rev);
        res.arrival = arrival;
        return res;
      }
      if (s.depth + 1 < maxDepth) frontier.push_back({nb, s.depth + 1});
    }
  }
  return std::nullopt;
}

inline int registersFor(int wait, int ii) {
  return wait <= 0 ? 0 : (wait + ii - 1) / ii;
}

// Nodes on a dependence cycle (through loop-carried edges). These carry
// hard deadlines, so the list scheduler places them first and keeps their
// chains tight.
inline std::vector<char> cyclicNodes(const MappingDfg &g) {
  size_t n = g.nodes.size();
  std::vector<char> cyclic(n, 0);
  for (size_t s = 0; s < n; ++s) {
    // DFS: can s reach itself?
    std::vector<char> seen(n, 0);
    std::vector<int> stack;
    for (int e : g.outEdges[s]) stack.push_back(g.edges[e].dst);
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      if (cur == int(s)) {
        cyclic[s] = 1;
        break;
      }
      if (seen[cur]) continue;
      seen[cur] = 1;
      for (int e : g.outEdges[cur]) stack.push_back(g.edges[e].dst);
    }
  }
  return cyclic;
}

// Static ASAP levels over the acyclic distance-0 subgraph (every
// dependence cycle crosses a reserve).
inline std::vector<int> asapLevels(const MappingDfg &g) {
  size_t n = g.nodes.size();
  std::vector<int> asap(n, 0), indeg(n, 0);
  for (const auto &e : g.edges)
    if (e.distance == 0) ++indeg[e.dst];
  std::vector<int> queue;
  for (size_t i = 0; i < n; ++i)
    if (indeg[i] == 0) queue.push_back(int(i));
  for (size_t q = 0; q < queue.size(); ++q) {
    int cur = queue[q];
    for (int eIdx : g.outEdges[cur]) {
      const DfgEdge &e = g.edges[eIdx];
      if (e.distance != 0) continue;
      asap[e.dst] = std::max(asap[e.dst], asap[cur] + 1);
      if (--indeg[e.dst] == 0) queue.push_back(e.dst);
    }
  }
  if (queue.size() != n)
    throw IrError("mapper: distance-0 subgraph is cyclic");
  return asap;
}

// Placement order: recurrence ops first in dataflow order (they carry hard
// deadlines and must claim tight slot chains on an empty fabric), then the
// acyclic remainder in reverse dataflow order, so init and feeder chains
// grow backward from their already-placed consumers and stay routable
// within the consumers' deadlines.
inline std::vector<int> scheduleOrder(const MappingDfg &g, std::mt19937 &rng,
                                      bool perturb,
                                      const std::vector<int> &asap,
                                      const std::vector<char> &cyclic) {
  size_t n = g.nodes.size();
  std::vector<int> tie(n, 0);
  if (perturb)
    for (size_t i = 0; i < n; ++i) tie[i] = int(rng() % 1000);
  std::vector<int> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = int(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (cyclic[a] != cyclic[b]) return cyclic[a] > cyclic[b];
    if (asap[a] != asap[b])
      return cyclic[a] ? asap[a] < asap[b] : asap[a] > asap[b];
    if (tie[a] != tie[b]) return tie[a] < tie[b];
    return g.nodes[a].textIndex < g.nodes[b].textIndex;
  });
  return order;
}

struct ScheduleState {
  std::vector<int> tileOf, timeOf;  // per node; -1 = unplaced
  LinkUse links;
  std::set<std::pair<int, int>> slotBusy;  // (tile, time mod ii)
  std::vector<int> regsUsed;
  std::vector<MappingResult::Route> routes;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// map_dfg
// ---------------------------------------------------------------------------

struct MapOptions {
  uint64_t seed = 1;
  int budget = 16;  // restart attempts per candidate II
};

namespace detail {

// Consistent lower bounds on schedule times: longest paths over the
// difference constraints T[c] >= T[p] + 1 - distance*ii. Returns empty on
// a positive cycle (the ii is below the recurrence bound).
inline std::vector<int> scheduleLowerBounds(const MappingDfg &g, int ii) {
  size_t n = g.nodes.size();
  std::vector<int> t(n, 0);
  for (size_t iter = 0; iter <= n; ++iter) {
    bool changed = false;
    for (const auto &e : g.edges) {
      int need = t[e.src] + 1 - e.distance * ii;
      if (t[e.dst] < need) {
        t[e.dst] = need;
        changed = true;
      }
    }
    if (!changed) return t;
  }
  return {};  // positive cycle: infeasible at this ii
}

inline bool tryScheduleSt(const MappingDfg &g, const ArchSpec &arch, int ii,
                          std::mt19937 &rng, bool perturb,
                          MappingResult &out) {
  size_t n = g.nodes.size();
  ScheduleState st;
  st.tileOf.assign(n, -1);
  st.timeOf.assign(n, -1);
  st.regsUsed.assign(arch.tileCount(), 0);

  std::vector<int> lower = scheduleLowerBounds(g, ii);
  if (lower.empty()) return false;
  std::vector<int> asap = asapLevels(g);
  std::vector<char> cyclic = cyclicNodes(g);

  // A little slack lets init chains and neighbours route in front of the
  // recurrence chains; restarts vary it.
  int margin = perturb ? int(rng() % 3) : 1;
  std::vector<int> stagger(n, 0);
  if (perturb)
    for (size_t i = 0; i < n; ++i)
      if (cyclic[i]) stagger[i] = int(rng() % 3);

  std::vector<int> order = scheduleOrder(g, rng, perturb, asap, cyclic);
  for (int node : order) {
    Opcode opc = g.nodes[node].opcode;
    int baseEst = lower[node] + (cyclic[node] ? margin + stagger[node] : 0);
    for (int eIdx : g.inEdges[node]) {
      const DfgEdge &e = g.edges[eIdx];
      if (e.distance == 0 && st.timeOf[e.src] >= 0)
        baseEst = std::max(baseEst, st.timeOf[e.src] + 1);
    }

    // Candidate tiles in routing-cost order.
    std::vector<std::pair<int, int>> tiles;
    for (int tile = 0; tile < arch.tileCount(); ++tile) {
      if (!arch.tileSupports(tile, opc)) continue;
      int cost = 0;
      for (int eIdx : g.inEdges[node])
        if (!g.edges[eIdx].constraint && st.tileOf[g.edges[eIdx].src] >= 0)
          cost += arch.hopDistance(st.tileOf[g.edges[eIdx].src], tile);
      for (int eIdx : g.outEdges[node]) {
        const DfgEdge &e = g.edges[eIdx];
        if (e.constraint || st.tileOf[e.dst] < 0) continue;
        int w = e.distance > 0 ? 4 : 1;  // deadline pressure
        cost += w * arch.hopDistance(tile, st.tileOf[e.dst]);
      }
      if (perturb) cost += int(rng() % 2);
      tiles.push_back({cost, tile});
    }
    std::sort(tiles.begin(), tiles.end());

    bool placed = false;
    for (int t = baseEst; t < baseEst + 2 * ii && !placed; ++t) {
      for (auto [cost, tile] : tiles) {
        (void)cost;
        if (st.slotBusy.count({tile, t % ii})) continue;
        // Tentatively route every edge whose other endpoint is placed.
        std::vector<MappingResult::Hop> proposed;
        std::vector<MappingResult::Route> newRoutes;
        std::unordered_map<int, int> regsDelta;
        bool ok = true;
        auto routeEdge = [&](const DfgEdge &e, int eSrcTile, int eSrcTime,
                             int eDstTile, int eDstTime) {
          int deadline = eDstTime + e.distance * ii;
          auto ra = findRoute(arch, st.links, ii, eSrcTile, eSrcTime + 1,
                              eDstTile, deadline, &proposed);
          if (!ra) return false;
          int wait = deadline - ra->arrival;
          if (wait < 0) return false;
          int regs = registersFor(wait, ii);
          regsDelta[eDstTile] += regs;
          if (st.regsUsed[eDstTile] + regsDelta[eDstTile] >
              arch.regsPerTile)
            return false;
          MappingResult::Route r;
          r.srcOp = g.nodes[e.src].op;
          r.srcResult = e.srcResult;
          r.dstOp = g.nodes[e.dst].op;
          r.dstPort = e.dstPort;
          r.distance = e.distance;
          r.wait = wait;
          r.hops = ra->hops;
          for (const auto &h : ra->hops) proposed.push_back(h);
          newRoutes.push_back(std::move(r));
          return true;
        };
        for (int eIdx : g.inEdges[node]) {
          const DfgEdge &e = g.edges[eIdx];
          if (e.constraint) continue;  // timing handled via est/deadlines
          bool selfLoop = e.src == node;
          if (!selfLoop && st.tileOf[e.src] < 0)
            continue;  // placed later (loop-carried)
          int sTile = selfLoop ? tile : st.tileOf[e.src];
          int sTime = selfLoop ? t : st.timeOf[e.src];
          if (!routeEdge(e, sTile, sTime, tile, t)) {
            ok = false;
            break;
          }
        }
        if (ok) {
          for (int eIdx : g.outEdges[node]) {
            const DfgEdge &e = g.edges[eIdx];
            if (st.tileOf[e.dst] < 0) continue;
            if (e.src == e.dst && !e.constraint) continue;  // as in-edge
            if (e.constraint) {
              // Ordering deadline: this op's iteration-k output must land
              // before the partner's iteration k+distance firing.
              if (t + 1 > st.timeOf[e.dst] + e.distance * ii) {
                ok = false;
                break;
              }
              continue;
            }
            if (!routeEdge(e, tile, t, st.tileOf[e.dst],
                           st.timeOf[e.dst])) {
              ok = false;
              break;
            }
          }
        }
        if (!ok) continue;

        st.tileOf[node] = tile;
        st.timeOf[node] = t;
        if (std::getenv("NEURA_MAP_DEBUG"))
          std::fprintf(stderr, "  ii=%d place %%%d (%s) tile %d t %d\n", ii,
                       g.nodes[node].op, opcodeName(g.nodes[node].opcode),
                       tile, t);
        st.slotBusy.insert({tile, t % ii});
        for (const auto &h : proposed)
          st.links.take(h.fromTile, h.toTile, h.cycleModIi);
        for (auto [dtile, dr] : regsDelta) st.regsUsed[dtile] += dr;
        for (auto &r : newRoutes) st.routes.push_back(std::move(r));
        placed = true;
        break;
      }
    }
    if (!placed) {
      if (std::getenv("NEURA_MAP_DEBUG"))
        std::fprintf(stderr,
                     "  ii=%d FAIL op %%%d (%s) est=%d lower=%d\n", ii,
                     g.nodes[node].op, opcodeName(g.nodes[node].opcode),
                     baseEst, lower[node]);
      return false;
    }
  }

  out.ii = ii;
  out.model = ExecModel::SpatioTemporal;
  out.rows = arch.rows;
  out.cols = arch.cols;
  int maxT = 0;
  for (size_t i = 0; i < n; ++i) {
    out.placements.push_back(
        {g.nodes[i].op, st.tileOf[i], st.timeOf[i] % ii});
    maxT = std::max(maxT, st.timeOf[i]);
  }
  std::sort(out.placements.begin(), out.placements.end(),
            [](const auto &a, const auto &b) { return a.op < b.op; });
  out.scheduleLength = maxT + 1;
  std::sort(st.routes.begin(), st.routes.end(), [](const auto &a,
                                                   const auto &b) {
    return std::tie(a.srcOp, a.srcResult, a.dstOp, a.dstPort) <
           std::tie(b.srcOp, b.srcResult, b.dstOp, b.dstPort);
  });
  out.routes = std::move(st.routes);
  return true;
}

// Spatial-only: one op per tile, statically circuit-switched link-disjoint
// routes, slot 0 everywhere. The reported II is the recurrence rate with
// routing delays included, never below the structural bound.
inline bool tryScheduleSpatial(const MappingDfg &g, const ArchSpec &arch,
                               std::mt19937 &rng, bool perturb,
                               MappingResult &out) {
  size_t n = g.nodes.size();
  ScheduleState st;
  st.tileOf.assign(n, -1);
  st.timeOf.assign(n, 0);
  st.regsUsed.assign(arch.tileCount(), 0);
  std::set<int> tileUsed;

  std::vector<int> asap = asapLevels(g);
  std::vector<char> cyclic = cyclicNodes(g);
  std::vector<int> order = scheduleOrder(g, rng, perturb, asap, cyclic);
  for (int node : order) {
    Opcode opc = g.nodes[node].opcode;
    std::vector<std::pair<int, int>> tiles;
    for (int tile = 0; tile < arch.tileCount(); ++tile) {
      if (tileUsed.count(tile)) continue;
      if (!arch.tileSupports(tile, opc)) continue;
      int cost = 0;
      for (int eIdx : g.inEdges[node])
        if (st.tileOf[g.edges[eIdx].src] >= 0)
          cost += arch.hopDistance(st.tileOf[g.edges[eIdx].src], tile);
      for (int eIdx : g.outEdges[node])
        if (st.tileOf[g.edges[eIdx].dst] >= 0)
          cost += arch.hopDistance(tile, st.tileOf[g.edges[eIdx].dst]);
      if (perturb) cost += int(rng() % 2);
      tiles.push_back({cost, tile});
    }
    std::sort(tiles.begin(), tiles.end());

    bool placed = false;
    for (auto [cost, tile] : tiles) {
      (void)cost;
      std::vector<MappingResult::Hop> proposed;
      std::vector<MappingResult::Route> newRoutes;
      bool ok = true;
      auto routeEdge = [&](const DfgEdge &e, int from, int to) {
        auto ra = findRoute(arch, st.links, 1, from, 0, to, 1 << 20,
                            &proposed);
        if (!ra) return false;
        MappingResult::Route r;
        r.srcOp = g.nodes[e.src].op;
        r.srcResult = e.srcResult;
        r.dstOp = g.nodes[e.dst].op;
        r.dstPort = e.dstPort;
        r.distance = e.distance;
        r.wait = 0;
        r.hops = ra->hops;
        for (const auto &h : ra->hops) proposed.push_back(h);
        newRoutes.push_back(std::move(r));
        return true;
      };
      for (int eIdx : g.inEdges[node]) {
        const DfgEdge &e = g.edges[eIdx];
        if (e.constraint) continue;  // ordering enforced at simulation time
        if (st.tileOf[e.src] < 0) continue;
        if (!routeEdge(e, st.tileOf[e.src], tile)) { ok = false; break; }
      }
      if (ok)
        for (int eIdx : g.outEdges[node]) {
          const DfgEdge &e = g.edges[eIdx];
          if (e.constraint || st.tileOf[e.dst] < 0 || e.src == e.dst)
            continue;
          if (!routeEdge(e, tile, st.tileOf[e.dst])) { ok = false; break; }
        }
      if (!ok) continue;
      st.tileOf[node] = tile;
      tileUsed.insert(tile);
      for (const auto &h : proposed)
        st.links.take(h.fromTile, h.toTile, h.cycleModIi);
      for (auto &r : newRoutes) st.routes.push_back(std::move(r));
      placed = true;
      break;
    }
    if (!placed) return false;
  }

  out.model = ExecModel::SpatialOnly;
  out.rows = arch.rows;
  out.cols = arch.cols;
  for (size_t i = 0; i < n; ++i)
    out.placements.push_back({g.nodes[i].op, st.tileOf[i], 0});
  std::sort(out.placements.begin(), out.placements.end(),
            [](const auto &a, const auto &b) { return a.op < b.op; });
  std::sort(st.routes.begin(), st.routes.end(), [](const auto &a,
                                                   const auto &b) {
    return std::tie(a.srcOp, a.srcResult, a.dstOp, a.dstPort) <
           std::tie(b.srcOp, b.srcResult, b.dstOp, b.dstPort);
  });
  out.routes = std::move(st.routes);

  // Steady-state rate: recurrence cycles including route delays.
  std::vector<int> weights(g.edges.size(), 1);
  for (const auto &r : out.routes) {
    for (size_t eIdx = 0; eIdx < g.edges.size(); ++eIdx) {
      const DfgEdge &e = g.edges[eIdx];
      if (g.nodes[e.src].op == r.srcOp && e.srcResult == r.srcResult &&
          g.nodes[e.dst].op == r.dstOp && e.dstPort == r.dstPort)
        weights[eIdx] = 1 + int(r.hops.size()) * arch.linkLatency;
    }
  }
  int rec = maxCycleRatio(g, weights);
  out.ii = std::max(1, rec);
  out.scheduleLength = out.ii;
  return true;
}

}  // namespace detail

inline MappingResult mapDfg(const Function &fn, const ArchSpec &arch,
                            MapOptions opts = {}) {
  MappingDfg g = buildMappingDfg(fn);
  for (const auto &node : g.nodes) {
    bool supported = false;
    for (int tile = 0; tile < arch.tileCount() && !supported; ++tile)
      supported = arch.tileSupports(tile, node.opcode);
    if (!supported)
      throw IrError(std::string("mapping failed: opcode '") +
                    opcodeName(node.opcode) +
                    "' not supported by any tile");
  }
  MinIi bounds = computeMinIi(g, arch);

  if (arch.model == ExecModel::SpatialOnly) {
    if (int(g.nodes.size()) > arch.tileCount())
      throw IrError("DFG exceeds fabric: " +
                    std::to_string(g.nodes.size()) + " ops on " +
                    std::to_string(arch.tileCount()) + " tiles");
    for (int attempt = 0; attempt < opts.budget; ++attempt) {
      std::mt19937 rng(uint32_t(opts.seed * 7919 + attempt));
      MappingResult out;
      if (detail::tryScheduleSpatial(g, arch, rng, attempt > 0, out)) {
        out.ii = std::max(out.ii, bounds.bound());
        return out;
      }
    }
    throw IrError("mapping failed: no spatial placement within budget");
  }

  for (int ii = bounds.bound(); ii <= arch.ctrlMemDepth; ++ii) {
    for (int attempt = 0; attempt < opts.budget; ++attempt) {
      std::mt19937 rng(uint32_t(opts.seed * 7919 + ii * 131 + attempt));
      MappingResult out;
      if (detail::tryScheduleSt(g, arch, ii, rng, attempt > 0, out))
        return out;
    }
  }
  throw IrError("mapping failed at ii <= " +
                std::to_string(arch.ctrlMemDepth));
}

// ---------------------------------------------------------------------------
// validate_mapping
// ---------------------------------------------------------------------------

// Re-checks every MappingResult invariant from the result structure alone.
inline std::vector<std::string> validateMapping(const Function &fn,
                                                const ArchSpec &arch,
                                                const MappingResult &m) {
  std::vector<std::string> out;
  MappingDfg g = buildMappingDfg(fn);

  if (m.ii < 1) out.push_back("ii must be positive");
  if (arch.model == ExecModel::SpatioTemporal && m.ii > arch.ctrlMemDepth)
    out.push_back("ii exceeds ctrl_mem_depth");
  MinIi bounds = computeMinIi(g, arch);
  if (m.ii < bounds.bound())
    out.push_back("ii " + std::to_string(m.ii) +
                  " below max(res_mii, rec_mii) = " +
                  std::to_string(bounds.bound()));

  std::set<std::pair<int, int>> slots;
  std::set<int> tilesUsed;
  std::unordered_map<OpId, const MappingResult::Placement *> byOp;
  for (const auto &p : m.placements) {
    if (byOp.count(p.op)) out.push_back("op placed twice: %" +
                                        std::to_string(p.op));
    byOp[p.op] = &p;
    if (p.tile < 0 || p.tile >= arch.tileCount())
      out.push_back("tile out of range for op %" + std::to_string(p.op));
    else if (p.slot < 0 || p.slot >= m.ii)
      out.push_back("slot out of range for op %" + std::to_string(p.op));
    else {
      if (!slots.insert({p.tile, p.slot}).second)
        out.push_back("slot conflict at tile " + std::to_string(p.tile) +
                      " slot " + std::to_string(p.slot));
      if (arch.model == ExecModel::SpatialOnly) {
        if (p.slot != 0)
          out.push_back("spatial_only placement with nonzero slot");
        if (!tilesUsed.insert(p.tile).second)
          out.push_back("spatial_only tile hosts two ops: tile " +
                        std::to_string(p.tile));
      }
    }
  }
  for (const auto &node : g.nodes) {
    auto it = byOp.find(node.op);
    if (it == byOp.end()) {
      out.push_back("op %" + std::to_string(node.op) + " not placed");
      continue;
    }
    if (it->second->tile >= 0 && it->second->tile < arch.tileCount() &&
        !arch.tileSupports(it->second->tile, node.opcode))
      out.push_back("tile lacks capability for op %" +
                    std::to_string(node.op));
  }

  // Adjacency helper.
  auto adjacent = [&](int a, int b) {
    for (int nb : arch.neighbors(a))
      if (nb == b) return true;
    return false;
  };

  std::set<std::tuple<int, int, int>> linkBusy;
  std::set<std::tuple<OpId, int, OpId, int>> covered;
  for (const auto &r : m.routes) {
    const auto *sp = byOp.count(r.srcOp) ? byOp[r.srcOp] : nullptr;
    const auto *dp = byOp.count(r.dstOp) ? byOp[r.dstOp] : nullptr;
    if (!sp || !dp) {
      out.push_back("route references unplaced op");
      continue;
    }
    covered.insert({r.srcOp, r.srcResult, r.dstOp, r.dstPort});
    int curTile = sp->tile;
    int hopIndex = 0;
    bool broken = false;
    for (const auto &h : r.hops) {
      if (h.fromTile != curTile || !adjacent(h.fromTile, h.toTile)) {
        out.push_back("broken route %" + std::to_string(r.srcOp) + " -> %" +
                      std::to_string(r.dstOp));
        broken = true;
        break;
      }
      if (m.model == ExecModel::SpatioTemporal) {
        int expect =
            (sp->slot + 1 + hopIndex * arch.linkLatency) % m.ii;
        if (h.cycleModIi != expect)
          out.push_back("route hop off schedule for %" +
                        std::to_string(r.srcOp) + " -> %" +
                        std::to_string(r.dstOp));
      }
      if (!linkBusy.insert({h.fromTile, h.toTile, h.cycleModIi}).second)
        out.push_back("link used twice at same cycle: (" +
                      std::to_string(h.fromTile) + "->" +
                      std::to_string(h.toTile) + ") cycle " +
                      std::to_string(h.cycleModIi));
      curTile = h.toTile;
      ++hopIndex;
    }
    if (broken) continue;
    if (curTile != dp->tile)
      out.push_back("route does not reach consumer tile for %" +
                    std::to_string(r.srcOp) + " -> %" +
                    std::to_string(r.dstOp));
    // Timing congruence: producer fire + latency + route + wait lands on
    // the consumer slot (mod ii); register buffering covers whole IIs.
    // Spatial-only routes are circuit-switched and consumers fire on token
    // arrival, so no modular schedule applies.
    if (m.model == ExecModel::SpatioTemporal) {
      int total = sp->slot + 1 + int(r.hops.size()) * arch.linkLatency +
                  r.wait;
      if (((total - dp->slot) % m.ii + m.ii) % m.ii != 0)
        out.push_back("timing congruence violated for %" +
                      std::to_string(r.srcOp) + " -> %" +
                      std::to_string(r.dstOp));
    }
  }
  for (const auto &e : g.edges) {
    if (e.constraint) continue;  // timing-only, never routed
    if (!covered.count({g.nodes[e.src].op, e.srcResult, g.nodes[e.dst].op,
                        e.dstPort}))
      out.push_back("edge without route: %" +
                    std::to_string(g.nodes[e.src].op) + " -> %" +
                    std::to_string(g.nodes[e.dst].op) + " port " +
                    std::to_string(e.dstPort));
  }

  // Register budget per consumer tile.
  std::unordered_map<int, int> regs;
  for (const auto &r : m.routes) {
    const auto *dp = byOp.count(r.dstOp) ? byOp[r.dstOp] : nullptr;
    if (!dp) continue;
    regs[dp->tile] += detail::registersFor(r.wait, m.ii);
  }
  for (auto [tile, used] : regs)
    if (used > arch.regsPerTile)
      out.push_back("register budget exceeded on tile " +
                    std::to_string(tile));
  return out;
}

}  // namespace neura
