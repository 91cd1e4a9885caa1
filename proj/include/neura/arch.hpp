// Declarative CGRA description: tile grid, interconnect topology, execution
// model, per-tile FU capabilities, control-memory depth and register
// budget. Parsed from line-oriented `key = value` text.
#pragma once

#include <cstdlib>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "neura/ir.hpp"

namespace neura {

enum class Topology : uint8_t { Mesh4, KingMesh8 };
enum class ExecModel : uint8_t { SpatialOnly, SpatioTemporal };

struct ArchSpec {
  int rows = 4;
  int cols = 4;
  Topology topology = Topology::KingMesh8;
  ExecModel model = ExecModel::SpatioTemporal;
  int ctrlMemDepth = 8;
  int linkLatency = 1;
  int regsPerTile = 8;
  // Per-tile opcode tags; fused ops (load_indexed, muladd, loop_control)
  // are opt-in.
  std::vector<std::set<std::string>> tileCaps;

  int tileCount() const { return rows * cols; }
  int tileAt(int r, int c) const { return r * cols + c; }
  int rowOf(int t) const { return t / cols; }
  int colOf(int t) const { return t % cols; }

  static std::set<std::string> baseCapabilities() {
    std::set<std::string> caps;
    for (const auto &e : opcodeTable()) {
      if (!isMaterialized(e.opcode) || isBranch(e.opcode)) continue;
      if (e.opcode == Opcode::LoadIndexed || e.opcode == Opcode::MulAdd ||
          e.opcode == Opcode::LoopControl)
        continue;
      caps.insert(e.name);
    }
    return caps;
  }

  bool tileSupports(int tile, Opcode op) const {
    if (tile < 0 || tile >= tileCount()) return false;
    return tileCaps[tile].count(opcodeName(op)) != 0;
  }

  std::vector<int> neighbors(int tile) const {
    std::vector<int> out;
    int r = rowOf(tile), c = colOf(tile);
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        if (topology == Topology::Mesh4 && dr != 0 && dc != 0) continue;
        int nr = r + dr, nc = c + dc;
        if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
        out.push_back(tileAt(nr, nc));
      }
    }
    return out;
  }

  // Chebyshev distance for the king mesh, Manhattan for mesh4.
  int hopDistance(int a, int b) const {
    int dr = std::abs(rowOf(a) - rowOf(b));
    int dc = std::abs(colOf(a) - colOf(b));
    return topology == Topology::KingMesh8 ? std::max(dr, dc) : dr + dc;
  }

  void validate() const {
    if (rows < 1 || cols < 1)
      throw IrError("arch: grid dimensions must be at least 1x1");
    if (ctrlMemDepth < 1)
      throw IrError("arch: ctrl_mem_depth must be at least 1");
    if (model == ExecModel::SpatialOnly && ctrlMemDepth != 1)
      throw IrError("arch: spatial_only requires ctrl_mem_depth = 1");
    if (linkLatency < 1) throw IrError("arch: link_latency must be >= 1");
    if (regsPerTile < 0) throw IrError("arch: regs_per_tile must be >= 0");
    if (int(tileCaps.size()) != tileCount())
      throw IrError("arch: capability table size mismatch");
  }
};

namespace detail {

inline std::string trimmed(const std::string &s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> splitList(const std::string &s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trimmed(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline int parseIntField(const std::string &key, const std::string &value) {
  try {
    size_t used = 0;
    int v = std::stoi(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception &) {
    throw IrError("arch: malformed integer for '" + key + "': " + value);
  }
}

}  // namespace detail

inline ArchSpec loadArchSpec(const std::string &text) {
  ArchSpec spec;
  std::set<std::string> caps = ArchSpec::baseCapabilities();
  std::vector<std::string> extra;
  std::vector<std::pair<std::pair<int, int>, std::set<std::string>>>
      overrides;
  bool capsExplicit = false;

  std::istringstream is(text);
  std::string line;
  int lineNo = 0;
  while (std::getline(is, line)) {
    ++lineNo;
    auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    comment = line.find("//");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = detail::trimmed(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IrError("arch line " + std::to_string(lineNo) +
                    ": expected 'key = value'");
    std::string key = detail::trimmed(line.substr(0, eq));
    std::string value = detail::trimmed(line.substr(eq + 1));

    if (key == "rows") {
      spec.rows = detail::parseIntField(key, value);
    } else if (key == "cols") {
      spec.cols = detail::parseIntField(key, value);
    } else if (key == "topology") {
      if (value == "mesh4") spec.topology = Topology::Mesh4;
      else if (value == "king_mesh8") spec.topology = Topology::KingMesh8;
      else throw IrError("arch: unknown topology '" + value + "'");
    } else if (key == "execution_model") {
      if (value == "spatial_only") spec.model = ExecModel::SpatialOnly;
      else if (value == "spatio_temporal")
        spec.model = ExecModel::SpatioTemporal;
      else throw IrError("arch: unknown execution model '" + value + "'");
    } else if (key == "ctrl_mem_depth") {
      spec.ctrlMemDepth = detail::parseIntField(key, value);
    } else if (key == "link_latency") {
      spec.linkLatency = detail::parseIntField(key, value);
    } else if (key == "regs_per_tile") {
      spec.regsPerTile = detail::parseIntField(key, value);
    } else if (key == "capabilities") {
      if (value != "all") {
        caps.clear();
        for (const auto &c : detail::splitList(value)) caps.insert(c);
        capsExplicit = true;
      }
    } else if (key == "extra_capabilities") {
      extra = detail::splitList(value);
    } else if (key.rfind("tile_capabilities ", 0) == 0) {
      std::istringstream ks(key.substr(18));
      int r, c;
      if (!(ks >> r >> c))
        throw IrError("arch: malformed tile_capabilities key '" + key + "'");
      std::set<std::string> tc;
      for (const auto &s : detail::splitList(value)) tc.insert(s);
      overrides.push_back({{r, c}, std::move(tc)});
    } else {
      throw IrError("arch: unknown field '" + key + "'");
    }
  }
  (void)capsExplicit;
  for (const auto &e : extra) caps.insert(e);
  for (const auto &c : caps)
    if (!opcodeByName(c))
      throw IrError("arch: unknown capability tag '" + c + "'");

  spec.tileCaps.assign(spec.tileCount() > 0 ? spec.tileCount() : 0, caps);
  for (const auto &[rc, tc] : overrides) {
    auto [r, c] = rc;
    if (r < 0 || r >= spec.rows || c < 0 || c >= spec.cols)
      throw IrError("arch: tile_capabilities index out of range");
    for (const auto &s : tc)
      if (!opcodeByName(s))
        throw IrError("arch: unknown capability tag '" + s + "'");
    spec.tileCaps[spec.tileAt(r, c)] = tc;
  }
  spec.validate();
  return spec;
}

}  // namespace neura
