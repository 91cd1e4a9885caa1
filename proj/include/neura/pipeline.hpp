// Pass registry and pipeline driver. The default pipeline lowers a parsed
// CDFG kernel all the way to dataflow form; hardware-specific fusions are
// opt-in. After every pass the result is re-verified, so a pass bug
// surfaces as an internal error instead of corrupting downstream stages.
#pragma once

#include <functional>
#include <set>
#include <string>
#include <vector>

#include "neura/cdfg_passes.hpp"
#include "neura/hw_opt.hpp"
#include "neura/ir.hpp"
#include "neura/lowering.hpp"

namespace neura {

// Raised when a pass produces IR that no longer verifies: an invariant
// breach in this toolkit, not a user error.
class InternalError : public IrError {
public:
  using IrError::IrError;
};

struct PipelineOptions {
  int indexWidth = 64;
  std::set<std::string> patterns = {"load_indexed", "muladd"};
};

inline const std::vector<std::string> &defaultPipeline() {
  static const std::vector<std::string> passes = {
      "promote-func-args",    "canonicalize-cast",
      "fold-constant",        "canonicalize-live-in",
      "leverage-predicated-value", "transform-ctrl-to-data-flow",
  };
  return passes;
}

inline const std::vector<std::string> &knownPasses() {
  static const std::vector<std::string> passes = {
      "promote-func-args", "canonicalize-cast", "fold-constant", "dce",
      "canonicalize-live-in", "leverage-predicated-value",
      "transform-ctrl-to-data-flow", "fuse-pattern", "fuse-loop-control",
  };
  return passes;
}

inline void runPass(Function &fn, const std::string &name,
                    const PipelineOptions &opts) {
  if (name == "promote-func-args") {
    promoteFunctionArguments(fn);
  } else if (name == "canonicalize-cast") {
    canonicalizeCast(fn, opts.indexWidth);
  } else if (name == "fold-constant") {
    foldConstants(fn);
  } else if (name == "dce") {
    eliminateDeadCode(fn);
  } else if (name == "canonicalize-live-in") {
    canonicalizeLiveIn(fn);
  } else if (name == "leverage-predicated-value") {
    applyDataPredication(fn);
  } else if (name == "transform-ctrl-to-data-flow") {
    fn = flattenToDataflow(fn).fn;
  } else if (name == "fuse-pattern") {
    fusePatterns(fn, opts.patterns);
  } else if (name == "fuse-loop-control") {
    fuseLoopControl(fn);
  } else {
    throw IrError("unknown pass '" + name + "'");
  }
  auto report = verify(fn);
  if (!report.empty())
    throw InternalError("pass '" + name +
                        "' produced ill-formed IR for @" + fn.name + ":\n" +
                        violationSummary(report));
}

inline void runPipeline(Function &fn, const std::vector<std::string> &passes,
                        const PipelineOptions &opts = {}) {
  for (const auto &p : passes) runPass(fn, p, opts);
}

inline void runPipeline(Module &m, const std::vector<std::string> &passes,
                        const PipelineOptions &opts = {}) {
  for (auto &fn : m.functions) runPipeline(fn, passes, opts);
}

}  // namespace neura
