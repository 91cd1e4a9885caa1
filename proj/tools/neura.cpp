#include "neura/arch.hpp"
#include "neura/cdfg_passes.hpp"
#include "neura/hw_opt.hpp"
#include "neura/interp.hpp"
#include "neura/ir.hpp"
#include "neura/lowering.hpp"
#include "neura/mapper.hpp"
#include "neura/parser.hpp"
#include "neura/pipeline.hpp"
#include "neura/printer.hpp"
#include "neura/simulator.hpp"

int main() { return 0; }
