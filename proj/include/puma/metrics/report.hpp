#pragma once

#include <string>

#include "puma/compiler/compiler.hpp"
#include "puma/isa/container.hpp"
#include "puma/sim/simulator.hpp"

namespace puma::metrics {

/// Human-readable compile summary.
std::string format_compile_report(const compiler::CompileStats& s);

/// Human-readable run summary: latency, energy by component, histograms, blocked time.
std::string format_run_report(const sim::RunReport& r);

/// Static listing summary built from the container alone (code size, histogram, metadata stats).
std::string format_program_report(const isa::Container& c);

/// Total instruction count over every segment.
long program_length(const isa::Container& c);

/// Static histogram sums to the program length and the dynamic one sums to the step count.
bool histograms_reconcile(const sim::RunReport& r, const isa::Container& c);

}  // namespace puma::metrics
