#include "puma/metrics/report.hpp"

#include <numeric>

#include <fmt/format.h>

namespace puma::metrics {

namespace {

template <typename Map>
std::string histogram(const Map& h) {
  std::string out;
  for (const auto& [k, v] : h) out += fmt::format("    {:<8} {}\n", k, v);
  return out;
}

}  // namespace

std::string format_compile_report(const compiler::CompileStats& s) {
  std::string out;
  out += fmt::format("matrix tiles      {}\n", s.matrix_tiles);
  out += fmt::format("tiles / cores     {} / {}\n", s.tiles_used, s.cores_used);
  out += fmt::format("coalesce groups   {}\n", s.coalesce_groups);
  out += fmt::format("mvm instructions  {}\n", s.mvm_instructions);
  out += fmt::format("send / receive    {} / {}\n", s.send_instructions, s.receive_instructions);
  out += fmt::format("fifo ids          {}\n", s.fifo_ids);
  out += fmt::format("max live values   {}\n", s.max_live);
  out += fmt::format("xbar copies       {}\n", s.xbar_copies);
  out += fmt::format("spills            {} stores, {} loads, {} words\n", s.spill_stores, s.spill_loads, s.spill_words);
  out += fmt::format("instructions      {} core, {} tile ({} bytes)\n", s.core_instructions, s.tile_instructions, s.code_bytes);
  out += "static histogram\n" + histogram(s.static_histogram);
  return out;
}

std::string format_run_report(const sim::RunReport& r) {
  std::string out;
  out += fmt::format("latency           {:.1f} ns\n", r.latency_ns);
  out += fmt::format("energy            {:.3f} nJ\n", r.energy_nj);
  for (const auto& [k, v] : r.energy_breakdown_nj) out += fmt::format("    {:<16} {:.3f} nJ\n", k, v);
  out += fmt::format("mvm active        {:.1f} ns\n", r.mvm_active_ns);
  out += fmt::format("mvmu activations  {}\n", r.mvmu_activations);
  out += fmt::format("rom switches      {}\n", r.rom_switches);
  out += fmt::format("register accesses {}\n", r.register_accesses);
  out += fmt::format("spilled accesses  {} ({:.2f}%)\n", r.spill_accesses, r.spill_percent);
  out += fmt::format("saturations       {}\n", r.saturations);
  out += fmt::format("steps             {}\n", r.steps);
  out += "dynamic histogram\n" + histogram(r.dynamic_histogram);
  out += "static histogram\n" + histogram(r.static_histogram);
  out += "blocked time (ns)\n" + histogram(r.blocked_ns);
  return out;
}

long program_length(const isa::Container& c) {
  long n = 0;
  for (const auto& s : c.segments) n += static_cast<long>(s.code.size());
  return n;
}

std::string format_program_report(const isa::Container& c) {
  std::map<std::string, long> hist;
  int cores = 0, tiles = 0;
  for (const auto& s : c.segments) {
    (s.is_tile() ? tiles : cores) += 1;
    for (const auto& i : s.code) ++hist[std::string(isa::mnemonic(i.opcode))];
  }
  std::string out;
  out += fmt::format("program           {}\n", c.metadata.value("name", std::string("?")));
  out += fmt::format("segments          {} core, {} tile\n", cores, tiles);
  out += fmt::format("instructions      {} ({} bytes)\n", program_length(c), program_length(c) * static_cast<long>(isa::kInstructionBytes));
  out += "static histogram\n" + histogram(hist);
  if (c.metadata.contains("stats")) out += "compile stats\n" + c.metadata["stats"].dump(2) + "\n";
  return out;
}

bool histograms_reconcile(const sim::RunReport& r, const isa::Container& c) {
  long stat = 0, dyn = 0;
  for (const auto& [k, v] : r.static_histogram) stat += v;
  for (const auto& [k, v] : r.dynamic_histogram) dyn += v;
  return stat == program_length(c) && dyn == static_cast<long>(r.steps);
}

}  // namespace puma::metrics
