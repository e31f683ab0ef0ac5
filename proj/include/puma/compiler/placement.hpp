#pragma once

#include <cstdint>
#include <string>

#include "puma/compiler/ir.hpp"
#include "puma/machine_config.hpp"

namespace puma::compiler {

struct PlacementOptions {
  bool naive = false;  // seeded random MVMU assignment
  std::uint64_t seed = 1;
};

/// Pairwise relations between matrix tiles that drive clustering.
struct TileAffinity {
  int same_output = 0;
  int same_input = 0;
  int producer_consumer = 0;
  friend auto operator<=>(const TileAffinity&, const TileAffinity&) = default;
  TileAffinity& operator+=(const TileAffinity& o) {
    same_output += o.same_output;
    same_input += o.same_input;
    producer_consumer += o.producer_consumer;
    return *this;
  }
};

class AffinityTable {
 public:
  explicit AffinityTable(const Program& p);
  const TileAffinity& operator()(int a, int b) const { return table_[static_cast<std::size_t>(a) * n_ + static_cast<std::size_t>(b)]; }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  std::vector<TileAffinity> table_;
};

/// Assigns every matrix tile to an MVMU and every vector op to a core.
/// Throws CapacityError when the machine has too few MVMUs.
void place(Program& p, const MachineConfig& m, const PlacementOptions& opt = {});

/// Weighted count of related tile pairs sharing a core (higher is better).
double colocation_score(const Program& p);

std::string dump_plan(const Program& p);

}  // namespace puma::compiler
