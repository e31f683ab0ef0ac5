#pragma once

#include <map>
#include <string>
#include <vector>

#include "puma/graph/model_graph.hpp"
#include "puma/numerics/lut.hpp"

namespace puma::graph {

using TensorMap = std::map<std::string, num::RawVector>;

/// Matrix-vector product as the tiled hardware computes it: each block of `crossbar_dim`
/// input rows is rounded to Fixed16, then block partials are saturating-added in ascending order.
num::RawVector blocked_mvm(const num::RawMatrix& w, const num::RawVector& x, int crossbar_dim, int frac_bits);

class Interpreter {
 public:
  explicit Interpreter(int crossbar_dim = 128, int lut_index_bits = 8) : dim_(crossbar_dim), lut_bits_(lut_index_bits) {}

  /// Evaluates every node in id order. Throws ShapeError on a missing or mis-sized input.
  std::vector<num::RawVector> evaluate_all(const ModelGraph& g, const TensorMap& inputs) const;
  TensorMap evaluate(const ModelGraph& g, const TensorMap& inputs) const;

 private:
  int dim_;
  int lut_bits_;
};

}  // namespace puma::graph
