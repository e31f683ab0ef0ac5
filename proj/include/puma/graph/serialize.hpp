#pragma once

#include <string>

#include "puma/graph/interpreter.hpp"
#include "puma/graph/model_graph.hpp"

namespace puma::graph {

inline constexpr int kGraphFormatVersion = 1;

/// Versioned JSON text: node list with operands, constants as hex Fixed16 arrays.
std::string to_text(const ModelGraph& g);
ModelGraph from_text(const std::string& text);

void save_graph(const ModelGraph& g, const std::string& path);
ModelGraph load_graph(const std::string& path);

/// Tensor files: JSON object mapping names to either a hex string of raw Fixed16 values
/// or an array of real numbers (quantized on read).
std::string tensors_to_text(const TensorMap& t);
TensorMap tensors_from_text(const std::string& text, int frac_bits);
TensorMap load_tensors(const std::string& path, int frac_bits);
void save_tensors(const TensorMap& t, const std::string& path);

}  // namespace puma::graph
