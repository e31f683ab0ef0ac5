#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "puma/graph/interpreter.hpp"
#include "puma/graph/model_graph.hpp"

namespace puma::metrics {

struct LabeledSample {
  graph::TensorMap inputs;
  int label = 0;
};

/// A shipped workload: frozen graph, one sample input map and, for classifiers, a labeled test set.
struct ExampleModel {
  graph::ModelGraph graph;
  graph::TensorMap inputs;
  std::vector<LabeledSample> test_set;
  std::string output;  // output whose argmax is the predicted class
};

/// mlp4, mlp128, mlp256, lstm8, lstm128, conv8x8, cnn_small, coalesce_pair, vector_kernel, classifier.
std::vector<std::string> example_names();
ExampleModel make_example(const std::string& name, std::uint64_t seed = 1);

/// Two dense layers of the given width: relu then sigmoid.
ExampleModel mlp_example(int width, std::uint64_t seed = 1);
/// One LSTM step with `cells` hidden units and as many inputs.
ExampleModel lstm_example(int cells, std::uint64_t seed = 1);
/// 3x3, stride 1 over an 8x8x2 image, 4 filters, relu.
ExampleModel conv_example(std::uint64_t seed = 1);
/// 3x3 conv over 6x6x16 (144-row windows) with 8 filters, then a 128 -> 10 dense layer.
ExampleModel cnn_example(std::uint64_t seed = 1);
/// Two independent 128x128 MVMs with nothing else in the kernel.
ExampleModel coalesce_pair_example(std::uint64_t seed = 1);
/// One small MVM followed by a chain of wide elementwise ops.
ExampleModel vector_kernel_example(int width = 256, int depth = 8, std::uint64_t seed = 1);
/// 16 -> 16 -> 4 MLP trained on four Gaussian blobs, with a held-out labeled set.
ExampleModel classifier_example(std::uint64_t seed = 1, int test_samples = 64);

/// Random DAG of MVMs, elementwise ops, activations, slices and concats. Every matrix is at
/// most `dim` x `dim` and there are at most `max_mvms` of them.
graph::ModelGraph random_model(std::uint64_t seed, int dim = 16, int max_nodes = 24, int max_mvms = 6);

/// Uniform random inputs in [-1, 1) for every graph input.
graph::TensorMap random_inputs(const graph::ModelGraph& g, std::uint64_t seed);

/// Index of the largest element, lowest index on ties.
int argmax(const num::RawVector& v);

}  // namespace puma::metrics
