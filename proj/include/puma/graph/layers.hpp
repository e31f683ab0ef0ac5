#pragma once

#include <string>

#include "puma/graph/model_graph.hpp"

namespace puma::graph {

/// act(B + W^T x). W is n x m (rows index inputs).
Handle mlp_layer(ModelGraph& g, Handle x, const Eigen::MatrixXd& w, const Eigen::VectorXd& b, ActFn f,
                 const std::string& name = "fc");

struct LstmWeights {
  // Each gate matrix is (H + I) x H over concat(h_prev, x), with bias length H.
  Eigen::MatrixXd wf, wi, wo, wg;
  Eigen::VectorXd bf, bi, bo, bg;

  static LstmWeights zeros(int hidden, int inputs);
  static LstmWeights random(int hidden, int inputs, double scale, unsigned seed);
};

struct LstmState {
  Handle h;
  Handle c;
};

/// One step: two gate MVMs over concat(h_prev, x), three sigmoids and two tanhs,
/// c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell(ModelGraph& g, Handle x, Handle h_prev, Handle c_prev, const LstmWeights& w,
                    const std::string& name = "lstm");

/// Real-valued reference for one step, for tolerance checks.
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_reference(const Eigen::VectorXd& x, const Eigen::VectorXd& h,
                                                           const Eigen::VectorXd& c, const LstmWeights& w);

struct ConvShape {
  int height = 0, width = 0, channels = 0;
  int kernel_h = 0, kernel_w = 0, filters = 0, stride = 1;
  int out_h() const { return (height - kernel_h) / stride + 1; }
  int out_w() const { return (width - kernel_w) / stride + 1; }
  int window() const { return kernel_h * kernel_w * channels; }
};

/// x is the HWC-flattened image. w is window() x filters with row (i*S + j)*C + k.
/// Output index is (oy*OW + ox)*M + m.
Handle conv_layer(ModelGraph& g, Handle x, const ConvShape& s, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                  ActFn f, const std::string& name = "conv");

/// Direct real-valued convolution, same layouts as conv_layer.
Eigen::VectorXd conv_reference(const Eigen::VectorXd& x, const ConvShape& s, const Eigen::MatrixXd& w,
                               const Eigen::VectorXd& b);

/// Node count conv_layer adds for the given shape (bias present, activation f).
int conv_node_count(const ConvShape& s, ActFn f);
/// Node count lstm_cell adds.
int lstm_node_count();

}  // namespace puma::graph
