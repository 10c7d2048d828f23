#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "chemo/rng.hpp"

namespace chemo {

enum class Head { linear, sigmoid };

/// Fully connected multilayer perceptron, ReLU hidden activations, and either
/// a linear head (value estimates) or a sigmoid head (normalized doses).
struct Net {
  std::vector<Eigen::MatrixXd> W;  // W[l] has shape out_l x in_l
  std::vector<Eigen::VectorXd> b;
  Head head = Head::linear;

  /// He-uniform init; if final_scale > 0 the output layer is drawn from
  /// U(-final_scale, final_scale) instead (keeps initial heads near neutral).
  static Net make(int in, const std::vector<int>& hidden, int out, Head head,
                  RngStream& rng, double final_scale = 0.0);

  int input_dim() const { return static_cast<int>(W.front().cols()); }
  int output_dim() const { return static_cast<int>(W.back().rows()); }
  int layers() const { return static_cast<int>(W.size()); }
  bool finite() const;
};

/// Activations kept for reverse mode: a[0] is the input batch, a[l] the
/// post-activation output of layer l (rows are batch samples).
struct FwdCache {
  std::vector<Eigen::MatrixXd> a;
};

struct Grads {
  std::vector<Eigen::MatrixXd> W;
  std::vector<Eigen::VectorXd> b;

  void set_zero_like(const Net& net);
  void add(const Grads& other);
  double max_abs() const;
};

/// Batch forward pass, OpenMP-parallel over fixed row chunks. Chunk layout
/// depends only on (batch, chunks), so results are reproducible for a given
/// config. The _serial variant runs the identical chunking sequentially and
/// is kept as the reference implementation for equivalence tests.
Eigen::MatrixXd forward(const Net& net, const Eigen::MatrixXd& X,
                        FwdCache* cache = nullptr, int chunks = 1);
Eigen::MatrixXd forward_serial(const Net& net, const Eigen::MatrixXd& X,
                               FwdCache* cache = nullptr, int chunks = 1);

/// Reverse-mode gradients of a scalar loss given dLoss/dOutput. Per-chunk
/// partial gradients are reduced serially in chunk order, so parallel and
/// serial results are bit-identical. dX (optional) receives dLoss/dInput.
/// with_param_grads=false skips dW/db work when only dX is needed.
Grads backward(const Net& net, const FwdCache& cache, const Eigen::MatrixXd& dOut,
               Eigen::MatrixXd* dX = nullptr, int chunks = 1,
               bool with_param_grads = true);
Grads backward_serial(const Net& net, const FwdCache& cache,
                      const Eigen::MatrixXd& dOut, Eigen::MatrixXd* dX = nullptr,
                      int chunks = 1, bool with_param_grads = true);

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<Eigen::MatrixXd> mW, vW;
  std::vector<Eigen::VectorXd> mb, vb;

  void init(const Net& net);
  void step(Net& net, const Grads& g);
};

/// Polyak blend target <- (1 - tau) * target + tau * source; tau = 1 is a
/// hard sync.
void blend_towards(Net& target, const Net& source, double tau);

/// Exact-double JSON round-trip of the architecture and parameters.
std::string net_to_json(const Net& net);
Net net_from_json(const std::string& text);

}  // namespace chemo
