#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "s2r/error.hpp"

namespace s2r::ad {

// Minimal reverse-mode engine: Tensor is a value-semantic handle to a graph
// node. Ops record parent links and a backward closure; backward() runs the
// closures in reverse topological order. Double precision throughout.

struct Node;
using NodeP = std::shared_ptr<Node>;

struct Node {
  std::vector<int> shape;
  std::vector<double> v;  // values, row-major
  std::vector<double> g;  // gradient accumulator, same extent when allocated
  bool requires_grad = false;
  std::vector<NodeP> parents;
  std::function<void(Node&)> backward_fn;  // accumulates into parents' g

  size_t numel() const {
    size_t n = 1;
    for (int e : shape) n *= static_cast<size_t>(e);
    return n;
  }
  void ensure_grad() {
    if (g.size() != v.size()) g.assign(v.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodeP n) : node_(std::move(n)) {}

  static Tensor leaf(std::vector<int> shape, bool requires_grad = false);
  static Tensor leaf(std::vector<int> shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const { return node_->shape; }
  size_t numel() const { return node_->numel(); }
  std::vector<double>& values() { return node_->v; }
  const std::vector<double>& values() const { return node_->v; }
  std::vector<double>& grad() { return node_->g; }
  const std::vector<double>& grad() const { return node_->g; }
  bool requires_grad() const { return node_->requires_grad; }
  double item() const;  // scalar value; throws unless numel == 1

  void zero_grad() { node_->g.assign(node_->v.size(), 0.0); }

  NodeP node() const { return node_; }

 private:
  NodeP node_;
};

// Populates d loss / d leaf for every requires_grad leaf reachable from loss.
// Repeated calls without zero_grad accumulate. Throws on non-scalar loss.
void backward(const Tensor& loss);

// Leaf copy of the values; gradients do not flow past it.
Tensor detach(const Tensor& x);

// ---- operators ------------------------------------------------------------

// x: [N,C,H,W], w: [F,C,kh,kw], b: [F]. Cross-correlation semantics; the
// output extent (H + 2 pad - kh) / stride + 1 must divide exactly.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);

Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Per-(sample, channel) normalization over spatial dims, then learnable
// affine. gamma/beta: [C].
Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps = 1e-5);

Tensor upsample_nearest(const Tensor& x, int factor);

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);
Tensor add_const(const Tensor& x, double c);

Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar

// mean((x - c)^2), scalar; the least-squares GAN building block.
Tensor mean_sq_diff(const Tensor& x, double c);

// x: [N,I], w: [I,O], b: [O] -> [N,O]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Row-wise L2 normalization of [N,D].
Tensor l2_normalize_rows(const Tensor& x, double eps = 1e-12);

// Gather feature vectors at spatial positions from [1,C,H,W] -> [N,C].
// indices are flattened y*W+x positions.
Tensor gather_spatial(const Tensor& x, const std::vector<int>& indices);

// Patch-wise InfoNCE over unit-norm embeddings tr, src: [N,D].
// loss = mean_i ( logsumexp_j(s_ij / tau) - s_ii / tau ), s = tr src^T.
Tensor patch_nce(const Tensor& tr, const Tensor& src, double tau);

// ---- optimizer ------------------------------------------------------------

struct AdamState {
  std::vector<std::vector<double>> m, v;
  int64_t t = 0;
};

struct AdamConfig {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction; reads each param's grad in place.
void adam_step(std::vector<Tensor>& params, AdamState& state,
               const AdamConfig& cfg);

void zero_grads(std::vector<Tensor>& params);

// ---- checkpoint I/O -------------------------------------------------------

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Magic "S2RCKPT1", manifest (name, shape, dtype), then raw float32 LE
// payloads in manifest order.
void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path);
void load_checkpoint(std::vector<NamedTensor>& tensors,
                     const std::string& path);

}  // namespace s2r::ad
