#include "s2r/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace s2r::ad {

namespace {

void check_finite(const Node& n, const char* op) {
  for (double x : n.v)
    if (!std::isfinite(x))
      throw NumericError(std::string("non-finite value produced by ") + op);
}

NodeP make_node(std::vector<int> shape, std::vector<NodeP> parents) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  n->v.resize(n->numel());
  return n;
}

size_t check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ValidationError(std::string(op) + ": shape mismatch");
  return a.numel();
}

}  // namespace

Tensor Tensor::leaf(std::vector<int> shape, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->v.assign(n->numel(), 0.0);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::leaf(std::vector<int> shape, std::vector<double> values,
                    bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  if (values.size() != n->numel())
    throw ValidationError("Tensor::leaf: value count does not match shape");
  n->v = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(n);
}

Tensor Tensor::scalar(double value) { return leaf({1}, {value}); }

double Tensor::item() const {
  if (numel() != 1) throw ValidationError("item(): tensor is not scalar");
  return node_->v[0];
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ValidationError("backward: loss must be scalar");
  // reverse topological order via iterative DFS over parent links
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->ensure_grad();
  loss.node()->g[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
}

Tensor detach(const Tensor& x) {
  return Tensor::leaf(x.shape(), x.values(), false);
}

// ---- convolution ----------------------------------------------------------

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 4 || ws.size() != 4)
    throw ValidationError("conv2d: expects 4-D input and weight");
  if (stride < 1 || pad < 0) throw ValidationError("conv2d: bad stride/pad");
  int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int F = ws[0], kh = ws[2], kw = ws[3];
  if (ws[1] != C) throw ValidationError("conv2d: channel mismatch");
  if (b.shape() != std::vector<int>{F})
    throw ValidationError("conv2d: bias shape mismatch");
  if (H + 2 * pad < kh || W + 2 * pad < kw)
    throw ValidationError("conv2d: kernel does not fit padded input");
  if ((H + 2 * pad - kh) % stride != 0 || (W + 2 * pad - kw) % stride != 0)
    throw ValidationError("conv2d: non-integral output extent");
  int Ho = (H + 2 * pad - kh) / stride + 1;
  int Wo = (W + 2 * pad - kw) / stride + 1;

  auto out = make_node({N, F, Ho, Wo}, {x.node(), w.node(), b.node()});
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  const double* bv = b.values().data();
  double* ov = out->v.data();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int f = 0; f < F; ++f) {
      for (int oh = 0; oh < Ho; ++oh) {
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = bv[f];
          int ih0 = oh * stride - pad;
          int iw0 = ow * stride - pad;
          for (int c = 0; c < C; ++c) {
            const double* xp = xv + ((static_cast<size_t>(n) * C + c) * H) * W;
            const double* wp =
                wv + ((static_cast<size_t>(f) * C + c) * kh) * kw;
            for (int r = 0; r < kh; ++r) {
              int ih = ih0 + r;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = xp + static_cast<size_t>(ih) * W;
              const double* wrow = wp + static_cast<size_t>(r) * kw;
              for (int s = 0; s < kw; ++s) {
                int iw = iw0 + s;
                if (iw < 0 || iw >= W) continue;
                acc += wrow[s] * xrow[iw];
              }
            }
          }
          ov[((static_cast<size_t>(n) * F + f) * Ho + oh) * Wo + ow] = acc;
        }
      }
    }
  }
  check_finite(*out, "conv2d");

  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  out->backward_fn = [=](Node& o) {
    const double* og = o.g.data();
    const double* xv = xn->v.data();
    const double* wv = wn->v.data();
    if (bn->requires_grad) {
      double* bg = bn->g.data();
      for (int n = 0; n < N; ++n)
        for (int f = 0; f < F; ++f) {
          double acc = 0;
          const double* op =
              og + (static_cast<size_t>(n) * F + f) * Ho * Wo;
          for (int i = 0; i < Ho * Wo; ++i) acc += op[i];
          bg[f] += acc;
        }
    }
    if (wn->requires_grad) {
      double* wg = wn->g.data();
#pragma omp parallel for collapse(2) schedule(static)
      for (int f = 0; f < F; ++f) {
        for (int c = 0; c < C; ++c) {
          for (int r = 0; r < kh; ++r) {
            for (int s = 0; s < kw; ++s) {
              double acc = 0;
              for (int n = 0; n < N; ++n) {
                const double* op =
                    og + (static_cast<size_t>(n) * F + f) * Ho * Wo;
                const double* xp =
                    xv + (static_cast<size_t>(n) * C + c) * H * W;
                for (int oh = 0; oh < Ho; ++oh) {
                  int ih = oh * stride - pad + r;
                  if (ih < 0 || ih >= H) continue;
                  const double* xrow = xp + static_cast<size_t>(ih) * W;
                  const double* orow = op + static_cast<size_t>(oh) * Wo;
                  for (int ow = 0; ow < Wo; ++ow) {
                    int iw = ow * stride - pad + s;
                    if (iw < 0 || iw >= W) continue;
                    acc += orow[ow] * xrow[iw];
                  }
                }
              }
              wg[((static_cast<size_t>(f) * C + c) * kh + r) * kw + s] += acc;
            }
          }
        }
      }
    }
    if (xn->requires_grad) {
      double* xg = xn->g.data();
#pragma omp parallel for collapse(2) schedule(static)
      for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
          double* xgp = xg + (static_cast<size_t>(n) * C + c) * H * W;
          for (int f = 0; f < F; ++f) {
            const double* op =
                og + (static_cast<size_t>(n) * F + f) * Ho * Wo;
            const double* wp =
                wv + (static_cast<size_t>(f) * C + c) * kh * kw;
            for (int oh = 0; oh < Ho; ++oh) {
              const double* orow = op + static_cast<size_t>(oh) * Wo;
              for (int r = 0; r < kh; ++r) {
                int ih = oh * stride - pad + r;
                if (ih < 0 || ih >= H) continue;
                double* xrow = xgp + static_cast<size_t>(ih) * W;
                const double* wrow = wp + static_cast<size_t>(r) * kw;
                for (int ow = 0; ow < Wo; ++ow) {
                  double go = orow[ow];
                  int iw0 = ow * stride - pad;
                  for (int s = 0; s < kw; ++s) {
                    int iw = iw0 + s;
                    if (iw < 0 || iw >= W) continue;
                    xrow[iw] += go * wrow[s];
                  }
                }
              }
            }
          }
        }
      }
    }
  };
  return Tensor(out);
}

// ---- elementwise ----------------------------------------------------------

Tensor leaky_relu(const Tensor& x, double slope) {
  auto out = make_node(x.shape(), {x.node()});
  size_t n = out->numel();
  for (size_t i = 0; i < n; ++i) {
    double v = x.values()[i];
    out->v[i] = v >= 0 ? v : slope * v;
  }
  auto xn = x.node();
  out->backward_fn = [xn, slope](Node& o) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < o.v.size(); ++i)
      xn->g[i] += o.g[i] * (xn->v[i] >= 0 ? 1.0 : slope);
  };
  return Tensor(out);
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor sigmoid(const Tensor& x) {
  auto out = make_node(x.shape(), {x.node()});
  size_t n = out->numel();
  for (size_t i = 0; i < n; ++i)
    out->v[i] = 1.0 / (1.0 + std::exp(-x.values()[i]));
  auto xn = x.node();
  auto on = out;
  out->backward_fn = [xn, on](Node& o) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < o.v.size(); ++i) {
      double y = on->v[i];
      xn->g[i] += o.g[i] * y * (1.0 - y);
    }
  };
  return Tensor(out);
}

Tensor instance_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                     double eps) {
  if (eps <= 0) throw ValidationError("instance_norm: eps must be > 0");
  const auto& xs = x.shape();
  if (xs.size() != 4) throw ValidationError("instance_norm: expects 4-D");
  int N = xs[0], C = xs[1], m = xs[2] * xs[3];
  if (gamma.shape() != std::vector<int>{C} ||
      beta.shape() != std::vector<int>{C})
    throw ValidationError("instance_norm: affine shape mismatch");

  auto out = make_node(xs, {x.node(), gamma.node(), beta.node()});
  // cache per-(n,c) mean and inverse sd for backward
  auto stats = std::make_shared<std::vector<double>>(
      static_cast<size_t>(N) * C * 2);
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const double* xp =
          x.values().data() + (static_cast<size_t>(n) * C + c) * m;
      double mean = 0;
      for (int i = 0; i < m; ++i) mean += xp[i];
      mean /= m;
      double var = 0;
      for (int i = 0; i < m; ++i) {
        double d = xp[i] - mean;
        var += d * d;
      }
      var /= m;
      double inv_sd = 1.0 / std::sqrt(var + eps);
      (*stats)[(static_cast<size_t>(n) * C + c) * 2] = mean;
      (*stats)[(static_cast<size_t>(n) * C + c) * 2 + 1] = inv_sd;
      double* op = out->v.data() + (static_cast<size_t>(n) * C + c) * m;
      double g = gamma.values()[c], bta = beta.values()[c];
      for (int i = 0; i < m; ++i)
        op[i] = (xp[i] - mean) * inv_sd * g + bta;
    }
  check_finite(*out, "instance_norm");

  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  out->backward_fn = [=](Node& o) {
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c) {
        size_t base = (static_cast<size_t>(n) * C + c) * m;
        const double* xp = xn->v.data() + base;
        const double* og = o.g.data() + base;
        double mean = (*stats)[(static_cast<size_t>(n) * C + c) * 2];
        double inv_sd = (*stats)[(static_cast<size_t>(n) * C + c) * 2 + 1];
        double gval = gn->v[c];
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int i = 0; i < m; ++i) {
          double xhat = (xp[i] - mean) * inv_sd;
          sum_dy += og[i];
          sum_dy_xhat += og[i] * xhat;
        }
        if (bn->requires_grad) bn->g[c] += sum_dy;
        if (gn->requires_grad) gn->g[c] += sum_dy_xhat;
        if (xn->requires_grad) {
          double* xg = xn->g.data() + base;
          for (int i = 0; i < m; ++i) {
            double xhat = (xp[i] - mean) * inv_sd;
            xg[i] += gval * inv_sd *
                     (og[i] - sum_dy / m - xhat * sum_dy_xhat / m);
          }
        }
      }
  };
  return Tensor(out);
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  if (factor < 1) throw ValidationError("upsample: factor must be >= 1");
  const auto& xs = x.shape();
  if (xs.size() != 4) throw ValidationError("upsample: expects 4-D");
  int N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  int Ho = H * factor, Wo = W * factor;
  auto out = make_node({N, C, Ho, Wo}, {x.node()});
  for (int nc = 0; nc < N * C; ++nc) {
    const double* xp = x.values().data() + static_cast<size_t>(nc) * H * W;
    double* op = out->v.data() + static_cast<size_t>(nc) * Ho * Wo;
    for (int oh = 0; oh < Ho; ++oh)
      for (int ow = 0; ow < Wo; ++ow)
        op[static_cast<size_t>(oh) * Wo + ow] =
            xp[static_cast<size_t>(oh / factor) * W + ow / factor];
  }
  auto xn = x.node();
  out->backward_fn = [=](Node& o) {
    if (!xn->requires_grad) return;
    for (int nc = 0; nc < N * C; ++nc) {
      double* xg = xn->g.data() + static_cast<size_t>(nc) * H * W;
      const double* og = o.g.data() + static_cast<size_t>(nc) * Ho * Wo;
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow)
          xg[static_cast<size_t>(oh / factor) * W + ow / factor] +=
              og[static_cast<size_t>(oh) * Wo + ow];
    }
  };
  return Tensor(out);
}

Tensor add(const Tensor& a, const Tensor& b) {
  size_t n = check_same_shape(a, b, "add");
  auto out = make_node(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n; ++i) out->v[i] = a.values()[i] + b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  out->backward_fn = [an, bn](Node& o) {
    if (an->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) an->g[i] += o.g[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) bn->g[i] += o.g[i];
  };
  return Tensor(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  size_t n = check_same_shape(a, b, "sub");
  auto out = make_node(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n; ++i) out->v[i] = a.values()[i] - b.values()[i];
  auto an = a.node();
  auto bn = b.node();
  out->backward_fn = [an, bn](Node& o) {
    if (an->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) an->g[i] += o.g[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) bn->g[i] -= o.g[i];
  };
  return Tensor(out);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  size_t n = check_same_shape(a, b, "mul");
  auto out = make_node(a.shape(), {a.node(), b.node()});
  for (size_t i = 0; i < n; ++i) out->v[i] = a.values()[i] * b.values()[i];
  check_finite(*out, "mul");
  auto an = a.node();
  auto bn = b.node();
  out->backward_fn = [an, bn](Node& o) {
    if (an->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) an->g[i] += o.g[i] * bn->v[i];
    if (bn->requires_grad)
      for (size_t i = 0; i < o.g.size(); ++i) bn->g[i] += o.g[i] * an->v[i];
  };
  return Tensor(out);
}

Tensor scale(const Tensor& x, double c) {
  auto out = make_node(x.shape(), {x.node()});
  for (size_t i = 0; i < out->numel(); ++i) out->v[i] = x.values()[i] * c;
  auto xn = x.node();
  out->backward_fn = [xn, c](Node& o) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < o.g.size(); ++i) xn->g[i] += o.g[i] * c;
  };
  return Tensor(out);
}

Tensor add_const(const Tensor& x, double c) {
  auto out = make_node(x.shape(), {x.node()});
  for (size_t i = 0; i < out->numel(); ++i) out->v[i] = x.values()[i] + c;
  auto xn = x.node();
  out->backward_fn = [xn](Node& o) {
    if (!xn->requires_grad) return;
    for (size_t i = 0; i < o.g.size(); ++i) xn->g[i] += o.g[i];
  };
  return Tensor(out);
}

Tensor sum(const Tensor& x) {
  auto out = make_node({1}, {x.node()});
  double acc = 0;
  for (double v : x.values()) acc += v;
  out->v[0] = acc;
  auto xn = x.node();
  out->backward_fn = [xn](Node& o) {
    if (!xn->requires_grad) return;
    for (double& g : xn->g) g += o.g[0];
  };
  return Tensor(out);
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor mean_sq_diff(const Tensor& x, double c) {
  auto out = make_node({1}, {x.node()});
  size_t n = x.numel();
  double acc = 0;
  for (double v : x.values()) {
    double d = v - c;
    acc += d * d;
  }
  out->v[0] = acc / static_cast<double>(n);
  auto xn = x.node();
  out->backward_fn = [xn, c, n](Node& o) {
    if (!xn->requires_grad) return;
    double k = 2.0 * o.g[0] / static_cast<double>(n);
    for (size_t i = 0; i < n; ++i) xn->g[i] += k * (xn->v[i] - c);
  };
  return Tensor(out);
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  if (xs.size() != 2 || ws.size() != 2 || xs[1] != ws[0])
    throw ValidationError("linear: shape mismatch");
  int N = xs[0], I = xs[1], O = ws[1];
  if (b.shape() != std::vector<int>{O})
    throw ValidationError("linear: bias shape mismatch");
  auto out = make_node({N, O}, {x.node(), w.node(), b.node()});
  for (int n = 0; n < N; ++n)
    for (int o = 0; o < O; ++o) {
      double acc = b.values()[o];
      for (int i = 0; i < I; ++i)
        acc += x.values()[static_cast<size_t>(n) * I + i] *
               w.values()[static_cast<size_t>(i) * O + o];
      out->v[static_cast<size_t>(n) * O + o] = acc;
    }
  check_finite(*out, "linear");
  auto xn = x.node();
  auto wn = w.node();
  auto bn = b.node();
  out->backward_fn = [=](Node& o) {
    for (int n = 0; n < N; ++n)
      for (int oo = 0; oo < O; ++oo) {
        double go = o.g[static_cast<size_t>(n) * O + oo];
        if (bn->requires_grad) bn->g[oo] += go;
        for (int i = 0; i < I; ++i) {
          if (wn->requires_grad)
            wn->g[static_cast<size_t>(i) * O + oo] +=
                go * xn->v[static_cast<size_t>(n) * I + i];
          if (xn->requires_grad)
            xn->g[static_cast<size_t>(n) * I + i] +=
                go * wn->v[static_cast<size_t>(i) * O + oo];
        }
      }
  };
  return Tensor(out);
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  const auto& xs = x.shape();
  if (xs.size() != 2) throw ValidationError("l2_normalize_rows: expects 2-D");
  int N = xs[0], D = xs[1];
  auto out = make_node(xs, {x.node()});
  auto norms = std::make_shared<std::vector<double>>(N);
  for (int n = 0; n < N; ++n) {
    const double* xp = x.values().data() + static_cast<size_t>(n) * D;
    double sq = 0;
    for (int d = 0; d < D; ++d) sq += xp[d] * xp[d];
    double norm = std::sqrt(sq + eps);
    (*norms)[n] = norm;
    double* op = out->v.data() + static_cast<size_t>(n) * D;
    for (int d = 0; d < D; ++d) op[d] = xp[d] / norm;
  }
  auto xn = x.node();
  auto on = out;
  out->backward_fn = [=](Node& o) {
    if (!xn->requires_grad) return;
    for (int n = 0; n < N; ++n) {
      const double* y = on->v.data() + static_cast<size_t>(n) * D;
      const double* og = o.g.data() + static_cast<size_t>(n) * D;
      double* xg = xn->g.data() + static_cast<size_t>(n) * D;
      double dot = 0;
      for (int d = 0; d < D; ++d) dot += y[d] * og[d];
      double inv_norm = 1.0 / (*norms)[n];
      for (int d = 0; d < D; ++d)
        xg[d] += (og[d] - y[d] * dot) * inv_norm;
    }
  };
  return Tensor(out);
}

Tensor gather_spatial(const Tensor& x, const std::vector<int>& indices) {
  const auto& xs = x.shape();
  if (xs.size() != 4 || xs[0] != 1)
    throw ValidationError("gather_spatial: expects [1,C,H,W]");
  int C = xs[1], HW = xs[2] * xs[3];
  for (int idx : indices)
    if (idx < 0 || idx >= HW)
      throw ValidationError("gather_spatial: index out of range");
  int N = static_cast<int>(indices.size());
  auto out = make_node({N, C}, {x.node()});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      out->v[static_cast<size_t>(n) * C + c] =
          x.values()[static_cast<size_t>(c) * HW + indices[n]];
  auto xn = x.node();
  auto idx_copy = std::make_shared<std::vector<int>>(indices);
  out->backward_fn = [=](Node& o) {
    if (!xn->requires_grad) return;
    for (int n = 0; n < N; ++n)
      for (int c = 0; c < C; ++c)
        xn->g[static_cast<size_t>(c) * HW + (*idx_copy)[n]] +=
            o.g[static_cast<size_t>(n) * C + c];
  };
  return Tensor(out);
}

Tensor patch_nce(const Tensor& tr, const Tensor& src, double tau) {
  if (tau <= 0) throw ValidationError("patch_nce: tau must be > 0");
  const auto& ts = tr.shape();
  if (ts.size() != 2 || src.shape() != ts)
    throw ValidationError("patch_nce: embedding sets mismatch");
  int N = ts[0], D = ts[1];
  if (N < 2) throw ValidationError("patch_nce: needs at least 2 patches");

  // s_ij = <tr_i, src_j>; loss = mean_i(logsumexp_j(s_ij/tau) - s_ii/tau)
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(N) * N);
  double loss = 0;
  std::vector<double> row(N);
  for (int i = 0; i < N; ++i) {
    const double* ti = tr.values().data() + static_cast<size_t>(i) * D;
    double maxv = -1e300;
    for (int j = 0; j < N; ++j) {
      const double* sj = src.values().data() + static_cast<size_t>(j) * D;
      double dot = 0;
      for (int d = 0; d < D; ++d) dot += ti[d] * sj[d];
      row[j] = dot / tau;
      maxv = std::max(maxv, row[j]);
    }
    double z = 0;
    for (int j = 0; j < N; ++j) z += std::exp(row[j] - maxv);
    double lse = maxv + std::log(z);
    loss += lse - row[i];
    for (int j = 0; j < N; ++j)
      (*probs)[static_cast<size_t>(i) * N + j] = std::exp(row[j] - lse);
  }
  loss /= N;
  if (!std::isfinite(loss)) throw NumericError("patch_nce: non-finite loss");

  auto out = make_node({1}, {tr.node(), src.node()});
  out->v[0] = loss;
  auto tn = tr.node();
  auto sn = src.node();
  out->backward_fn = [=](Node& o) {
    double k = o.g[0] / (static_cast<double>(N) * tau);
    // dL/ds_ij = (p_ij - delta_ij) * k
    for (int i = 0; i < N; ++i) {
      const double* ti = tn->v.data() + static_cast<size_t>(i) * D;
      double* tg = tn->requires_grad
                       ? tn->g.data() + static_cast<size_t>(i) * D
                       : nullptr;
      for (int j = 0; j < N; ++j) {
        double ds = ((*probs)[static_cast<size_t>(i) * N + j] -
                     (i == j ? 1.0 : 0.0)) *
                    k;
        if (ds == 0) continue;
        const double* sj = sn->v.data() + static_cast<size_t>(j) * D;
        if (tg)
          for (int d = 0; d < D; ++d) tg[d] += ds * sj[d];
        if (sn->requires_grad) {
          double* sg = sn->g.data() + static_cast<size_t>(j) * D;
          for (int d = 0; d < D; ++d) sg[d] += ds * ti[d];
        }
      }
    }
  };
  return Tensor(out);
}

// ---- optimizer ------------------------------------------------------------

void adam_step(std::vector<Tensor>& params, AdamState& state,
               const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      state.m[p].assign(params[p].numel(), 0.0);
      state.v[p].assign(params[p].numel(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw ValidationError("adam_step: state/params mismatch");
  ++state.t;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& node = *params[p].node();
    node.ensure_grad();
    auto& m = state.m[p];
    auto& v = state.v[p];
    for (size_t i = 0; i < node.v.size(); ++i) {
      double g = node.g[i];
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      node.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
      if (!std::isfinite(node.v[i]))
        throw NumericError("adam_step: non-finite parameter");
    }
  }
}

void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

// ---- checkpoint I/O -------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'S', '2', 'R', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
void read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof v);
}
}  // namespace

void save_checkpoint(const std::vector<NamedTensor>& tensors,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kMagic, sizeof kMagic);
  write_raw(os, static_cast<uint32_t>(tensors.size()));
  for (const auto& nt : tensors) {
    write_raw(os, static_cast<uint16_t>(nt.name.size()));
    os.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
    write_raw(os, static_cast<uint8_t>(nt.tensor.shape().size()));
    for (int e : nt.tensor.shape()) write_raw(os, static_cast<uint32_t>(e));
    write_raw(os, static_cast<uint8_t>(0));  // dtype 0 = float32
  }
  for (const auto& nt : tensors)
    for (double v : nt.tensor.values())
      write_raw(os, static_cast<float>(v));
  if (!os) throw IoError("short write: " + path);
}

void load_checkpoint(std::vector<NamedTensor>& tensors,
                     const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("not an S2RCKPT1 checkpoint: " + path);
  uint32_t count = 0;
  read_raw(is, count);
  tensors.clear();
  tensors.resize(count);
  for (auto& nt : tensors) {
    uint16_t len = 0;
    read_raw(is, len);
    nt.name.resize(len);
    is.read(nt.name.data(), len);
    uint8_t ndim = 0;
    read_raw(is, ndim);
    std::vector<int> shape(ndim);
    for (auto& e : shape) {
      uint32_t x = 0;
      read_raw(is, x);
      e = static_cast<int>(x);
    }
    uint8_t dtype = 0;
    read_raw(is, dtype);
    if (dtype != 0) throw IoError("unsupported dtype in " + path);
    nt.tensor = Tensor::leaf(std::move(shape));
  }
  for (auto& nt : tensors)
    for (double& v : nt.tensor.values()) {
      float f = 0;
      read_raw(is, f);
      v = f;
    }
  if (!is) throw IoError("checkpoint payload truncated: " + path);
}

}  // namespace s2r::ad
