#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "red/errors.hpp"
#include "red/tensor.hpp"

namespace red {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
  friend bool operator==(Var, Var) = default;
};

/// Reverse-mode differentiation record for one rollout.
///
/// Every op appends a node holding its value and an adjoint rule. backward()
/// replays the rules in exact reverse creation order, summing adjoints when a
/// value feeds several consumers (a parameter used at every step of an
/// episode accumulates one contribution per use). Nodes that cannot reach a
/// trainable leaf carry no adjoint rule and cost nothing on the way back.
///
/// A Tape is single-threaded; parallel rollouts each own one.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  Var leaf(Tensor value, bool trainable = true) {
    return push(std::move(value), trainable, trainable, nullptr);
  }
  Var constant(Tensor value) { return push(std::move(value), false, false, nullptr); }

  const Tensor& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adjoint of v from the last backward(); zeros if v was not reached.
  Tensor grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor(n.value.shape());
    return n.grad;
  }

  void clear() { nodes_.clear(); }

  // ---- elementwise -------------------------------------------------------

  Var add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Tensor out = value(a);
    const auto& bv = value(b).values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return binary(std::move(out), a, b, [a, b](Tape& t, const Tensor& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    });
  }

  Var sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Tensor out = value(a);
    const auto& bv = value(b).values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    return binary(std::move(out), a, b, [a, b](Tape& t, const Tensor& g) {
      t.accumulate(a, g);
      t.accumulate(b, g, -1.0);
    });
  }

  Var hadamard(Var a, Var b) {
    require_same_shape(value(a), value(b), "hadamard");
    Tensor out = value(a);
    const auto& bv = value(b).values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    return binary(std::move(out), a, b, [a, b](Tape& t, const Tensor& g) {
      if (t.requires_grad(a)) {
        Tensor ga = g;
        const auto& bv = t.value(b).values();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
        t.accumulate(a, ga);
      }
      if (t.requires_grad(b)) {
        Tensor gb = g;
        const auto& av = t.value(a).values();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
        t.accumulate(b, gb);
      }
    });
  }

  /// scale·x + shift
  Var affine(Var x, double scale, double shift = 0.0) {
    Tensor out = value(x);
    for (double& v : out.values()) v = scale * v + shift;
    return unary(std::move(out), x, [x, scale](Tape& t, const Tensor& g) {
      t.accumulate(x, g, scale);
    });
  }

  Var scale(Var x, double s) { return affine(x, s, 0.0); }

  Var sigmoid(Var x) {
    Tensor out = value(x);
    for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
    const std::size_t self = nodes_.size();
    return unary(std::move(out), x, [x, self](Tape& t, const Tensor& g) {
      Tensor gx = g;
      const auto& y = t.nodes_[self].value.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= y[i] * (1.0 - y[i]);
      t.accumulate(x, gx);
    });
  }

  Var tanh(Var x) {
    Tensor out = value(x);
    for (double& v : out.values()) v = std::tanh(v);
    const std::size_t self = nodes_.size();
    return unary(std::move(out), x, [x, self](Tape& t, const Tensor& g) {
      Tensor gx = g;
      const auto& y = t.nodes_[self].value.values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 1.0 - y[i] * y[i];
      t.accumulate(x, gx);
    });
  }

  Var square(Var x) {
    Tensor out = value(x);
    for (double& v : out.values()) v = v * v;
    return unary(std::move(out), x, [x](Tape& t, const Tensor& g) {
      Tensor gx = g;
      const auto& xv = t.value(x).values();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= 2.0 * xv[i];
      t.accumulate(x, gx);
    });
  }

  /// Clamp to [lo, hi]; adjoint passes only where lo < x < hi.
  Var clamp(Var x, double lo, double hi) {
    Tensor out = value(x);
    for (double& v : out.values()) v = std::clamp(v, lo, hi);
    return unary(std::move(out), x, [x, lo, hi](Tape& t, const Tensor& g) {
      Tensor gx = g;
      const auto& xv = t.value(x).values();
      for (std::size_t i = 0; i < gx.size(); ++i) {
        if (!(xv[i] > lo && xv[i] < hi)) gx[i] = 0.0;
      }
      t.accumulate(x, gx);
    });
  }

  // ---- structural ----------------------------------------------------------

  Var reshape(Var x, Shape shape) {
    Tensor out = value(x).reshaped(std::move(shape));
    return unary(std::move(out), x, [x](Tape& t, const Tensor& g) {
      t.accumulate(x, g.reshaped(t.value(x).shape()));
    });
  }

  Var sum(Var x) {
    Tensor out = Tensor::scalar(value(x).sum());
    return unary(std::move(out), x, [x](Tape& t, const Tensor& g) {
      t.accumulate(x, Tensor(t.value(x).shape(), g[0]));
    });
  }

  /// Σ_i weights[i]·xs[i] over scalar nodes.
  Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
    if (xs.size() != weights.size()) {
      throw InvalidArgument("weighted_sum: " + std::to_string(xs.size()) + " terms but " +
                            std::to_string(weights.size()) + " weights");
    }
    double total = 0.0;
    bool rg = false;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (value(xs[i]).size() != 1) throw InvalidArgument("weighted_sum: terms must be scalars");
      total += weights[i] * value(xs[i])[0];
      rg = rg || requires_grad(xs[i]);
    }
    std::vector<Var> in(xs.begin(), xs.end());
    std::vector<double> w(weights.begin(), weights.end());
    Backward rule;
    if (rg) {
      rule = [in = std::move(in), w = std::move(w)](Tape& t, const Tensor& g) {
        for (std::size_t i = 0; i < in.size(); ++i) {
          if (w[i] != 0.0) t.accumulate(in[i], g, w[i]);
        }
      };
    }
    return push(Tensor::scalar(total), rg, false, std::move(rule));
  }

  // ---- linear algebra ------------------------------------------------------

  /// W (out×in) applied to x flattened (in values); result has shape {out}.
  Var matvec(Var w, Var x) {
    const Tensor& wv = value(w);
    const Tensor& xv = value(x);
    if (wv.rank() != 2 || wv.dim(1) != xv.size()) {
      throw InvalidArgument("matvec: weight " + to_string(wv.shape()) + " cannot map input " +
                            to_string(xv.shape()));
    }
    const std::size_t rows = wv.dim(0), cols = wv.dim(1);
    Tensor out({rows});
    for (std::size_t r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cols; ++c) acc += wv[r * cols + c] * xv[c];
      out[r] = acc;
    }
    return binary(std::move(out), w, x, [w, x, rows, cols](Tape& t, const Tensor& g) {
      if (t.requires_grad(w)) {
        Tensor gw({rows, cols});
        const Tensor& xv = t.value(x);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] = g[r] * xv[c];
        }
        t.accumulate(w, gw);
      }
      if (t.requires_grad(x)) {
        Tensor gx(t.value(x).shape());
        const Tensor& wv = t.value(w);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gx[c] += g[r] * wv[r * cols + c];
        }
        t.accumulate(x, gx);
      }
    });
  }

  Var conv2d_same(Var input, Var kernel) {
    Tensor out = red::conv2d_same(value(input), value(kernel));
    return binary(std::move(out), input, kernel, [input, kernel](Tape& t, const Tensor& g) {
      const Tensor& in = t.value(input);
      const Tensor& k = t.value(kernel);
      const std::size_t h = in.dim(0), w = in.dim(1), cin = in.dim(2);
      const std::size_t kh = k.dim(0), kw = k.dim(1), cout = k.dim(3);
      const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
      const bool want_in = t.requires_grad(input), want_k = t.requires_grad(kernel);
      Tensor gin = want_in ? Tensor(in.shape()) : Tensor();
      Tensor gk = want_k ? Tensor(k.shape()) : Tensor();
      for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
          const double* grow = g.data().data() + (r * w + c) * cout;
          for (std::size_t i = 0; i < kh; ++i) {
            const auto rr = static_cast<std::ptrdiff_t>(r + i) - ph;
            if (rr < 0 || rr >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t j = 0; j < kw; ++j) {
              const auto cc = static_cast<std::ptrdiff_t>(c + j) - pw;
              if (cc < 0 || cc >= static_cast<std::ptrdiff_t>(w)) continue;
              const std::size_t px = (static_cast<std::size_t>(rr) * w + static_cast<std::size_t>(cc)) * cin;
              const std::size_t kk = (i * kw + j) * cin * cout;
              for (std::size_t ci = 0; ci < cin; ++ci) {
                const double* krow = k.data().data() + kk + ci * cout;
                if (want_in) {
                  double acc = 0.0;
                  for (std::size_t co = 0; co < cout; ++co) acc += grow[co] * krow[co];
                  gin[px + ci] += acc;
                }
                if (want_k) {
                  const double v = in[px + ci];
                  double* gkrow = gk.data().data() + kk + ci * cout;
                  for (std::size_t co = 0; co < cout; ++co) gkrow[co] += v * grow[co];
                }
              }
            }
          }
        }
      }
      if (want_in) t.accumulate(input, gin);
      if (want_k) t.accumulate(kernel, gk);
    });
  }

  // ---- differentiation -----------------------------------------------------

  /// Adjoint rule for a custom op: receives the output adjoint.
  using Backward = std::function<void(Tape&, const Tensor&)>;

  /// Records an op computed outside the tape. `rule` must route the output
  /// adjoint to `inputs` via accumulate().
  Var custom(Tensor out, std::span<const Var> inputs, Backward rule) {
    bool rg = false;
    for (Var v : inputs) rg = rg || requires_grad(v);
    return push(std::move(out), rg, false, rg ? std::move(rule) : Backward{});
  }

  /// Adds scale·g to the adjoint of v (no-op if v needs no gradient).
  void accumulate(Var v, const Tensor& g, double scale = 1.0) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.empty()) {
      n.grad = Tensor(n.value.shape());
    }
    auto& dst = n.grad.values();
    const auto& src = g.values();
    if (scale == 1.0) {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else {
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    }
  }

  void backward(Var loss) {
    const std::pair<Var, double> seed{loss, 1.0};
    backward(std::span<const std::pair<Var, double>>(&seed, 1));
  }

  /// Backpropagates Σ weight·node for scalar seed nodes. Clears any
  /// previous adjoints first.
  void backward(std::span<const std::pair<Var, double>> seeds) {
    for (Node& n : nodes_) n.grad = Tensor();
    std::size_t last = 0;
    for (const auto& [v, w] : seeds) {
      if (value(v).size() != 1) {
        throw InvalidArgument("backward: loss must be a scalar, got shape " +
                              to_string(value(v).shape()));
      }
      accumulate(v, Tensor::scalar(1.0), w);
      last = std::max(last, v.id + 1);
    }
    for (std::size_t i = last; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
    }
    for (Node& n : nodes_) {
      if (n.trainable && n.grad.empty()) n.grad = Tensor(n.value.shape());
    }
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool trainable = false;
    Backward backward;
  };

  Var push(Tensor value, bool rg, bool trainable, Backward rule) {
    nodes_.push_back(Node{std::move(value), Tensor(), rg, trainable, std::move(rule)});
    return Var{nodes_.size() - 1};
  }

  template <class Rule>
  Var unary(Tensor out, Var x, Rule rule) {
    const bool rg = requires_grad(x);
    return push(std::move(out), rg, false, rg ? Backward(std::move(rule)) : Backward{});
  }

  template <class Rule>
  Var binary(Tensor out, Var a, Var b, Rule rule) {
    const bool rg = requires_grad(a) || requires_grad(b);
    return push(std::move(out), rg, false, rg ? Backward(std::move(rule)) : Backward{});
  }

  std::vector<Node> nodes_;
};

}  // namespace red
