#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>

#include "red/errors.hpp"
#include "red/tape.hpp"
#include "red/tensor.hpp"

namespace red {

/// The six bias-free convolution kernels of the gated unit. Input-facing
/// kernels are k×k×c×C_s, state-facing kernels k×k×C_s×C_s.
struct GruParams {
  Tensor w_zh, w_zx;  // update gate
  Tensor w_rh, w_rx;  // reset gate
  Tensor w_sh, w_sx;  // candidate state

  static GruParams zeros(std::size_t input_channels, std::size_t state_channels,
                         std::size_t kernel = 3) {
    const Shape hs{kernel, kernel, state_channels, state_channels};
    const Shape xs{kernel, kernel, input_channels, state_channels};
    return {Tensor(hs), Tensor(xs), Tensor(hs), Tensor(xs), Tensor(hs), Tensor(xs)};
  }

  /// Uniform in ±1/sqrt(fan-in), fan-in = k·k·(input channels).
  template <class Rng>
  static GruParams random(std::size_t input_channels, std::size_t state_channels,
                          std::size_t kernel, Rng& rng) {
    GruParams p = zeros(input_channels, state_channels, kernel);
    for (Tensor* t : {&p.w_zh, &p.w_zx, &p.w_rh, &p.w_rx, &p.w_sh, &p.w_sx}) {
      const double r = 1.0 / std::sqrt(static_cast<double>(t->dim(0) * t->dim(1) * t->dim(2)));
      std::uniform_real_distribution<double> u(-r, r);
      for (double& v : t->values()) v = u(rng);
    }
    return p;
  }

  void validate() const {
    const std::size_t k = w_zh.dim(0);
    if (k % 2 == 0) throw ConfigError("gru: kernel size must be odd");
    const std::size_t cs = w_zh.dim(3);
    for (const Tensor* t : {&w_zh, &w_rh, &w_sh}) {
      if (t->shape() != Shape{k, k, cs, cs}) throw ConfigError("gru: state kernel shape mismatch");
    }
    const std::size_t c = w_zx.dim(2);
    for (const Tensor* t : {&w_zx, &w_rx, &w_sx}) {
      if (t->shape() != Shape{k, k, c, cs}) throw ConfigError("gru: input kernel shape mismatch");
    }
  }
};

/// GRU kernels recorded on a tape.
struct GruVars {
  Var w_zh, w_zx, w_rh, w_rx, w_sh, w_sx;
};

inline GruVars record(Tape& tape, const GruParams& p, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? tape.leaf(t) : tape.constant(t); };
  return {put(p.w_zh), put(p.w_zx), put(p.w_rh), put(p.w_rx), put(p.w_sh), put(p.w_sx)};
}

inline Tensor init_state(std::size_t n1, std::size_t state_channels) {
  return Tensor({n1, n1, state_channels});
}

/// Test seam: replaces the update gate z with a constant.
struct GateOverride {
  std::optional<double> update;
};

/// One recurrent update:
///   z  = σ(W_zh∗s + W_zx∗x)
///   v  = σ(W_rh∗s + W_rx∗x)
///   s~ = tanh(W_sh∗(v∘s) + W_sx∗x)
///   s' = (1−z)∘s + z∘s~
inline Var gru_step(Tape& tape, Var state, Var input, const GruVars& p,
                    const GateOverride& gate = {}) {
  const Tensor& s = tape.value(state);
  const Tensor& x = tape.value(input);
  const Tensor& wzh = tape.value(p.w_zh);
  const Tensor& wzx = tape.value(p.w_zx);
  if (s.rank() != 3 || x.rank() != 3 || s.dim(0) != x.dim(0) || s.dim(1) != x.dim(1)) {
    throw InvalidArgument("gru_step: state " + to_string(s.shape()) + " and input " +
                          to_string(x.shape()) + " must share spatial extents");
  }
  if (wzh.dim(2) != s.dim(2) || wzx.dim(2) != x.dim(2) || wzh.dim(3) != s.dim(2)) {
    throw InvalidArgument("gru_step: kernels do not match state " + to_string(s.shape()) +
                          " / input " + to_string(x.shape()));
  }
  Var z;
  if (gate.update) {
    z = tape.constant(Tensor(s.shape(), *gate.update));
  } else {
    z = tape.sigmoid(tape.add(tape.conv2d_same(state, p.w_zh), tape.conv2d_same(input, p.w_zx)));
  }
  const Var v =
      tape.sigmoid(tape.add(tape.conv2d_same(state, p.w_rh), tape.conv2d_same(input, p.w_rx)));
  const Var candidate = tape.tanh(tape.add(tape.conv2d_same(tape.hadamard(v, state), p.w_sh),
                                           tape.conv2d_same(input, p.w_sx)));
  // (1−z)∘s + z∘s~ == s + z∘(s~ − s)
  return tape.add(state, tape.hadamard(z, tape.sub(candidate, state)));
}

inline Tensor gru_step(const Tensor& state, const Tensor& input, const GruParams& p,
                       const GateOverride& gate = {}) {
  Tape tape;
  const Var s = tape.constant(state);
  const Var x = tape.constant(input);
  return tape.value(gru_step(tape, s, x, record(tape, p, false), gate));
}

}  // namespace red
