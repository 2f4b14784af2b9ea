#pragma once
/**
 * @file tape.hpp
 * @brief Reverse-mode differentiation tape.
 *
 * The tape records primitive operations of one forward evaluation as a flat
 * array of nodes; replaying it backward accumulates adjoints for every
 * recorded input and parameter. Local partials are recomputed from stored
 * values during the sweep, so a node costs 16 bytes plus two doubles.
 *
 * Var is a lightweight handle: either a constant (id < 0, not on the tape)
 * or a reference to a tape node. Arithmetic between constants folds
 * immediately; mixed arithmetic records a node. Because the recorded value
 * is computed with exactly the same double expression as the constant fold,
 * a function templated on the scalar type produces bitwise-identical values
 * whether instantiated with double or Var.
 */

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

#include "njsde/common.hpp"

namespace njsde::ad {

enum class Op : std::uint8_t {
  Leaf,
  Add,   // a + b
  Sub,   // a - b
  Mul,   // a * b
  Div,   // a / b
  Max2,  // max(a, b), ties route to a
  AddC,  // a + aux
  MulC,  // a * aux
  DivC,  // a / aux
  CSub,  // aux - a
  CDiv,  // aux / a
  MaxC,  // max(a, aux)
  Neg,
  Tanh,
  TanhHead, // tanh clamped to the open interval (-1, 1)
  Softplus,
  Exp,
  Log,
  Sqrt,
  Max0,  // max(a, 0)
  Dense, // aux-free affine row: value = v[c] + sum_i v[a+i] * v[b+i]
};

/// Largest tanh-head magnitude; keeps 1 - rho^2 strictly positive.
inline constexpr double kTanhHeadClamp = 1.0 - 1e-12;

inline double tanh_head(double x) {
  double t = std::tanh(x);
  if (t > kTanhHeadClamp) return kTanhHeadClamp;
  if (t < -kTanhHeadClamp) return -kTanhHeadClamp;
  return t;
}

class Tape {
public:
  struct Node {
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::uint32_t c = 0;
    std::uint16_t k = 0;
    Op op = Op::Leaf;
  };

  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  double value(std::uint32_t id) const { return val_[id]; }
  double adjoint(std::uint32_t id) const { return adj_[id]; }

  std::uint32_t leaf(double v) { return push(Op::Leaf, v, 0, 0); }

  /// Truncates the tape back to n nodes; node ids below n stay valid.
  void rewind(std::size_t n) {
    nodes_.resize(n);
    val_.resize(n);
    aux_.resize(n);
  }

  std::uint32_t push(Op op, double v, std::uint32_t a, std::uint32_t b,
                     double aux = 0.0, std::uint32_t c = 0,
                     std::uint16_t k = 0) {
    Node n;
    n.a = a;
    n.b = b;
    n.c = c;
    n.k = k;
    n.op = op;
    nodes_.push_back(n);
    val_.push_back(v);
    aux_.push_back(aux);
    return static_cast<std::uint32_t>(nodes_.size() - 1);
  }

  /// Zeroes adjoints on [lo, hi).
  void zero_adjoints(std::size_t lo, std::size_t hi) {
    if (adj_.size() < val_.size()) adj_.resize(val_.size(), 0.0);
    std::fill(adj_.begin() + static_cast<std::ptrdiff_t>(lo),
              adj_.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
  }

  /// Full backward sweep from seed with all adjoints reset first.
  void backward(std::uint32_t seed, double seed_adjoint = 1.0) {
    if (nodes_.empty()) throw EmptyTape("backward on empty tape");
    adj_.assign(val_.size(), 0.0);
    adj_[seed] = seed_adjoint;
    sweep(seed, 0);
  }

  /// Backward sweep that only resets adjoints at and above `base`.
  /// Contributions flowing into nodes below `base` accumulate across calls,
  /// which lets one tape sum per-path parameter gradients.
  void backward_accumulate(std::uint32_t seed, double seed_adjoint,
                           std::uint32_t base) {
    if (adj_.size() < val_.size()) adj_.resize(val_.size(), 0.0);
    std::fill(adj_.begin() + base, adj_.begin() + static_cast<std::ptrdiff_t>(val_.size()), 0.0);
    adj_[seed] += seed_adjoint;
    sweep(seed, base);
  }

private:
  void sweep(std::uint32_t seed, std::uint32_t stop) {
    const Node* nodes = nodes_.data();
    const double* val = val_.data();
    const double* aux = aux_.data();
    double* adj = adj_.data();
    for (std::uint32_t i = seed + 1; i-- > stop;) {
      const double g = adj[i];
      if (g == 0.0) continue;
      const Node& n = nodes[i];
      switch (n.op) {
        case Op::Leaf:
          break;
        case Op::Add:
          adj[n.a] += g;
          adj[n.b] += g;
          break;
        case Op::Sub:
          adj[n.a] += g;
          adj[n.b] -= g;
          break;
        case Op::Mul:
          adj[n.a] += g * val[n.b];
          adj[n.b] += g * val[n.a];
          break;
        case Op::Div:
          adj[n.a] += g / val[n.b];
          adj[n.b] -= g * val[i] / val[n.b];
          break;
        case Op::Max2:
          adj[val[n.a] >= val[n.b] ? n.a : n.b] += g;
          break;
        case Op::AddC:
          adj[n.a] += g;
          break;
        case Op::MulC:
          adj[n.a] += g * aux[i];
          break;
        case Op::DivC:
          adj[n.a] += g / aux[i];
          break;
        case Op::CSub:
          adj[n.a] -= g;
          break;
        case Op::CDiv:
          adj[n.a] -= g * val[i] / val[n.a];
          break;
        case Op::MaxC:
          if (val[n.a] >= aux[i]) adj[n.a] += g;
          break;
        case Op::Neg:
          adj[n.a] -= g;
          break;
        case Op::Tanh:
        case Op::TanhHead:
          adj[n.a] += g * (1.0 - val[i] * val[i]);
          break;
        case Op::Softplus:
          adj[n.a] += g * sigmoid(val[n.a]);
          break;
        case Op::Exp:
          adj[n.a] += g * val[i];
          break;
        case Op::Log:
          adj[n.a] += g / val[n.a];
          break;
        case Op::Sqrt:
          adj[n.a] += g * 0.5 / val[i];
          break;
        case Op::Max0:
          if (val[n.a] > 0.0) adj[n.a] += g;
          break;
        case Op::Dense: {
          const std::uint32_t w = n.a, x = n.b;
          adj[n.c] += g;
          for (std::uint16_t j = 0; j < n.k; ++j) {
            adj[w + j] += g * val[x + j];
            adj[x + j] += g * val[w + j];
          }
          break;
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<double> val_;
  std::vector<double> aux_;
  std::vector<double> adj_;
};

// ---------------------------------------------------------------------------
// Var: scalar handle over the tape (id < 0 means plain constant).
// ---------------------------------------------------------------------------

struct Var {
  double v = 0.0;
  std::int64_t id = -1;
  Tape* t = nullptr;

  Var() = default;
  /*implicit*/ Var(double value) : v(value) {}
  Var(double value, std::int64_t id_, Tape* tape) : v(value), id(id_), t(tape) {}

  bool is_const() const { return id < 0; }
  std::uint32_t uid() const { return static_cast<std::uint32_t>(id); }
};

inline Var make_leaf(Tape& t, double v) {
  return Var(v, t.leaf(v), &t);
}

namespace detail {
inline Tape* tape_of(const Var& a, const Var& b) {
  return a.t ? a.t : b.t;
}
} // namespace detail

inline Var operator+(const Var& a, const Var& b) {
  double r = a.v + b.v;
  if (a.is_const() && b.is_const()) return Var(r);
  Tape* t = detail::tape_of(a, b);
  if (b.is_const()) return Var(r, t->push(Op::AddC, r, a.uid(), 0, b.v), t);
  if (a.is_const()) return Var(r, t->push(Op::AddC, r, b.uid(), 0, a.v), t);
  return Var(r, t->push(Op::Add, r, a.uid(), b.uid()), t);
}

inline Var operator-(const Var& a, const Var& b) {
  double r = a.v - b.v;
  if (a.is_const() && b.is_const()) return Var(r);
  Tape* t = detail::tape_of(a, b);
  if (b.is_const()) return Var(r, t->push(Op::AddC, r, a.uid(), 0, -b.v), t);
  if (a.is_const()) return Var(r, t->push(Op::CSub, r, b.uid(), 0, a.v), t);
  return Var(r, t->push(Op::Sub, r, a.uid(), b.uid()), t);
}

inline Var operator*(const Var& a, const Var& b) {
  double r = a.v * b.v;
  if (a.is_const() && b.is_const()) return Var(r);
  Tape* t = detail::tape_of(a, b);
  if (b.is_const()) return Var(r, t->push(Op::MulC, r, a.uid(), 0, b.v), t);
  if (a.is_const()) return Var(r, t->push(Op::MulC, r, b.uid(), 0, a.v), t);
  return Var(r, t->push(Op::Mul, r, a.uid(), b.uid()), t);
}

inline Var operator/(const Var& a, const Var& b) {
  double r = a.v / b.v;
  if (a.is_const() && b.is_const()) return Var(r);
  Tape* t = detail::tape_of(a, b);
  if (b.is_const()) return Var(r, t->push(Op::DivC, r, a.uid(), 0, b.v), t);
  if (a.is_const()) return Var(r, t->push(Op::CDiv, r, b.uid(), 0, a.v), t);
  return Var(r, t->push(Op::Div, r, a.uid(), b.uid()), t);
}

inline Var operator-(const Var& a) {
  if (a.is_const()) return Var(-a.v);
  return Var(-a.v, a.t->push(Op::Neg, -a.v, a.uid(), 0), a.t);
}

inline Var operator+(const Var& a, double b) { return a + Var(b); }
inline Var operator+(double a, const Var& b) { return Var(a) + b; }
inline Var operator-(const Var& a, double b) { return a - Var(b); }
inline Var operator-(double a, const Var& b) { return Var(a) - b; }
inline Var operator*(const Var& a, double b) { return a * Var(b); }
inline Var operator*(double a, const Var& b) { return Var(a) * b; }
inline Var operator/(const Var& a, double b) { return a / Var(b); }
inline Var operator/(double a, const Var& b) { return Var(a) / b; }

// Unary math. The double overloads let code templated on the scalar type
// call these unqualified and work for both plain and taped evaluation.

inline double vtanh(double x) { return std::tanh(x); }
inline Var vtanh(const Var& a) {
  double r = std::tanh(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Tanh, r, a.uid(), 0), a.t);
}

inline double vtanh_head(double x) { return tanh_head(x); }
inline Var vtanh_head(const Var& a) {
  double r = tanh_head(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::TanhHead, r, a.uid(), 0), a.t);
}

inline double vsoftplus(double x) { return softplus(x); }
inline Var vsoftplus(const Var& a) {
  double r = softplus(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Softplus, r, a.uid(), 0), a.t);
}

inline double vexp(double x) { return std::exp(x); }
inline Var vexp(const Var& a) {
  double r = std::exp(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Exp, r, a.uid(), 0), a.t);
}

inline double vlog(double x) { return std::log(x); }
inline Var vlog(const Var& a) {
  double r = std::log(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Log, r, a.uid(), 0), a.t);
}

inline double vsqrt(double x) { return std::sqrt(x); }
inline Var vsqrt(const Var& a) {
  double r = std::sqrt(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Sqrt, r, a.uid(), 0), a.t);
}

inline double vmax0(double x) { return x > 0.0 ? x : 0.0; }
inline Var vmax0(const Var& a) {
  double r = vmax0(a.v);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::Max0, r, a.uid(), 0), a.t);
}

inline double vmax(double x, double c) { return x >= c ? x : c; }
inline Var vmax(const Var& a, double c) {
  double r = vmax(a.v, c);
  if (a.is_const()) return Var(r);
  return Var(r, a.t->push(Op::MaxC, r, a.uid(), 0, c), a.t);
}

inline double vmax2(double x, double y) { return x >= y ? x : y; }
inline Var vmax2(const Var& a, const Var& b) {
  double r = vmax2(a.v, b.v);
  if (a.is_const() && b.is_const()) return Var(r);
  Tape* t = detail::tape_of(a, b);
  if (a.is_const()) return Var(r, t->push(Op::MaxC, r, b.uid(), 0, a.v), t);
  if (b.is_const()) return Var(r, t->push(Op::MaxC, r, a.uid(), 0, b.v), t);
  return Var(r, t->push(Op::Max2, r, a.uid(), b.uid()), t);
}

inline double value_of(double x) { return x; }
inline double value_of(const Var& a) { return a.v; }

/// Straight-through: forward value is `hard`, gradient passes to `soft`
/// with local partial one.
inline double st_through(double /*soft*/, double hard) { return hard; }
inline Var st_through(const Var& soft, double hard) {
  if (soft.is_const()) return Var(hard);
  return Var(hard, soft.t->push(Op::AddC, hard, soft.uid(), 0, 0.0), soft.t);
}

/// Affine row over contiguous tape ranges: weights at [w_base, w_base+k),
/// inputs at [x_base, x_base+k), bias at bias_id. The value is accumulated
/// as bias then products in ascending index order; plain-double network
/// evaluation follows the same order so both paths agree bitwise.
inline Var dense_row(Tape& t, std::uint32_t w_base, std::uint32_t x_base,
                     std::uint32_t bias_id, std::uint16_t k) {
  double acc = t.value(bias_id);
  for (std::uint16_t j = 0; j < k; ++j)
    acc += t.value(w_base + j) * t.value(x_base + j);
  return Var(acc, t.push(Op::Dense, acc, w_base, x_base, 0.0, bias_id, k), &t);
}

/// Seeds the most recently recorded node and sweeps; gradients are then
/// available from Tape::adjoint for every recorded input and parameter.
inline void backward(Tape& t, double seed_gradient = 1.0) {
  if (t.empty()) throw EmptyTape("backward on empty tape");
  t.backward(static_cast<std::uint32_t>(t.size() - 1), seed_gradient);
}

} // namespace njsde::ad
