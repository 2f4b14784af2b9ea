#pragma once
/**
 * @file tensor_net.hpp
 * @brief Minimal dense feedforward networks with reverse-mode gradients.
 *
 * A Network is a stack of affine layers with a named hidden activation and
 * a named output head (Identity, SoftPlus or Tanh), evaluated either as
 * plain doubles or onto a Tape. Eight independently parameterized networks
 * form a NetworkSet whose parameters flatten into one vector with a stable
 * ordering (net by net, layer by layer, weights row-major then biases).
 */

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "njsde/common.hpp"
#include "njsde/tape.hpp"

namespace njsde::nets {

enum class Activation { Identity, SoftPlus, Tanh };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::SoftPlus: return "softplus";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "softplus") return Activation::SoftPlus;
  if (s == "tanh") return Activation::Tanh;
  throw BadSpec("unknown activation '" + s + "'");
}

struct NetSpec {
  std::vector<int> layer_sizes{4, 32, 32, 1};
  Activation hidden = Activation::Tanh;
  Activation output = Activation::Identity;
  double output_scale = 1.0;

  void validate() const {
    if (layer_sizes.size() < 2) throw BadSpec("need at least input and output layer");
    if (layer_sizes.front() != 4) throw BadSpec("networks take 4 input features");
    if (layer_sizes.back() != 1) throw BadSpec("networks are scalar valued");
    for (int n : layer_sizes)
      if (n <= 0) throw BadSpec("layer sizes must be positive");
    if (!(output_scale > 0.0) || !std::isfinite(output_scale))
      throw BadSpec("output_scale must be positive and finite");
  }
};

/// Reusable buffers for plain-double evaluation.
struct EvalScratch {
  std::vector<double> a, b;
};

class Network {
public:
  Network() = default;

  /// Reproducible initialization: weights N(0, 1/fan_in), biases zero.
  static Network init(const NetSpec& spec, std::uint64_t seed) {
    spec.validate();
    Network net;
    net.spec_ = spec;
    net.build_offsets();
    net.params_.assign(net.param_count_, 0.0);
    Rng rng(seed);
    const auto& ls = spec.layer_sizes;
    for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
      const int nin = ls[l], nout = ls[l + 1];
      const double scale = 1.0 / std::sqrt(static_cast<double>(nin));
      double* w = net.params_.data() + net.w_off_[l];
      for (int i = 0; i < nout * nin; ++i) w[i] = rng.normal() * scale;
      // biases stay zero
    }
    return net;
  }

  const NetSpec& spec() const { return spec_; }
  std::size_t param_count() const { return param_count_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& params() { return params_; }

  void set_params(std::vector<double> p) {
    if (p.size() != param_count_) throw ShapeMismatch("parameter count mismatch");
    params_ = std::move(p);
  }

  bool forced_zero() const { return force_zero_; }
  void set_forced_zero(bool v) { force_zero_ = v; }

  /// Plain-double evaluation. Accumulation order matches the taped path
  /// exactly (bias first, then products in ascending index order).
  double value(const std::array<double, 4>& x, EvalScratch& ws) const {
    if (force_zero_) return 0.0;
    for (double f : x)
      if (!std::isfinite(f)) throw NonFinite("non-finite network input");
    const auto& ls = spec_.layer_sizes;
    ws.a.assign(x.begin(), x.end());
    for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
      const int nin = ls[l], nout = ls[l + 1];
      const double* w = params_.data() + w_off_[l];
      const double* b = params_.data() + b_off_[l];
      ws.b.resize(static_cast<std::size_t>(nout));
      for (int u = 0; u < nout; ++u) {
        double acc = b[u];
        const double* wr = w + static_cast<std::size_t>(u) * nin;
        for (int j = 0; j < nin; ++j) acc += wr[j] * ws.a[static_cast<std::size_t>(j)];
        ws.b[static_cast<std::size_t>(u)] = acc;
      }
      const bool last = (l + 2 == ls.size());
      if (!last) {
        for (int u = 0; u < nout; ++u)
          ws.b[static_cast<std::size_t>(u)] = apply_hidden(spec_.hidden, ws.b[static_cast<std::size_t>(u)]);
      }
      ws.a.swap(ws.b);
    }
    double out = apply_head(spec_.output, ws.a[0]) * spec_.output_scale;
    if (!std::isfinite(out)) throw NonFinite("non-finite network output");
    return out;
  }

  double value(const std::array<double, 4>& x) const {
    EvalScratch ws;
    return value(x, ws);
  }

  /// Taped evaluation. Inputs must live at four consecutive tape ids
  /// starting at x_base, parameters at [param_base, param_base+param_count).
  ad::Var forward_from(ad::Tape& t, std::uint32_t x_base,
                       std::uint32_t param_base) const {
    if (force_zero_) return ad::Var(0.0);
    const auto& ls = spec_.layer_sizes;
    std::uint32_t cur = x_base;
    for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
      const int nin = ls[l], nout = ls[l + 1];
      const std::uint32_t wb = param_base + static_cast<std::uint32_t>(w_off_[l]);
      const std::uint32_t bb = param_base + static_cast<std::uint32_t>(b_off_[l]);
      const std::uint32_t dense_base = static_cast<std::uint32_t>(t.size());
      for (int u = 0; u < nout; ++u)
        ad::dense_row(t, wb + static_cast<std::uint32_t>(u * nin), cur, bb + static_cast<std::uint32_t>(u),
                      static_cast<std::uint16_t>(nin));
      const bool last = (l + 2 == ls.size());
      if (!last && spec_.hidden != Activation::Identity) {
        const std::uint32_t act_base = static_cast<std::uint32_t>(t.size());
        for (int u = 0; u < nout; ++u) {
          ad::Var z(t.value(dense_base + static_cast<std::uint32_t>(u)), dense_base + u, &t);
          if (spec_.hidden == Activation::Tanh)
            ad::vtanh(z);
          else
            ad::vsoftplus(z);
        }
        cur = act_base;
      } else {
        cur = dense_base;
      }
    }
    ad::Var z(t.value(cur), cur, &t);
    ad::Var out = z;
    switch (spec_.output) {
      case Activation::Identity: break;
      case Activation::SoftPlus: out = ad::vsoftplus(z); break;
      case Activation::Tanh: out = ad::vtanh_head(z); break;
    }
    if (spec_.output_scale != 1.0) out = out * spec_.output_scale;
    if (!std::isfinite(out.v)) throw NonFinite("non-finite network output");
    return out;
  }

private:
  static double apply_hidden(Activation a, double x) {
    switch (a) {
      case Activation::Identity: return x;
      case Activation::SoftPlus: return softplus(x);
      case Activation::Tanh: return std::tanh(x);
    }
    return x;
  }

  // The tanh head is clamped to the open interval so downstream terms like
  // sqrt(1 - rho^2) stay well defined.
  static double apply_head(Activation a, double x) {
    switch (a) {
      case Activation::Identity: return x;
      case Activation::SoftPlus: return softplus(x);
      case Activation::Tanh: return ad::tanh_head(x);
    }
    return x;
  }

  void build_offsets() {
    const auto& ls = spec_.layer_sizes;
    w_off_.clear();
    b_off_.clear();
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
      w_off_.push_back(off);
      off += static_cast<std::size_t>(ls[l]) * static_cast<std::size_t>(ls[l + 1]);
      b_off_.push_back(off);
      off += static_cast<std::size_t>(ls[l + 1]);
    }
    param_count_ = off;
  }

  NetSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> w_off_, b_off_;
  std::size_t param_count_ = 0;
  bool force_zero_ = false;

  friend struct NetworkIo;
};

/// Records the four features as leaves, binds the network's parameters as
/// leaves and evaluates. Gradients for both are available after backward().
struct ForwardRecord {
  ad::Var output;
  std::uint32_t input_base = 0;
  std::uint32_t param_base = 0;
};

inline ForwardRecord forward(ad::Tape& t, const Network& net,
                             const std::array<double, 4>& features) {
  for (double f : features)
    if (!std::isfinite(f)) throw NonFinite("non-finite network input");
  ForwardRecord rec;
  rec.param_base = static_cast<std::uint32_t>(t.size());
  for (double p : net.params()) t.leaf(p);
  rec.input_base = static_cast<std::uint32_t>(t.size());
  for (double f : features) t.leaf(f);
  rec.output = net.forward_from(t, rec.input_base, rec.param_base);
  if (rec.output.is_const()) {
    // forced-zero nets still yield a recorded output so backward has a seed
    rec.output = ad::make_leaf(t, rec.output.v);
  }
  return rec;
}

/// Gradient of the recorded output with respect to the network parameters,
/// read after a backward sweep.
inline std::vector<double> param_gradient(const ad::Tape& t, const Network& net,
                                          std::uint32_t param_base) {
  std::vector<double> g(net.param_count());
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = t.adjoint(param_base + static_cast<std::uint32_t>(i));
  return g;
}

// ---------------------------------------------------------------------------
// NetworkSet: the eight coefficient networks with a flat parameter vector.
// ---------------------------------------------------------------------------

class NetworkSet {
public:
  static constexpr std::size_t kCount = 8;

  NetworkSet() = default;
  explicit NetworkSet(std::vector<Network> nets) : nets_(std::move(nets)) {
    if (nets_.size() != kCount)
      throw ShapeMismatch("a NetworkSet holds exactly 8 networks");
    build_offsets();
  }

  const Network& net(std::size_t i) const { return nets_.at(i); }
  Network& net(std::size_t i) { return nets_.at(i); }
  std::size_t param_count() const { return total_; }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }

  /// Flat parameter vector, stable ordering.
  std::vector<double> flatten() const {
    std::vector<double> w;
    w.reserve(total_);
    for (const auto& n : nets_) w.insert(w.end(), n.params().begin(), n.params().end());
    return w;
  }

  void set_flat(const std::vector<double>& w) {
    if (w.size() != total_) throw ShapeMismatch("flat parameter size mismatch");
    std::size_t off = 0;
    for (auto& n : nets_) {
      std::copy(w.begin() + static_cast<std::ptrdiff_t>(off),
                w.begin() + static_cast<std::ptrdiff_t>(off + n.param_count()),
                n.params().begin());
      off += n.param_count();
    }
  }

private:
  void build_offsets() {
    offsets_.clear();
    total_ = 0;
    for (const auto& n : nets_) {
      offsets_.push_back(total_);
      total_ += n.param_count();
    }
  }

  std::vector<Network> nets_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

} // namespace njsde::nets
