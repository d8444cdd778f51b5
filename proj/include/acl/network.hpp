#ifndef ACL_NETWORK_HPP
#define ACL_NETWORK_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <variant>
#include <vector>

#include "acl/error.hpp"
#include "acl/rng.hpp"
#include "acl/tensor.hpp"

namespace acl {

// Numerically stable softmax (max-subtraction), invariant to adding a
// constant to all logits.
inline std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw ArgumentError("softmax: empty logit vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

// Argmax with ties broken toward the smaller index.
inline std::size_t argmax(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

struct Conv2dLayer {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  Tensor kernels;                  // (out, in, k, k)
  std::vector<double> biases;      // (out)
  Tensor kernels_momentum;
  std::vector<double> biases_momentum;
};

struct DenseLayer {
  std::size_t in_width = 1;
  std::size_t out_width = 1;
  Tensor weights;                  // (out, in)
  std::vector<double> biases;      // (out)
  Tensor weights_momentum;
  std::vector<double> biases_momentum;
};

struct ReluLayer {};
struct FlattenLayer {};
struct SigmoidLayer {};

using Layer = std::variant<Conv2dLayer, DenseLayer, ReluLayer, FlattenLayer, SigmoidLayer>;

// Per-layer parameter gradients, aligned with Network::layers() by index.
struct Gradients {
  std::vector<Tensor> weight_grads;
  std::vector<std::vector<double>> bias_grads;
};

// Activations recorded during a training forward pass: activation[0] is the
// input, activation[i+1] the output of layer i.
struct ForwardTrace {
  std::vector<Tensor> activations;
  // Smallest |pre-activation| seen at any relu during the pass; the gradient
  // checker uses it to skip finite differences straddling a kink.
  double min_relu_preact = std::numeric_limits<double>::infinity();
};

// Feed-forward network over an ordered layer list. Value type: copying a
// Network copies all parameters and momentum buffers.
class Network {
 public:
  Network& add_conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                      std::size_t stride) {
    Conv2dLayer l;
    l.in_channels = in_ch;
    l.out_channels = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.kernels = Tensor({out_ch, in_ch, kernel, kernel});
    l.biases.assign(out_ch, 0.0);
    l.kernels_momentum = Tensor({out_ch, in_ch, kernel, kernel});
    l.biases_momentum.assign(out_ch, 0.0);
    layers_.push_back(std::move(l));
    return *this;
  }

  Network& add_dense(std::size_t in_w, std::size_t out_w) {
    DenseLayer l;
    l.in_width = in_w;
    l.out_width = out_w;
    l.weights = Tensor({out_w, in_w});
    l.biases.assign(out_w, 0.0);
    l.weights_momentum = Tensor({out_w, in_w});
    l.biases_momentum.assign(out_w, 0.0);
    layers_.push_back(std::move(l));
    return *this;
  }

  Network& add_relu() {
    layers_.push_back(ReluLayer{});
    return *this;
  }
  Network& add_flatten() {
    layers_.push_back(FlattenLayer{});
    return *this;
  }
  Network& add_sigmoid() {
    layers_.push_back(SigmoidLayer{});
    return *this;
  }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  bool empty() const { return layers_.empty(); }

  // Kaiming-uniform fan-in init; biases zero, momentum cleared.
  void init_parameters(Rng& rng) {
    for (auto& layer : layers_) {
      if (auto* c = std::get_if<Conv2dLayer>(&layer)) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(c->in_channels * c->kernel * c->kernel));
        for (auto& w : c->kernels.values()) w = rng.uniform(-limit, limit);
        std::fill(c->biases.begin(), c->biases.end(), 0.0);
        std::fill(c->kernels_momentum.values().begin(), c->kernels_momentum.values().end(), 0.0);
        std::fill(c->biases_momentum.begin(), c->biases_momentum.end(), 0.0);
      } else if (auto* d = std::get_if<DenseLayer>(&layer)) {
        const double limit = std::sqrt(6.0 / static_cast<double>(d->in_width));
        for (auto& w : d->weights.values()) w = rng.uniform(-limit, limit);
        std::fill(d->biases.begin(), d->biases.end(), 0.0);
        std::fill(d->weights_momentum.values().begin(), d->weights_momentum.values().end(), 0.0);
        std::fill(d->biases_momentum.begin(), d->biases_momentum.end(), 0.0);
      }
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) {
      if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
        n += c->kernels.size() + c->biases.size();
      } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
        n += d->weights.size() + d->biases.size();
      }
    }
    return n;
  }

 private:
  std::vector<Layer> layers_;
};

namespace detail {

inline Tensor conv2d_forward(const Conv2dLayer& l, const Tensor& in, std::size_t layer_idx) {
  Tensor x = in;
  if (x.shape().size() == 2) x = Tensor({1, x.extent(0), x.extent(1)}, x.values());
  if (x.shape().size() != 3 || x.extent(0) != l.in_channels) {
    throw DimensionError("layer " + std::to_string(layer_idx) + ": conv2d expects " +
                         std::to_string(l.in_channels) + " input channels, got " + x.shape_str());
  }
  const std::size_t h = x.extent(1), w = x.extent(2), k = l.kernel, s = l.stride;
  if (h < k || w < k) {
    throw DimensionError("layer " + std::to_string(layer_idx) + ": input " + x.shape_str() +
                         " smaller than kernel " + std::to_string(k));
  }
  const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
  Tensor out({l.out_channels, oh, ow});
  for (std::size_t o = 0; o < l.out_channels; ++o) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = l.biases[o];
        for (std::size_t c = 0; c < l.in_channels; ++c) {
          const double* krow = &l.kernels[( (o * l.in_channels + c) * k) * k];
          const double* xbase = &x[(c * h + i * s) * w + j * s];
          for (std::size_t u = 0; u < k; ++u) {
            const double* xr = xbase + u * w;
            const double* kr = krow + u * k;
            for (std::size_t v = 0; v < k; ++v) acc += kr[v] * xr[v];
          }
        }
        out.at(o, i, j) = acc;
      }
    }
  }
  return out;
}

// Gradient w.r.t. conv input and parameters given upstream grad.
inline Tensor conv2d_backward(const Conv2dLayer& l, const Tensor& in_raw, const Tensor& dout,
                              Tensor& dkernels, std::vector<double>& dbiases) {
  Tensor x = in_raw;
  const bool promoted = x.shape().size() == 2;
  if (promoted) x = Tensor({1, x.extent(0), x.extent(1)}, x.values());
  const std::size_t h = x.extent(1), w = x.extent(2), k = l.kernel, s = l.stride;
  const std::size_t oh = dout.extent(1), ow = dout.extent(2);
  Tensor dx({l.in_channels, h, w});
  for (std::size_t o = 0; o < l.out_channels; ++o) {
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double g = dout.at(o, i, j);
        dbiases[o] += g;
        for (std::size_t c = 0; c < l.in_channels; ++c) {
          double* kgrow = &dkernels[((o * l.in_channels + c) * k) * k];
          const double* krow = &l.kernels[((o * l.in_channels + c) * k) * k];
          double* dxbase = &dx[(c * h + i * s) * w + j * s];
          const double* xbase = &x[(c * h + i * s) * w + j * s];
          for (std::size_t u = 0; u < k; ++u) {
            for (std::size_t v = 0; v < k; ++v) {
              kgrow[u * k + v] += g * xbase[u * w + v];
              dxbase[u * w + v] += g * krow[u * k + v];
            }
          }
        }
      }
    }
  }
  if (promoted) return Tensor({h, w}, dx.values());
  return dx;
}

inline Tensor dense_forward(const DenseLayer& l, const Tensor& in, std::size_t layer_idx) {
  if (in.size() != l.in_width) {
    throw DimensionError("layer " + std::to_string(layer_idx) + ": dense expects width " +
                         std::to_string(l.in_width) + ", got " + in.shape_str());
  }
  Tensor out({l.out_width});
  for (std::size_t o = 0; o < l.out_width; ++o) {
    const double* wrow = &l.weights[o * l.in_width];
    double acc = l.biases[o];
    for (std::size_t i = 0; i < l.in_width; ++i) acc += wrow[i] * in[i];
    out[o] = acc;
  }
  return out;
}

inline Tensor dense_backward(const DenseLayer& l, const Tensor& in, const Tensor& dout,
                             Tensor& dweights, std::vector<double>& dbiases) {
  Tensor dx(in.shape());
  for (std::size_t o = 0; o < l.out_width; ++o) {
    const double g = dout[o];
    dbiases[o] += g;
    double* wgrow = &dweights[o * l.in_width];
    const double* wrow = &l.weights[o * l.in_width];
    for (std::size_t i = 0; i < l.in_width; ++i) {
      wgrow[i] += g * in[i];
      dx[i] += g * wrow[i];
    }
  }
  return dx;
}

}  // namespace detail

// Pure forward pass; checks shape compatibility per layer.
inline Tensor forward(const Network& net, const Tensor& input, ForwardTrace* trace = nullptr) {
  Tensor x = input;
  if (trace) {
    trace->activations.clear();
    trace->activations.push_back(x);
    trace->min_relu_preact = std::numeric_limits<double>::infinity();
  }
  const auto& layers = net.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const auto& layer = layers[li];
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      x = detail::conv2d_forward(*c, x, li);
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      x = detail::dense_forward(*d, x, li);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      if (trace) {
        for (const double v : x.values()) {
          trace->min_relu_preact = std::min(trace->min_relu_preact, std::abs(v));
        }
      }
      for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      x = Tensor({x.size()}, x.values());
    } else {  // sigmoid
      for (double& v : x.values()) v = 1.0 / (1.0 + std::exp(-v));
    }
    if (trace) trace->activations.push_back(x);
  }
  return x;
}

inline Gradients make_gradients(const Network& net) {
  Gradients g;
  g.weight_grads.resize(net.layers().size());
  g.bias_grads.resize(net.layers().size());
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    if (const auto* c = std::get_if<Conv2dLayer>(&net.layers()[i])) {
      g.weight_grads[i] = Tensor(c->kernels.shape());
      g.bias_grads[i].assign(c->biases.size(), 0.0);
    } else if (const auto* d = std::get_if<DenseLayer>(&net.layers()[i])) {
      g.weight_grads[i] = Tensor(d->weights.shape());
      g.bias_grads[i].assign(d->biases.size(), 0.0);
    }
  }
  return g;
}

inline void zero_gradients(Gradients& g) {
  for (auto& t : g.weight_grads) std::fill(t.values().begin(), t.values().end(), 0.0);
  for (auto& b : g.bias_grads) std::fill(b.begin(), b.end(), 0.0);
}

// Backpropagate `dout` (gradient w.r.t. the output of layer `last`) down to
// layer 0, accumulating parameter gradients. `last` defaults to the final
// layer; passing a smaller value skips trailing layers (used by the fused
// sigmoid + binary-cross-entropy path). Relu subgradient at 0 is 0.
inline void backward(const Network& net, const ForwardTrace& trace, Tensor dout, Gradients& grads,
                     std::size_t last_layer_count = static_cast<std::size_t>(-1)) {
  const auto& layers = net.layers();
  const std::size_t n =
      last_layer_count == static_cast<std::size_t>(-1) ? layers.size() : last_layer_count;
  for (std::size_t idx = n; idx-- > 0;) {
    const Tensor& in = trace.activations[idx];
    const auto& layer = layers[idx];
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      dout = detail::conv2d_backward(*c, in, dout, grads.weight_grads[idx], grads.bias_grads[idx]);
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      dout = detail::dense_backward(*d, in, dout, grads.weight_grads[idx], grads.bias_grads[idx]);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      for (std::size_t i = 0; i < dout.size(); ++i) {
        if (in[i] <= 0.0) dout[i] = 0.0;
      }
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      dout = Tensor(in.shape(), dout.values());
    } else {  // sigmoid: out = trace.activations[idx + 1]
      const Tensor& out = trace.activations[idx + 1];
      for (std::size_t i = 0; i < dout.size(); ++i) dout[i] *= out[i] * (1.0 - out[i]);
    }
  }
}

// v <- momentum * v - lr * g;  theta <- theta + v
inline void sgd_step(Network& net, const Gradients& grads, double lr, double momentum) {
  auto update = [&](std::vector<double>& theta, std::vector<double>& vel,
                    const std::vector<double>& g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      vel[i] = momentum * vel[i] - lr * g[i];
      theta[i] += vel[i];
    }
  };
  auto& layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (auto* c = std::get_if<Conv2dLayer>(&layers[i])) {
      update(c->kernels.values(), c->kernels_momentum.values(), grads.weight_grads[i].values());
      update(c->biases, c->biases_momentum, grads.bias_grads[i]);
    } else if (auto* d = std::get_if<DenseLayer>(&layers[i])) {
      update(d->weights.values(), d->weights_momentum.values(), grads.weight_grads[i].values());
      update(d->biases, d->biases_momentum, grads.bias_grads[i]);
    }
  }
}

// ---- serialization: versioned binary blob, magic "ACL1" ----
// layout: magic, u32 layer count, then per layer a u8 kind tag and its
// shape/parameters as little-endian u32/f64. Momentum buffers are runtime
// state and are not persisted.

static_assert(std::endian::native == std::endian::little,
              "network blobs are little-endian; big-endian hosts unsupported");

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_f64s(std::ostream& os, const std::vector<double>& vs) {
  os.write(reinterpret_cast<const char*>(vs.data()),
           static_cast<std::streamsize>(vs.size() * sizeof(double)));
}
inline std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline void get_f64s(std::istream& is, std::vector<double>& vs) {
  is.read(reinterpret_cast<char*>(vs.data()),
          static_cast<std::streamsize>(vs.size() * sizeof(double)));
}

}  // namespace detail

inline void save_network(const Network& net, std::ostream& os) {
  os.write("ACL1", 4);
  detail::put_u32(os, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
      os.put(0);
      detail::put_u32(os, static_cast<std::uint32_t>(c->in_channels));
      detail::put_u32(os, static_cast<std::uint32_t>(c->out_channels));
      detail::put_u32(os, static_cast<std::uint32_t>(c->kernel));
      detail::put_u32(os, static_cast<std::uint32_t>(c->stride));
      detail::put_f64s(os, c->kernels.values());
      detail::put_f64s(os, c->biases);
    } else if (const auto* d = std::get_if<DenseLayer>(&layer)) {
      os.put(1);
      detail::put_u32(os, static_cast<std::uint32_t>(d->in_width));
      detail::put_u32(os, static_cast<std::uint32_t>(d->out_width));
      detail::put_f64s(os, d->weights.values());
      detail::put_f64s(os, d->biases);
    } else if (std::holds_alternative<ReluLayer>(layer)) {
      os.put(2);
    } else if (std::holds_alternative<FlattenLayer>(layer)) {
      os.put(3);
    } else {
      os.put(4);
    }
  }
}

inline Network load_network(std::istream& is) {
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ACL1", 4) != 0) {
    throw ArgumentError("load_network: bad magic (expected ACL1)");
  }
  const std::uint32_t count = detail::get_u32(is);
  Network net;
  for (std::uint32_t i = 0; i < count; ++i) {
    const int kind = is.get();
    switch (kind) {
      case 0: {
        const auto in_ch = detail::get_u32(is);
        const auto out_ch = detail::get_u32(is);
        const auto k = detail::get_u32(is);
        const auto s = detail::get_u32(is);
        net.add_conv2d(in_ch, out_ch, k, s);
        auto& c = std::get<Conv2dLayer>(net.layers().back());
        detail::get_f64s(is, c.kernels.values());
        detail::get_f64s(is, c.biases);
        break;
      }
      case 1: {
        const auto in_w = detail::get_u32(is);
        const auto out_w = detail::get_u32(is);
        net.add_dense(in_w, out_w);
        auto& d = std::get<DenseLayer>(net.layers().back());
        detail::get_f64s(is, d.weights.values());
        detail::get_f64s(is, d.biases);
        break;
      }
      case 2:
        net.add_relu();
        break;
      case 3:
        net.add_flatten();
        break;
      case 4:
        net.add_sigmoid();
        break;
      default:
        throw ArgumentError("load_network: unknown layer tag " + std::to_string(kind));
    }
    if (!is) throw ArgumentError("load_network: truncated blob");
  }
  return net;
}

}  // namespace acl

#endif  // ACL_NETWORK_HPP
