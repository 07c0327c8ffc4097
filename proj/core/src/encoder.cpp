#include "cfcl/encoder.hpp"

#include <cmath>
#include <string>

namespace cfcl {

namespace {

void check_finite(const EncoderModel& model) {
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw DataError("encoder has non-finite weights");
  }
}

void check_input(const EncoderModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("encoder input has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(model.input_dim()));
  }
}

// Layer outputs of one forward pass: values[0] is the input, values[k+1] the
// (activated, except for the last layer) output of layer k.
struct ForwardCache {
  std::vector<Vector> values;
};

ForwardCache run_forward(const EncoderModel& model, std::span<const double> x) {
  check_input(model, x);
  const auto& dims = model.layer_dims;
  const std::size_t layers = dims.size() - 1;
  ForwardCache cache;
  cache.values.reserve(dims.size());
  cache.values.emplace_back(x.begin(), x.end());
  const double* w = model.weights.data();
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in = dims[k], out = dims[k + 1];
    const Vector& prev = cache.values.back();
    const double* bias = w + in * out;
    Vector next(out);
    for (std::size_t r = 0; r < out; ++r) {
      const double* row = w + r * in;
      double s = bias[r];
      for (std::size_t c = 0; c < in; ++c) s += row[c] * prev[c];
      next[r] = s;
    }
    if (k + 1 < layers) {
      for (double& v : next) {
        v = model.activation == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
      }
    }
    cache.values.push_back(std::move(next));
    w += (in + 1) * out;
  }
  return cache;
}

// Accumulates scale * d(output . upstream)/d(weights) into grad.
void backprop(const EncoderModel& model, const ForwardCache& cache, Vector upstream,
              double scale, Vector& grad) {
  const auto& dims = model.layer_dims;
  const std::size_t layers = dims.size() - 1;
  std::vector<std::size_t> offsets(layers);
  std::size_t off = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    offsets[k] = off;
    off += (dims[k] + 1) * dims[k + 1];
  }
  for (std::size_t kk = layers; kk-- > 0;) {
    const std::size_t in = dims[kk], out = dims[kk + 1];
    if (kk + 1 < layers) {
      const Vector& act = cache.values[kk + 1];
      for (std::size_t r = 0; r < out; ++r) {
        if (model.activation == Activation::relu) {
          if (!(act[r] > 0.0)) upstream[r] = 0.0;
        } else {
          upstream[r] *= 1.0 - act[r] * act[r];
        }
      }
    }
    const Vector& prev = cache.values[kk];
    const double* w = model.weights.data() + offsets[kk];
    double* gw = grad.data() + offsets[kk];
    double* gb = gw + in * out;
    Vector down(in, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double u = upstream[r];
      if (u == 0.0) continue;
      const double su = scale * u;
      const double* row = w + r * in;
      double* grow = gw + r * in;
      for (std::size_t c = 0; c < in; ++c) {
        grow[c] += su * prev[c];
        down[c] += u * row[c];
      }
      gb[r] += su;
    }
    upstream = std::move(down);
  }
}

}  // namespace

std::size_t parameter_count(std::span<const std::size_t> layer_dims) {
  std::size_t p = 0;
  for (std::size_t k = 0; k + 1 < layer_dims.size(); ++k) p += (layer_dims[k] + 1) * layer_dims[k + 1];
  return p;
}

EncoderModel make_zero_encoder(std::vector<std::size_t> layer_dims, Activation activation) {
  if (layer_dims.size() < 2) throw ShapeError("encoder needs at least an input and output dim");
  for (std::size_t d : layer_dims) {
    if (d == 0) throw ShapeError("encoder layer dims must be positive");
  }
  EncoderModel m;
  m.weights.assign(parameter_count(layer_dims), 0.0);
  m.layer_dims = std::move(layer_dims);
  m.activation = activation;
  return m;
}

EncoderModel make_encoder(std::vector<std::size_t> layer_dims, Activation activation, Rng& rng) {
  EncoderModel m = make_zero_encoder(std::move(layer_dims), activation);
  double* w = m.weights.data();
  for (std::size_t k = 0; k + 1 < m.layer_dims.size(); ++k) {
    const std::size_t in = m.layer_dims[k], out = m.layer_dims[k + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t q = 0; q < in * out; ++q) w[q] = dist(rng);
    w += (in + 1) * out;
  }
  return m;
}

Vector forward(const EncoderModel& model, std::span<const double> x) {
  return std::move(run_forward(model, x).values.back());
}

std::vector<Vector> forward_all(const EncoderModel& model, const std::vector<Vector>& xs) {
  std::vector<Vector> out;
  out.reserve(xs.size());
  for (const auto& x : xs) out.push_back(forward(model, x));
  return out;
}

std::size_t RegularizerState::received_count() const {
  std::size_t n = 0;
  for (const auto& set : received) n += set.size();
  return n;
}

double hinge_on_embeddings(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin) {
  const double v = squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin;
  return v > 0.0 ? v : 0.0;
}

double triplet_loss(const EncoderModel& model, const Triplet& t, double margin) {
  const Vector a = forward(model, t.anchor);
  const Vector p = forward(model, t.positive);
  const Vector n = forward(model, t.negative);
  return hinge_on_embeddings(a, p, n, margin);
}

double triplet_loss_regularized(const EncoderModel& model, const Triplet& t,
                                const RegularizerState& reg) {
  const Vector a = forward(model, t.anchor);
  const Vector p = forward(model, t.positive);
  const Vector n = forward(model, t.negative);
  double loss = hinge_on_embeddings(a, p, n, reg.base_margin);
  if (reg.reg_weight == 0.0) return loss;
  double extra = 0.0;
  for (const auto& set : reg.received) {
    for (const auto& z : set) {
      if (z.size() != a.size()) {
        throw ShapeError("received embedding has length " + std::to_string(z.size()) +
                         ", encoder output is " + std::to_string(a.size()));
      }
      extra += hinge_on_embeddings(a, p, z, reg.reg_margin);
    }
  }
  return loss + reg.reg_weight * extra;
}

Vector loss_gradient(const EncoderModel& model, std::span<const Triplet> batch, double margin,
                     const RegularizerState* reg) {
  check_finite(model);
  Vector grad(model.weights.size(), 0.0);
  if (batch.empty()) return grad;
  const double scale = 1.0 / static_cast<double>(batch.size());
  const double base_margin = reg ? reg->base_margin : margin;
  const bool use_reg = reg && reg->reg_weight != 0.0;
  const std::size_t out = model.output_dim();

  for (const Triplet& t : batch) {
    const ForwardCache ca = run_forward(model, t.anchor);
    const ForwardCache cp = run_forward(model, t.positive);
    const ForwardCache cn = run_forward(model, t.negative);
    const Vector& a = ca.values.back();
    const Vector& p = cp.values.back();
    const Vector& n = cn.values.back();
    const double ap = squared_distance(a, p);

    Vector ga(out, 0.0), gp(out, 0.0), gn(out, 0.0);
    bool any = false;
    if (ap - squared_distance(a, n) + base_margin > 0.0) {
      for (std::size_t r = 0; r < out; ++r) {
        ga[r] += 2.0 * (n[r] - p[r]);
        gp[r] += -2.0 * (a[r] - p[r]);
        gn[r] += 2.0 * (a[r] - n[r]);
      }
      any = true;
    }
    bool neg_used = any;
    if (use_reg) {
      const double w = reg->reg_weight;
      for (const auto& set : reg->received) {
        for (const auto& z : set) {
          if (z.size() != out) throw ShapeError("received embedding dimension mismatch");
          if (ap - squared_distance(a, z) + reg->reg_margin > 0.0) {
            for (std::size_t r = 0; r < out; ++r) {
              ga[r] += w * 2.0 * (z[r] - p[r]);
              gp[r] += w * -2.0 * (a[r] - p[r]);
            }
            any = true;
          }
        }
      }
    }
    if (!any) continue;
    backprop(model, ca, std::move(ga), scale, grad);
    backprop(model, cp, std::move(gp), scale, grad);
    if (neg_used) backprop(model, cn, std::move(gn), scale, grad);
  }
  return grad;
}

EncoderModel sgd_step(const EncoderModel& model, std::span<const double> grad,
                      double learning_rate) {
  if (grad.size() != model.weights.size()) throw ShapeError("gradient length mismatch");
  EncoderModel next = model;
  for (std::size_t q = 0; q < grad.size(); ++q) next.weights[q] -= learning_rate * grad[q];
  return next;
}

EncoderModel adam_step(const EncoderModel& model, std::span<const double> grad,
                       double learning_rate, AdamState& state, const AdamParams& params) {
  if (grad.size() != model.weights.size()) throw ShapeError("gradient length mismatch");
  if (state.first_moment.size() != grad.size()) {
    state.first_moment.assign(grad.size(), 0.0);
    state.second_moment.assign(grad.size(), 0.0);
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(state.step));
  EncoderModel next = model;
  for (std::size_t q = 0; q < grad.size(); ++q) {
    state.first_moment[q] = params.beta1 * state.first_moment[q] + (1.0 - params.beta1) * grad[q];
    state.second_moment[q] =
        params.beta2 * state.second_moment[q] + (1.0 - params.beta2) * grad[q] * grad[q];
    const double mhat = state.first_moment[q] / c1;
    const double vhat = state.second_moment[q] / c2;
    next.weights[q] -= learning_rate * mhat / (std::sqrt(vhat) + params.epsilon);
  }
  return next;
}

}  // namespace cfcl
