#include "meterdown/neuralcore.hpp"

#include <algorithm>
#include <cmath>

#include "meterdown/error.hpp"

namespace meterdown {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double activate(Activation act, double pre) {
  switch (act) {
    case Activation::relu:
      return pre > 0.0 ? pre : 0.0;
    case Activation::sigmoid:
      return sigmoid(pre);
    case Activation::identity:
      break;
  }
  return pre;
}

double activation_derivative(Activation act, double pre, double post) {
  switch (act) {
    case Activation::relu:
      return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid:
      return post * (1.0 - post);
    case Activation::identity:
      break;
  }
  return 1.0;
}

void glorot_uniform(Matrix& weights, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& w : weights.values()) w = dist(rng);
}

// ---------------------------------------------------------------------------

DenseLayer DenseLayer::zeros(std::size_t inputs, std::size_t outputs, Activation act) {
  return DenseLayer{Matrix(inputs, outputs), Matrix(1, outputs), act};
}

std::span<const double> dense_forward(const DenseLayer& layer, std::span<const double> x, DenseCache& cache) {
  const std::size_t n_in = layer.inputs();
  const std::size_t n_out = layer.outputs();
  if (x.size() != n_in) {
    throw Error("neural.shape", "dense layer expects " + std::to_string(n_in) + " inputs, got " +
                                    std::to_string(x.size()),
                {{"expected", n_in}, {"found", x.size()}});
  }
  cache.input.assign(x.begin(), x.end());
  cache.pre_activation.assign(layer.bias.values().begin(), layer.bias.values().end());
  for (std::size_t i = 0; i < n_in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const auto w = layer.weight.row(i);
    for (std::size_t j = 0; j < n_out; ++j) cache.pre_activation[j] += xi * w[j];
  }
  cache.output.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) cache.output[j] = activate(layer.activation, cache.pre_activation[j]);
  return cache.output;
}

std::vector<double> dense_backward(const DenseLayer& layer, const DenseCache& cache, std::span<const double> dy,
                                   DenseLayer& grads) {
  const std::size_t n_in = layer.inputs();
  const std::size_t n_out = layer.outputs();
  if (dy.size() != n_out || cache.input.size() != n_in || cache.output.size() != n_out ||
      !grads.weight.same_shape(layer.weight) || !grads.bias.same_shape(layer.bias)) {
    throw Error("neural.shape", "dense backward shape mismatch", {{"inputs", n_in}, {"outputs", n_out}});
  }
  std::vector<double> delta(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    delta[j] = dy[j] * activation_derivative(layer.activation, cache.pre_activation[j], cache.output[j]);
  }
  auto db = grads.bias.values();
  for (std::size_t j = 0; j < n_out; ++j) db[j] += delta[j];

  std::vector<double> dx(n_in, 0.0);
  for (std::size_t i = 0; i < n_in; ++i) {
    const double xi = cache.input[i];
    const auto w = layer.weight.row(i);
    auto gw = grads.weight.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < n_out; ++j) {
      gw[j] += xi * delta[j];
      acc += w[j] * delta[j];
    }
    dx[i] = acc;
  }
  return dx;
}

// ---------------------------------------------------------------------------

namespace {

GruGate zero_gate(std::size_t input_dim, std::size_t hidden) {
  return GruGate{Matrix(input_dim, hidden), Matrix(hidden, hidden), Matrix(1, hidden)};
}

bool gate_shaped(const GruGate& g, std::size_t input_dim, std::size_t hidden) {
  return g.input_weight.rows() == input_dim && g.input_weight.cols() == hidden && g.recurrent_weight.rows() == hidden &&
         g.recurrent_weight.cols() == hidden && g.bias.rows() == 1 && g.bias.cols() == hidden;
}

bool params_shaped(const GruParams& p, std::size_t input_dim, std::size_t hidden) {
  return p.input_dim == input_dim && p.hidden == hidden && gate_shaped(p.update, input_dim, hidden) &&
         gate_shaped(p.reset, input_dim, hidden) && gate_shaped(p.candidate, input_dim, hidden);
}

// out = bias + x Wx + h Wh
void affine(const GruGate& g, std::span<const double> x, std::span<const double> h, std::span<double> out) {
  std::copy(g.bias.values().begin(), g.bias.values().end(), out.begin());
  const std::size_t hidden = out.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const auto w = g.input_weight.row(i);
    for (std::size_t j = 0; j < hidden; ++j) out[j] += xi * w[j];
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double hi = h[i];
    if (hi == 0.0) continue;
    const auto u = g.recurrent_weight.row(i);
    for (std::size_t j = 0; j < hidden; ++j) out[j] += hi * u[j];
  }
}

// grads for one gate from its pre-activation delta; adds W^T delta / U^T delta into dx / dh.
void gate_backward(const GruGate& g, std::span<const double> x, std::span<const double> h,
                   std::span<const double> delta, GruGate& grads, std::span<double> dx, std::span<double> dh) {
  const std::size_t hidden = delta.size();
  auto db = grads.bias.values();
  for (std::size_t j = 0; j < hidden; ++j) db[j] += delta[j];
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto w = g.input_weight.row(i);
    auto gw = grads.input_weight.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += x[i] * delta[j];
      acc += w[j] * delta[j];
    }
    dx[i] += acc;
  }
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto u = g.recurrent_weight.row(i);
    auto gu = grads.recurrent_weight.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      gu[j] += h[i] * delta[j];
      acc += u[j] * delta[j];
    }
    dh[i] += acc;
  }
}

}  // namespace

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden) {
  return GruParams{input_dim, hidden, zero_gate(input_dim, hidden), zero_gate(input_dim, hidden),
                   zero_gate(input_dim, hidden)};
}

std::span<const double> gru_forward(const GruParams& params, const Matrix& sequence, std::span<const double> h0,
                                    GruCache& cache) {
  const std::size_t hidden = params.hidden;
  if (!params_shaped(params, params.input_dim, hidden) || sequence.cols() != params.input_dim ||
      h0.size() != hidden || sequence.rows() == 0) {
    throw Error("neural.shape", "gru forward shape mismatch",
                {{"input_dim", params.input_dim},
                 {"hidden", hidden},
                 {"sequence_rows", sequence.rows()},
                 {"sequence_cols", sequence.cols()},
                 {"h0", h0.size()}});
  }
  const std::size_t steps = sequence.rows();
  cache.input_dim = params.input_dim;
  cache.hidden = hidden;
  cache.steps = steps;
  cache.inputs = sequence;
  cache.states = Matrix(steps + 1, hidden);
  cache.update = Matrix(steps, hidden);
  cache.reset = Matrix(steps, hidden);
  cache.candidate = Matrix(steps, hidden);
  cache.reset_state = Matrix(steps, hidden);
  std::copy(h0.begin(), h0.end(), cache.states.row(0).begin());

  for (std::size_t t = 0; t < steps; ++t) {
    const auto x = sequence.row(t);
    const auto h_prev = std::span<const double>(cache.states.row(t));
    auto z = cache.update.row(t);
    auto r = cache.reset.row(t);
    auto c = cache.candidate.row(t);
    auto rh = cache.reset_state.row(t);

    affine(params.update, x, h_prev, z);
    affine(params.reset, x, h_prev, r);
    for (std::size_t j = 0; j < hidden; ++j) {
      z[j] = sigmoid(z[j]);
      r[j] = sigmoid(r[j]);
      rh[j] = r[j] * h_prev[j];
    }
    affine(params.candidate, x, rh, c);
    auto h = cache.states.row(t + 1);
    for (std::size_t j = 0; j < hidden; ++j) {
      c[j] = std::tanh(c[j]);
      h[j] = z[j] * h_prev[j] + (1.0 - z[j]) * c[j];
    }
  }
  return cache.states.row(steps);
}

GruInputGradients gru_backward(const GruParams& params, const GruCache& cache, std::span<const double> grad_final,
                               GruParams& grads) {
  const std::size_t hidden = params.hidden;
  const std::size_t input_dim = params.input_dim;
  if (cache.hidden != hidden || cache.input_dim != input_dim || cache.steps == 0 ||
      cache.states.rows() != cache.steps + 1 || cache.inputs.rows() != cache.steps ||
      cache.inputs.cols() != input_dim || grad_final.size() != hidden ||
      !params_shaped(grads, input_dim, hidden)) {
    throw Error("neural.stale_cache", "gru backward: cache or gradient shapes do not match the parameters",
                {{"input_dim", input_dim}, {"hidden", hidden}, {"cache_steps", cache.steps}});
  }

  GruInputGradients out{Matrix(cache.steps, input_dim), {}};
  std::vector<double> dh(grad_final.begin(), grad_final.end());
  std::vector<double> dh_prev(hidden);
  std::vector<double> d_rh(hidden);
  std::vector<double> delta_z(hidden);
  std::vector<double> delta_r(hidden);
  std::vector<double> delta_c(hidden);

  for (std::size_t t = cache.steps; t-- > 0;) {
    const auto x = cache.inputs.row(t);
    const auto h_prev = cache.states.row(t);
    const auto z = cache.update.row(t);
    const auto r = cache.reset.row(t);
    const auto c = cache.candidate.row(t);
    const auto rh = cache.reset_state.row(t);
    auto dx = out.sequence.row(t);

    for (std::size_t j = 0; j < hidden; ++j) {
      dh_prev[j] = dh[j] * z[j];
      delta_z[j] = dh[j] * (h_prev[j] - c[j]) * z[j] * (1.0 - z[j]);
      delta_c[j] = dh[j] * (1.0 - z[j]) * (1.0 - c[j] * c[j]);
    }
    std::fill(d_rh.begin(), d_rh.end(), 0.0);
    gate_backward(params.candidate, x, rh, delta_c, grads.candidate, dx, d_rh);
    for (std::size_t j = 0; j < hidden; ++j) {
      dh_prev[j] += d_rh[j] * r[j];
      delta_r[j] = d_rh[j] * h_prev[j] * r[j] * (1.0 - r[j]);
    }
    gate_backward(params.update, x, h_prev, delta_z, grads.update, dx, dh_prev);
    gate_backward(params.reset, x, h_prev, delta_r, grads.reset, dx, dh_prev);
    dh.swap(dh_prev);
  }
  out.initial = std::move(dh);
  return out;
}

// ---------------------------------------------------------------------------

LossResult bce_loss(double probability, double label) {
  if (label != 0.0 && label != 1.0) {
    throw Error("neural.label", "binary cross-entropy label must be 0 or 1", {{"label", label}});
  }
  const double p = std::clamp(probability, 1e-12, 1.0 - 1e-12);
  const double loss = label == 1.0 ? -std::log(p) : -std::log(1.0 - p);
  return {loss, p - label};
}

void adam_step(std::span<const ParamRef> blocks, AdamState& state) {
  for (const auto& b : blocks) {
    if (!b.grad->same_shape(*b.value)) {
      throw Error("neural.shape", "gradient shape differs from parameter block " + b.name, {{"block", b.name}});
    }
    if (!b.grad->all_finite()) {
      throw Error("neural.non_finite_gradient", "non-finite gradient in parameter block " + b.name,
                  {{"block", b.name}});
    }
  }
  if (state.first_moment.empty()) {
    for (const auto& b : blocks) {
      state.first_moment.emplace_back(b.value->rows(), b.value->cols());
      state.second_moment.emplace_back(b.value->rows(), b.value->cols());
    }
  }
  if (state.first_moment.size() != blocks.size()) {
    throw Error("neural.shape", "optimizer state was created for a different parameter set");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (!state.first_moment[i].same_shape(*blocks[i].value)) {
      throw Error("neural.shape", "optimizer state shape differs for block " + blocks[i].name,
                  {{"block", blocks[i].name}});
    }
  }

  ++state.step;
  const auto& cfg = state.config;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto theta = blocks[i].value->values();
    const auto g = blocks[i].grad->values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      theta[j] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace meterdown
