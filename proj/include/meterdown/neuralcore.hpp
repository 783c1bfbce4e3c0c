#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "meterdown/matrix.hpp"

namespace meterdown {

enum class Activation { identity, relu, sigmoid };

double sigmoid(double x);
double activate(Activation act, double pre);
/// Derivative with respect to the pre-activation; relu'(0) = 0.
double activation_derivative(Activation act, double pre, double post);

/// Glorot-style uniform initialisation in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& weights, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Dense layer: y = act(x W + b), W stored as (inputs x outputs).

struct DenseLayer {
  Matrix weight;  // inputs x outputs
  Matrix bias;    // 1 x outputs
  Activation activation = Activation::relu;

  static DenseLayer zeros(std::size_t inputs, std::size_t outputs, Activation act);
  std::size_t inputs() const { return weight.rows(); }
  std::size_t outputs() const { return weight.cols(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }
};

struct DenseCache {
  std::vector<double> input;
  std::vector<double> pre_activation;
  std::vector<double> output;
};

/// Writes the layer output into cache.output and returns a view of it.
std::span<const double> dense_forward(const DenseLayer& layer, std::span<const double> x, DenseCache& cache);

/// Adds dW, db into `grads` (same shapes as the layer) and returns dx.
std::vector<double> dense_backward(const DenseLayer& layer, const DenseCache& cache, std::span<const double> dy,
                                   DenseLayer& grads);

// ---------------------------------------------------------------------------
// Gated recurrent unit, Cho et al. gate convention:
//   z = sigma(x Wz + h Uz + bz)          update gate
//   r = sigma(x Wr + h Ur + br)          reset gate
//   c = tanh(x Wc + (r * h) Uc + bc)     candidate
//   h' = z * h + (1 - z) * c

struct GruGate {
  Matrix input_weight;      // input_dim x hidden
  Matrix recurrent_weight;  // hidden x hidden
  Matrix bias;              // 1 x hidden
};

struct GruParams {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  GruGate update;
  GruGate reset;
  GruGate candidate;

  static GruParams zeros(std::size_t input_dim, std::size_t hidden);
  std::size_t parameter_count() const { return 3 * (input_dim * hidden + hidden * hidden + hidden); }
};

struct GruCache {
  std::size_t input_dim = 0;
  std::size_t hidden = 0;
  std::size_t steps = 0;
  Matrix inputs;      // steps x input_dim
  Matrix states;      // (steps + 1) x hidden, row 0 = h0
  Matrix update;      // steps x hidden
  Matrix reset;       // steps x hidden
  Matrix candidate;   // steps x hidden
  Matrix reset_state; // steps x hidden, r * h_prev
};

/// Runs the sequence (steps x input_dim) from h0 and returns h_T.
std::span<const double> gru_forward(const GruParams& params, const Matrix& sequence, std::span<const double> h0,
                                    GruCache& cache);

struct GruInputGradients {
  Matrix sequence;               // steps x input_dim
  std::vector<double> initial;   // hidden
};

/// Backpropagation through time from dL/dh_T. Parameter gradients are added
/// into `grads`, which must be shaped like `params`.
GruInputGradients gru_backward(const GruParams& params, const GruCache& cache, std::span<const double> grad_final,
                               GruParams& grads);

// ---------------------------------------------------------------------------

struct LossResult {
  double loss = 0.0;
  double grad_logit = 0.0;  ///< p - y
};

/// Binary cross-entropy on a sigmoid probability; p is clamped to
/// [1e-12, 1 - 1e-12]. The label must be exactly 0 or 1.
LossResult bce_loss(double probability, double label);

// ---------------------------------------------------------------------------

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// A parameter block and its gradient, for optimizer updates.
struct ParamRef {
  std::string name;
  Matrix* value = nullptr;
  const Matrix* grad = nullptr;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
};

/// One Adam update over all blocks. Moment buffers are created on the first
/// call; block shapes must not change afterwards. A non-finite gradient
/// aborts before any parameter is touched.
void adam_step(std::span<const ParamRef> blocks, AdamState& state);

}  // namespace meterdown
