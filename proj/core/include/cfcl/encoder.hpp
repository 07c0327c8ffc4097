#pragma once

#include <optional>
#include <span>
#include <vector>

#include "cfcl/common.hpp"

namespace cfcl {

enum class Activation { relu, tanh };

// Fully connected embedding network. Weights are stored flat, layer by layer,
// each layer as a row-major (out x in) matrix followed by its bias vector.
// Hidden layers use `activation`; the output layer is affine with no
// normalization.
struct EncoderModel {
  std::vector<std::size_t> layer_dims;
  Vector weights;
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }
};

std::size_t parameter_count(std::span<const std::size_t> layer_dims);

EncoderModel make_zero_encoder(std::vector<std::size_t> layer_dims,
                               Activation activation = Activation::relu);

// Glorot-uniform weights, zero biases.
EncoderModel make_encoder(std::vector<std::size_t> layer_dims, Activation activation, Rng& rng);

Vector forward(const EncoderModel& model, std::span<const double> x);
std::vector<Vector> forward_all(const EncoderModel& model, const std::vector<Vector>& xs);

struct Triplet {
  Vector anchor;
  Vector positive;
  Vector negative;
};

// Embeddings received from neighbours plus the weights of the regularization
// term. `received` holds one set per neighbour.
struct RegularizerState {
  std::vector<std::vector<Vector>> received;
  double reg_margin = 0.0;
  double reg_weight = 0.0;
  double base_margin = 1.0;

  std::size_t received_count() const;
};

// max{0, |a-p|^2 - |a-n|^2 + m} on precomputed embeddings.
double hinge_on_embeddings(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin);

double triplet_loss(const EncoderModel& model, const Triplet& t, double margin);
double triplet_loss_regularized(const EncoderModel& model, const Triplet& t,
                                const RegularizerState& reg);

// Mean gradient over the batch. With `reg` the regularized loss is used and
// its base_margin replaces `margin`. A hinge exactly at zero contributes 0.
Vector loss_gradient(const EncoderModel& model, std::span<const Triplet> batch, double margin,
                     const RegularizerState* reg = nullptr);

EncoderModel sgd_step(const EncoderModel& model, std::span<const double> grad,
                      double learning_rate);

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  long step = 0;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

EncoderModel adam_step(const EncoderModel& model, std::span<const double> grad,
                       double learning_rate, AdamState& state, const AdamParams& params = {});

}  // namespace cfcl
