#pragma once

// Dense feed-forward networks: forward pass, exact backpropagation,
// cross-entropy losses, optimizers and the on-disk model format.
//
// Matrices hold one sample per row. Layer i maps layer_dims[i] inputs to
// layer_dims[i+1] outputs with weights stored out x in.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace augforge {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, sigmoid, softmax, linear };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

struct MlpModel {
  std::vector<int> layer_dims;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation hidden_activation = Activation::relu;
  Activation output_activation = Activation::linear;

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Throws ConfigError on shape or tag violations and NumericalError on
  /// non-finite parameters.
  void validate() const;

  friend bool operator==(const MlpModel& a, const MlpModel& b);
};

/// Fan-in scaled normal initialization: std sqrt(2/fan_in) for relu hidden
/// layers, sqrt(1/fan_in) otherwise. Biases start at zero.
MlpModel init_model(std::span<const int> layer_dims, Activation hidden, Activation output,
                    std::uint64_t seed);

/// All post-activation values of one forward pass. activations[0] is the
/// input, activations.back() the network output.
struct ForwardTrace {
  std::vector<Matrix> activations;
  const Matrix& output() const { return activations.back(); }
};

ForwardTrace forward_trace(const MlpModel& model, const Matrix& inputs);
Matrix forward(const MlpModel& model, const Matrix& inputs);

/// Parameter gradients plus the gradient with respect to the network input,
/// which is what lets a loss on D(G(z)) or C(G(z)) reach the generator.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Matrix input;

  static Gradients zeros_like(const MlpModel& model);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double factor);
};

/// Backpropagates `output_grad` (dLoss/d output, same shape as the forward
/// output) through the recorded trace.
Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& output_grad);
Gradients backward(const MlpModel& model, const Matrix& inputs, const Matrix& output_grad);

// ---------------------------------------------------------------------------
// Losses. Probabilities are clamped into [kProbEpsilon, 1 - kProbEpsilon]
// before any log; derivatives are evaluated at the clamped value.

inline constexpr double kProbEpsilon = 1e-7;

double binary_cross_entropy(double predicted, double target);
double binary_cross_entropy_grad(double predicted, double target);

double categorical_cross_entropy(std::span<const double> predicted, std::span<const double> target);
/// d/d predicted_j of categorical_cross_entropy, written into `grad`.
void categorical_cross_entropy_grad(std::span<const double> predicted,
                                    std::span<const double> target, std::span<double> grad);

/// Mean categorical cross-entropy over rows and its gradient w.r.t. `probs`.
double mean_categorical_cross_entropy(const Matrix& probs, const Matrix& targets,
                                      Matrix* grad = nullptr);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;  // sgd_momentum only
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 term added to weight (not bias) gradients
};

struct OptimizerState {
  OptimizerConfig config;
  // First-moment (or velocity) and second-moment buffers, shaped like the
  // model parameters.
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  std::uint64_t step_count = 0;

  static OptimizerState for_model(const MlpModel& model, const OptimizerConfig& config);
};

/// Applies one update in place. Throws NumericalError naming the layer when a
/// gradient is not finite; the model is left untouched in that case.
void optimizer_step(MlpModel& model, const Gradients& grads, OptimizerState& state);

// ---------------------------------------------------------------------------
// Model file
//
//   AUGFORGE-MLP v1
//   dims: d0 d1 ... dk
//   act: <hidden> <output>
//   bytes: <payload byte count>
//   <little-endian float64 payload: per layer, weights row-major then biases>

void write_model(std::ostream& out, const MlpModel& model);
MlpModel read_model(std::istream& in);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

/// FNV-1a over dims, activation tags and raw parameter bits.
std::uint64_t model_hash(const MlpModel& model);

}  // namespace augforge
