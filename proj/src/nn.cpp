#include "augforge/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "augforge/error.hpp"
#include "augforge/rng.hpp"

namespace augforge {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
    case Activation::linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "softmax") return Activation::softmax;
  if (name == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::size_t MlpModel::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i)
    total += static_cast<std::size_t>(layer_dims[i + 1]) * (layer_dims[i] + 1);
  return total;
}

void MlpModel::validate() const {
  if (layer_dims.size() < 2) throw ConfigError("model needs at least two layer dims");
  for (int d : layer_dims)
    if (d < 1) throw ConfigError("layer dims must be positive");
  if (hidden_activation != Activation::relu && hidden_activation != Activation::tanh)
    throw ConfigError("hidden activation must be relu or tanh");
  if (output_activation == Activation::relu || output_activation == Activation::tanh)
    throw ConfigError("output activation must be sigmoid, softmax or linear");
  if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
    throw ConfigError("layer count does not match dims");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i].rows() != layer_dims[i + 1] || weights[i].cols() != layer_dims[i] ||
        biases[i].size() != layer_dims[i + 1])
      throw ConfigError("parameter shape mismatch in layer " + std::to_string(i));
    if (!weights[i].allFinite() || !biases[i].allFinite())
      throw NumericalError("non-finite parameter in layer " + std::to_string(i));
  }
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.layer_dims != b.layer_dims || a.hidden_activation != b.hidden_activation ||
      a.output_activation != b.output_activation || a.weights.size() != b.weights.size())
    return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i)
    if (a.weights[i] != b.weights[i] || a.biases[i] != b.biases[i]) return false;
  return true;
}

MlpModel init_model(std::span<const int> layer_dims, Activation hidden, Activation output,
                    std::uint64_t seed) {
  MlpModel model;
  model.layer_dims.assign(layer_dims.begin(), layer_dims.end());
  model.hidden_activation = hidden;
  model.output_activation = output;
  if (model.layer_dims.size() < 2) throw ConfigError("model needs at least two layer dims");
  for (int d : model.layer_dims)
    if (d < 1) throw ConfigError("layer dims must be positive");

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i + 1 < model.layer_dims.size(); ++i) {
    const int fan_in = model.layer_dims[i];
    const int fan_out = model.layer_dims[i + 1];
    const double scale = std::sqrt((hidden == Activation::relu ? 2.0 : 1.0) / fan_in);
    Matrix w(fan_out, fan_in);
    // Row-major fill keeps the draw order independent of Eigen's storage.
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = scale * normal(rng);
    model.weights.push_back(std::move(w));
    model.biases.push_back(Vector::Zero(fan_out));
  }
  model.validate();
  return model;
}

namespace {

void apply_activation(Matrix& z, Activation act) {
  switch (act) {
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh(); break;
    case Activation::sigmoid: z = (1.0 + (-z.array()).exp()).inverse(); break;
    case Activation::softmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double top = z.row(r).maxCoeff();
        z.row(r) = (z.row(r).array() - top).exp();
        z.row(r) /= z.row(r).sum();
      }
      break;
    case Activation::linear: break;
  }
}

// Converts dLoss/d(activation output) into dLoss/d(pre-activation).
Matrix activation_backward(const Matrix& out, const Matrix& grad, Activation act) {
  switch (act) {
    case Activation::relu: return (out.array() > 0.0).cast<double>() * grad.array();
    case Activation::tanh: return (1.0 - out.array().square()) * grad.array();
    case Activation::sigmoid: return out.array() * (1.0 - out.array()) * grad.array();
    case Activation::softmax: {
      Matrix dz(out.rows(), out.cols());
      for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double dot = out.row(r).dot(grad.row(r));
        dz.row(r) = out.row(r).array() * (grad.row(r).array() - dot);
      }
      return dz;
    }
    case Activation::linear: return grad;
  }
  return grad;
}

}  // namespace

ForwardTrace forward_trace(const MlpModel& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim())
    throw ConfigError("forward: input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                      std::to_string(model.input_dim()));
  ForwardTrace trace;
  trace.activations.reserve(model.num_layers() + 1);
  trace.activations.push_back(inputs);
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    Matrix z = trace.activations.back() * model.weights[i].transpose();
    z.rowwise() += model.biases[i].transpose();
    const bool last = i + 1 == model.num_layers();
    apply_activation(z, last ? model.output_activation : model.hidden_activation);
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

Matrix forward(const MlpModel& model, const Matrix& inputs) {
  return std::move(forward_trace(model, inputs).activations.back());
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    g.weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
    g.biases.push_back(Vector::Zero(model.biases[i].size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] += other.weights[i];
    biases[i] += other.biases[i];
  }
  if (input.size() == other.input.size() && input.size() > 0) input += other.input;
  return *this;
}

Gradients& Gradients::operator*=(double factor) {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] *= factor;
    biases[i] *= factor;
  }
  input *= factor;
  return *this;
}

Gradients backward(const MlpModel& model, const ForwardTrace& trace, const Matrix& output_grad) {
  const Matrix& out = trace.output();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
    throw ConfigError("backward: loss gradient shape does not match forward output");

  const std::size_t layers = model.num_layers();
  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Matrix dz = activation_backward(out, output_grad, model.output_activation);
  for (std::size_t i = layers; i-- > 0;) {
    const Matrix& a_in = trace.activations[i];
    g.weights[i] = dz.transpose() * a_in;
    g.biases[i] = dz.colwise().sum().transpose();
    Matrix da = dz * model.weights[i];
    if (i == 0) {
      g.input = std::move(da);
    } else {
      dz = activation_backward(a_in, da, model.hidden_activation);
    }
  }
  return g;
}

Gradients backward(const MlpModel& model, const Matrix& inputs, const Matrix& output_grad) {
  return backward(model, forward_trace(model, inputs), output_grad);
}

// ---------------------------------------------------------------------------

namespace {
double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }
}  // namespace

double binary_cross_entropy(double predicted, double target) {
  const double p = clamp_prob(predicted);
  double loss = 0.0;
  if (target != 0.0) loss -= target * std::log(p);
  if (target != 1.0) loss -= (1.0 - target) * std::log(1.0 - p);
  return loss;
}

double binary_cross_entropy_grad(double predicted, double target) {
  const double p = clamp_prob(predicted);
  return -target / p + (1.0 - target) / (1.0 - p);
}

double categorical_cross_entropy(std::span<const double> predicted, std::span<const double> target) {
  if (predicted.size() != target.size()) throw ConfigError("cross entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < predicted.size(); ++j)
    if (target[j] != 0.0) loss -= target[j] * std::log(std::max(predicted[j], kProbEpsilon));
  return loss;
}

void categorical_cross_entropy_grad(std::span<const double> predicted,
                                    std::span<const double> target, std::span<double> grad) {
  if (predicted.size() != target.size() || grad.size() != target.size())
    throw ConfigError("cross entropy: length mismatch");
  for (std::size_t j = 0; j < predicted.size(); ++j)
    grad[j] = -target[j] / std::max(predicted[j], kProbEpsilon);
}

double mean_categorical_cross_entropy(const Matrix& probs, const Matrix& targets, Matrix* grad) {
  if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
    throw ConfigError("cross entropy: shape mismatch");
  const double n = static_cast<double>(probs.rows());
  const Matrix clamped = probs.cwiseMax(kProbEpsilon);
  const double loss = -(targets.array() * clamped.array().log()).sum() / n;
  if (grad) *grad = -(targets.array() / clamped.array()) / n;
  return loss;
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::for_model(const MlpModel& model, const OptimizerConfig& config) {
  if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  OptimizerState s;
  s.config = config;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    s.m_weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
    s.m_biases.push_back(Vector::Zero(model.biases[i].size()));
    if (config.kind == OptimizerKind::adam) {
      s.v_weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
      s.v_biases.push_back(Vector::Zero(model.biases[i].size()));
    }
  }
  return s;
}

namespace {

template <typename Param>
void update_param(Param& p, const Param& g, Param& m, Param* v, const OptimizerConfig& c,
                  std::uint64_t t) {
  if (c.kind == OptimizerKind::sgd_momentum) {
    m = c.momentum * m + g;
    p -= c.learning_rate * m;
    return;
  }
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  *v = c.beta2 * *v + (1.0 - c.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  p.array() -= c.learning_rate * (m.array() / bc1) / ((v->array() / bc2).sqrt() + c.epsilon);
}

}  // namespace

void optimizer_step(MlpModel& model, const Gradients& grads, OptimizerState& state) {
  if (grads.weights.size() != model.num_layers() || grads.biases.size() != model.num_layers() ||
      state.m_weights.size() != model.num_layers())
    throw ConfigError("optimizer: gradient layer count does not match model");
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    if (grads.weights[i].rows() != model.weights[i].rows() ||
        grads.weights[i].cols() != model.weights[i].cols() ||
        grads.biases[i].size() != model.biases[i].size())
      throw ConfigError("optimizer: gradient shape mismatch in layer " + std::to_string(i));
    if (!grads.weights[i].allFinite() || !grads.biases[i].allFinite())
      throw NumericalError("non-finite gradient in layer " + std::to_string(i));
  }

  const OptimizerConfig& c = state.config;
  const std::uint64_t t = ++state.step_count;
  const bool adam = c.kind == OptimizerKind::adam;
  for (std::size_t i = 0; i < model.num_layers(); ++i) {
    Matrix gw = grads.weights[i];
    if (c.weight_decay > 0.0) gw += c.weight_decay * model.weights[i];
    update_param(model.weights[i], gw, state.m_weights[i], adam ? &state.v_weights[i] : nullptr, c, t);
    update_param(model.biases[i], grads.biases[i], state.m_biases[i], adam ? &state.v_biases[i] : nullptr,
                 c, t);
  }
}

}  // namespace augforge
