#include "eyedrive/nn/network.hpp"

#include <chrono>
#include <cmath>

namespace eyedrive::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2D: return "Conv2D";
    case LayerKind::kReLU: return "ReLU";
    case LayerKind::kMaxPool2x2: return "MaxPool2x2";
    case LayerKind::kDropout: return "Dropout";
    case LayerKind::kFlatten: return "Flatten";
    case LayerKind::kDense: return "Dense";
    case LayerKind::kSoftmax: return "Softmax";
  }
  return "Unknown";
}

template <typename T>
BasicNetwork<T>::BasicNetwork(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed)
    : input_shape_(std::move(input_shape)), specs_(std::move(layers)), seed_(seed) {
  build_shapes();
  initialize(seed);
}

template <typename T>
void BasicNetwork<T>::build_shapes() {
  if (input_shape_.empty() || shape_volume(input_shape_) == 0) {
    throw ShapeError("network input shape must be nonempty with positive extents");
  }
  shapes_.assign(1, input_shape_);
  layers_.clear();
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const LayerSpec& spec = specs_[i];
    const Shape& in = shapes_.back();
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(spec.kind) + "): ";
    Layer layer{spec, {}, {}, {}};
    Shape out;
    switch (spec.kind) {
      case LayerKind::kConv2D:
        if (in.size() != 3) throw ShapeError(where + "needs HxWxC input, got " + shape_to_string(in));
        if (spec.units == 0) throw ConfigError(where + "filter count must be positive");
        layer.params.push_back({BasicTensor<T>({3, 3, in[2], spec.units}), {}});
        layer.params.push_back({BasicTensor<T>({spec.units}), {}});
        out = {in[0], in[1], spec.units};
        break;
      case LayerKind::kReLU:
        out = in;
        break;
      case LayerKind::kDropout:
        if (!(spec.rate > 0.0 && spec.rate < 1.0)) {
          throw ConfigError(where + "rate must lie in (0, 1)");
        }
        out = in;
        break;
      case LayerKind::kMaxPool2x2:
        if (in.size() != 3 || in[0] % 2 != 0 || in[1] % 2 != 0) {
          throw ShapeError(where + "needs HxWxC input with even extents, got " + shape_to_string(in));
        }
        out = {in[0] / 2, in[1] / 2, in[2]};
        break;
      case LayerKind::kFlatten:
        out = {shape_volume(in)};
        break;
      case LayerKind::kDense:
        if (in.size() != 1) throw ShapeError(where + "needs a flat input, got " + shape_to_string(in));
        if (spec.units == 0) throw ConfigError(where + "unit count must be positive");
        layer.params.push_back({BasicTensor<T>({in[0], spec.units}), {}});
        layer.params.push_back({BasicTensor<T>({spec.units}), {}});
        out = {spec.units};
        break;
      case LayerKind::kSoftmax:
        if (in.size() != 1) throw ShapeError(where + "needs a flat input, got " + shape_to_string(in));
        out = in;
        break;
      default:
        throw ConfigError(where + "unknown layer kind");
    }
    for (Parameter<T>& p : layer.params) p.grad.assign(p.value.size(), 0.0);
    layers_.push_back(std::move(layer));
    shapes_.push_back(std::move(out));
  }
}

template <typename T>
void BasicNetwork<T>::initialize(std::uint64_t seed) {
  Rng init_rng(derive_seed(seed, 0));
  dropout_rng_ = Rng(derive_seed(seed, 1));
  std::size_t last_dense = layers_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].spec.kind == LayerKind::kDense) last_dense = i;
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    if (layer.params.empty()) continue;
    const Shape& w = layer.params[0].value.shape();
    double fan_in = 0.0, fan_out = 0.0;
    if (layer.spec.kind == LayerKind::kConv2D) {
      fan_in = static_cast<double>(w[0] * w[1] * w[2]);
      fan_out = static_cast<double>(w[0] * w[1] * w[3]);
    } else {
      fan_in = static_cast<double>(w[0]);
      fan_out = static_cast<double>(w[1]);
    }
    const double limit = i == last_dense ? std::sqrt(6.0 / (fan_in + fan_out))
                                         : std::sqrt(6.0 / fan_in);
    for (T& v : layer.params[0].value.values()) v = static_cast<T>(init_rng.uniform(-limit, limit));
  }
}

template <typename T>
const BasicTensor<T>& BasicNetwork<T>::forward(const BasicTensor<T>& input, Mode mode) {
  if (input.shape() != input_shape_) {
    throw ShapeError("network expects input " + shape_to_string(input_shape_) + ", got " +
                     shape_to_string(input.shape()));
  }
  if (mode == Mode::kReplay && !(has_forward_ && last_mode_ != Mode::kInference)) {
    throw StateError("replay forward requires a preceding training forward");
  }
  activations_.resize(layers_.size() + 1);
  activations_[0] = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Layer& layer = layers_[i];
    const BasicTensor<T>& x = activations_[i];
    const auto start = std::chrono::steady_clock::now();
    BasicTensor<T> y;
    switch (layer.spec.kind) {
      case LayerKind::kConv2D:
        y = conv2d_forward(x, layer.params[0].value, layer.params[1].value, conv_algorithm_);
        break;
      case LayerKind::kReLU:
        y = relu(x);
        break;
      case LayerKind::kMaxPool2x2: {
        PoolResult<T> r = maxpool2x2(x);
        y = std::move(r.output);
        layer.argmax = std::move(r.argmax);
        break;
      }
      case LayerKind::kDropout:
        if (mode == Mode::kReplay) {
          y = dropout_apply(x, layer.spec.rate, layer.mask);
        } else {
          DropoutResult<T> r = dropout(x, layer.spec.rate, mode == Mode::kTraining, dropout_rng_);
          y = std::move(r.output);
          layer.mask = std::move(r.mask);
        }
        break;
      case LayerKind::kFlatten:
        y = x.reshaped(shapes_[i + 1]);
        break;
      case LayerKind::kDense:
        y = dense_forward(x, layer.params[0].value, layer.params[1].value);
        break;
      case LayerKind::kSoftmax:
        y = softmax(x);
        break;
    }
    if (check_finite_ && !y.all_finite()) {
      throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" +
                         to_string(layer.spec.kind) + ")");
    }
    activations_[i + 1] = std::move(y);
    if (layer_timer_ != nullptr) {
      layer_timer_->resize(layers_.size(), 0.0);
      (*layer_timer_)[i] +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  }
  if (mode != Mode::kReplay) last_mode_ = mode;
  has_forward_ = true;
  return activations_.back();
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::backward(const BasicTensor<T>& grad_output, bool want_input_grad) {
  if (!has_forward_) throw StateError("backward called before forward");
  if (grad_output.shape() != output_shape()) {
    throw ShapeError("backward expects gradient " + shape_to_string(output_shape()) + ", got " +
                     shape_to_string(grad_output.shape()));
  }
  return backward_through(layers_.size(), grad_output, want_input_grad);
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::backward_cross_entropy(std::size_t target, double scale,
                                                       bool want_input_grad) {
  if (!has_forward_) throw StateError("backward called before forward");
  if (layers_.empty() || layers_.back().spec.kind != LayerKind::kSoftmax) {
    throw StateError("cross-entropy backward needs a trailing Softmax layer");
  }
  const BasicTensor<T>& probs = activations_.back();
  if (target >= probs.size()) throw InputError("target class out of range");
  BasicTensor<T> grad(probs.shape());
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double onehot = k == target ? 1.0 : 0.0;
    grad[k] = static_cast<T>((static_cast<double>(probs[k]) - onehot) * scale);
  }
  // The combined gradient already accounts for the softmax layer.
  return backward_through(layers_.size() - 1, grad, want_input_grad);
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::backward_through(std::size_t count, BasicTensor<T> grad,
                                                 bool want_input_grad) {
  for (std::size_t i = count; i-- > 0;) {
    Layer& layer = layers_[i];
    const BasicTensor<T>& x = activations_[i];
    const bool need_input = want_input_grad || i > 0;
    switch (layer.spec.kind) {
      case LayerKind::kConv2D: {
        BasicTensor<T> dx;
        conv2d_backward(x, layer.params[0].value, grad, layer.params[0].grad, layer.params[1].grad,
                        need_input ? &dx : nullptr);
        grad = std::move(dx);
        break;
      }
      case LayerKind::kReLU:
        grad = relu_backward(x, grad);
        break;
      case LayerKind::kMaxPool2x2:
        grad = maxpool2x2_backward(x.shape(), layer.argmax, grad);
        break;
      case LayerKind::kDropout:
        if (last_mode_ != Mode::kInference) grad = dropout_backward(grad, layer.spec.rate, layer.mask);
        break;
      case LayerKind::kFlatten:
        grad = grad.reshaped(x.shape());
        break;
      case LayerKind::kDense: {
        BasicTensor<T> dx;
        dense_backward(x, layer.params[0].value, grad, layer.params[0].grad, layer.params[1].grad,
                       need_input ? &dx : nullptr);
        grad = std::move(dx);
        break;
      }
      case LayerKind::kSoftmax:
        grad = softmax_backward(activations_[i + 1], grad);
        break;
    }
    if (!need_input) return {};
  }
  return want_input_grad ? grad : BasicTensor<T>{};
}

template <typename T>
std::vector<std::uint32_t> BasicNetwork<T>::branch_pattern() const {
  std::vector<std::uint32_t> out;
  if (!has_forward_) return out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].spec.kind == LayerKind::kReLU) {
      for (const T v : activations_[i].values()) out.push_back(v > T{0} ? 1u : 0u);
    } else if (layers_[i].spec.kind == LayerKind::kMaxPool2x2) {
      out.insert(out.end(), layers_[i].argmax.begin(), layers_[i].argmax.end());
    }
  }
  return out;
}

template <typename T>
void BasicNetwork<T>::zero_grad() {
  for (Layer& layer : layers_) {
    for (Parameter<T>& p : layer.params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
  }
}

template <typename T>
std::vector<Parameter<T>*> BasicNetwork<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (Layer& layer : layers_) {
    for (Parameter<T>& p : layer.params) out.push_back(&p);
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> BasicNetwork<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const Layer& layer : layers_) {
    for (const Parameter<T>& p : layer.params) out.push_back(&p);
  }
  return out;
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) {
    for (const Parameter<T>& p : layer.params) n += p.value.size();
  }
  return n;
}

template <typename T>
template <typename U>
BasicNetwork<U> BasicNetwork<T>::converted() const {
  BasicNetwork<U> out;
  out.input_shape_ = input_shape_;
  out.specs_ = specs_;
  out.seed_ = seed_;
  out.build_shapes();
  out.dropout_rng_ = Rng(derive_seed(seed_, 1));
  out.conv_algorithm_ = conv_algorithm_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (std::size_t j = 0; j < layers_[i].params.size(); ++j) {
      out.layers_[i].params[j].value = layers_[i].params[j].value.template cast<U>();
    }
  }
  return out;
}

template class BasicNetwork<float>;
template class BasicNetwork<double>;
template BasicNetwork<double> BasicNetwork<float>::converted<double>() const;
template BasicNetwork<float> BasicNetwork<double>::converted<float>() const;
template BasicNetwork<float> BasicNetwork<float>::converted<float>() const;

}  // namespace eyedrive::nn
