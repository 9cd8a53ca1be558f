#include "xbar/nn/network.hpp"

#include "xbar/common/error.hpp"
#include "xbar/common/rng.hpp"

namespace xbar::nn {

Network::Network(Shape input_shape) : input_shape_(std::move(input_shape)) {}

Network::Network(const Network& other) : input_shape_(other.input_shape_), skips_(other.skips_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Network& Network::add_skip(std::size_t from, std::size_t to) {
  if (from > to || to >= layers_.size())
    throw ShapeError("skip " + std::to_string(from) + "->" + std::to_string(to) + " out of range");
  skips_.push_back({from, to});
  activation_shapes();
  return *this;
}

std::vector<Shape> Network::activation_shapes() const {
  std::vector<Shape> shapes{input_shape_};
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    shapes.push_back(layers_[k]->output_shape(shapes.back()));
    for (const auto& s : skips_)
      if (s.to == k && shapes[s.from] != shapes.back())
        throw ShapeError("skip from activation " + std::to_string(s.from) + " " + shape_string(shapes[s.from]) +
                         " does not match layer " + std::to_string(k) + " output " + shape_string(shapes.back()));
  }
  return shapes;
}

Shape Network::output_shape() const { return activation_shapes().back(); }

void Network::check_input(const Tensor& x) const {
  if (x.rank() != input_shape_.size() + 1 || x.sample_shape() != input_shape_)
    throw ShapeError("network expects [N]" + shape_string(input_shape_) + " input, got " + shape_string(x.shape()));
}

Trace Network::forward_trace(const Tensor& x, const AffineHook* hook) const {
  check_input(x);
  Trace t;
  t.activations.reserve(layers_.size() + 1);
  t.activations.push_back(x);
  t.activations.back().drop_grad();
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& l = *layers_[k];
    Tensor y = (hook && l.affine()) ? hook->apply(k, l, t.activations[k]) : l.forward(t.activations[k]);
    for (const auto& s : skips_)
      if (s.to == k) {
        const Tensor& r = t.activations[s.from];
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += r[i];
      }
    t.activations.push_back(std::move(y));
  }
  return t;
}

Tensor Network::forward(const Tensor& x, const AffineHook* hook) const {
  return std::move(forward_trace(x, hook).activations.back());
}

Tensor Network::backward(const Trace& trace, const Tensor& grad_output, ParamGrads* param_grads) const {
  if (trace.activations.size() != layers_.size() + 1) throw ShapeError("trace does not belong to this network");
  if (grad_output.shape() != trace.output().shape())
    throw ShapeError("output gradient shape " + shape_string(grad_output.shape()) + " does not match output " +
                     shape_string(trace.output().shape()));
  // Offsets of each layer's parameters inside param_grads.
  std::vector<std::size_t> offset(layers_.size() + 1, 0);
  for (std::size_t k = 0; k < layers_.size(); ++k) offset[k + 1] = offset[k] + layers_[k]->params().size();
  if (param_grads && param_grads->size() != offset.back()) *param_grads = zero_param_grads();

  std::vector<Tensor> grads(layers_.size() + 1);
  grads.back() = grad_output;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Tensor& gy = grads[k + 1];
    for (const auto& s : skips_)
      if (s.to == k) {
        Tensor& g = grads[s.from];
        if (g.empty()) g = Tensor(gy.shape());
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
    GradBuffers buf;
    if (param_grads) buf = GradBuffers(param_grads->data() + offset[k], offset[k + 1] - offset[k]);
    Tensor gx = layers_[k]->backward(trace.activations[k], gy, buf);
    if (grads[k].empty()) {
      grads[k] = std::move(gx);
    } else {
      for (std::size_t i = 0; i < gx.size(); ++i) grads[k][i] += gx[i];
    }
  }
  return std::move(grads[0]);
}

std::vector<Tensor*> Network::params() {
  std::vector<Tensor*> out;
  for (auto& l : layers_)
    for (auto* p : l->params()) out.push_back(p);
  return out;
}

std::vector<const Tensor*> Network::params() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers_)
    for (const auto* p : static_cast<const Layer&>(*l).params()) out.push_back(p);
  return out;
}

std::vector<std::string> Network::param_names() const {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto n = static_cast<const Layer&>(*layers_[k]).params().size();
    if (n >= 1) out.push_back("layer" + std::to_string(k) + ".weight");
    if (n >= 2) out.push_back("layer" + std::to_string(k) + ".bias");
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : params()) n += p->size();
  return n;
}

ParamGrads Network::zero_param_grads() const {
  ParamGrads g;
  for (const auto* p : params()) g.emplace_back(p->size(), 0.0);
  return g;
}

void Network::init(std::uint64_t seed) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    Rng rng = make_rng(seed, k);
    layers_[k]->init(rng);
  }
}

nlohmann::json Network::describe() const {
  nlohmann::json j;
  j["input"] = input_shape_;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers_) j["layers"].push_back(l->describe());
  j["skips"] = nlohmann::json::array();
  for (const auto& s : skips_) j["skips"].push_back({s.from, s.to});
  return j;
}

Network Network::from_description(const nlohmann::json& j) {
  try {
    Network net(j.at("input").get<Shape>());
    for (const auto& l : j.at("layers")) net.add(layer_from_description(l));
    if (j.contains("skips"))
      for (const auto& s : j.at("skips")) net.add_skip(s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>());
    net.activation_shapes();
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad network description: ") + e.what());
  }
}

Network make_cnn(const CnnSpec& spec) {
  if (spec.input.size() != 3) throw ShapeError("cnn input must be [C,H,W]");
  Network net(spec.input);
  std::size_t c = spec.input[0], h = spec.input[1], w = spec.input[2];
  for (std::size_t b = 0; b < spec.conv_channels.size(); ++b) {
    const std::size_t out = spec.conv_channels[b];
    net.emplace<Conv2d>(c, out, 3, 1, 1).emplace<Relu>();
    if (spec.residual && b == 0) {
      const std::size_t from = net.size();
      net.emplace<Conv2d>(out, out, 3, 1, 1);
      net.add_skip(from, net.size() - 1);
      net.emplace<Relu>();
    }
    net.emplace<AvgPool>(2);
    c = out;
    h /= 2;
    w /= 2;
  }
  net.emplace<Flatten>();
  std::size_t in = c * h * w;
  for (auto hdim : spec.hidden) {
    net.emplace<Linear>(in, hdim).emplace<Relu>();
    in = hdim;
  }
  net.emplace<Linear>(in, spec.classes);
  net.activation_shapes();
  return net;
}

}  // namespace xbar::nn
