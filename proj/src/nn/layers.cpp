#include "xbar/nn/layers.hpp"

#include <algorithm>
#include <cmath>

#include "xbar/common/error.hpp"

namespace xbar::nn {

namespace {

void require_rank(const Tensor& x, std::size_t rank, const char* who) {
  if (x.rank() != rank)
    throw ShapeError(std::string(who) + " expects rank-" + std::to_string(rank) + " input, got " +
                     shape_string(x.shape()));
}

// He-style fan-in scaled uniform init; biases start at zero.
void fan_in_uniform(Tensor& w, Tensor& b, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : w.data()) v = dist(rng);
  for (auto& v : b.data()) v = 0.0;
}

}  // namespace

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Linear: return "linear";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Relu: return "relu";
    case LayerKind::AvgPool: return "avgpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "unknown";
}

// ---- Linear ---------------------------------------------------------------

Linear::Linear(std::size_t in, std::size_t out)
    : in_(in), out_(out), weight_({out, in}), bias_({out}) {
  if (in == 0 || out == 0) throw ShapeError("linear layer dimensions must be positive");
}

Shape Linear::output_shape(const Shape& in) const {
  if (in.size() != 1 || in[0] != in_)
    throw ShapeError("linear expects input " + shape_string({in_}) + ", got " + shape_string(in));
  return {out_};
}

Tensor Linear::forward(const Tensor& x) const {
  require_rank(x, 2, "linear");
  output_shape(x.sample_shape());
  Tensor y({x.batch(), out_});
  Eigen::Map<const RowMatrix> W(weight_.ptr(), static_cast<long>(out_), static_cast<long>(in_));
  Eigen::Map<const Eigen::RowVectorXd> b(bias_.ptr(), static_cast<long>(out_));
  y.matrix().noalias() = x.matrix() * W.transpose();
  y.matrix().rowwise() += b;
  return y;
}

Tensor Linear::backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const {
  Eigen::Map<const RowMatrix> W(weight_.ptr(), static_cast<long>(out_), static_cast<long>(in_));
  Tensor gx(x.shape());
  gx.matrix().noalias() = grad_y.matrix() * W;
  if (!grads.empty()) {
    Eigen::Map<RowMatrix> gW(grads[0].data(), static_cast<long>(out_), static_cast<long>(in_));
    Eigen::Map<Eigen::RowVectorXd> gb(grads[1].data(), static_cast<long>(out_));
    gW.noalias() += grad_y.matrix().transpose() * x.matrix();
    gb += grad_y.matrix().colwise().sum();
  }
  return gx;
}

nlohmann::json Linear::describe() const { return {{"type", "linear"}, {"in", in_}, {"out", out_}}; }

void Linear::init(Rng& rng) { fan_in_uniform(weight_, bias_, in_, rng); }

// ---- im2col ---------------------------------------------------------------

RowMatrix im2col(const double* sample, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  RowMatrix cols(static_cast<long>(oh * ow), static_cast<long>(g.patch_size()));
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* row = cols.row(static_cast<long>(oy * ow + ox)).data();
      std::size_t col = 0;
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx, ++col) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                                ix < static_cast<long>(g.width);
            row[col] = inside ? sample[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                                       static_cast<std::size_t>(ix)]
                              : 0.0;
          }
    }
  return cols;
}

void col2im(const RowMatrix& cols, const ConvGeometry& g, double* sample) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double* row = cols.row(static_cast<long>(oy * ow + ox)).data();
      std::size_t col = 0;
      for (std::size_t c = 0; c < g.channels; ++c)
        for (std::size_t ky = 0; ky < k; ++ky)
          for (std::size_t kx = 0; kx < k; ++kx, ++col) {
            const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) && ix < static_cast<long>(g.width))
              sample[(c * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] +=
                  row[col];
          }
    }
}

// ---- Conv2d ---------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride,
               std::size_t pad)
    : in_c_(in_channels), out_c_(out_channels), k_(kernel), stride_(stride), pad_(pad),
      weight_({out_channels, in_channels, kernel, kernel}), bias_({out_channels}) {
  if (in_c_ == 0 || out_c_ == 0 || k_ == 0 || stride_ == 0)
    throw ShapeError("conv2d channels, kernel and stride must be positive");
}

ConvGeometry Conv2d::geometry(const Shape& in) const {
  if (in.size() != 3 || in[0] != in_c_)
    throw ShapeError("conv2d expects [" + std::to_string(in_c_) + ",H,W] input, got " + shape_string(in));
  if (in[1] + 2 * pad_ < k_ || in[2] + 2 * pad_ < k_) throw ShapeError("conv2d kernel larger than padded input");
  return {in_c_, in[1], in[2], k_, stride_, pad_};
}

Shape Conv2d::output_shape(const Shape& in) const {
  const auto g = geometry(in);
  return {out_c_, g.out_height(), g.out_width()};
}

Tensor Conv2d::forward(const Tensor& x) const {
  require_rank(x, 4, "conv2d");
  const auto g = geometry(x.sample_shape());
  const std::size_t L = g.patches();
  Tensor y({x.batch(), out_c_, g.out_height(), g.out_width()});
  Eigen::Map<const RowMatrix> W(weight_.ptr(), static_cast<long>(out_c_), static_cast<long>(g.patch_size()));
  Eigen::Map<const Eigen::VectorXd> b(bias_.ptr(), static_cast<long>(out_c_));
  for (std::size_t n = 0; n < x.batch(); ++n) {
    const RowMatrix cols = im2col(x.ptr() + n * x.sample_size(), g);
    Eigen::Map<RowMatrix> Y(y.ptr() + n * y.sample_size(), static_cast<long>(out_c_), static_cast<long>(L));
    Y.noalias() = W * cols.transpose();
    Y.colwise() += b;
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& grad_y, GradBuffers grads) const {
  const auto g = geometry(x.sample_shape());
  const std::size_t L = g.patches();
  Eigen::Map<const RowMatrix> W(weight_.ptr(), static_cast<long>(out_c_), static_cast<long>(g.patch_size()));
  Tensor gx(x.shape());
  for (std::size_t n = 0; n < x.batch(); ++n) {
    Eigen::Map<const RowMatrix> gY(grad_y.ptr() + n * grad_y.sample_size(), static_cast<long>(out_c_),
                                   static_cast<long>(L));
    if (!grads.empty()) {
      const RowMatrix cols = im2col(x.ptr() + n * x.sample_size(), g);
      Eigen::Map<RowMatrix> gW(grads[0].data(), static_cast<long>(out_c_), static_cast<long>(g.patch_size()));
      Eigen::Map<Eigen::VectorXd> gb(grads[1].data(), static_cast<long>(out_c_));
      gW.noalias() += gY * cols;
      gb += gY.rowwise().sum();
    }
    const RowMatrix gcols = gY.transpose() * W;
    col2im(gcols, g, gx.ptr() + n * gx.sample_size());
  }
  return gx;
}

nlohmann::json Conv2d::describe() const {
  return {{"type", "conv2d"}, {"in", in_c_}, {"out", out_c_}, {"kernel", k_}, {"stride", stride_}, {"pad", pad_}};
}

void Conv2d::init(Rng& rng) { fan_in_uniform(weight_, bias_, in_c_ * k_ * k_, rng); }

// ---- elementwise / pooling -------------------------------------------------

Tensor Relu::forward(const Tensor& x) const {
  Tensor y = x;
  y.drop_grad();
  for (auto& v : y.data()) v = std::max(v, 0.0);  // keeps NaN visible
  return y;
}

Tensor Relu::backward(const Tensor& x, const Tensor& grad_y, GradBuffers) const {
  Tensor gx(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? grad_y[i] : 0.0;
  return gx;
}

AvgPool::AvgPool(std::size_t window) : window_(window) {
  if (window == 0) throw ShapeError("avgpool window must be positive");
}

Shape AvgPool::output_shape(const Shape& in) const {
  if (in.size() != 3) throw ShapeError("avgpool expects [C,H,W] input, got " + shape_string(in));
  if (in[1] % window_ != 0 || in[2] % window_ != 0)
    throw ShapeError("avgpool window " + std::to_string(window_) + " does not divide " + shape_string(in));
  return {in[0], in[1] / window_, in[2] / window_};
}

Tensor AvgPool::forward(const Tensor& x) const {
  require_rank(x, 4, "avgpool");
  const Shape os = output_shape(x.sample_shape());
  const std::size_t C = os[0], oh = os[1], ow = os[2], H = x.dim(2), W = x.dim(3), w = window_;
  const double inv = 1.0 / static_cast<double>(w * w);
  Tensor y({x.batch(), C, oh, ow});
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = x.ptr() + (n * C + c) * H * W;
      double* dst = y.ptr() + (n * C + c) * oh * ow;
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (std::size_t dy = 0; dy < w; ++dy)
            for (std::size_t dx = 0; dx < w; ++dx) s += src[(oy * w + dy) * W + ox * w + dx];
          dst[oy * ow + ox] = s * inv;
        }
    }
  return y;
}

Tensor AvgPool::backward(const Tensor& x, const Tensor& grad_y, GradBuffers) const {
  const std::size_t C = x.dim(1), H = x.dim(2), W = x.dim(3), w = window_, oh = H / w, ow = W / w;
  const double inv = 1.0 / static_cast<double>(w * w);
  Tensor gx(x.shape());
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < C; ++c) {
      const double* src = grad_y.ptr() + (n * C + c) * oh * ow;
      double* dst = gx.ptr() + (n * C + c) * H * W;
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t xx = 0; xx < W; ++xx) dst[y * W + xx] = src[(y / w) * ow + xx / w] * inv;
    }
  return gx;
}

Tensor Flatten::forward(const Tensor& x) const { return x.reshaped({x.batch(), x.sample_size()}); }

Tensor Flatten::backward(const Tensor& x, const Tensor& grad_y, GradBuffers) const {
  return grad_y.reshaped(x.shape());
}

std::unique_ptr<Layer> layer_from_description(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "linear") return std::make_unique<Linear>(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>());
  if (type == "conv2d")
    return std::make_unique<Conv2d>(j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>(),
                                    j.at("kernel").get<std::size_t>(), j.value("stride", std::size_t{1}),
                                    j.value("pad", std::size_t{0}));
  if (type == "relu") return std::make_unique<Relu>();
  if (type == "avgpool") return std::make_unique<AvgPool>(j.at("window").get<std::size_t>());
  if (type == "flatten") return std::make_unique<Flatten>();
  throw FormatError("unknown layer type '" + type + "'");
}

}  // namespace xbar::nn
