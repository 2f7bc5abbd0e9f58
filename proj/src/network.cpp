#include "gsmn/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "gsmn/error.hpp"

namespace gsmn {
namespace {

double activate(Activation a, double x) noexcept {
  switch (a) {
    case Activation::identity: return x;
    case Activation::sigmoid:
      if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
      else {
        const double e = std::exp(x);
        return e / (1.0 + e);
      }
    case Activation::tanh: return std::tanh(x);
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::softmax: return x;  // handled row-wise
  }
  return x;
}

// Derivative expressed via pre-activation a and output h.
double activation_derivative(Activation act, double a, double h) noexcept {
  switch (act) {
    case Activation::identity: return 1.0;
    case Activation::sigmoid: return h * (1.0 - h);
    case Activation::tanh: return 1.0 - h * h;
    case Activation::relu: return a > 0.0 ? 1.0 : 0.0;
    case Activation::softmax: return 1.0;
  }
  return 1.0;
}

void softmax_rows(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double sum = 0.0;
    for (double& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : r) v /= sum;
  }
}

Matrix effective_weights(const Layer& layer) { return hadamard(layer.weights, layer.mask); }

void check_lambdas(const Network& net, const Matrix& x, const LambdaField* lambdas) {
  if (!lambdas) return;
  if (lambdas->layers.size() != net.depth())
    throw ShapeError(fmt::format("lambda field has {} layers, network has {}",
                                 lambdas->layers.size(), net.depth()));
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Matrix& lam = lambdas->layers[l];
    const auto& spec = net.layer(l).spec;
    if (lam.cols() != spec.in_dim + 1 || (lam.rows() != 1 && lam.rows() != x.rows()))
      throw ShapeError(fmt::format("lambda field layer {} is {}, expected (1 or {})x{}", l,
                                   lam.shape_string(), x.rows(), spec.in_dim + 1));
  }
}

struct Pass {
  std::vector<Matrix> inputs;          // h_{l-1} (*) lambda_l, without the bias column
  std::vector<Matrix> preactivations;  // a_l
  std::vector<Matrix> activations;     // h_0 .. h_L
};

Pass run_forward(const Network& net, const Matrix& x, const LambdaField* lambdas,
                 bool keep_inputs) {
  if (net.depth() == 0) throw ShapeError("forward: network has no layers");
  if (x.cols() != net.input_dim())
    throw ShapeError(fmt::format("forward: input {} does not match network input dim {}",
                                 x.shape_string(), net.input_dim()));
  check_lambdas(net, x, lambdas);

  Pass pass;
  pass.activations.push_back(x);
  for (std::size_t l = 0; l < net.depth(); ++l) {
    const Layer& layer = net.layer(l);
    const std::size_t in = layer.spec.in_dim;
    const std::size_t out = layer.spec.out_dim;
    const Matrix& h = pass.activations.back();

    Matrix input = h;
    if (lambdas) {
      const Matrix& lam = lambdas->layers[l];
      for (std::size_t i = 0; i < input.rows(); ++i) {
        auto lr = lam.row(lam.rows() == 1 ? 0 : i);
        auto r = input.row(i);
        for (std::size_t j = 0; j < in; ++j) r[j] *= lr[j];
      }
    }

    const Matrix w = effective_weights(layer);
    Matrix a(input.rows(), out);
    const auto bias = w.row(in);
    for (std::size_t i = 0; i < input.rows(); ++i) {
      double* o = a.row(i).data();
      const double* hi = input.row(i).data();
      for (std::size_t j = 0; j < in; ++j) {
        const double v = hi[j];
        if (v == 0.0) continue;
        const double* wr = w.row(j).data();
        for (std::size_t k = 0; k < out; ++k) o[k] += v * wr[k];
      }
      for (std::size_t k = 0; k < out; ++k) o[k] += bias[k];
    }

    Matrix act = a;
    if (layer.spec.activation == Activation::softmax) {
      softmax_rows(act);
    } else if (layer.spec.activation != Activation::identity) {
      for (double& v : act.data()) v = activate(layer.spec.activation, v);
    }
    if (keep_inputs) pass.inputs.push_back(std::move(input));
    pass.preactivations.push_back(std::move(a));
    pass.activations.push_back(std::move(act));
  }
  return pass;
}

// Little-endian byte helpers.
template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

template <class T>
T take(std::span<const std::uint8_t> in, std::size_t& offset) {
  if (offset + sizeof(T) > in.size())
    throw FormatError(fmt::format("network file truncated at offset {}", offset));
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  offset += sizeof(T);
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

constexpr std::uint32_t kNetworkVersion = 1;

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::softmax: return "softmax";
  }
  return "unknown";
}

Activation parse_activation(const std::string& name) {
  for (auto a : {Activation::identity, Activation::sigmoid, Activation::tanh, Activation::relu,
                 Activation::softmax})
    if (to_string(a) == name) return a;
  throw ConfigError(fmt::format("unknown activation \"{}\"", name));
}

std::string to_string(LossKind k) {
  return k == LossKind::cross_entropy ? "cross_entropy" : "squared_error";
}

LossKind parse_loss(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "squared_error") return LossKind::squared_error;
  throw ConfigError(fmt::format("unknown loss \"{}\"", name));
}

Network::Network(std::vector<LayerSpec> specs) {
  layers_.reserve(specs.size());
  for (const auto& s : specs)
    layers_.push_back(Layer{s, Matrix(s.in_dim + 1, s.out_dim), Matrix(s.in_dim + 1, s.out_dim, 1.0)});
  validate();
}

Network::Network(std::vector<LayerSpec> specs, Rng& rng) : Network(std::move(specs)) {
  for (auto& layer : layers_) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.spec.in_dim + layer.spec.out_dim));
    for (std::size_t r = 0; r < layer.spec.in_dim; ++r)
      for (double& w : layer.weights.row(r)) w = limit * (2.0 * rng.uniform() - 1.0);
  }
}

Network Network::from_dims(std::span<const std::size_t> dims, Activation hidden,
                           Activation output, Rng& rng) {
  if (dims.size() < 2) throw ConfigError("network needs at least input and output dims");
  std::vector<LayerSpec> specs;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    specs.push_back({dims[i], dims[i + 1], i + 2 == dims.size() ? output : hidden});
  return Network(std::move(specs), rng);
}

void Network::validate() const {
  if (layers_.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& s = layers_[l].spec;
    if (s.in_dim == 0 || s.out_dim == 0)
      throw ConfigError(fmt::format("layer {} has a zero dimension", l));
    if (l + 1 < layers_.size() && layers_[l + 1].spec.in_dim != s.out_dim)
      throw ConfigError(fmt::format("layer {} outputs {} but layer {} expects {}", l, s.out_dim,
                                    l + 1, layers_[l + 1].spec.in_dim));
    if (s.activation == Activation::softmax && l + 1 != layers_.size())
      throw ConfigError("softmax is only allowed on the output layer");
  }
}

std::vector<std::size_t> Network::input_dims() const {
  std::vector<std::size_t> dims;
  for (const auto& l : layers_) dims.push_back(l.spec.in_dim);
  return dims;
}

std::size_t Network::weight_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size();
  return n;
}

LossKind Network::default_loss() const noexcept {
  const auto a = layers_.back().spec.activation;
  return (a == Activation::softmax || a == Activation::sigmoid) ? LossKind::cross_entropy
                                                                : LossKind::squared_error;
}

void Network::apply_masks() noexcept {
  for (auto& l : layers_) {
    auto w = l.weights.data();
    auto m = l.mask.data();
    for (std::size_t i = 0; i < w.size(); ++i)
      if (m[i] == 0.0) w[i] = 0.0;
  }
}

std::vector<Matrix> forward(const Network& net, const Matrix& x, const LambdaField* lambdas) {
  return run_forward(net, x, lambdas, false).activations;
}

Matrix predict(const Network& net, const Matrix& x) {
  return std::move(run_forward(net, x, nullptr, false).activations.back());
}

Matrix output_logits(const Network& net, const Matrix& x) {
  return std::move(run_forward(net, x, nullptr, false).preactivations.back());
}

double loss(const Matrix& pred, const Matrix& target, LossKind kind) {
  require_same_shape(pred, target, "loss");
  if (pred.rows() == 0) throw ShapeError("loss: empty batch");
  double total = 0.0;
  if (kind == LossKind::squared_error) {
    auto p = pred.data();
    auto t = target.data();
    for (std::size_t i = 0; i < p.size(); ++i) total += 0.5 * (p[i] - t[i]) * (p[i] - t[i]);
  } else {
    const bool binary = pred.cols() == 1;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
      for (std::size_t k = 0; k < pred.cols(); ++k) {
        const double p = std::clamp(pred(i, k), kProbabilityClamp, 1.0 - kProbabilityClamp);
        if (!(p >= 0.0 && p <= 1.0))
          throw NumericError(fmt::format("loss: probability {} at ({}, {}) is not in [0, 1]",
                                         pred(i, k), i, k));
        const double y = target(i, k);
        total -= y * std::log(p);
        if (binary) total -= (1.0 - y) * std::log(1.0 - p);
      }
    }
  }
  return total / static_cast<double>(pred.rows());
}

std::vector<Matrix> backprop(const Network& net, const Matrix& x, const Matrix& y,
                             const LambdaField* lambdas, LossKind loss_kind,
                             std::optional<PriorTerm> prior) {
  return loss_and_gradients(net, x, y, lambdas, loss_kind, prior).gradients;
}

LossAndGradients loss_and_gradients(const Network& net, const Matrix& x, const Matrix& y,
                                    const LambdaField* lambdas, LossKind loss_kind,
                                    std::optional<PriorTerm> prior) {
  if (prior && !(prior->sigma0 > 0.0 && prior->n_total > 0))
    throw ParameterError("backprop: prior sigma0 and n_total must be positive");
  Pass pass = run_forward(net, x, lambdas, true);
  const Matrix& out = pass.activations.back();
  require_same_shape(out, y, "backprop targets");

  const auto out_act = net.layers().back().spec.activation;
  if (loss_kind == LossKind::cross_entropy) {
    const bool ok = (out_act == Activation::softmax && out.cols() >= 2) ||
                    (out_act == Activation::sigmoid && out.cols() == 1);
    if (!ok)
      throw ConfigError("cross entropy needs a softmax (>= 2 outputs) or sigmoid (1 output) layer");
  }

  const double batch_loss = loss(out, y, loss_kind);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  Matrix delta(out.rows(), out.cols());
  if (loss_kind == LossKind::cross_entropy) {
    for (std::size_t i = 0; i < out.size(); ++i)
      delta.data()[i] = (out.data()[i] - y.data()[i]) * inv_n;
  } else {
    const Matrix& a = pass.preactivations.back();
    for (std::size_t i = 0; i < out.rows(); ++i) {
      auto o = out.row(i);
      auto t = y.row(i);
      auto d = delta.row(i);
      if (out_act == Activation::softmax) {
        double dot = 0.0;
        for (std::size_t k = 0; k < o.size(); ++k) dot += (o[k] - t[k]) * o[k];
        for (std::size_t k = 0; k < o.size(); ++k) d[k] = o[k] * ((o[k] - t[k]) - dot) * inv_n;
      } else {
        for (std::size_t k = 0; k < o.size(); ++k)
          d[k] = (o[k] - t[k]) * activation_derivative(out_act, a(i, k), o[k]) * inv_n;
      }
    }
  }

  std::vector<Matrix> grads(net.depth());
  for (std::size_t l = net.depth(); l-- > 0;) {
    const Layer& layer = net.layer(l);
    const std::size_t in = layer.spec.in_dim;
    const Matrix& input = pass.inputs[l];

    Matrix g(in + 1, layer.spec.out_dim);
    Matrix gw = matmul_tn(input, delta);
    std::copy(gw.data().begin(), gw.data().end(), g.data().begin());
    auto bias = g.row(in);
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      auto d = delta.row(i);
      for (std::size_t k = 0; k < d.size(); ++k) bias[k] += d[k];
    }

    if (l > 0) {
      const Matrix w = effective_weights(layer);
      Matrix next(delta.rows(), in);
      for (std::size_t i = 0; i < delta.rows(); ++i) {
        auto d = delta.row(i);
        auto nr = next.row(i);
        for (std::size_t j = 0; j < in; ++j) {
          auto wr = w.row(j);
          double acc = 0.0;
          for (std::size_t k = 0; k < d.size(); ++k) acc += d[k] * wr[k];
          nr[j] = acc;
        }
      }
      if (lambdas) {
        const Matrix& lam = lambdas->layers[l];
        for (std::size_t i = 0; i < next.rows(); ++i) {
          auto lr = lam.row(lam.rows() == 1 ? 0 : i);
          auto nr = next.row(i);
          for (std::size_t j = 0; j < in; ++j) nr[j] *= lr[j];
        }
      }
      const auto prev_act = net.layer(l - 1).spec.activation;
      const Matrix& a = pass.preactivations[l - 1];
      const Matrix& h = pass.activations[l];
      for (std::size_t i = 0; i < next.size(); ++i)
        next.data()[i] *= activation_derivative(prev_act, a.data()[i], h.data()[i]);
      delta = std::move(next);
    }

    auto gd = g.data();
    auto m = layer.mask.data();
    auto w = layer.weights.data();
    for (std::size_t i = 0; i < gd.size(); ++i) {
      if (m[i] == 0.0) {
        gd[i] = 0.0;
        continue;
      }
      if (prior)
        gd[i] += w[i] * m[i] /
                 (prior->sigma0 * prior->sigma0 * static_cast<double>(prior->n_total));
    }
    grads[l] = std::move(g);
  }
  return {batch_loss, std::move(grads)};
}

double classification_error(const Network& net, const Matrix& x, const Matrix& y) {
  const Matrix p = predict(net, x);
  require_same_shape(p, y, "classification_error");
  if (p.rows() == 0) return 0.0;
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    if (p.cols() == 1) {
      wrong += (p(i, 0) >= 0.5) != (y(i, 0) >= 0.5);
    } else {
      auto pr = p.row(i);
      auto yr = y.row(i);
      const auto pa = std::distance(pr.begin(), std::max_element(pr.begin(), pr.end()));
      const auto ya = std::distance(yr.begin(), std::max_element(yr.begin(), yr.end()));
      wrong += pa != ya;
    }
  }
  return static_cast<double>(wrong) / static_cast<double>(p.rows());
}

double accuracy(const Network& net, const Matrix& x, const Matrix& y) {
  return 1.0 - classification_error(net, x, y);
}

double rmse(const Network& net, const Matrix& x, const Matrix& y) {
  const Matrix p = predict(net, x);
  require_same_shape(p, y, "rmse");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p.data()[i] - y.data()[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(p.size()));
}

std::vector<std::uint8_t> serialize_network(const Network& net) {
  std::vector<std::uint8_t> out{'G', 'S', 'M', 'N'};
  put<std::uint32_t>(out, kNetworkVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.depth()));
  for (const auto& layer : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.spec.in_dim));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(layer.spec.out_dim));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(layer.spec.activation));
    for (double w : layer.weights.data()) put<double>(out, w);
    for (double m : layer.mask.data()) put<double>(out, m);
  }
  return out;
}

Network deserialize_network(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "GSMN", 4) != 0)
    throw FormatError("network file: bad magic at offset 0");
  std::size_t offset = 4;
  const auto version = take<std::uint32_t>(bytes, offset);
  if (version != kNetworkVersion)
    throw FormatError(fmt::format("network file: unsupported version {} at offset 4", version));
  const auto count = take<std::uint32_t>(bytes, offset);
  std::vector<LayerSpec> specs;
  std::vector<std::pair<Matrix, Matrix>> params;
  for (std::uint32_t l = 0; l < count; ++l) {
    const auto in = take<std::uint32_t>(bytes, offset);
    const auto out = take<std::uint32_t>(bytes, offset);
    const auto tag_offset = offset;
    const auto tag = take<std::uint8_t>(bytes, offset);
    if (tag > static_cast<std::uint8_t>(Activation::softmax))
      throw FormatError(fmt::format("network file: bad activation tag {} at offset {}", tag,
                                    tag_offset));
    specs.push_back({in, out, static_cast<Activation>(tag)});
    Matrix w(in + 1, out), m(in + 1, out);
    for (double& v : w.data()) v = take<double>(bytes, offset);
    for (double& v : m.data()) v = take<double>(bytes, offset);
    params.emplace_back(std::move(w), std::move(m));
  }
  if (offset != bytes.size())
    throw FormatError(fmt::format("network file: trailing bytes at offset {}", offset));
  Network net(std::move(specs));
  for (std::size_t l = 0; l < params.size(); ++l) {
    net.layer(l).weights = std::move(params[l].first);
    net.layer(l).mask = std::move(params[l].second);
  }
  return net;
}

void save_network(const Network& net, const std::filesystem::path& path) {
  const auto bytes = serialize_network(net);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(fmt::format("cannot open {} for writing", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(fmt::format("failed writing {}", path.string()));
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(fmt::format("cannot open network file {}", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_network(bytes);
}

}  // namespace gsmn
