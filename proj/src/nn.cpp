// Copyright 2026 The fedcrl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fedcrl/nn.hpp"

#include <cmath>

#include <json.hpp>

#include "fedcrl/errors.hpp"

namespace fedcrl {
namespace {

// tanh through the vectorised exp; std::tanh on doubles is scalar in Eigen.
template <typename Derived>
auto tanh_array(const Eigen::ArrayBase<Derived>& z) {
  return 1.0 - 2.0 / ((2.0 * z).exp() + 1.0);
}

}  // namespace

FeedforwardNet::FeedforwardNet(std::vector<int> sizes, Rng& rng, double output_scale)
    : sizes_(std::move(sizes)) {
  if (sizes_.size() < 2) throw std::invalid_argument("FeedforwardNet needs at least two sizes");
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const int in = sizes_[l];
    const int out = sizes_[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> unif(-bound, bound);
    Matrix w(out, in);
    for (int c = 0; c < in; ++c) {
      for (int r = 0; r < out; ++r) w(r, c) = unif(rng);
    }
    if (l + 2 == sizes_.size()) w *= output_scale;
    weights_.push_back(std::move(w));
    biases_.push_back(Vector::Zero(out));
  }
}

FeedforwardNet FeedforwardNet::zeros(std::vector<int> sizes) {
  FeedforwardNet net;
  net.sizes_ = std::move(sizes);
  for (std::size_t l = 0; l + 1 < net.sizes_.size(); ++l) {
    net.weights_.push_back(Matrix::Zero(net.sizes_[l + 1], net.sizes_[l]));
    net.biases_.push_back(Vector::Zero(net.sizes_[l + 1]));
  }
  return net;
}

std::size_t FeedforwardNet::n_params() const {
  std::size_t n = 0;
  for (int l = 0; l < n_layers(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

Vector FeedforwardNet::forward(std::span<const double> input) const {
  if (static_cast<int>(input.size()) != input_dim()) {
    throw std::invalid_argument("FeedforwardNet: input has " + std::to_string(input.size()) +
                                " entries, expected " + std::to_string(input_dim()));
  }
  Vector h = Eigen::Map<const Vector>(input.data(), input_dim());
  for (int l = 0; l < n_layers(); ++l) {
    Vector z = weights_[l] * h + biases_[l];
    h = l + 1 < n_layers() ? Vector(tanh_array(z.array())) : z;
  }
  return h;
}

Matrix FeedforwardNet::forward_batch(const Matrix& inputs) const {
  Cache cache;
  return forward_batch(inputs, cache);
}

Matrix FeedforwardNet::forward_batch(const Matrix& inputs, Cache& cache) const {
  if (inputs.rows() != input_dim()) throw std::invalid_argument("FeedforwardNet: bad batch rows");
  cache.activations.resize(n_layers() + 1);
  cache.activations[0] = inputs;
  for (int l = 0; l < n_layers(); ++l) {
    Matrix z = weights_[l] * cache.activations[l];
    z.colwise() += biases_[l];
    if (l + 1 < n_layers()) z = tanh_array(z.array()).matrix();
    cache.activations[l + 1] = std::move(z);
  }
  return cache.activations.back();
}

Vector FeedforwardNet::backward(const Cache& cache, const Matrix& d_output) const {
  Vector grad(n_params());
  std::vector<std::size_t> offsets(n_layers());
  std::size_t off = 0;
  for (int l = 0; l < n_layers(); ++l) {
    offsets[l] = off;
    off += weights_[l].size() + biases_[l].size();
  }
  Matrix delta = d_output;  // dLoss/dz for the current layer
  for (int l = n_layers() - 1; l >= 0; --l) {
    const Matrix& input = cache.activations[l];
    Eigen::Map<Matrix>(grad.data() + offsets[l], weights_[l].rows(), weights_[l].cols()) =
        delta * input.transpose();
    grad.segment(offsets[l] + weights_[l].size(), biases_[l].size()) =
        delta * Vector::Ones(delta.cols());
    if (l > 0) {
      // input = tanh(z_{l-1}); tanh' = 1 - tanh^2
      delta = (weights_[l].transpose() * delta).cwiseProduct(
          (1.0 - input.array().square()).matrix());
    }
  }
  return grad;
}

Vector FeedforwardNet::flat() const {
  Vector out(n_params());
  std::size_t off = 0;
  for (int l = 0; l < n_layers(); ++l) {
    out.segment(off, weights_[l].size()) =
        Eigen::Map<const Vector>(weights_[l].data(), weights_[l].size());
    off += weights_[l].size();
    out.segment(off, biases_[l].size()) = biases_[l];
    off += biases_[l].size();
  }
  return out;
}

void FeedforwardNet::set_flat(const Vector& params) {
  if (static_cast<std::size_t>(params.size()) != n_params()) {
    throw std::invalid_argument("FeedforwardNet::set_flat: size mismatch");
  }
  std::size_t off = 0;
  for (int l = 0; l < n_layers(); ++l) {
    Eigen::Map<Vector>(weights_[l].data(), weights_[l].size()) =
        params.segment(off, weights_[l].size());
    off += weights_[l].size();
    biases_[l] = params.segment(off, biases_[l].size());
    off += biases_[l].size();
  }
}

std::string FeedforwardNet::to_json() const {
  nlohmann::json doc;
  doc["sizes"] = sizes_;
  doc["activation"] = "tanh";
  nlohmann::json layers = nlohmann::json::array();
  for (int l = 0; l < n_layers(); ++l) {
    nlohmann::json w = nlohmann::json::array();
    for (int r = 0; r < weights_[l].rows(); ++r) {
      std::vector<double> row(weights_[l].cols());
      for (int c = 0; c < weights_[l].cols(); ++c) row[c] = weights_[l](r, c);
      w.push_back(row);
    }
    layers.push_back({{"weight", w},
                      {"bias", std::vector<double>(biases_[l].data(),
                                                   biases_[l].data() + biases_[l].size())}});
  }
  doc["layers"] = std::move(layers);
  return doc.dump();
}

FeedforwardNet FeedforwardNet::from_json(const std::string& text) {
  try {
    const nlohmann::json doc = nlohmann::json::parse(text);
    FeedforwardNet net = zeros(doc.at("sizes").get<std::vector<int>>());
    const auto& layers = doc.at("layers");
    if (static_cast<int>(layers.size()) != net.n_layers()) {
      throw ValidationError("layers", "layer count does not match sizes");
    }
    for (int l = 0; l < net.n_layers(); ++l) {
      const auto w = layers[l].at("weight").get<std::vector<std::vector<double>>>();
      const auto b = layers[l].at("bias").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != net.weights_[l].rows() ||
          static_cast<int>(b.size()) != net.biases_[l].size()) {
        throw ValidationError("layers[" + std::to_string(l) + "]", "shape mismatch");
      }
      for (int r = 0; r < net.weights_[l].rows(); ++r) {
        if (static_cast<int>(w[r].size()) != net.weights_[l].cols()) {
          throw ValidationError("layers[" + std::to_string(l) + "]", "shape mismatch");
        }
        for (int c = 0; c < net.weights_[l].cols(); ++c) net.weights_[l](r, c) = w[r][c];
      }
      for (std::size_t i = 0; i < b.size(); ++i) net.biases_[l](i) = b[i];
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("", std::string("bad network checkpoint: ") + e.what());
  }
}

Vector Adam::step(const Vector& grad, double lr) {
  if (m.size() != grad.size()) {
    m = Vector::Zero(grad.size());
    v = Vector::Zero(grad.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  return lr * (m / c1).array() / ((v / c2).array().sqrt() + eps);
}

void apply_gradient(FeedforwardNet& net, const Vector& grad, double lr, OptimizerKind kind,
                    Adam& adam) {
  const Vector delta = kind == OptimizerKind::kAdam ? adam.step(grad, lr) : Vector(lr * grad);
  net.set_flat(net.flat() - delta);
}

}  // namespace fedcrl
