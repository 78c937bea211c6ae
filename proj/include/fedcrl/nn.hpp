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

#ifndef FEDCRL_NN_HPP_
#define FEDCRL_NN_HPP_

// Small dense tanh networks with batched forward/backward passes. Samples are
// stored as columns.

#include <span>
#include <string>
#include <vector>

#include "fedcrl/cmdp.hpp"

namespace fedcrl {

class FeedforwardNet {
 public:
  FeedforwardNet() = default;
  // sizes = {input, hidden..., output}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  // with the output layer scaled by `output_scale`; biases start at zero.
  FeedforwardNet(std::vector<int> sizes, Rng& rng, double output_scale = 1.0);
  static FeedforwardNet zeros(std::vector<int> sizes);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  int n_layers() const { return static_cast<int>(weights_.size()); }
  std::size_t n_params() const;

  Matrix& weight(int layer) { return weights_[layer]; }
  Vector& bias(int layer) { return biases_[layer]; }
  const Matrix& weight(int layer) const { return weights_[layer]; }
  const Vector& bias(int layer) const { return biases_[layer]; }

  // Activations of every layer; [0] is the input, back() the linear output.
  struct Cache {
    std::vector<Matrix> activations;
  };

  Vector forward(std::span<const double> input) const;
  Matrix forward_batch(const Matrix& inputs) const;
  Matrix forward_batch(const Matrix& inputs, Cache& cache) const;
  // Gradient w.r.t. the flat parameter vector, given dLoss/dOutput
  // (output_dim x batch) for the batch that produced `cache`.
  Vector backward(const Cache& cache, const Matrix& d_output) const;

  // Flat layout: W0 (column-major), b0, W1, b1, ...
  Vector flat() const;
  void set_flat(const Vector& params);

  // {"sizes": [...], "activation": "tanh", "layers": [{"weight": [[...]], "bias": [...]}]}
  std::string to_json() const;
  static FeedforwardNet from_json(const std::string& text);

 private:
  std::vector<int> sizes_;
  std::vector<Matrix> weights_;  // out x in
  std::vector<Vector> biases_;
};

// Adam moment estimates for one flat parameter vector.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Vector m;
  Vector v;
  long t = 0;

  // Descent increment for gradient `grad` at learning rate `lr`.
  Vector step(const Vector& grad, double lr);
};

enum class OptimizerKind { kSgd, kAdam };

// Applies one descent step (pass the negated gradient for ascent).
void apply_gradient(FeedforwardNet& net, const Vector& grad, double lr, OptimizerKind kind,
                    Adam& adam);

}  // namespace fedcrl

#endif  // FEDCRL_NN_HPP_
