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

#include "fedcrl/policy.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "fedcrl/errors.hpp"

namespace fedcrl {
namespace {

constexpr double kProbFloor = 1e-12;

void softmax_into(const double* logits, int n, double* out) {
  const double m = *std::max_element(logits, logits + n);
  double z = 0.0;
  for (int a = 0; a < n; ++a) {
    out[a] = std::exp(logits[a] - m);
    z += out[a];
  }
  for (int a = 0; a < n; ++a) out[a] /= z;
}

}  // namespace

Vector action_probs(const SoftmaxParams& params, int s) {
  Vector out(params.n_actions());
  softmax_into(params.theta.data() + static_cast<std::size_t>(s) * params.n_actions(),
               params.n_actions(), out.data());
  return out;
}

PolicyTable to_policy(const SoftmaxParams& params) {
  PolicyTable out{RowMatrix(params.n_states(), params.n_actions())};
  const int A = params.n_actions();
  for (int s = 0; s < params.n_states(); ++s) {
    softmax_into(params.theta.data() + static_cast<std::size_t>(s) * A, A,
                 out.probs.data() + static_cast<std::size_t>(s) * A);
  }
  return out;
}

void score_row(std::span<const double> probs, int a, std::span<double> row) {
  for (std::size_t b = 0; b < probs.size(); ++b) {
    row[b] = (static_cast<int>(b) == a ? 1.0 : 0.0) - probs[b];
  }
}

RowMatrix log_prob_grad(const SoftmaxParams& params, int s, int a) {
  RowMatrix g = RowMatrix::Zero(params.n_states(), params.n_actions());
  const Vector p = action_probs(params, s);
  score_row({p.data(), static_cast<std::size_t>(p.size())}, a,
            {g.data() + static_cast<std::size_t>(s) * params.n_actions(),
             static_cast<std::size_t>(params.n_actions())});
  return g;
}

SoftmaxParams aggregate_softmax(std::span<const SoftmaxParams> params_list) {
  if (params_list.empty()) throw std::invalid_argument("aggregate_softmax: empty list");
  const int S = params_list.front().n_states();
  const int A = params_list.front().n_actions();
  RowMatrix mean = RowMatrix::Zero(S, A);
  for (const SoftmaxParams& p : params_list) {
    if (p.n_states() != S || p.n_actions() != A) {
      throw std::invalid_argument("aggregate_softmax: shape mismatch");
    }
    mean += to_policy(p).probs;
  }
  mean /= static_cast<double>(params_list.size());

  SoftmaxParams out{RowMatrix(S, A)};
  for (int s = 0; s < S; ++s) {
    double c_s = 0.0;
    for (int a = 0; a < A; ++a) {
      out.theta(s, a) = std::log(std::max(mean(s, a), kProbFloor));
      c_s += out.theta(s, a);
    }
    out.theta.row(s).array() += c_s;
  }
  return out;
}

Vector aggregate_params_mean(std::span<const Vector> params_list) {
  if (params_list.empty()) throw std::invalid_argument("aggregate_params_mean: empty list");
  Vector sum = Vector::Zero(params_list.front().size());
  for (const Vector& v : params_list) {
    if (v.size() != sum.size()) throw std::invalid_argument("aggregate_params_mean: shape mismatch");
    sum += v;
  }
  return sum / static_cast<double>(params_list.size());
}

SoftmaxParams project_theta(const SoftmaxParams& params, const ThetaProjection& proj) {
  if (proj.mode == ThetaProjection::Mode::kIdentity) return params;
  const double h = proj.box_halfwidth;
  return {params.theta.cwiseMax(-h).cwiseMin(h)};
}

std::string softmax_to_json(const SoftmaxParams& params) {
  nlohmann::json doc;
  doc["n_states"] = params.n_states();
  doc["n_actions"] = params.n_actions();
  nlohmann::json rows = nlohmann::json::object();
  for (int s = 0; s < params.n_states(); ++s) {
    std::vector<double> row(params.theta.row(s).begin(), params.theta.row(s).end());
    rows[std::to_string(s)] = row;
  }
  doc["theta"] = std::move(rows);
  return doc.dump(1);
}

SoftmaxParams softmax_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    const int S = doc.at("n_states").get<int>();
    const int A = doc.at("n_actions").get<int>();
    SoftmaxParams out = SoftmaxParams::zeros(S, A);
    for (int s = 0; s < S; ++s) {
      const auto row = doc.at("theta").at(std::to_string(s)).get<std::vector<double>>();
      if (static_cast<int>(row.size()) != A) {
        throw ValidationError("theta." + std::to_string(s), "row length mismatch");
      }
      for (int a = 0; a < A; ++a) out.theta(s, a) = row[a];
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("", std::string("bad policy checkpoint: ") + e.what());
  }
}

}  // namespace fedcrl
