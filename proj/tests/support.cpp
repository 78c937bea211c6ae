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


#include "support.hpp"

#include <cmath>
#include <random>

namespace fedcrl::testing {

SoftmaxParams random_params(int n_states, int n_actions, std::uint64_t seed, double scale) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  SoftmaxParams p = SoftmaxParams::zeros(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) p.theta(s, a) = n(rng);
  }
  return p;
}

RowMatrix naive_softmax(const SoftmaxParams& params) {
  RowMatrix pi = params.theta.array().exp().matrix();
  for (int s = 0; s < pi.rows(); ++s) pi.row(s) /= pi.row(s).sum();
  return pi;
}

Vector iterate_values(const TabularCmdp& cmdp, const RowMatrix& pi, const Matrix& signal) {
  const int ns = cmdp.n_states;
  Vector v = Vector::Zero(ns);
  for (int it = 0; it < 100000; ++it) {
    Vector next = Vector::Zero(ns);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < cmdp.n_actions; ++a) {
        double cont = 0.0;
        for (int s2 = 0; s2 < ns; ++s2) cont += cmdp.P(s, a, s2) * v(s2);
        next(s) += pi(s, a) * (signal(s, a) + cmdp.discount * cont);
      }
    }
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (diff < 1e-13) break;
  }
  return v;
}

double iterate_j(const TabularCmdp& cmdp, const RowMatrix& pi, const Matrix& signal) {
  return cmdp.initial_dist.dot(iterate_values(cmdp, pi, signal));
}

Matrix q_from_values(const TabularCmdp& cmdp, const Matrix& signal, const Vector& v) {
  Matrix q(cmdp.n_states, cmdp.n_actions);
  for (int s = 0; s < cmdp.n_states; ++s) {
    for (int a = 0; a < cmdp.n_actions; ++a) {
      double cont = 0.0;
      for (int s2 = 0; s2 < cmdp.n_states; ++s2) cont += cmdp.P(s, a, s2) * v(s2);
      q(s, a) = signal(s, a) + cmdp.discount * cont;
    }
  }
  return q;
}

Vector power_series_occupancy(const TabularCmdp& cmdp, const RowMatrix& pi) {
  const int ns = cmdp.n_states;
  Vector dist = cmdp.initial_dist;
  Vector total = Vector::Zero(ns);
  double weight = 1.0 - cmdp.discount;
  while (weight > 1e-16) {
    total += weight * dist;
    Vector next = Vector::Zero(ns);
    for (int s = 0; s < ns; ++s) {
      for (int a = 0; a < cmdp.n_actions; ++a) {
        for (int s2 = 0; s2 < ns; ++s2) next(s2) += dist(s) * pi(s, a) * cmdp.P(s, a, s2);
      }
    }
    dist = next;
    weight *= cmdp.discount;
  }
  return total;
}

double optimal_reward_value(const TabularCmdp& cmdp) {
  const int ns = cmdp.n_states;
  Vector v = Vector::Zero(ns);
  for (int it = 0; it < 100000; ++it) {
    Vector next(ns);
    for (int s = 0; s < ns; ++s) {
      double best = -1e300;
      for (int a = 0; a < cmdp.n_actions; ++a) {
        double cont = 0.0;
        for (int s2 = 0; s2 < ns; ++s2) cont += cmdp.P(s, a, s2) * v(s2);
        best = std::max(best, cmdp.reward(s, a) + cmdp.discount * cont);
      }
      next(s) = best;
    }
    const double diff = (next - v).cwiseAbs().maxCoeff();
    v = next;
    if (diff < 1e-13) break;
  }
  return cmdp.initial_dist.dot(v);
}

namespace {

Vector flat_score(const RowMatrix& pi, int s, int a) {
  const int na = static_cast<int>(pi.cols());
  Vector g = Vector::Zero(pi.rows() * na);
  for (int b = 0; b < na; ++b) g(s * na + b) = (a == b ? 1.0 : 0.0) - pi(s, b);
  return g;
}

}  // namespace

Matrix explicit_fisher(const TabularCmdp& cmdp, const SoftmaxParams& params) {
  const RowMatrix pi = naive_softmax(params);
  const Vector d = power_series_occupancy(cmdp, pi);
  const int dim = cmdp.n_states * cmdp.n_actions;
  Matrix f = Matrix::Zero(dim, dim);
  for (int s = 0; s < cmdp.n_states; ++s) {
    for (int a = 0; a < cmdp.n_actions; ++a) {
      const Vector g = flat_score(pi, s, a);
      f += d(s) * pi(s, a) * g * g.transpose();
    }
  }
  return f;
}

Vector explicit_policy_gradient(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                const Matrix& signal) {
  const RowMatrix pi = naive_softmax(params);
  const Vector d = power_series_occupancy(cmdp, pi);
  const Vector v = iterate_values(cmdp, pi, signal);
  const Matrix q = q_from_values(cmdp, signal, v);
  Vector grad = Vector::Zero(cmdp.n_states * cmdp.n_actions);
  for (int s = 0; s < cmdp.n_states; ++s) {
    for (int a = 0; a < cmdp.n_actions; ++a) {
      grad += d(s) * pi(s, a) * (q(s, a) - v(s)) * flat_score(pi, s, a);
    }
  }
  return grad / (1.0 - cmdp.discount);
}

Matrix pinv_symmetric(const Matrix& m, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  const Vector& ev = eig.eigenvalues();
  const double cutoff = rel_tol * ev.cwiseAbs().maxCoeff();
  Vector inv = Vector::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > cutoff) inv(i) = 1.0 / ev(i);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

RowMatrix center_rows(RowMatrix m) {
  for (int s = 0; s < m.rows(); ++s) m.row(s).array() -= m.row(s).mean();
  return m;
}

}  // namespace fedcrl::testing
