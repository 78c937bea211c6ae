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


#ifndef FEDCRL_TESTS_SUPPORT_HPP_
#define FEDCRL_TESTS_SUPPORT_HPP_

// Independent oracles for the unit tests. Nothing here calls the solvers it
// is used to check: values come from fixed-point iteration, occupancies from
// truncated power series, Fisher matrices from explicit outer products.

#include <cstdint>

#include "fedcrl/cmdp.hpp"
#include "fedcrl/policy.hpp"

namespace fedcrl::testing {

SoftmaxParams random_params(int n_states, int n_actions, std::uint64_t seed, double scale = 1.0);

// Softmax computed directly from the logits (no max subtraction).
RowMatrix naive_softmax(const SoftmaxParams& params);

// V = r_pi + gamma P_pi V by repeated substitution to 1e-13.
Vector iterate_values(const TabularCmdp& cmdp, const RowMatrix& pi, const Matrix& signal);
double iterate_j(const TabularCmdp& cmdp, const RowMatrix& pi, const Matrix& signal);
// Q(s, a) = signal(s, a) + gamma sum_s2 P(s2|s,a) V(s2).
Matrix q_from_values(const TabularCmdp& cmdp, const Matrix& signal, const Vector& v);

// Normalised discounted state occupancy, (1 - gamma) sum_t gamma^t rho P_pi^t.
Vector power_series_occupancy(const TabularCmdp& cmdp, const RowMatrix& pi);

// Optimal J_r by value iteration.
double optimal_reward_value(const TabularCmdp& cmdp);

// Explicit Fisher matrix E_nu[g g^T] and policy gradient
// E_nu[A g] / (1 - gamma), with g the flattened score, over the S*A logits.
Matrix explicit_fisher(const TabularCmdp& cmdp, const SoftmaxParams& params);
Vector explicit_policy_gradient(const TabularCmdp& cmdp, const SoftmaxParams& params,
                                const Matrix& signal);

// Moore-Penrose pseudo-inverse via a symmetric eigendecomposition.
Matrix pinv_symmetric(const Matrix& m, double rel_tol = 1e-10);

RowMatrix center_rows(RowMatrix m);

}  // namespace fedcrl::testing

#endif  // FEDCRL_TESTS_SUPPORT_HPP_
