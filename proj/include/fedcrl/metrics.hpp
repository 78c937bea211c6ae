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

#ifndef FEDCRL_METRICS_HPP_
#define FEDCRL_METRICS_HPP_

// Reward ratio and violation ratios against a reference policy, and the
// metrics.csv / summary.csv formats.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedcrl/fed.hpp"

namespace fedcrl {

struct PolicyValues {
  double j_r = 0.0;
  std::vector<double> j_c;
};

struct MetricsReport {
  double rr = 0.0;    // J_r / J_r(ref)
  double mvr = 0.0;   // max_i J_ci / d_i
  double mrvr = 0.0;  // max_i J_ci / J_ci(ref)
  double j_r = 0.0;
  std::vector<double> j_c;
  std::vector<double> thresholds;
  double ref_j_r = 0.0;
  std::vector<double> ref_j_c;
};

// Throws UndefinedMetricError on a zero threshold, reference reward or
// reference cost, and ValidationError on mismatched sizes.
MetricsReport compute_metrics(const PolicyValues& policy, const PolicyValues& reference,
                              std::span<const double> thresholds);

// Throws UndefinedMetricError on a zero threshold.
double max_violation_ratio(std::span<const double> j_c, std::span<const double> thresholds);

// Same ratios for batch reporting: an undefined entry is nullopt.
struct LenientMetrics {
  std::optional<double> rr;
  std::optional<double> mvr;
  std::optional<double> mrvr;
};
LenientMetrics compute_metrics_lenient(const PolicyValues& policy,
                                       const std::optional<PolicyValues>& reference,
                                       std::span<const double> thresholds);

// Largest positive threshold excess, max_i (J_ci - d_i)_+.
double max_violation(std::span<const double> j_c, std::span<const double> thresholds);

// Shortest round-trip-safe decimal form at 9 significant digits.
std::string format_real(double v);

// iteration,agent,j_r,j_c_0..,lambda_0..,aggregated
std::string csv_header(int n_constraints);
void write_csv(const std::vector<RoundLog>& logs, int n_constraints, const std::string& path);
std::vector<RoundLog> read_csv(const std::string& path);

struct SeedSummary {
  std::string label;  // seed number, "mean" or "se"
  std::string status = "ok";
  std::optional<double> j_r;
  std::vector<std::optional<double>> j_c;
  LenientMetrics metrics;
};

// Appends "mean" and "se" rows computed over the defined per-seed values.
// The se row is empty for a column with fewer than two values.
std::vector<SeedSummary> summarize_seeds(const std::vector<SeedSummary>& per_seed,
                                         int n_constraints);
void write_summary_csv(const std::vector<SeedSummary>& rows, int n_constraints,
                       const std::string& path);

}  // namespace fedcrl

#endif  // FEDCRL_METRICS_HPP_
