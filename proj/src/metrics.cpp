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

#include "fedcrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedcrl/errors.hpp"

namespace fedcrl {

namespace {

void check_sizes(std::span<const double> j_c, std::span<const double> thresholds) {
  if (j_c.size() != thresholds.size()) {
    throw ValidationError("thresholds", "expected " + std::to_string(j_c.size()) +
                                            " thresholds, got " +
                                            std::to_string(thresholds.size()));
  }
}

}  // namespace

double max_violation_ratio(std::span<const double> j_c, std::span<const double> thresholds) {
  check_sizes(j_c, thresholds);
  double out = 0.0;
  for (std::size_t i = 0; i < j_c.size(); ++i) {
    if (thresholds[i] == 0.0) {
      throw UndefinedMetricError("mVR undefined: threshold " + std::to_string(i) + " is zero");
    }
    out = std::max(out, j_c[i] / thresholds[i]);
  }
  return out;
}

double max_violation(std::span<const double> j_c, std::span<const double> thresholds) {
  check_sizes(j_c, thresholds);
  double out = 0.0;
  for (std::size_t i = 0; i < j_c.size(); ++i) out = std::max(out, j_c[i] - thresholds[i]);
  return out;
}

MetricsReport compute_metrics(const PolicyValues& policy, const PolicyValues& reference,
                              std::span<const double> thresholds) {
  if (policy.j_c.size() != reference.j_c.size()) {
    throw ValidationError("reference.j_c", "constraint count differs from the policy's");
  }
  MetricsReport out;
  out.j_r = policy.j_r;
  out.j_c = policy.j_c;
  out.thresholds.assign(thresholds.begin(), thresholds.end());
  out.ref_j_r = reference.j_r;
  out.ref_j_c = reference.j_c;
  out.mvr = max_violation_ratio(policy.j_c, thresholds);
  if (reference.j_r == 0.0) throw UndefinedMetricError("RR undefined: reference reward is zero");
  out.rr = policy.j_r / reference.j_r;
  for (std::size_t i = 0; i < policy.j_c.size(); ++i) {
    if (reference.j_c[i] == 0.0) {
      throw UndefinedMetricError("mRVR undefined: reference cost " + std::to_string(i) +
                                 " is zero");
    }
    out.mrvr = std::max(out.mrvr, policy.j_c[i] / reference.j_c[i]);
  }
  return out;
}

LenientMetrics compute_metrics_lenient(const PolicyValues& policy,
                                       const std::optional<PolicyValues>& reference,
                                       std::span<const double> thresholds) {
  LenientMetrics out;
  try {
    out.mvr = max_violation_ratio(policy.j_c, thresholds);
  } catch (const UndefinedMetricError&) {
  }
  if (!reference) return out;
  if (reference->j_r != 0.0) out.rr = policy.j_r / reference->j_r;
  bool defined = reference->j_c.size() == policy.j_c.size();
  double mrvr = 0.0;
  for (std::size_t i = 0; defined && i < policy.j_c.size(); ++i) {
    if (reference->j_c[i] == 0.0) {
      defined = false;
    } else {
      mrvr = std::max(mrvr, policy.j_c[i] / reference->j_c[i]);
    }
  }
  if (defined) out.mrvr = mrvr;
  return out;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string csv_header(int n_constraints) {
  std::string h = "iteration,agent,j_r";
  for (int i = 0; i < n_constraints; ++i) h += ",j_c_" + std::to_string(i);
  for (int i = 0; i < n_constraints; ++i) h += ",lambda_" + std::to_string(i);
  return h + ",aggregated";
}

void write_csv(const std::vector<RoundLog>& logs, int n_constraints, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << csv_header(n_constraints) << '\n';
  for (const RoundLog& row : logs) {
    if (static_cast<int>(row.j_c.size()) != n_constraints ||
        static_cast<int>(row.lambdas.size()) != n_constraints) {
      throw ValidationError("logs", "row at iteration " + std::to_string(row.iteration) +
                                        " has the wrong constraint count");
    }
    out << row.iteration << ',' << row.agent << ',' << format_real(row.j_r);
    for (double v : row.j_c) out << ',' << format_real(v);
    for (double v : row.lambdas) out << ',' << format_real(v);
    out << ',' << (row.aggregated ? 1 : 0) << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

std::vector<RoundLog> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");
  const std::vector<std::string> header = split(line);
  const int n_cols = static_cast<int>(header.size());
  if (n_cols < 4 || (n_cols - 4) % 2 != 0) throw IoError(path + ": malformed header");
  const int n = (n_cols - 4) / 2;
  if (line != csv_header(n)) throw IoError(path + ": unexpected header '" + line + "'");

  std::vector<RoundLog> logs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (static_cast<int>(cells.size()) != n_cols) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(n_cols) + " fields");
    }
    try {
      RoundLog row;
      row.iteration = std::stoi(cells[0]);
      row.agent = std::stoi(cells[1]);
      row.j_r = std::stod(cells[2]);
      for (int i = 0; i < n; ++i) row.j_c.push_back(std::stod(cells[3 + i]));
      for (int i = 0; i < n; ++i) row.lambdas.push_back(std::stod(cells[3 + n + i]));
      row.aggregated = cells.back() == "1";
      logs.push_back(std::move(row));
    } catch (const std::logic_error&) {
      throw IoError(path + ":" + std::to_string(line_no) + ": unparseable number");
    }
  }
  return logs;
}

namespace {

void mean_se(const std::vector<double>& xs, std::optional<double>& mean,
             std::optional<double>& se) {
  if (xs.empty()) return;
  double m = 0.0;
  for (double x : xs) m += x;
  m /= xs.size();
  mean = m;
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  se = std::sqrt(ss / (xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace

std::vector<SeedSummary> summarize_seeds(const std::vector<SeedSummary>& per_seed,
                                         int n_constraints) {
  std::vector<SeedSummary> rows = per_seed;
  SeedSummary mean;
  mean.label = "mean";
  mean.status = "";
  SeedSummary se;
  se.label = "se";
  se.status = "";
  mean.j_c.resize(n_constraints);
  se.j_c.resize(n_constraints);

  auto column = [&](auto get, std::optional<double>& m, std::optional<double>& s) {
    std::vector<double> xs;
    for (const SeedSummary& r : per_seed) {
      if (const std::optional<double> v = get(r)) xs.push_back(*v);
    }
    mean_se(xs, m, s);
  };
  column([](const SeedSummary& r) { return r.j_r; }, mean.j_r, se.j_r);
  for (int i = 0; i < n_constraints; ++i) {
    column([i](const SeedSummary& r) { return i < static_cast<int>(r.j_c.size()) ? r.j_c[i]
                                                                                  : std::nullopt; },
           mean.j_c[i], se.j_c[i]);
  }
  column([](const SeedSummary& r) { return r.metrics.rr; }, mean.metrics.rr, se.metrics.rr);
  column([](const SeedSummary& r) { return r.metrics.mvr; }, mean.metrics.mvr, se.metrics.mvr);
  column([](const SeedSummary& r) { return r.metrics.mrvr; }, mean.metrics.mrvr,
         se.metrics.mrvr);
  rows.push_back(std::move(mean));
  rows.push_back(std::move(se));
  return rows;
}

void write_summary_csv(const std::vector<SeedSummary>& rows, int n_constraints,
                       const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  auto cell = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  out << "seed,status,j_r";
  for (int i = 0; i < n_constraints; ++i) out << ",j_c_" << i;
  out << ",rr,mvr,mrvr,undefined\n";
  for (const SeedSummary& r : rows) {
    out << r.label << ',' << r.status << ',' << cell(r.j_r);
    for (int i = 0; i < n_constraints; ++i) {
      out << ',' << (i < static_cast<int>(r.j_c.size()) ? cell(r.j_c[i]) : std::string());
    }
    out << ',' << cell(r.metrics.rr) << ',' << cell(r.metrics.mvr) << ','
        << cell(r.metrics.mrvr) << ',';
    // Sentinel listing the metrics that could not be computed for a seed row.
    if (r.label != "mean" && r.label != "se" && r.status == "ok") {
      std::string undefined;
      auto note = [&](const std::optional<double>& v, const char* name) {
        if (v) return;
        if (!undefined.empty()) undefined += ';';
        undefined += name;
      };
      note(r.metrics.rr, "rr");
      note(r.metrics.mvr, "mvr");
      note(r.metrics.mrvr, "mrvr");
      out << undefined;
    }
    out << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace fedcrl
