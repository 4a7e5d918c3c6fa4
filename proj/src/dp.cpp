// Copyright 2026 The dpsa Authors
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

#include "dpsa/dp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace dpsa {

double sample_laplace(double scale_b, Rng& rng) {
  if (!(scale_b > 0.0)) {
    throw std::invalid_argument("sample_laplace: scale must be positive");
  }
  double u = rng.uniform_open() - 0.5;  // in (-1/2, 1/2)
  double s = (u < 0.0) ? -1.0 : 1.0;
  return -scale_b * s * std::log(1.0 - 2.0 * std::fabs(u));
}

std::vector<double> laplace_mechanism(std::span<const double> v, double sensitivity,
                                      double epsilon, Rng& rng) {
  if (!(sensitivity > 0.0)) {
    throw std::invalid_argument("laplace_mechanism: sensitivity must be positive");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("laplace_mechanism: epsilon must be positive");
  }
  const double b = sensitivity / epsilon;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = v[i] + sample_laplace(b, rng);
  }
  return out;
}

double sigmoid_encoder_sensitivity(int channels_c, int length_k) {
  if (channels_c < 1 || length_k < 1) {
    throw std::invalid_argument("sigmoid_encoder_sensitivity: dimensions must be positive");
  }
  return static_cast<double>(channels_c) * static_cast<double>(length_k);
}

double compose_simple(const PrivacyLedger& ledger) {
  if (ledger.records.empty()) {
    throw std::invalid_argument("compose_simple: empty ledger");
  }
  double total = 0.0;
  for (const auto& r : ledger.records) {
    if (!(r.per_invocation_epsilon > 0.0) || r.invocations < 1) {
      throw std::invalid_argument("compose_simple: invalid record '" + r.name + "'");
    }
    total += r.per_invocation_epsilon * static_cast<double>(r.invocations);
  }
  return total;
}

double compose_advanced(double epsilon, std::uint64_t k, double delta) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("compose_advanced: epsilon must be positive");
  }
  if (k < 1) {
    throw std::invalid_argument("compose_advanced: k must be >= 1");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("compose_advanced: delta must lie in (0,1)");
  }
  const double kd = static_cast<double>(k);
  const double linear = kd * epsilon;
  const double contraction = kd * epsilon * std::expm1(epsilon) / (std::exp(epsilon) + 1.0);
  const double b2 = contraction +
                    epsilon * std::sqrt(2.0 * kd *
                                        std::log(std::exp(1.0) + epsilon * std::sqrt(kd) / delta));
  const double b3 = contraction + epsilon * std::sqrt(2.0 * kd * std::log(1.0 / delta));
  return std::min({linear, b2, b3});
}

PrivacyBudget pipeline_budget(double epsilon_pitch, double epsilon_bn_frame, std::uint64_t k) {
  if (!(epsilon_pitch > 0.0) || !(epsilon_bn_frame > 0.0) || k < 1) {
    throw std::invalid_argument("pipeline_budget: domain violation");
  }
  return {epsilon_pitch + static_cast<double>(k) * epsilon_bn_frame, 0.0};
}

PrivacyBudget pipeline_budget_advanced(double epsilon_pitch, double epsilon_bn_frame,
                                       std::uint64_t k, double delta) {
  if (!(epsilon_pitch > 0.0)) {
    throw std::invalid_argument("pipeline_budget_advanced: domain violation");
  }
  return {epsilon_pitch + compose_advanced(epsilon_bn_frame, k, delta), delta};
}

void write_ledger(std::ostream& os, const PrivacyLedger& ledger) {
  os.precision(17);
  os << "dpledger v1 delta=" << ledger.delta_budget << "\n";
  for (const auto& r : ledger.records) {
    os << r.name << "," << r.per_invocation_epsilon << "," << r.invocations << "\n";
  }
}

PrivacyLedger read_ledger(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) {
    throw std::runtime_error("dpledger: missing header line");
  }
  const std::string prefix = "dpledger v1 delta=";
  if (header.rfind(prefix, 0) != 0) {
    throw std::runtime_error("dpledger: bad header '" + header + "'");
  }
  PrivacyLedger ledger;
  ledger.delta_budget = std::stod(header.substr(prefix.size()));
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MechanismRecord rec;
    std::string field;
    if (!std::getline(ls, rec.name, ',')) {
      throw std::runtime_error("dpledger: malformed record '" + line + "'");
    }
    if (!std::getline(ls, field, ',')) {
      throw std::runtime_error("dpledger: missing epsilon in '" + line + "'");
    }
    rec.per_invocation_epsilon = std::stod(field);
    if (!std::getline(ls, field)) {
      throw std::runtime_error("dpledger: missing invocation count in '" + line + "'");
    }
    rec.invocations = std::stoull(field);
    ledger.records.push_back(std::move(rec));
  }
  return ledger;
}

void save_ledger(const std::string& path, const PrivacyLedger& ledger) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  write_ledger(f, ledger);
}

PrivacyLedger load_ledger(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  return read_ledger(f);
}

}  // namespace dpsa
