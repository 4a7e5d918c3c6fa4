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

#ifndef DPSA_DP_HPP
#define DPSA_DP_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dpsa/rng.hpp"

namespace dpsa {

struct PrivacyBudget {
  double epsilon = 0.0;  // > 0
  double delta = 0.0;    // in [0,1); 0 means pure epsilon-DP
};

struct LaplaceNoiseSpec {
  double scale_b = 0.0;  // > 0, same units as the perturbed quantity
};

struct MechanismRecord {
  std::string name;
  double per_invocation_epsilon = 0.0;
  std::uint64_t invocations = 1;
};

struct PrivacyLedger {
  std::vector<MechanismRecord> records;
  double delta_budget = 0.0;
};

/// One draw from Laplace(0, scale_b) by inverse CDF:
///   x = -b * sign(u) * ln(1 - 2|u|),  u uniform in (-1/2, 1/2).
/// Deterministic for a fixed seed and draw index.
double sample_laplace(double scale_b, Rng& rng);

/// Laplace mechanism: v[i] + iid Laplace(0, sensitivity/epsilon).
std::vector<double> laplace_mechanism(std::span<const double> v, double sensitivity,
                                      double epsilon, Rng& rng);

/// L1-sensitivity of a sigmoid-bounded C x K latent: every entry lies in
/// [0,1], so two latents differ by at most C*K in L1 norm.
double sigmoid_encoder_sensitivity(int channels_c, int length_k);

/// Sum of per_invocation_epsilon * invocations over all records.
double compose_simple(const PrivacyLedger& ledger);

/// k-fold composition of an epsilon-DP mechanism under (epsilon', delta)-DP:
/// minimum of the linear bound and the two square-root bounds
///   k*e,
///   k*e*(exp(e)-1)/(exp(e)+1) + e*sqrt(2k*ln(exp(1) + sqrt(k*e^2)/delta)),
///   k*e*(exp(e)-1)/(exp(e)+1) + e*sqrt(2k*ln(1/delta)).
/// Full precision; integer reporting uses floor.
double compose_advanced(double epsilon, std::uint64_t k, double delta);

/// Utterance-level budget of the two-mechanism pipeline: epsilon_pitch spent
/// once plus epsilon_bn_frame spent K times, composed simply.
PrivacyBudget pipeline_budget(double epsilon_pitch, double epsilon_bn_frame, std::uint64_t k);

/// Same pipeline but with the K-fold BN term composed via compose_advanced.
PrivacyBudget pipeline_budget_advanced(double epsilon_pitch, double epsilon_bn_frame,
                                       std::uint64_t k, double delta);

// Line-oriented ledger format:
//   dpledger v1 delta=<float>
//   name,epsilon,invocations
void write_ledger(std::ostream& os, const PrivacyLedger& ledger);
PrivacyLedger read_ledger(std::istream& is);
void save_ledger(const std::string& path, const PrivacyLedger& ledger);
PrivacyLedger load_ledger(const std::string& path);

}  // namespace dpsa

#endif  // DPSA_DP_HPP
