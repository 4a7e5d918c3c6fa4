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

#include "dpsa/anonymizer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "dpsa/io.hpp"

namespace dpsa {

namespace {

Matrix cosine_similarity(const Matrix& pool) {
  const int n = pool.rows, d = pool.cols;
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += pool.at(i, j) * pool.at(i, j);
    norms[i] = std::sqrt(s);
  }
  Matrix sim(n, n);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += pool.at(i, k) * pool.at(j, k);
      double denom = norms[i] * norms[j];
      sim.at(i, j) = denom > 0.0 ? dot / denom : 0.0;
    }
  }
  return sim;
}

double median_offdiagonal(const Matrix& sim) {
  std::vector<double> vals;
  vals.reserve(static_cast<std::size_t>(sim.rows) * (sim.rows - 1));
  for (int i = 0; i < sim.rows; ++i) {
    for (int j = 0; j < sim.cols; ++j) {
      if (i != j) vals.push_back(sim.at(i, j));
    }
  }
  std::nth_element(vals.begin(), vals.begin() + vals.size() / 2, vals.end());
  return vals[vals.size() / 2];
}

}  // namespace

ClusterAssignment cluster_pool(const Matrix& pool, const ApConfig& config) {
  const int n = pool.rows;
  if (n < 2) throw std::invalid_argument("cluster_pool: need at least 2 vectors");

  Matrix s = cosine_similarity(pool);
  double preference = median_offdiagonal(s);
  for (int i = 0; i < n; ++i) s.at(i, i) = preference;

  Matrix r(n, n), a(n, n);
  const double lambda = config.damping;
  std::vector<int> prev_exemplars;
  int stable = 0;

  for (int iter = 0; iter < config.max_iterations; ++iter) {
    // Responsibilities: r(i,k) = s(i,k) - max_{k' != k} (a(i,k') + s(i,k')).
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      int best_k = -1;
      for (int k = 0; k < n; ++k) {
        double v = a.at(i, k) + s.at(i, k);
        if (v > best) {
          second = best;
          best = v;
          best_k = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (int k = 0; k < n; ++k) {
        double cap = (k == best_k) ? second : best;
        r.at(i, k) = lambda * r.at(i, k) + (1.0 - lambda) * (s.at(i, k) - cap);
      }
    }
    // Availabilities.
#pragma omp parallel for schedule(static)
    for (int k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (int i = 0; i < n; ++i) {
        if (i != k) pos_sum += std::max(0.0, r.at(i, k));
      }
      for (int i = 0; i < n; ++i) {
        double v;
        if (i == k) {
          v = pos_sum;
        } else {
          v = std::min(0.0, r.at(k, k) + pos_sum - std::max(0.0, r.at(i, k)));
        }
        a.at(i, k) = lambda * a.at(i, k) + (1.0 - lambda) * v;
      }
    }

    std::vector<int> exemplars;
    for (int k = 0; k < n; ++k) {
      if (r.at(k, k) + a.at(k, k) > 0.0) exemplars.push_back(k);
    }
    if (!exemplars.empty() && exemplars == prev_exemplars) {
      if (++stable >= config.stable_iterations) {
        ClusterAssignment out;
        out.exemplars = exemplars;
        out.cluster_of.assign(n, -1);
        for (std::size_t c = 0; c < exemplars.size(); ++c) out.cluster_of[exemplars[c]] = static_cast<int>(c);
        for (int i = 0; i < n; ++i) {
          if (out.cluster_of[i] >= 0) continue;
          int best_c = 0;
          double best_s = -std::numeric_limits<double>::infinity();
          for (std::size_t c = 0; c < exemplars.size(); ++c) {
            if (s.at(i, exemplars[c]) > best_s) {
              best_s = s.at(i, exemplars[c]);
              best_c = static_cast<int>(c);
            }
          }
          out.cluster_of[i] = best_c;
        }
        return out;
      }
    } else {
      stable = 0;
      prev_exemplars = exemplars;
    }
  }
  throw std::runtime_error("cluster_pool: no convergence within iteration limit");
}

TargetSelection TargetSelector::draw(Rng& rng) const {
  const int num = clusters_.num_clusters();
  if (num < 1) throw std::invalid_argument("TargetSelector: no clusters");

  std::vector<std::vector<int>> members(num);
  for (std::size_t i = 0; i < clusters_.cluster_of.size(); ++i) {
    members[clusters_.cluster_of[i]].push_back(static_cast<int>(i));
  }
  std::vector<int> order(num);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return members[x].size() > members[y].size();
  });
  const int top = std::min(10, num);
  int cluster = order[static_cast<int>(rng.uniform_open() * top) % top];

  // ceil(n/2) members without replacement (partial Fisher-Yates).
  std::vector<int> pick = members[cluster];
  const std::size_t take = (pick.size() + 1) / 2;
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.uniform_open() * (pick.size() - i)) %
                            (pick.size() - i);
    std::swap(pick[i], pick[j]);
  }
  pick.resize(take);
  std::sort(pick.begin(), pick.end());

  TargetSelection sel;
  sel.cluster_id = cluster;
  sel.member_indices = pick;
  sel.vector.assign(pool_.cols, 0.0);
  for (int idx : pick) {
    for (int j = 0; j < pool_.cols; ++j) sel.vector[j] += pool_.at(idx, j);
  }
  for (auto& v : sel.vector) v /= static_cast<double>(pick.size());
  return sel;
}

TargetSelection TargetSelector::select(AssignmentMode mode, Rng& rng,
                                       const std::optional<std::string>& speaker_id) {
  if (mode == AssignmentMode::Utterance) {
    TargetSelection sel = draw(rng);
    sel.mode = mode;
    return sel;
  }
  if (!speaker_id) {
    throw std::invalid_argument("TargetSelector: speaker-level mode needs a speaker id");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = speaker_cache_.find(*speaker_id);
  if (it != speaker_cache_.end()) return it->second;
  TargetSelection sel = draw(rng);
  sel.mode = mode;
  speaker_cache_[*speaker_id] = sel;
  return sel;
}

AnonymizedBundle anonymize_utterance(const PitchAutoencoder& pitch_model,
                                     const AcousticModel& bn_model, const PitchSequence& p,
                                     const Matrix& acoustic_kxa, TargetSelector& selector,
                                     double epsilon_pitch, double epsilon_bn,
                                     const PitchStats& target_pitch_stats, double delta,
                                     AssignmentMode mode, Rng& rng,
                                     const std::optional<std::string>& speaker_id) {
  const int k = acoustic_kxa.rows;
  if (static_cast<int>(p.values.size()) != k) {
    throw std::invalid_argument("anonymize_utterance: pitch/acoustic frame count mismatch");
  }

  AnonymizedBundle bundle;
  Rng pitch_rng = rng.split(1);
  Rng bn_rng = rng.split(2);
  Rng target_rng = rng.split(3);

  bundle.pitch = anonymize_pitch(pitch_model, p, target_pitch_stats, pitch_rng);

  Matrix bn = extract_bn(bn_model, transpose(acoustic_kxa));
  bundle.bn = transpose(noise_layer(bn, epsilon_bn, bn_rng));

  bundle.target_vector = selector.select(mode, target_rng, speaker_id).vector;

  bundle.ledger.records.push_back({"pitch_latent", epsilon_pitch, 1});
  bundle.ledger.records.push_back({"bn_frame", epsilon_bn, static_cast<std::uint64_t>(k)});
  bundle.simple_total = pipeline_budget(epsilon_pitch, epsilon_bn, static_cast<std::uint64_t>(k));
  bundle.advanced_total =
      pipeline_budget_advanced(epsilon_pitch, epsilon_bn, static_cast<std::uint64_t>(k), delta);
  bundle.ledger.delta_budget = 0.0;  // simple ledger is pure epsilon-DP
  return bundle;
}

void save_bundle(const std::string& dir, const AnonymizedBundle& bundle) {
  std::filesystem::create_directories(dir);
  write_pitch_file(dir + "/pitch.dpf0", bundle.pitch);
  write_feature_file(dir + "/bn.dpaf", bundle.bn);
  Matrix target(1, static_cast<int>(bundle.target_vector.size()));
  target.v = bundle.target_vector;
  write_vector_pool(dir + "/target.dpxv", target);
  save_ledger(dir + "/ledger.txt", bundle.ledger);
}

}  // namespace dpsa
