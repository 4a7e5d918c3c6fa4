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

#include "dpsa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dpsa {

double pearson_corr(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("pearson_corr: need equal lengths >= 2");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx < 1e-12 || syy < 1e-12) throw std::invalid_argument("pearson_corr: constant input");
  return sxy / std::sqrt(sxx * syy);
}

double eer(const ScoreSet& scores) {
  if (scores.mated.empty() || scores.nonmated.empty()) {
    throw std::invalid_argument("eer: both score lists must be non-empty");
  }
  std::vector<double> all(scores.mated);
  all.insert(all.end(), scores.nonmated.begin(), scores.nonmated.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) {
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  }
  thresholds.push_back(all.back() + 1.0);

  double best_gap = std::numeric_limits<double>::infinity();
  double best_eer = 0.5;
  for (double t : thresholds) {
    std::size_t fa = 0, fr = 0;
    for (double s : scores.nonmated) fa += (s >= t);
    for (double s : scores.mated) fr += (s < t);
    double far = static_cast<double>(fa) / static_cast<double>(scores.nonmated.size());
    double frr = static_cast<double>(fr) / static_cast<double>(scores.mated.size());
    double gap = std::fabs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best_eer = 0.5 * (far + frr);
    }
  }
  return best_eer;
}

double unlinkability(const ScoreSet& scores, int bins) {
  if (scores.mated.empty() || scores.nonmated.empty()) {
    throw std::invalid_argument("unlinkability: both score lists must be non-empty");
  }
  if (bins < 2) throw std::invalid_argument("unlinkability: bins must be >= 2");
  double lo = std::min(*std::min_element(scores.mated.begin(), scores.mated.end()),
                       *std::min_element(scores.nonmated.begin(), scores.nonmated.end()));
  double hi = std::max(*std::max_element(scores.mated.begin(), scores.mated.end()),
                       *std::max_element(scores.nonmated.begin(), scores.nonmated.end()));
  if (hi <= lo) hi = lo + 1.0;  // all scores identical: one occupied bin
  const double width = (hi - lo) / bins;
  std::vector<double> pm(bins, 0.0), pn(bins, 0.0);
  auto bin_of = [&](double s) {
    int b = static_cast<int>((s - lo) / width);
    return std::clamp(b, 0, bins - 1);
  };
  for (double s : scores.mated) pm[bin_of(s)] += 1.0;
  for (double s : scores.nonmated) pn[bin_of(s)] += 1.0;
  for (auto& v : pm) v /= static_cast<double>(scores.mated.size());
  for (auto& v : pn) v /= static_cast<double>(scores.nonmated.size());

  // Equal priors: p(mated|s) = pm / (pm + pn); local D(s) = max(0, 2p - 1).
  double d_sys = 0.0;
  for (int b = 0; b < bins; ++b) {
    if (pm[b] <= 0.0) continue;
    double post = pm[b] / (pm[b] + pn[b]);
    d_sys += pm[b] * std::max(0.0, 2.0 * post - 1.0);
  }
  return 1.0 - d_sys;
}

std::vector<double> pooled_embedding(const Matrix& features) {
  const int k = features.rows, f = features.cols;
  if (k < 1 || f < 1) throw std::invalid_argument("pooled_embedding: empty feature matrix");
  std::vector<double> out(2 * static_cast<std::size_t>(f), 0.0);
  for (int c = 0; c < f; ++c) {
    double mean = 0.0;
    for (int r = 0; r < k; ++r) mean += features.at(r, c);
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (int r = 0; r < k; ++r) var += (features.at(r, c) - mean) * (features.at(r, c) - mean);
    var /= static_cast<double>(k);
    out[c] = mean;
    out[f + c] = std::sqrt(var);
  }
  return out;
}

namespace {

std::vector<double> forward_attack(const AttackModel& model, const std::vector<double>& pooled) {
  Matrix x(model.layer1.in_ch, 1);
  std::copy(pooled.begin(), pooled.end(), x.v.begin());
  Matrix h = conv1d_forward(model.layer1, x, /*parallel=*/false);
  Matrix logits = conv1d_forward(model.layer2, h, /*parallel=*/false);
  return logits.v;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

AttackModel train_asi_attack(std::span<const LabeledUtterance> corpus, const AttackConfig& config) {
  if (corpus.empty()) throw std::invalid_argument("train_asi_attack: empty corpus");
  std::set<int> speakers;
  int feature_dim = corpus.front().features.cols;
  for (const auto& u : corpus) {
    speakers.insert(u.speaker);
    if (u.features.cols != feature_dim) {
      throw std::invalid_argument("train_asi_attack: inconsistent feature widths");
    }
  }
  const int s = static_cast<int>(speakers.size());
  if (s < 2) throw std::invalid_argument("train_asi_attack: need at least 2 speakers");

  std::vector<std::vector<double>> train_x, val_x;
  std::vector<int> train_y, val_y;
  for (const auto& u : corpus) {
    if (u.split == Split::Train) {
      train_x.push_back(pooled_embedding(u.features));
      train_y.push_back(u.speaker);
    } else if (u.split == Split::Validation) {
      val_x.push_back(pooled_embedding(u.features));
      val_y.push_back(u.speaker);
    }
  }
  if (train_x.empty()) throw std::invalid_argument("train_asi_attack: empty train split");

  AttackModel model;
  model.feature_dim = feature_dim;
  model.hidden = config.hidden;
  model.num_speakers = s;
  Rng rng(config.seed, 20);
  model.layer1 = make_conv1d(2 * feature_dim, config.hidden, 1, Activation::Tanh, rng);
  model.layer2 = make_conv1d(config.hidden, s, 1, Activation::Linear, rng);

  // Standardize pooled inputs on the train split.
  const std::size_t dim = train_x.front().size();
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (const auto& x : train_x) {
    for (std::size_t i = 0; i < dim; ++i) mu[i] += x[i];
  }
  for (auto& m : mu) m /= static_cast<double>(train_x.size());
  for (const auto& x : train_x) {
    for (std::size_t i = 0; i < dim; ++i) sd[i] += (x[i] - mu[i]) * (x[i] - mu[i]);
  }
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(train_x.size())) + 1e-8;
  auto standardize = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < dim; ++i) x[i] = (x[i] - mu[i]) / sd[i];
    return x;
  };
  for (auto& x : train_x) x = standardize(x);
  for (auto& x : val_x) x = standardize(x);

  AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8, 1e-5};
  AdamState st_w1, st_b1, st_w2, st_b2;
  std::uint64_t t = 0;

  AttackModel best = model;
  double best_val = -1.0;
  int stall = 0;

  auto eval_val = [&](const AttackModel& m) {
    if (val_x.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < val_x.size(); ++i) {
      correct += (argmax(forward_attack(m, val_x[i])) == val_y[i]);
    }
    return static_cast<double>(correct) / static_cast<double>(val_x.size());
  };

  // The two layers are width-1 convolutions over a single column, i.e. dense
  // layers; the unrolled path below performs the same arithmetic in the same
  // order as conv1d_forward/backward but reuses preallocated buffers, which
  // makes per-sample updates allocation-free (the training loop is the hot
  // path of every attack evaluation).
  const int in1 = model.layer1.in_ch;
  const int hid = model.layer1.out_ch;
  std::vector<double> h(hid), logits(s), dlogits(s), dh(hid), dpre1(hid);
  Conv1dGrad g1, g2;
  g1.w.assign(model.layer1.w.size(), 0.0);
  g1.b.assign(model.layer1.b.size(), 0.0);
  g2.w.assign(model.layer2.w.size(), 0.0);
  g2.b.assign(model.layer2.b.size(), 0.0);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < train_x.size(); ++i) {
      const double* x = train_x[i].data();
      for (int oc = 0; oc < hid; ++oc) {
        double acc = model.layer1.b[oc];
        const double* w = &model.layer1.w[static_cast<std::size_t>(oc) * in1];
        for (int ic = 0; ic < in1; ++ic) acc += w[ic] * x[ic];
        h[oc] = std::tanh(acc);
      }
      for (int oc = 0; oc < s; ++oc) {
        double acc = model.layer2.b[oc];
        const double* w = &model.layer2.w[static_cast<std::size_t>(oc) * hid];
        for (int ic = 0; ic < hid; ++ic) acc += w[ic] * h[ic];
        logits[oc] = acc;
      }

      // softmax CE gradient
      double mx = *std::max_element(logits.begin(), logits.end());
      double lse = 0.0;
      for (double v : logits) lse += std::exp(v - mx);
      lse = mx + std::log(lse);
      for (int c = 0; c < s; ++c) dlogits[c] = std::exp(logits[c] - lse);
      dlogits[train_y[i]] -= 1.0;

      // Backward through the linear output layer.
      for (int oc = 0; oc < s; ++oc) {
        double* gw = &g2.w[static_cast<std::size_t>(oc) * hid];
        for (int ic = 0; ic < hid; ++ic) gw[ic] = dlogits[oc] * h[ic];
        g2.b[oc] = dlogits[oc];
      }
      for (int ic = 0; ic < hid; ++ic) {
        double acc = 0.0;
        for (int oc = 0; oc < s; ++oc) {
          acc += dlogits[oc] * model.layer2.w[static_cast<std::size_t>(oc) * hid + ic];
        }
        dh[ic] = acc;
      }
      // Backward through the tanh hidden layer.
      for (int oc = 0; oc < hid; ++oc) dpre1[oc] = dh[oc] * (1.0 - h[oc] * h[oc]);
      for (int oc = 0; oc < hid; ++oc) {
        double* gw = &g1.w[static_cast<std::size_t>(oc) * in1];
        for (int ic = 0; ic < in1; ++ic) gw[ic] = dpre1[oc] * x[ic];
        g1.b[oc] = dpre1[oc];
      }

      ++t;
      adam_step(model.layer1.w, g1.w, st_w1, adam, t);
      adam_step(model.layer1.b, g1.b, st_b1, adam, t);
      adam_step(model.layer2.w, g2.w, st_w2, adam, t);
      adam_step(model.layer2.b, g2.b, st_b2, adam, t);
    }
    double val_acc = eval_val(model);
    if (val_acc > best_val) {
      best_val = val_acc;
      best = model;
      stall = 0;
    } else if (++stall >= config.patience) {
      break;
    }
  }
  if (val_x.empty()) best = model;

  // Fold the input standardization into the first layer so the stored model
  // consumes raw pooled embeddings.
  for (int oc = 0; oc < best.layer1.out_ch; ++oc) {
    double shift = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      double w = best.layer1.wt(oc, static_cast<int>(i), 0);
      shift += w * mu[i] / sd[i];
      best.layer1.wt(oc, static_cast<int>(i), 0) = w / sd[i];
    }
    best.layer1.b[oc] -= shift;
  }
  return best;
}

double asi_accuracy(const AttackModel& model, std::span<const LabeledUtterance> corpus,
                    Split split) {
  std::size_t total = 0, correct = 0;
  for (const auto& u : corpus) {
    if (u.split != split) continue;
    ++total;
    correct += (argmax(forward_attack(model, pooled_embedding(u.features))) == u.speaker);
  }
  if (total == 0) throw std::invalid_argument("asi_accuracy: empty split");
  return static_cast<double>(correct) / static_cast<double>(total);
}

double asi_error(const AttackModel& model, std::span<const LabeledUtterance> corpus, Split split) {
  return 100.0 * (1.0 - asi_accuracy(model, corpus, split));
}

ScoreSet linkage_scores(const std::map<int, std::vector<Matrix>>& enroll,
                        std::span<const Trial> trials) {
  std::map<int, std::vector<double>> centroids;
  for (const auto& [spk, utts] : enroll) {
    if (utts.empty()) continue;
    std::vector<double> mean = pooled_embedding(utts.front());
    std::fill(mean.begin(), mean.end(), 0.0);
    for (const auto& u : utts) {
      auto e = pooled_embedding(u);
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += e[i];
    }
    for (auto& v : mean) v /= static_cast<double>(utts.size());
    centroids[spk] = std::move(mean);
  }
  ScoreSet scores;
  for (const auto& trial : trials) {
    auto it = centroids.find(trial.claimed_speaker);
    if (it == centroids.end()) {
      throw std::invalid_argument("linkage_scores: claimed speaker not enrolled");
    }
    auto e = pooled_embedding(trial.features);
    const auto& c = it->second;
    double dot = 0.0, ne = 0.0, nc = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      dot += e[i] * c[i];
      ne += e[i] * e[i];
      nc += c[i] * c[i];
    }
    double denom = std::sqrt(ne) * std::sqrt(nc);
    double cosine = denom > 0.0 ? dot / denom : 0.0;
    if (trial.claimed_speaker == trial.true_speaker) {
      scores.mated.push_back(cosine);
    } else {
      scores.nonmated.push_back(cosine);
    }
  }
  return scores;
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  const std::size_t n = a.size(), m = b.size();
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw std::invalid_argument("wer: empty reference");
  return 100.0 * static_cast<double>(edit_distance(reference, hypothesis)) /
         static_cast<double>(reference.size());
}

void write_scores(const std::string& path, const ScoreSet& scores) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(17);
  f << "label,score\n";
  for (double s : scores.mated) f << "mated," << s << "\n";
  for (double s : scores.nonmated) f << "nonmated," << s << "\n";
}

ScoreSet read_scores(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "label,score") {
    throw std::runtime_error(path + ": bad score header");
  }
  ScoreSet scores;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error(path + ": malformed line '" + line + "'");
    std::string label = line.substr(0, comma);
    double s = std::stod(line.substr(comma + 1));
    if (label == "mated") {
      scores.mated.push_back(s);
    } else if (label == "nonmated") {
      scores.nonmated.push_back(s);
    } else {
      throw std::runtime_error(path + ": unknown label '" + label + "'");
    }
  }
  return scores;
}

}  // namespace dpsa
