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

#include "dpsa/bn.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "dpsa/dp.hpp"

using namespace dpsa;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.v) v = 2.0 * rng.uniform_open() - 1.0;
  return m;
}

}  // namespace

TEST_CASE("extract_bn preserves frame count") {
  Rng rng(1);
  auto model = make_acoustic_model(6, 8, 4, 5, 100.0, rng);
  for (int k : {10, 100}) {
    auto x = random_matrix(6, k, rng);
    auto bn = extract_bn(model, x);
    CHECK(bn.rows == 4);
    CHECK(bn.cols == k);
    for (double v : bn.v) CHECK(std::isfinite(v));
  }
  auto bad = random_matrix(5, 10, rng);
  CHECK_THROWS(extract_bn(model, bad));
}

TEST_CASE("zero-weight extractor emits constant rows") {
  Rng rng(2);
  auto model = make_acoustic_model(6, 8, 4, 5, 100.0, rng);
  for (auto& l : model.extractor) {
    std::fill(l.w.begin(), l.w.end(), 0.0);
    std::fill(l.b.begin(), l.b.end(), 0.0);
  }
  std::fill(model.projection.w.begin(), model.projection.w.end(), 0.0);
  for (std::size_t i = 0; i < model.projection.b.size(); ++i) {
    model.projection.b[i] = 0.1 * (i + 1);
  }
  auto x = random_matrix(6, 12, rng);
  auto bn = extract_bn(model, x);
  for (int r = 0; r < bn.rows; ++r) {
    for (int c = 0; c < bn.cols; ++c) {
      CHECK(bn.at(r, c) == doctest::Approx(0.1 * (r + 1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("frame_noise mechanism arithmetic") {
  // Inner noise scale is 2/epsilon: at eps=1, mean |noise| added to the
  // unit-normalized vector should be 2 per entry.
  Rng rng(3);
  const int m = 100000;
  std::vector<double> b(m, 1.0);
  // Direct check of the inner draw scale via dp_core.
  Rng probe(3);
  double mad = 0.0;
  for (int i = 0; i < m; ++i) mad += std::fabs(sample_laplace(2.0 / 1.0, probe));
  mad /= m;
  CHECK(mad == doctest::Approx(2.0).epsilon(0.03));

  std::vector<double> v{0.5, -1.5, 2.0};
  auto out = frame_noise(v, 5.0, rng);
  double l1 = 0.0;
  for (double x : out) l1 += std::fabs(x);
  CHECK(l1 == doctest::Approx(1.0).epsilon(1e-9));

  std::vector<double> zero(4, 0.0);
  CHECK_THROWS(frame_noise(zero, 5.0, rng));
  CHECK_THROWS(frame_noise(v, 0.0, rng));
}

TEST_CASE("unit-L1 rows are at most 2 apart in L1") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> a(8), b(8);
    for (auto& x : a) x = 2.0 * rng.uniform_open() - 1.0;
    for (auto& x : b) x = 2.0 * rng.uniform_open() - 1.0;
    auto na = frame_noise(a, 1e9, rng);  // negligible noise, pure normalization
    auto nb = frame_noise(b, 1e9, rng);
    double d = 0.0;
    for (int i = 0; i < 8; ++i) d += std::fabs(na[i] - nb[i]);
    CHECK(d <= 2.0 + 1e-9);
  }
}

TEST_CASE("noise_layer rows unit-L1, seeded reproducibly, independent across rows") {
  Rng rng(5);
  auto bn = random_matrix(6, 3, rng);
  Rng r1(6), r2(6);
  auto n1 = noise_layer(bn, 2.0, r1);
  auto n2 = noise_layer(bn, 2.0, r2);
  CHECK(n1.v == n2.v);
  for (int c = 0; c < n1.cols; ++c) {
    double l1 = 0.0;
    for (int r = 0; r < n1.rows; ++r) l1 += std::fabs(n1.at(r, c));
    CHECK(l1 == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Independence: noise in consecutive frames is uncorrelated.
  Matrix wide(2, 10000, 1.0);
  Rng r3(7);
  auto noisy = noise_layer(wide, 1.0, r3);
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  int n = noisy.cols - 1;
  for (int c = 0; c < n; ++c) {
    double x = noisy.at(0, c), y = noisy.at(0, c + 1);
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  double corr = (sxy / n - sx / n * sy / n) /
                std::sqrt((sxx / n - sx / n * sx / n) * (syy / n - sy / n * sy / n));
  CHECK(std::fabs(corr) < 0.05);
}

TEST_CASE("per-frame epsilon composes linearly through the ledger") {
  PrivacyLedger ledger;
  ledger.records.push_back({"bn_frame", 0.5, 240});
  CHECK(compose_simple(ledger) == 120.0);
}

TEST_CASE("classify_frames log-softmax normalization") {
  Rng rng(8);
  auto model = make_acoustic_model(6, 8, 4, 5, 100.0, rng);
  auto bn = random_matrix(4, 9, rng);
  auto lp = classify_frames(model, bn);
  CHECK(lp.rows == 5);
  CHECK(lp.cols == 9);
  for (int c = 0; c < lp.cols; ++c) {
    double s = 0.0;
    for (int r = 0; r < lp.rows; ++r) s += std::exp(lp.at(r, c));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Uniform-logit model: every log-prob is log(1/classes).
  std::fill(model.cls_hidden.w.begin(), model.cls_hidden.w.end(), 0.0);
  std::fill(model.cls_hidden.b.begin(), model.cls_hidden.b.end(), 0.0);
  std::fill(model.cls_out.w.begin(), model.cls_out.w.end(), 0.0);
  std::fill(model.cls_out.b.begin(), model.cls_out.b.end(), 0.0);
  auto uniform = classify_frames(model, bn);
  for (double v : uniform.v) CHECK(v == doctest::Approx(std::log(1.0 / 5.0)).epsilon(1e-9));

  auto bad = random_matrix(3, 9, rng);
  CHECK_THROWS(classify_frames(model, bad));
}

TEST_CASE("ce_loss") {
  // Uniform predictions over 10 classes, 5 frames -> 5 ln 10.
  Matrix lp(10, 5, std::log(0.1));
  std::vector<int> labels{0, 3, 9, 2, 7};
  CHECK(ce_loss(lp, labels) == doctest::Approx(5.0 * std::log(10.0)).epsilon(1e-9));

  // Near-one-hot predictions: loss near 0.
  Matrix hot(3, 2, -40.0);
  hot.at(1, 0) = -1e-9;
  hot.at(2, 1) = -1e-9;
  std::vector<int> l2{1, 2};
  CHECK(ce_loss(hot, l2) == doctest::Approx(0.0).epsilon(1e-6));

  std::vector<int> bad{0, 99};
  CHECK_THROWS(ce_loss(hot, bad));
  std::vector<int> short_labels{0};
  CHECK_THROWS(ce_loss(hot, short_labels));

  // Random case vs direct recomputation.
  Rng rng(9);
  Matrix logits(4, 6);
  for (auto& v : logits.v) v = 2.0 * rng.uniform_open() - 1.0;
  Matrix norm(4, 6);
  for (int c = 0; c < 6; ++c) {
    double mx = -1e18;
    for (int r = 0; r < 4; ++r) mx = std::max(mx, logits.at(r, c));
    double se = 0.0;
    for (int r = 0; r < 4; ++r) se += std::exp(logits.at(r, c) - mx);
    for (int r = 0; r < 4; ++r) norm.at(r, c) = logits.at(r, c) - mx - std::log(se);
  }
  std::vector<int> rl{0, 1, 2, 3, 0, 1};
  double direct = 0.0;
  for (int c = 0; c < 6; ++c) direct -= norm.at(rl[c], c);
  CHECK(ce_loss(norm, rl) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("bn_loss_gradient matches central finite differences") {
  Rng rng(10);
  for (int inst = 0; inst < 2; ++inst) {
    auto model = make_acoustic_model(4, 5, 3, 4, 50.0, rng);
    auto x = random_matrix(4, 8, rng);
    std::vector<int> labels{0, 1, 2, 3, 0, 1, 2, 3};
    Matrix noise(3, 8);
    for (auto& v : noise.v) v = 0.1 * (2.0 * rng.uniform_open() - 1.0);

    auto [loss, grad] = bn_loss_gradient(model, x, labels, noise);
    CHECK(loss > 0.0);

    auto eval = [&](const AcousticModel& m) {
      auto bn = extract_bn(m, x);
      Matrix noisy(bn.rows, bn.cols);
      for (int c = 0; c < bn.cols; ++c) {
        std::vector<double> col(bn.rows);
        double s = 0.0;
        for (int r = 0; r < bn.rows; ++r) s += std::fabs(bn.at(r, c));
        for (int r = 0; r < bn.rows; ++r) col[r] = bn.at(r, c) / s + noise.at(r, c);
        double s2 = 0.0;
        for (double v : col) s2 += std::fabs(v);
        for (int r = 0; r < bn.rows; ++r) noisy.at(r, c) = col[r] / s2;
      }
      return ce_loss(classify_frames(m, noisy), labels);
    };

    CHECK(loss == doctest::Approx(eval(model)).epsilon(1e-9));

    const double h = 1e-5;
    auto check = [&](auto member, const Conv1dGrad& g) {
      const auto& layer = model.*member;
      for (std::size_t i = 0; i < layer.w.size(); ++i) {
        auto mp = model, mm = model;
        (mp.*member).w[i] += h;
        (mm.*member).w[i] -= h;
        double fd = (eval(mp) - eval(mm)) / (2 * h);
        if (std::fabs(fd) > 1e-6) {
          CHECK(g.w[i] == doctest::Approx(fd).epsilon(1e-4));
        } else {
          CHECK(std::fabs(g.w[i] - fd) < 1e-6);
        }
      }
      for (std::size_t i = 0; i < layer.b.size(); ++i) {
        auto mp = model, mm = model;
        (mp.*member).b[i] += h;
        (mm.*member).b[i] -= h;
        double fd = (eval(mp) - eval(mm)) / (2 * h);
        if (std::fabs(fd) > 1e-6) {
          CHECK(g.b[i] == doctest::Approx(fd).epsilon(1e-4));
        } else {
          CHECK(std::fabs(g.b[i] - fd) < 1e-6);
        }
      }
    };
    check(&AcousticModel::projection, grad.projection);
    check(&AcousticModel::cls_hidden, grad.cls_hidden);
    check(&AcousticModel::cls_out, grad.cls_out);
    for (int l = 0; l < 3; ++l) {
      const auto& layer = model.extractor[l];
      const auto& g = grad.extractor[l];
      for (std::size_t i = 0; i < layer.w.size(); ++i) {
        auto mp = model, mm = model;
        mp.extractor[l].w[i] += h;
        mm.extractor[l].w[i] -= h;
        double fd = (eval(mp) - eval(mm)) / (2 * h);
        if (std::fabs(fd) > 1e-6) {
          CHECK(g.w[i] == doctest::Approx(fd).epsilon(1e-4));
        } else {
          CHECK(std::fabs(g.w[i] - fd) < 1e-6);
        }
      }
    }
  }
}

TEST_CASE("train_bn learns above chance and is deterministic") {
  // Two classes with well-separated feature prototypes.
  Rng rng(11);
  std::vector<BnUtterance> corpus;
  for (int u = 0; u < 10; ++u) {
    BnUtterance utt;
    utt.acoustic = Matrix(4, 20);
    utt.labels.resize(20);
    for (int t = 0; t < 20; ++t) {
      int cls = (t / 5) % 2;
      utt.labels[t] = cls;
      for (int a = 0; a < 4; ++a) {
        utt.acoustic.at(a, t) = (cls == 0 ? 1.0 : -1.0) * (a % 2 ? 1.0 : -1.0) +
                                0.1 * (2.0 * rng.uniform_open() - 1.0);
      }
    }
    corpus.push_back(std::move(utt));
  }
  TrainingConfig cfg;
  cfg.epochs = 30;
  cfg.seed = 3;
  auto model = train_bn(corpus, cfg, 1e6, 4, 6, 3, 2);
  REQUIRE(model.loss_trace.size() == 30);
  CHECK(model.loss_trace.back() < model.loss_trace.front());

  // Held-out accuracy above chance.
  int correct = 0, total = 0;
  Rng noise_rng(4);
  for (const auto& utt : corpus) {
    auto bn = extract_bn(model, utt.acoustic);
    auto noisy = noise_layer(bn, 1e6, noise_rng);
    auto lp = classify_frames(model, noisy);
    for (int c = 0; c < lp.cols; ++c) {
      int best = 0;
      for (int r = 1; r < lp.rows; ++r) {
        if (lp.at(r, c) > lp.at(best, c)) best = r;
      }
      correct += best == utt.labels[c];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total > 0.8);

  auto model2 = train_bn(corpus, cfg, 1e6, 4, 6, 3, 2);
  CHECK(model.loss_trace == model2.loss_trace);

  std::vector<BnUtterance> empty;
  CHECK_THROWS(train_bn(empty, cfg, 100.0, 4));
}

TEST_CASE("naive_dp_bn matches noise_layer arithmetic") {
  Rng rng(12);
  auto bn = random_matrix(5, 7, rng);
  Rng r1(13), r2(13);
  auto a = naive_dp_bn(bn, 2.0, r1);
  auto b = noise_layer(bn, 2.0, r2);
  CHECK(a.v == b.v);
  for (int c = 0; c < a.cols; ++c) {
    double l1 = 0.0;
    for (int r = 0; r < a.rows; ++r) l1 += std::fabs(a.at(r, c));
    CHECK(l1 == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("acoustic model checkpoint round trip") {
  Rng rng(14);
  auto model = make_acoustic_model(6, 8, 4, 5, 7.5, rng);
  auto path = (std::filesystem::temp_directory_path() / "dpsa_test_model.dpbn").string();
  save_acoustic_model(path, model);
  auto back = load_acoustic_model(path);
  CHECK(back.in_dim == 6);
  CHECK(back.hidden == 8);
  CHECK(back.bn_dim == 4);
  CHECK(back.num_classes == 5);
  CHECK(back.epsilon == doctest::Approx(7.5).epsilon(1e-6));
  for (std::size_t i = 0; i < model.projection.w.size(); ++i) {
    CHECK(back.projection.w[i] == doctest::Approx(model.projection.w[i]).epsilon(1e-6));
  }
  std::remove(path.c_str());
}
