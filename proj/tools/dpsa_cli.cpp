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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpsa/anonymizer.hpp"
#include "dpsa/bn.hpp"
#include "dpsa/corpus.hpp"
#include "dpsa/dp.hpp"
#include "dpsa/eval.hpp"
#include "dpsa/io.hpp"
#include "dpsa/pitch.hpp"
#include "dpsa/pitch_autoencoder.hpp"

namespace {

using namespace dpsa;

// Global options shared by every subcommand. Values resolve in order:
// built-in default < config file < explicit flag.
struct Globals {
  std::uint64_t seed = 0;
  bool seed_set = false;
  double epsilon = 1.0;
  bool epsilon_set = false;
  double delta = 1e-5;
  bool delta_set = false;
  std::string config_path;
  std::map<std::string, std::string> config;

  void resolve() {
    if (!config_path.empty()) config = read_config(config_path);
    auto from_config = [&](const char* key, auto& value, bool explicitly_set) {
      auto it = config.find(key);
      if (it == config.end() || explicitly_set) return;
      std::istringstream ss(it->second);
      ss >> value;
      if (ss.fail()) throw std::runtime_error(std::string("config: bad value for ") + key);
    };
    from_config("seed", seed, seed_set);
    if (config.count("seed") && !seed_set) seed_set = true;
    from_config("epsilon", epsilon, epsilon_set);
    from_config("delta", delta, delta_set);
  }

  /// Seeded runs are replayable; unseeded runs draw noise from OS entropy.
  Rng rng(std::uint64_t stream = 0) const {
    return seed_set ? Rng(seed, stream) : Rng::from_entropy();
  }
};

void add_globals(CLI::App* cmd, Globals& g) {
  cmd->add_option("--seed", g.seed, "random seed (omit for entropy-seeded noise)")
      ->each([&g](const std::string&) { g.seed_set = true; });
  cmd->add_option("--epsilon", g.epsilon, "privacy budget epsilon")
      ->each([&g](const std::string&) { g.epsilon_set = true; });
  cmd->add_option("--delta", g.delta, "privacy budget delta")
      ->each([&g](const std::string&) { g.delta_set = true; });
  cmd->add_option("--config", g.config_path, "key=value config file (flags override)");
}

struct LoadedCorpus {
  std::vector<PitchSequence> pitch;
  std::vector<Matrix> features;  // K x A as stored
  std::vector<std::vector<int>> labels;
  std::vector<std::string> speakers;
  std::vector<Split> splits;
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "validation") return Split::Validation;
  if (s == "test") return Split::Test;
  throw std::runtime_error("manifest: unknown split '" + s + "'");
}

LoadedCorpus load_corpus(const std::string& dir) {
  auto manifest = read_manifest(dir + "/manifest.txt");
  LoadedCorpus c;
  for (const auto& e : manifest.entries) {
    c.pitch.push_back(read_pitch_file(dir + "/" + e.pitch_file));
    c.features.push_back(read_feature_file(dir + "/" + e.feature_file));
    c.labels.push_back(read_label_file(dir + "/" + e.label_file));
    c.speakers.push_back(e.speaker_id);
    c.splits.push_back(parse_split(e.split));
  }
  if (c.pitch.empty()) throw std::runtime_error(dir + ": empty corpus");
  return c;
}

int speaker_index(std::map<std::string, int>& table, const std::string& id) {
  auto it = table.find(id);
  if (it != table.end()) return it->second;
  int idx = static_cast<int>(table.size());
  table.emplace(id, idx);
  return idx;
}

int cmd_account(const Globals& g, std::uint64_t k) {
  double simple = g.epsilon * static_cast<double>(k);
  double advanced = compose_advanced(g.epsilon, k, g.delta);
  std::cout << "simple=" << simple << " advanced=" << static_cast<long long>(std::floor(advanced))
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private speaker anonymization toolkit"};
  app.require_subcommand(1);

  Globals g;

  // account
  auto* account = app.add_subcommand("account", "compose a privacy budget over K invocations");
  std::uint64_t acc_k = 1;
  account->add_option("--k", acc_k, "number of mechanism invocations")->required();
  add_globals(account, g);

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic speaker corpus");
  std::string gen_out;
  int gen_speakers = 20, gen_utts = 50, gen_fdim = 20, gen_phones = 8;
  int gen_min_frames = 80, gen_max_frames = 120;
  double gen_jmin = 0.5, gen_jmax = 8.0, gen_offset = 1.0, gen_obs = 0.3;
  double gen_unvoiced = 0.15, gen_prosody = 30.0;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--speakers", gen_speakers, "number of speakers");
  gen->add_option("--utterances", gen_utts, "utterances per speaker");
  gen->add_option("--min-frames", gen_min_frames, "minimum utterance length");
  gen->add_option("--max-frames", gen_max_frames, "maximum utterance length");
  gen->add_option("--feature-dim", gen_fdim, "acoustic feature width");
  gen->add_option("--num-phones", gen_phones, "frame classes");
  gen->add_option("--jitter-min", gen_jmin, "smallest speaker jitter (Hz)");
  gen->add_option("--jitter-max", gen_jmax, "largest speaker jitter (Hz)");
  gen->add_option("--offset-norm", gen_offset, "speaker feature-offset norm");
  gen->add_option("--observation-noise", gen_obs, "per-frame feature noise");
  gen->add_option("--unvoiced-fraction", gen_unvoiced, "fraction of zeroed pitch frames");
  gen->add_option("--prosody-amplitude", gen_prosody, "shared contour amplitude (Hz)");
  add_globals(gen, g);

  // train-pitch
  auto* tp = app.add_subcommand("train-pitch", "train the DP pitch autoencoder");
  std::string tp_corpus, tp_out;
  int tp_epochs = 20, tp_channels = 8, tp_width = 5;
  tp->add_option("--corpus", tp_corpus, "corpus directory")->required();
  tp->add_option("--out", tp_out, "model checkpoint path")->required();
  tp->add_option("--epochs", tp_epochs, "training epochs");
  tp->add_option("--channels", tp_channels, "latent channels");
  tp->add_option("--width", tp_width, "convolution kernel width");
  add_globals(tp, g);

  // anonymize-pitch
  auto* ap = app.add_subcommand("anonymize-pitch", "anonymize one pitch file");
  std::string ap_model, ap_in, ap_out;
  double ap_mean = 150.0, ap_std = 20.0;
  ap->add_option("--model", ap_model, "pitch model checkpoint")->required();
  ap->add_option("--in", ap_in, "input pitch file")->required();
  ap->add_option("--out", ap_out, "output pitch file")->required();
  ap->add_option("--target-mean", ap_mean, "target pitch mean (Hz)");
  ap->add_option("--target-std", ap_std, "target pitch std (Hz)");
  add_globals(ap, g);

  // train-bn
  auto* tb = app.add_subcommand("train-bn", "train the DP bottleneck extractor");
  std::string tb_corpus, tb_out;
  int tb_epochs = 20, tb_hidden = 24, tb_bn = 16;
  tb->add_option("--corpus", tb_corpus, "corpus directory")->required();
  tb->add_option("--out", tb_out, "model checkpoint path")->required();
  tb->add_option("--epochs", tb_epochs, "training epochs");
  tb->add_option("--hidden", tb_hidden, "hidden channels");
  tb->add_option("--bn-dim", tb_bn, "bottleneck width");
  add_globals(tb, g);

  // extract-bn
  auto* eb = app.add_subcommand("extract-bn", "extract noisy bottleneck features");
  std::string eb_model, eb_in, eb_out;
  eb->add_option("--model", eb_model, "acoustic model checkpoint")->required();
  eb->add_option("--in", eb_in, "input feature file (frames x width)")->required();
  eb->add_option("--out", eb_out, "output feature file")->required();
  add_globals(eb, g);

  // select-target
  auto* st = app.add_subcommand("select-target", "select a pseudo-speaker target vector");
  std::string st_pool, st_out, st_mode = "utterance", st_speaker;
  st->add_option("--pool", st_pool, "speaker vector pool file")->required();
  st->add_option("--out", st_out, "output vector file")->required();
  st->add_option("--mode", st_mode, "utterance or speaker assignment")
      ->check(CLI::IsMember({"utterance", "speaker"}));
  st->add_option("--speaker", st_speaker, "speaker id (speaker mode)");
  add_globals(st, g);

  // anonymize
  auto* an = app.add_subcommand("anonymize", "run the full anonymization pipeline");
  std::string an_pitch_model, an_bn_model, an_pool, an_in_pitch, an_in_feats, an_out;
  std::string an_mode = "utterance", an_speaker;
  double an_eps_pitch = 1.0, an_eps_bn = 1.0, an_mean = 150.0, an_std = 20.0;
  an->add_option("--pitch-model", an_pitch_model, "pitch model checkpoint")->required();
  an->add_option("--bn-model", an_bn_model, "acoustic model checkpoint")->required();
  an->add_option("--pool", an_pool, "speaker vector pool file")->required();
  an->add_option("--in-pitch", an_in_pitch, "input pitch file")->required();
  an->add_option("--in-features", an_in_feats, "input feature file")->required();
  an->add_option("--out", an_out, "output bundle directory")->required();
  an->add_option("--epsilon-pitch", an_eps_pitch, "pitch mechanism epsilon");
  an->add_option("--epsilon-bn", an_eps_bn, "per-frame BN mechanism epsilon");
  an->add_option("--target-mean", an_mean, "target pitch mean (Hz)");
  an->add_option("--target-std", an_std, "target pitch std (Hz)");
  an->add_option("--mode", an_mode, "utterance or speaker assignment")
      ->check(CLI::IsMember({"utterance", "speaker"}));
  an->add_option("--speaker", an_speaker, "speaker id (speaker mode)");
  add_globals(an, g);

  // attack-asi
  auto* aa = app.add_subcommand("attack-asi", "train the speaker-identification attack");
  std::string aa_corpus, aa_report;
  int aa_epochs = 200;
  aa->add_option("--corpus", aa_corpus, "corpus directory")->required();
  aa->add_option("--report", aa_report, "metric report output path");
  aa->add_option("--epochs", aa_epochs, "maximum training epochs");
  add_globals(aa, g);

  // score-asv
  auto* sv = app.add_subcommand("score-asv", "score verification trials");
  std::string sv_corpus, sv_out;
  sv->add_option("--corpus", sv_corpus, "corpus directory")->required();
  sv->add_option("--out", sv_out, "score CSV output path")->required();
  add_globals(sv, g);

  // metrics
  auto* me = app.add_subcommand("metrics", "compute metrics from score/word files");
  std::string me_scores, me_ref, me_hyp, me_report;
  me->add_option("--scores", me_scores, "score CSV file");
  me->add_option("--ref", me_ref, "reference transcript (one utterance per line)");
  me->add_option("--hyp", me_hyp, "hypothesis transcript");
  me->add_option("--report", me_report, "metric report output path");
  add_globals(me, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    g.resolve();

    if (*account) return cmd_account(g, acc_k);

    if (*gen) {
      Rng rng = g.rng(1);
      auto specs = default_speakers(gen_speakers, gen_fdim, gen_phones, gen_jmin, gen_jmax,
                                    gen_offset, rng);
      CorpusGenParams params;
      params.utterances_per_speaker = gen_utts;
      params.min_frames = gen_min_frames;
      params.max_frames = gen_max_frames;
      params.feature_dim = gen_fdim;
      params.num_phones = gen_phones;
      params.observation_noise = gen_obs;
      params.unvoiced_fraction = gen_unvoiced;
      params.prosody_amplitude_hz = gen_prosody;
      params.seed = g.seed;
      auto corpus = gen_corpus(specs, params);
      auto manifest = write_corpus(gen_out, corpus);
      std::cout << "utterances=" << manifest.entries.size() << " dir=" << gen_out << "\n";
      return 0;
    }

    if (*tp) {
      auto corpus = load_corpus(tp_corpus);
      std::vector<std::vector<double>> train;
      for (std::size_t i = 0; i < corpus.pitch.size(); ++i) {
        if (corpus.splits[i] != Split::Train) continue;
        auto view = remove_zeros(corpus.pitch[i]);
        train.push_back(normalize(view.voiced).first);
      }
      TrainingConfig cfg;
      cfg.epochs = tp_epochs;
      cfg.seed = g.seed;
      auto model = train_pitch_autoencoder(train, cfg, g.epsilon, tp_channels, tp_width);
      save_pitch_autoencoder(tp_out, model);
      std::cout << "final_loss=" << model.loss_trace.back() << " model=" << tp_out << "\n";
      return 0;
    }

    if (*ap) {
      auto model = load_pitch_autoencoder(ap_model);
      auto p = read_pitch_file(ap_in);
      Rng rng = g.rng(2);
      auto out = anonymize_pitch(model, p, {ap_mean, ap_std}, rng);
      write_pitch_file(ap_out, out);
      std::cout << "frames=" << out.values.size() << " out=" << ap_out << "\n";
      return 0;
    }

    if (*tb) {
      auto corpus = load_corpus(tb_corpus);
      std::vector<BnUtterance> train;
      int num_classes = 0, in_dim = corpus.features.front().cols;
      for (std::size_t i = 0; i < corpus.features.size(); ++i) {
        for (int l : corpus.labels[i]) num_classes = std::max(num_classes, l + 1);
        if (corpus.splits[i] != Split::Train) continue;
        train.push_back({transpose(corpus.features[i]), corpus.labels[i]});
      }
      TrainingConfig cfg;
      cfg.epochs = tb_epochs;
      cfg.seed = g.seed;
      auto model = train_bn(train, cfg, g.epsilon, in_dim, tb_hidden, tb_bn, num_classes);
      save_acoustic_model(tb_out, model);
      std::cout << "final_loss=" << model.loss_trace.back() << " model=" << tb_out << "\n";
      return 0;
    }

    if (*eb) {
      auto model = load_acoustic_model(eb_model);
      auto feats = read_feature_file(eb_in);  // frames x width
      Rng rng = g.rng(3);
      auto bn = extract_bn(model, transpose(feats));
      auto noisy = noise_layer(bn, g.epsilon, rng);
      write_feature_file(eb_out, transpose(noisy));
      std::cout << "frames=" << noisy.cols << " bn_dim=" << noisy.rows << " out=" << eb_out
                << "\n";
      return 0;
    }

    if (*st) {
      auto pool = read_vector_pool(st_pool);
      auto clusters = cluster_pool(pool);
      TargetSelector selector(pool, clusters);
      Rng rng = g.rng(4);
      auto mode = st_mode == "speaker" ? AssignmentMode::Speaker : AssignmentMode::Utterance;
      std::optional<std::string> spk;
      if (!st_speaker.empty()) spk = st_speaker;
      auto sel = selector.select(mode, rng, spk);
      Matrix out(1, static_cast<int>(sel.vector.size()));
      out.v = sel.vector;
      write_vector_pool(st_out, out);
      std::cout << "cluster=" << sel.cluster_id << " members=" << sel.member_indices.size()
                << " out=" << st_out << "\n";
      return 0;
    }

    if (*an) {
      auto pitch_model = load_pitch_autoencoder(an_pitch_model);
      auto bn_model = load_acoustic_model(an_bn_model);
      auto pool = read_vector_pool(an_pool);
      auto p = read_pitch_file(an_in_pitch);
      auto feats = read_feature_file(an_in_feats);
      auto clusters = cluster_pool(pool);
      TargetSelector selector(pool, clusters);
      Rng rng = g.rng(5);
      auto mode = an_mode == "speaker" ? AssignmentMode::Speaker : AssignmentMode::Utterance;
      std::optional<std::string> spk;
      if (!an_speaker.empty()) spk = an_speaker;
      auto bundle = anonymize_utterance(pitch_model, bn_model, p, feats, selector, an_eps_pitch,
                                        an_eps_bn, {an_mean, an_std}, g.delta, mode, rng, spk);
      save_bundle(an_out, bundle);
      std::cout << "frames=" << bundle.pitch.values.size()
                << " epsilon_simple=" << bundle.simple_total.epsilon
                << " epsilon_advanced=" << bundle.advanced_total.epsilon << " out=" << an_out
                << "\n";
      return 0;
    }

    if (*aa) {
      auto corpus = load_corpus(aa_corpus);
      std::map<std::string, int> table;
      std::vector<LabeledUtterance> data;
      for (std::size_t i = 0; i < corpus.features.size(); ++i) {
        data.push_back({corpus.features[i], speaker_index(table, corpus.speakers[i]),
                        corpus.splits[i]});
      }
      AttackConfig cfg;
      cfg.seed = g.seed;
      cfg.max_epochs = aa_epochs;
      auto model = train_asi_attack(data, cfg);
      double p_asi = asi_error(model, data, Split::Test);
      std::cout << "p_asi=" << p_asi << "\n";
      if (!aa_report.empty()) {
        write_report(aa_report, {{"p_asi", std::to_string(p_asi)}});
      }
      return 0;
    }

    if (*sv) {
      auto corpus = load_corpus(sv_corpus);
      std::map<std::string, int> table;
      std::map<int, std::vector<Matrix>> enroll;
      std::vector<Trial> trials;
      for (std::size_t i = 0; i < corpus.features.size(); ++i) {
        int spk = speaker_index(table, corpus.speakers[i]);
        if (corpus.splits[i] == Split::Train) {
          enroll[spk].push_back(corpus.features[i]);
        } else if (corpus.splits[i] == Split::Test) {
          trials.push_back({corpus.features[i], spk, spk});
        }
      }
      // Nonmated trials: claim each test utterance against the next speaker.
      int num_speakers = static_cast<int>(table.size());
      std::size_t mated_count = trials.size();
      for (std::size_t i = 0; i < mated_count; ++i) {
        Trial t = trials[i];
        t.claimed_speaker = (t.true_speaker + 1) % num_speakers;
        trials.push_back(t);
      }
      auto scores = linkage_scores(enroll, trials);
      write_scores(sv_out, scores);
      std::cout << "mated=" << scores.mated.size() << " nonmated=" << scores.nonmated.size()
                << " out=" << sv_out << "\n";
      return 0;
    }

    if (*me) {
      std::map<std::string, std::string> report;
      if (!me_scores.empty()) {
        auto scores = read_scores(me_scores);
        report["eer"] = std::to_string(eer(scores));
        report["unlinkability"] = std::to_string(unlinkability(scores));
      }
      if (!me_ref.empty() && !me_hyp.empty()) {
        auto read_words = [](const std::string& path) {
          std::ifstream f(path);
          if (!f) throw std::runtime_error("cannot open: " + path);
          std::vector<std::string> words;
          std::string w;
          while (f >> w) words.push_back(w);
          return words;
        };
        auto ref = read_words(me_ref);
        auto hyp = read_words(me_hyp);
        double w = wer(ref, hyp);
        report["wer"] = std::to_string(w);
        report["u_asr"] = std::to_string(100.0 - w);
      }
      if (report.empty()) throw std::runtime_error("metrics: nothing to compute (no inputs)");
      for (const auto& [k, v] : report) std::cout << k << "=" << v << "\n";
      if (!me_report.empty()) write_report(me_report, report);
      return 0;
    }

    std::cerr << "no subcommand\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
