// Copyright 2026 The asrlab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "asrlab/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "asrlab/config.hpp"
#include "asrlab/corpus.hpp"
#include "asrlab/eval.hpp"
#include "asrlab/tokenizer.hpp"
#include "asrlab/training.hpp"

namespace asrlab {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string run_dir;
};

/// Resolved settings and output locations for one command.
struct Context {
  Config config;
  fs::path run;
  std::ostream& out;

  fs::path checkpoints() const { return run / "checkpoints"; }
  fs::path logs() const { return run / "logs"; }
  fs::path reports() const { return run / "reports"; }
};

Context make_context(const Common& common, std::ostream& out) {
  Context ctx{Config{}, {}, out};
  if (!common.config_file.empty()) ctx.config.load_file(common.config_file);
  for (const auto& o : common.overrides) ctx.config.apply(o);
  if (common.seed) ctx.config.set("seed", std::to_string(*common.seed));
  if (!common.run_dir.empty()) {
    ctx.run = common.run_dir;
  } else if (const char* env = std::getenv("ASRLAB_RUNDIR"); env != nullptr && *env != '\0') {
    ctx.run = env;
  } else {
    ctx.run = "run";
  }
  for (const auto& d : {ctx.run, ctx.checkpoints(), ctx.logs(), ctx.reports()}) fs::create_directories(d);
  std::ofstream(ctx.run / "config.txt", std::ios::trunc) << ctx.config.render();
  return ctx;
}

fs::path or_default(const std::string& given, const fs::path& fallback) { return given.empty() ? fallback : fs::path(given); }

std::vector<data::ManifestEntry> read_all(const std::vector<std::string>& paths) {
  std::vector<data::ManifestEntry> out;
  for (const auto& p : paths) {
    auto m = data::read_manifest(p);
    out.insert(out.end(), std::make_move_iterator(m.begin()), std::make_move_iterator(m.end()));
  }
  return out;
}

void print_stage_summary(std::ostream& out, const train::StageResult& r, const fs::path& saved) {
  const auto& ck = r.checkpoint;
  out << to_string(ck.stage()) << ": " << ck.step << " steps, peak lr " << ck.schedule.peak_lr;
  if (!r.log.empty() && r.log.back().loss) out << ", last loss " << std::setprecision(6) << *r.log.back().loss;
  if (std::isfinite(ck.best_dev_wer)) out << ", best dev WER " << eval::format_percent(ck.best_dev_wer) << "%";
  out << '\n';
  if (!r.skipped_ids.empty()) {
    out << "skipped " << r.skipped_ids.size() << " utterances with infeasible CTC targets:";
    for (const auto& id : r.skipped_ids) out << ' ' << id;
    out << '\n';
  }
  out << "checkpoint: " << saved.string() << '\n';
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage Conformer-CTC speech recognition toolkit", args.empty() ? "asrlab" : args[0]};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_file, "key=value config file");
    sub->add_option("--set", common.overrides, "Override one config key (key=value); repeatable");
    sub->add_option("--seed", common.seed, "Seed for every random draw");
    sub->add_option("--run-dir", common.run_dir, "Output directory (default $ASRLAB_RUNDIR or ./run)");
  };

  std::function<void()> action;

  // synth-corpus
  std::string synth_out;
  auto* synth = app.add_subcommand("synth-corpus", "Write the synthetic toy corpus (wavs and manifests)");
  synth->add_option("--out", synth_out, "Corpus directory (default <run>/corpus)");
  add_common(synth);
  synth->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto dir = or_default(synth_out, ctx.run / "corpus");
      const auto c = data::synth_corpus(ctx.config.synth(), dir);
      out << "corpus: " << dir.string() << "\n"
          << "verified " << c.verified.size() << ", weak " << c.weak.size() << ", dev " << c.dev.size() << ", test "
          << c.test.size() << '\n';
    };
  });

  // train-tokenizer
  std::vector<std::string> tok_manifests;
  std::string tok_out;
  auto* tok = app.add_subcommand("train-tokenizer", "Train the 128-piece subword vocabulary");
  tok->add_option("--manifest", tok_manifests, "Manifest(s) whose transcripts form the corpus")->required();
  tok->add_option("--out", tok_out, "Vocabulary file (default <run>/vocab.txt)");
  add_common(tok);
  tok->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      std::vector<std::string> texts;
      for (const auto& e : read_all(tok_manifests)) texts.push_back(e.text);
      const auto vocab = train_tokenizer(texts, kNumPieces, ctx.config.normalization());
      const auto path = or_default(tok_out, ctx.run / "vocab.txt");
      save_vocabulary(path, vocab);
      out << "vocabulary: " << vocab.size() << " pieces, hash " << std::hex << vocab.hash() << std::dec << ", "
          << path.string() << '\n';
    };
  });

  // compute-cmvn
  std::vector<std::string> cmvn_manifests;
  std::string cmvn_out;
  auto* cmvn = app.add_subcommand("compute-cmvn", "Accumulate feature mean/variance statistics");
  cmvn->add_option("--manifest", cmvn_manifests, "Manifest(s) to accumulate over")->required();
  cmvn->add_option("--out", cmvn_out, "Statistics file (default <run>/cmvn.txt)");
  add_common(cmvn);
  cmvn->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      audio::CmvnAccumulator acc;
      for (const auto& e : read_all(cmvn_manifests)) acc.add(audio::log_mel(audio::load_wav(e.audio_path())));
      if (acc.count() == 0) throw ConfigError("compute-cmvn: no frames in the given manifests");
      const auto path = or_default(cmvn_out, ctx.run / "cmvn.txt");
      audio::save_cmvn(path, acc.finish());
      out << "cmvn: " << acc.count() << " frames, " << path.string() << '\n';
    };
  });

  // pretrain
  std::string pre_train, pre_dev, pre_vocab, pre_cmvn, pre_resume, pre_out;
  auto* pre = app.add_subcommand("pretrain", "Stage 1: train from scratch on weakly labelled data");
  pre->add_option("--train", pre_train, "Training manifest")->required();
  pre->add_option("--dev", pre_dev, "Dev manifest for periodic greedy WER");
  pre->add_option("--vocab", pre_vocab, "Vocabulary (default <run>/vocab.txt)");
  pre->add_option("--cmvn", pre_cmvn, "CMVN statistics (default <run>/cmvn.txt)");
  pre->add_option("--resume", pre_resume, "Continue from a pretrain checkpoint");
  pre->add_option("--out", pre_out, "Final checkpoint (default <run>/checkpoints/pretrain.ckpt)");
  add_common(pre);
  pre->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto vocab = load_vocabulary(or_default(pre_vocab, ctx.run / "vocab.txt"));
      auto run = ctx.config.train_run(train::Stage::kPretrain);
      run.log_path = ctx.logs() / "pretrain.log";
      run.checkpoint_dir = ctx.checkpoints() / "pretrain";
      const auto train_set = data::read_manifest(pre_train);
      const auto dev_set = pre_dev.empty() ? std::vector<data::ManifestEntry>{} : data::read_manifest(pre_dev);
      train::Checkpoint start;
      if (pre_resume.empty()) {
        start = train::fresh_checkpoint(run, vocab, audio::load_cmvn(or_default(pre_cmvn, ctx.run / "cmvn.txt")));
      } else {
        start = train::load_checkpoint(pre_resume);
        if (start.stage() != train::Stage::kPretrain) throw ConfigError("--resume: not a pretrain checkpoint");
      }
      const auto result = train::run_stage(run, std::move(start), vocab, train_set, dev_set);
      const auto path = or_default(pre_out, ctx.checkpoints() / "pretrain.ckpt");
      train::save_checkpoint(result.checkpoint, path);
      print_stage_summary(out, result, path);
    };
  });

  // filter
  std::string filt_in, filt_policy = "default", filt_model, filt_vocab, filt_out;
  auto* filt = app.add_subcommand("filter", "Select weak-label entries (source, duration, charset, model agreement)");
  filt->add_option("--in", filt_in, "Input manifest")->required();
  filt->add_option("--policy", filt_policy, "default or none")->capture_default_str();
  filt->add_option("--model", filt_model, "Checkpoint for the audio and agreement checks");
  filt->add_option("--vocab", filt_vocab, "Vocabulary (default <run>/vocab.txt)");
  filt->add_option("--out", filt_out, "Kept entries (default <run>/filtered.jsonl)");
  add_common(filt);
  filt->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      auto policy = ctx.config.filter_policy(filt_policy);
      const auto entries = data::read_manifest(filt_in);
      data::FilterResult result;
      if (filt_model.empty()) {
        result = data::filter_manifest(entries, policy);
      } else {
        const auto ckpt = train::load_checkpoint(filt_model);
        const auto vocab = load_vocabulary(or_default(filt_vocab, ctx.run / "vocab.txt"));
        train::CheckpointRecognizer recognizer(ckpt, vocab);
        policy.require_agreement = true;
        result = data::filter_manifest(entries, policy, &recognizer);
      }
      const auto path = or_default(filt_out, ctx.run / "filtered.jsonl");
      data::write_manifest(path, result.kept);
      write_text(ctx.reports() / "filter_stats.txt", result.stats.render_text());
      write_text(ctx.reports() / "filter_stats.json", result.stats.render_json());
      out << result.stats.render_text() << "kept: " << path.string() << '\n';
    };
  });

  // finetune
  std::string ft_init, ft_train, ft_weak, ft_dev, ft_vocab, ft_resume, ft_out;
  auto* ft = app.add_subcommand("finetune", "Stage 2: continue from the pretrain checkpoint at one tenth the peak LR");
  ft->add_option("--init", ft_init, "Pretrain checkpoint")->required();
  ft->add_option("--train", ft_train, "Verified-label manifest (speed-augmented)")->required();
  ft->add_option("--weak", ft_weak, "Filtered weak-label manifest mixed in");
  ft->add_option("--dev", ft_dev, "Dev manifest for periodic greedy WER");
  ft->add_option("--vocab", ft_vocab, "Vocabulary (default <run>/vocab.txt)");
  ft->add_option("--resume", ft_resume, "Continue from a finetune checkpoint");
  ft->add_option("--out", ft_out, "Final checkpoint (default <run>/checkpoints/finetune.ckpt)");
  add_common(ft);
  ft->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto vocab = load_vocabulary(or_default(ft_vocab, ctx.run / "vocab.txt"));
      const auto pretrained = train::load_checkpoint(ft_init);
      auto run = ctx.config.train_run(train::Stage::kFinetune);
      run.model = pretrained.model;
      run.log_path = ctx.logs() / "finetune.log";
      run.checkpoint_dir = ctx.checkpoints() / "finetune";
      train::Checkpoint start;
      if (ft_resume.empty()) {
        start = train::finetune_handoff(pretrained, vocab, run.schedule.warmup_steps);
      } else {
        start = train::load_checkpoint(ft_resume);
        if (start.stage() != train::Stage::kFinetune) throw ConfigError("--resume: not a finetune checkpoint");
      }
      const auto verified = data::expand_augmented(data::read_manifest(ft_train), run.augment);
      const auto weak = ft_weak.empty() ? std::vector<data::ManifestEntry>{} : data::read_manifest(ft_weak);
      const auto mixture =
          data::finetune_mixture(verified, weak, ctx.config.get_double("finetune.weak_ratio"), run.seed);
      const auto dev_set = ft_dev.empty() ? std::vector<data::ManifestEntry>{} : data::read_manifest(ft_dev);
      out << "fine-tune set: " << mixture.size() << " entries (" << verified.size() << " verified incl. speed copies, "
          << mixture.size() - verified.size() << " weak)\n";
      const auto result = train::run_stage(run, std::move(start), vocab, mixture, dev_set);
      const auto path = or_default(ft_out, ctx.checkpoints() / "finetune.ckpt");
      train::save_checkpoint(result.checkpoint, path);
      print_stage_summary(out, result, path);
    };
  });

  // decode
  std::string dec_model, dec_manifest, dec_vocab, dec_out;
  std::optional<std::size_t> dec_beam;
  auto* dec = app.add_subcommand("decode", "Transcribe a manifest (greedy, or prefix beam with --beam)");
  dec->add_option("--model", dec_model, "Checkpoint")->required();
  dec->add_option("--manifest", dec_manifest, "Manifest to transcribe")->required();
  dec->add_option("--vocab", dec_vocab, "Vocabulary (default <run>/vocab.txt)");
  dec->add_option("--beam", dec_beam, "Beam width; 0 for greedy");
  dec->add_option("--out", dec_out, "Hypotheses JSONL (default <run>/reports/hyps.jsonl)");
  add_common(dec);
  dec->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto ckpt = train::load_checkpoint(dec_model);
      const auto vocab = load_vocabulary(or_default(dec_vocab, ctx.run / "vocab.txt"));
      const auto entries = data::read_manifest(dec_manifest);
      train::CheckpointRecognizer recognizer(ckpt, vocab, dec_beam.value_or(ctx.config.get_size("decode.beam_width")));
      const auto texts = recognizer.transcribe_all(entries, ctx.config.get_size("decode.batch_size"));
      std::vector<std::pair<std::string, std::string>> hyps;
      for (std::size_t i = 0; i < entries.size(); ++i) hyps.emplace_back(entries[i].id, texts[i]);
      const auto path = or_default(dec_out, ctx.reports() / "hyps.jsonl");
      eval::write_hypotheses(path, hyps);
      out << "decoded " << hyps.size() << " utterances: " << path.string() << '\n';
    };
  });

  // score
  std::string sc_refs, sc_hyps, sc_format = "text";
  auto* sc = app.add_subcommand("score", "Dialect-wise WER/CER report");
  sc->add_option("--refs", sc_refs, "Reference manifest")->required();
  sc->add_option("--hyps", sc_hyps, "Hypotheses JSONL {id, text}")->required();
  sc->add_option("--format", sc_format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
  add_common(sc);
  sc->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto report =
          eval::score_manifest(data::read_manifest(sc_refs), eval::read_hypotheses(sc_hyps), ctx.config.normalization());
      write_text(ctx.reports() / "score.json", eval::render_report_json(report));
      write_text(ctx.reports() / "score.csv", eval::render_report(report, eval::Format::kCsv));
      write_text(ctx.reports() / "score.txt", eval::render_report(report, eval::Format::kText));
      out << eval::render_report(report, sc_format == "csv" ? eval::Format::kCsv : eval::Format::kText);
    };
  });

  // report
  std::string rep_in, rep_format = "text";
  auto* rep = app.add_subcommand("report", "Render a saved score report");
  rep->add_option("--in", rep_in, "Score JSON (default <run>/reports/score.json)");
  rep->add_option("--format", rep_format, "text or csv")->check(CLI::IsMember({"text", "csv"}))->capture_default_str();
  add_common(rep);
  rep->callback([&] {
    action = [&] {
      auto ctx = make_context(common, out);
      const auto path = or_default(rep_in, ctx.reports() / "score.json");
      std::ifstream in(path);
      if (!in) throw MissingInputError("cannot open " + path.string());
      const std::string json((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      out << eval::render_report(eval::parse_report_json(json),
                                 rep_format == "csv" ? eval::Format::kCsv : eval::Format::kText);
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "asrlab: error[usage]: " << e.what() << '\n';
    return kExitUsage;
  }

  auto fail = [&](std::string_view category, const std::exception& e, int code) {
    err << "asrlab: error[" << category << "]: " << e.what() << '\n';
    return code;
  };
  try {
    if (action) action();
    return 0;
  } catch (const MissingInputError& e) {
    return fail("missing-input", e, kExitMissingInput);
  } catch (const ConfigError& e) {
    return fail("config", e, kExitConfig);
  } catch (const FormatError& e) {
    return fail("format", e, 1);
  } catch (const std::exception& e) {
    return fail("runtime", e, 1);
  }
}

}  // namespace asrlab
