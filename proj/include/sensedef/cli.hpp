#ifndef SENSEDEF_CLI_HPP
#define SENSEDEF_CLI_HPP

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sensedef/checkpoint.hpp"
#include "sensedef/disambig.hpp"
#include "sensedef/evalkit.hpp"
#include "sensedef/gradcheck.hpp"
#include "sensedef/trainer.hpp"

namespace sensedef::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
  bool json = false;
  bool no_timestamps = false;
  std::string config;
};

class Logger {
public:
  Logger(std::ostream& err, const bool& no_timestamps) : err_(err), no_timestamps_(no_timestamps) {}

  void operator()(const std::string& msg) const {
    if (!no_timestamps_) {
      const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
      std::tm tm{};
      localtime_r(&now, &tm);
      err_ << '[' << std::put_time(&tm, "%Y-%m-%d %H:%M:%S") << "] ";
    }
    err_ << msg << '\n';
  }

private:
  std::ostream& err_;
  const bool& no_timestamps_;
};

/// JSON config values for options not given on the command line. Keys are
/// long option names without the leading dashes; unknown keys are rejected.
inline void apply_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw DataError(path + ": config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (!opt) throw UsageError("unknown config key '" + key + "' for '" + sub.get_name() + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> vals;
    auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array())
      for (const auto& v : value) vals.push_back(scalar(v));
    else
      vals.push_back(scalar(value));
    for (const auto& v : vals) opt->add_result(v);
    opt->run_callback();
  }
}

namespace detail {

inline std::string fixed(double x, int prec = 6) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(prec) << x;
  return s.str();
}

template <class F>
void with_output(const std::string& path, std::ostream& fallback, F&& f) {
  if (path.empty() || path == "-") {
    f(fallback);
    return;
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  f(out);
}

inline void print_ranked(std::ostream& out, const std::vector<Scored>& ranked, bool json) {
  if (json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : ranked) arr.push_back({{"id", s.id}, {"score", s.score}});
    out << arr.dump() << '\n';
    return;
  }
  for (const auto& s : ranked) out << s.id << '\t' << fixed(s.score) << '\n';
}

inline void print_report(std::ostream& out, const EvalReport& rep, bool json, bool records) {
  if (json) {
    out << rep.to_json(records).dump() << '\n';
    return;
  }
  const bool is_f1 = rep.metric == "wsd_f1";
  out << std::left << std::setw(20) << "metric" << rep.metric << '\n';
  if (is_f1) {
    out << std::setw(20) << "precision" << fixed(rep.extra.at("precision"), 1) << '\n';
    out << std::setw(20) << "recall" << fixed(rep.extra.at("recall"), 1) << '\n';
    out << std::setw(20) << "F1" << fixed(rep.score, 1) << '\n';
  } else {
    out << std::setw(20) << "rho x 100" << fixed(100.0 * rep.score, 1) << '\n';
  }
  out << std::setw(20) << "items" << rep.n_items << '\n';
  out << std::setw(20) << "skipped" << rep.n_skipped << '\n';
  if (records)
    for (const auto& r : rep.records)
      out << r.label << '\t' << fixed(r.gold, 4) << '\t' << (r.skipped ? std::string("-") : fixed(r.predicted, 6))
          << '\t' << r.note << '\n';
}

inline Lexicon load_lexicon_logged(const std::string& path, const Logger& log) {
  auto res = load_lexicon(path);
  for (const auto& w : res.warnings) log("warning: " + w);
  log("lexicon: " + std::to_string(res.lexicon.size()) + " senses, " + std::to_string(res.lexicon.lemma_count()) +
      " lemmas, " + std::to_string(res.lexicon.monosemous_words().size()) + " monosemous");
  return std::move(res.lexicon);
}

inline EmbeddingStore load_vectors_logged(const std::string& path, const Logger& log) {
  auto res = load_word_vectors(path);
  for (const auto& w : res.warnings) log("warning: " + w);
  log("vectors: " + std::to_string(res.store.size()) + " x " + std::to_string(res.store.dim()));
  return std::move(res.store);
}

inline void check_compatible(const TrainingState& st, const EmbeddingStore& store) {
  if (st.params.dims.input != store.dim())
    throw DataError("checkpoint expects " + std::to_string(st.params.dims.input) + "-d word vectors, got " +
                    std::to_string(store.dim()));
}

inline nlohmann::json epoch_json(const EpochLog& e) {
  return {{"phase", e.phase}, {"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"mean_cos", e.mean_cos},
          {"instances", e.instances}};
}

} // namespace detail

/// Parses argv and dispatches to a subcommand. Returns the process exit code:
/// 0 success, 1 usage error, 2 data error.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Word sense embeddings learned from dictionary definitions", "sensedef"};
  app.require_subcommand(1);
  Common common;
  const Logger log(err, common.no_timestamps);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Seed for every random draw")->capture_default_str();
    sub->add_option("--jobs", common.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_flag("--json", common.json, "Machine-readable output");
    sub->add_flag("--no-timestamps", common.no_timestamps, "Omit timestamps from log lines");
    sub->add_option("--config", common.config, "JSON file of option values; flags take precedence");
  };

  // train
  TrainConfig tc;
  std::string lexicon_path, vectors_path, out_path, resume_path, log_path, export_path, phase = "all", cell = "gru";
  auto* train = app.add_subcommand("train", "Train the definition model and sense embeddings");
  train->add_option("--lexicon", lexicon_path, "Sense inventory (JSON lines)")->required();
  train->add_option("--vectors", vectors_path, "Word vectors (text format)")->required();
  train->add_option("--out", out_path, "Checkpoint to write")->required();
  train->add_option("--phase", phase, "1, 2, 3 or all")->check(CLI::IsMember({"1", "2", "3", "all"}))->capture_default_str();
  train->add_option("--cell", cell, "rnn, gru or lstm")->check(CLI::IsMember({"rnn", "gru", "lstm"}))->capture_default_str();
  train->add_option("--hidden", tc.hidden, "Hidden size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--epochs1", tc.epochs_phase1, "Phase 1 epochs")->capture_default_str();
  train->add_option("--epochs2", tc.epochs_phase2, "Phase 2 epochs")->capture_default_str();
  train->add_option("--epochs3", tc.epochs_phase3, "Phase 3 epochs")->capture_default_str();
  train->add_option("--batch", tc.batch_size, "Mini-batch size")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--delta", tc.delta, "Gloss-word initialization threshold")->check(CLI::Range(-1.0, 1.0))->capture_default_str();
  train->add_option("--rate", tc.adadelta.rate, "Adadelta rate multiplier")->capture_default_str();
  train->add_option("--rho", tc.adadelta.rho, "Adadelta decay")->capture_default_str();
  train->add_option("--eps", tc.adadelta.eps, "Adadelta epsilon")->capture_default_str();
  train->add_option("--max-gloss", tc.max_gloss, "Gloss truncation length")->check(CLI::PositiveNumber)->capture_default_str();
  train->add_option("--clip", tc.clip_norm, "Gradient max-norm (0 = off)")->capture_default_str();
  bool no_shuffle = false;
  train->add_flag("--no-shuffle", no_shuffle, "Keep instance order fixed across epochs");
  train->add_option("--resume", resume_path, "Continue from this checkpoint");
  train->add_option("--log", log_path, "Per-epoch JSON lines log");
  train->add_option("--export", export_path, "Also write sense vectors (text format)");
  add_common(train);

  // export-senses
  std::string ckpt_path;
  auto* exp = app.add_subcommand("export-senses", "Write sense vectors in word-vector text format");
  exp->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  exp->add_option("--out", out_path, "Output file (default stdout)");
  add_common(exp);

  // nearest
  std::string sense_id, word;
  std::size_t k = 10;
  auto* nn = app.add_subcommand("nearest", "Nearest senses of a sense, or nearest words of a word");
  nn->add_option("--checkpoint", ckpt_path, "Checkpoint (for --sense)");
  nn->add_option("--vectors", vectors_path, "Word vectors (for --word)");
  auto* nn_sense = nn->add_option("--sense", sense_id, "Query sense id");
  auto* nn_word = nn->add_option("--word", word, "Query word");
  nn_sense->excludes(nn_word);
  nn->add_option("--k", k, "Neighbors to return")->capture_default_str();
  add_common(nn);

  // match
  std::string text;
  auto* match = app.add_subcommand("match", "Rank senses against a free-text description");
  match->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  match->add_option("--vectors", vectors_path, "Word vectors")->required();
  match->add_option("--text", text, "Description")->required();
  match->add_option("--k", k, "Senses to return")->capture_default_str();
  add_common(match);

  // disambiguate
  std::string input_path;
  auto* dis = app.add_subcommand("disambiguate", "Assign senses to target tokens (JSON lines in and out)");
  dis->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  dis->add_option("--lexicon", lexicon_path, "Sense inventory")->required();
  dis->add_option("--vectors", vectors_path, "Word vectors")->required();
  dis->add_option("--input", input_path, "Records {tokens, targets}")->required();
  dis->add_option("--output", out_path, "Output file (default stdout)");
  add_common(dis);

  // eval-wordsim
  std::string data_path, baseline_path;
  bool records = false;
  auto* ews = app.add_subcommand("eval-wordsim", "Spearman rho on a context-free similarity set");
  ews->add_option("--data", data_path, "CSV word1,word2,score")->required();
  ews->add_option("--checkpoint", ckpt_path, "Checkpoint");
  ews->add_option("--lexicon", lexicon_path, "Sense inventory");
  ews->add_option("--baseline-vectors", baseline_path, "Score plain word vectors instead of senses");
  ews->add_flag("--records", records, "Include per-pair records");
  add_common(ews);

  // eval-scws
  auto* escws = app.add_subcommand("eval-scws", "Spearman rho on contextual similarity (S2C-disambiguated)");
  escws->add_option("--data", data_path, "SCWS ratings file")->required();
  escws->add_option("--checkpoint", ckpt_path, "Checkpoint")->required();
  escws->add_option("--lexicon", lexicon_path, "Sense inventory")->required();
  escws->add_option("--vectors", vectors_path, "Word vectors")->required();
  escws->add_flag("--records", records, "Include per-pair records");
  add_common(escws);

  // eval-wsd
  std::string key_path, clusters_path, sense_map_path, predictions_path;
  bool random_baseline = false;
  auto* ewsd = app.add_subcommand("eval-wsd", "Coarse-grained all-words WSD scoring");
  ewsd->add_option("--key", key_path, "Gold key: instance_id sense_id")->required();
  ewsd->add_option("--clusters", clusters_path, "Sense clusters: sense_id cluster_id");
  ewsd->add_option("--sense-map", sense_map_path, "Sense id remapping applied to predictions");
  auto* ewsd_pred = ewsd->add_option("--predictions", predictions_path, "Predictions: instance_id sense_id");
  auto* ewsd_in = ewsd->add_option("--input", input_path, "Sentences to disambiguate (JSON lines)");
  ewsd_pred->excludes(ewsd_in);
  ewsd->add_option("--checkpoint", ckpt_path, "Checkpoint (S2C predictions)");
  ewsd->add_option("--lexicon", lexicon_path, "Sense inventory");
  ewsd->add_option("--vectors", vectors_path, "Word vectors");
  ewsd->add_flag("--random-baseline", random_baseline, "Seeded uniform sense choice instead of S2C");
  ewsd->add_flag("--records", records, "Include per-instance records");
  add_common(ewsd);

  // gradcheck
  std::string gc_cell = "all";
  double tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Compare backpropagation with central differences");
  gc->add_option("--cell", gc_cell, "rnn, gru, lstm or all")->check(CLI::IsMember({"rnn", "gru", "lstm", "all"}))->capture_default_str();
  gc->add_option("--tol", tol, "Maximum relative error")->capture_default_str();
  add_common(gc);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (auto subs = app.get_subcommands(); !subs.empty())
      err << subs.front()->help();
    else
      err << app.help();
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();

  try {
    if (!common.config.empty()) apply_config(*sub, common.config);

    if (sub == train) {
      tc.cell = *parse_cell(cell);
      tc.shuffle = !no_shuffle;
      tc.seed = common.seed;
      tc.jobs = common.jobs;
      tc.validate();
      const Lexicon lex = detail::load_lexicon_logged(lexicon_path, log);
      const EmbeddingStore store = detail::load_vectors_logged(vectors_path, log);
      TrainingState st;
      nlohmann::json summary = {{"command", "train"}, {"phase", phase}};
      if (!resume_path.empty()) {
        st = load_checkpoint(resume_path);
        detail::check_compatible(st, store);
        for (const auto& e : lex.entries())
          if (!st.senses.row_of(e.sense_id))
            throw DataError("checkpoint has no sense '" + e.sense_id + "' from the lexicon");
        tc.cell = st.params.kind;
        tc.hidden = st.params.dims.hidden;
        log("resumed from " + resume_path);
      } else {
        SenseInit init;
        st = make_initial_state(lex, store, tc, &init);
        for (const auto& w : init.warnings) log("warning: " + w);
        summary["init"] = {{"own-word", init.own_word}, {"mono-synonym", init.mono_synonym},
                           {"gloss-word", init.gloss_word}, {"fallback", init.fallback}, {"none", init.none}};
        log("init: own-word " + std::to_string(init.own_word) + ", mono-synonym " + std::to_string(init.mono_synonym) +
            ", gloss-word " + std::to_string(init.gloss_word) + ", fallback " + std::to_string(init.fallback) +
            ", none " + std::to_string(init.none));
      }
      std::unique_ptr<std::ofstream> log_file;
      if (!log_path.empty()) {
        log_file = std::make_unique<std::ofstream>(log_path);
        if (!*log_file) throw DataError("cannot write log '" + log_path + "'");
      }
      TrainHooks hooks;
      hooks.on_epoch = [&](const EpochLog& e) {
        const auto j = detail::epoch_json(e);
        if (log_file) *log_file << j.dump() << '\n';
        log("phase " + std::to_string(e.phase) + " epoch " + std::to_string(e.epoch) + " mean_cos " +
            detail::fixed(e.mean_cos));
      };
      summary["phases"] = nlohmann::json::array();
      auto record = [&](int ph, const PhaseResult& r) {
        summary["phases"].push_back({{"phase", ph},
                                     {"instances", r.instances},
                                     {"dropped", r.dropped},
                                     {"final_mean_cos", r.epochs.empty() ? 0.0 : r.epochs.back().mean_cos}});
      };
      if (phase == "1" || phase == "all") record(1, train_phase1(st, lex, store, tc, hooks));
      if (phase == "2" || phase == "all") record(2, train_phase2(st, lex, store, tc, hooks));
      if (phase == "3" || phase == "all") record(3, train_phase3(st, lex, store, tc, hooks));
      save_checkpoint(st, out_path);
      if (!export_path.empty()) detail::with_output(export_path, out, [&](std::ostream& o) { write_vectors(o, st.senses); });
      summary["checkpoint"] = out_path;
      if (common.json) {
        out << summary.dump() << '\n';
      } else {
        for (const auto& p : summary["phases"])
          out << "phase " << p["phase"].get<int>() << ": " << p["instances"].get<std::size_t>()
              << " instances, final mean cos " << detail::fixed(p["final_mean_cos"].get<double>()) << '\n';
        out << "checkpoint written to " << out_path << '\n';
      }
      return kExitOk;
    }

    if (sub == exp) {
      const auto st = load_checkpoint(ckpt_path);
      detail::with_output(out_path, out, [&](std::ostream& o) { write_vectors(o, st.senses); });
      return kExitOk;
    }

    if (sub == nn) {
      if (!sense_id.empty()) {
        if (ckpt_path.empty()) throw UsageError("--sense needs --checkpoint");
        const auto st = load_checkpoint(ckpt_path);
        const auto q = st.senses.find(sense_id);
        if (!q) throw DataError("unknown sense '" + sense_id + "'");
        const Vector query(q->begin(), q->end());
        detail::print_ranked(out, nearest(st.senses, query, k, {sense_id}), common.json);
      } else if (!word.empty()) {
        if (vectors_path.empty()) throw UsageError("--word needs --vectors");
        const auto store = detail::load_vectors_logged(vectors_path, log);
        const auto q = store.find(normalize_lemma(word));
        if (!q) throw DataError("word '" + word + "' has no vector");
        const Vector query(q->begin(), q->end());
        detail::print_ranked(out, nearest(store, query, k, {normalize_lemma(word)}), common.json);
      } else {
        throw UsageError("nearest needs --sense or --word");
      }
      return kExitOk;
    }

    if (sub == match) {
      const auto st = load_checkpoint(ckpt_path);
      const auto store = detail::load_vectors_logged(vectors_path, log);
      detail::check_compatible(st, store);
      detail::print_ranked(out, match_description(st.params, store, st.senses, text, k), common.json);
      return kExitOk;
    }

    if (sub == dis) {
      const auto st = load_checkpoint(ckpt_path);
      const Lexicon lex = detail::load_lexicon_logged(lexicon_path, log);
      const auto store = detail::load_vectors_logged(vectors_path, log);
      const auto sentences = load_tagged_sentences(input_path);
      detail::with_output(out_path, out, [&](std::ostream& o) {
        for (const auto& s : sentences) {
          const auto a = s2c(s.context, lex, st.senses, store);
          nlohmann::json assigned = nlohmann::json::object();
          for (const auto& [pos, id] : a.senses) assigned[std::to_string(pos)] = id;
          o << nlohmann::json{{"assignments", assigned}}.dump() << '\n';
        }
      });
      return kExitOk;
    }

    if (sub == ews) {
      const auto data = load_wordsim(data_path);
      EvalReport rep;
      if (!baseline_path.empty()) {
        const auto store = detail::load_vectors_logged(baseline_path, log);
        rep = eval_wordsim_baseline(data, store);
      } else {
        if (ckpt_path.empty() || lexicon_path.empty())
          throw UsageError("eval-wordsim needs --checkpoint and --lexicon, or --baseline-vectors");
        const auto st = load_checkpoint(ckpt_path);
        const Lexicon lex = detail::load_lexicon_logged(lexicon_path, log);
        rep = eval_wordsim(data, lex, st.senses);
      }
      detail::print_report(out, rep, common.json, records);
      return kExitOk;
    }

    if (sub == escws) {
      const auto data = load_scws(data_path);
      const auto st = load_checkpoint(ckpt_path);
      const Lexicon lex = detail::load_lexicon_logged(lexicon_path, log);
      const auto store = detail::load_vectors_logged(vectors_path, log);
      detail::print_report(out, eval_scws(data, lex, st.senses, store), common.json, records);
      return kExitOk;
    }

    if (sub == ewsd) {
      const WsdKey key = load_wsd_key(key_path, clusters_path);
      std::optional<SenseMap> smap;
      if (!sense_map_path.empty()) smap = load_sense_map(sense_map_path);
      std::map<std::string, SenseId> predictions;
      if (!predictions_path.empty()) {
        WsdKey pk;
        std::ifstream in(predictions_path);
        if (!in) throw DataError("cannot open '" + predictions_path + "'");
        parse_wsd_key(in, pk, predictions_path);
        for (const auto& [id, senses] : pk.gold) predictions[id] = senses.front();
      } else {
        if (input_path.empty() || lexicon_path.empty()) throw UsageError("eval-wsd needs --predictions, or --input with --lexicon");
        const Lexicon lex = detail::load_lexicon_logged(lexicon_path, log);
        const auto sentences = load_tagged_sentences(input_path);
        if (random_baseline) {
          predictions = random_wsd(sentences, lex, common.seed);
        } else {
          if (ckpt_path.empty() || vectors_path.empty()) throw UsageError("S2C predictions need --checkpoint and --vectors");
          const auto st = load_checkpoint(ckpt_path);
          const auto store = detail::load_vectors_logged(vectors_path, log);
          predictions = predict_wsd(sentences, lex, st.senses, store);
        }
      }
      const auto rep = score_wsd(predictions, key, smap ? &*smap : nullptr);
      for (const auto& r : rep.records)
        if (r.note == "unknown instance") log("warning: prediction for unknown instance '" + r.label + "' ignored");
      detail::print_report(out, rep, common.json, records);
      return kExitOk;
    }

    if (sub == gc) {
      std::vector<CellKind> kinds;
      if (gc_cell == "all")
        kinds = {CellKind::vanilla, CellKind::gru, CellKind::lstm};
      else
        kinds = {*parse_cell(gc_cell)};
      bool ok = true;
      nlohmann::json arr = nlohmann::json::array();
      for (auto kind : kinds) {
        const auto rep = grad_check(kind, common.seed);
        ok = ok && rep.passed(tol);
        arr.push_back({{"cell", cell_name(kind)}, {"max_rel_error", rep.max_rel_error}, {"worst", rep.worst},
                       {"checked", rep.checked}, {"passed", rep.passed(tol)}});
        if (!common.json)
          out << std::left << std::setw(6) << cell_name(kind) << " max rel error " << std::scientific
              << std::setprecision(3) << rep.max_rel_error << std::defaultfloat << "  " << (rep.passed(tol) ? "PASS" : "FAIL")
              << "  (" << rep.checked << " coordinates, worst " << rep.worst << ")\n";
      }
      if (common.json) out << arr.dump() << '\n';
      return ok ? kExitOk : kExitData;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n' << sub->help();
    return kExitUsage;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

} // namespace sensedef::cli

#endif // SENSEDEF_CLI_HPP
