#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sensedef/checkpoint.hpp"
#include "sensedef/trainer.hpp"
#include "toy_fixture.hpp"

using namespace sensedef;

namespace {

SenseEntry entry(const std::string& id, const std::string& lemma, std::vector<Token> syns, const std::string& gloss,
                 PartOfSpeech pos = PartOfSpeech::noun) {
  return {id, lemma, pos, std::move(syns), tokenize(gloss)};
}

// Vectors chosen so that cos(land, bank) = 0.6, cos(river, bank) = 0.3,
// cos(coil, spring) = 0.15 and cos(metal, spring) = cos(season, spring) = 0.
struct InitFixture {
  Lexicon lex;
  EmbeddingStore store{3};

  InitFixture() {
    lex = Lexicon({
        entry("river%1", "river", {}, "a large natural stream"),
        entry("depository%1", "depository", {}, "a place where metal is stored"),
        entry("vault%1", "vault", {}, "a secure metal room"),
        entry("bank%1", "bank", {"bank_holding", "spring", "depository", "vault"}, "a financial institution"),
        entry("bank%2", "bank", {}, "sloping land beside a river"),
        entry("spring%1", "spring", {}, "a metal coil"),
        entry("spring%2", "spring", {}, "the season"),
        entry("zzz%1", "zzz", {}, "sloping land"),
        entry("zzz%2", "zzz", {"spring"}, "land"),
    });
    store.add("river", Vector{0.3, std::sqrt(1 - 0.09), 0});
    store.add("depository", Vector{0.2, 0.2, 0.9});
    store.add("vault", Vector{0.5, 0.5, 0.5});
    store.add("bank", Vector{1, 0, 0});
    store.add("land", Vector{0.6, 0.8, 0});
    store.add("sloping", Vector{0, 0, 1});
    store.add("spring", Vector{0, 0, 2});
    store.add("coil", Vector{std::sqrt(1 - 0.0225), 0, 0.15});
    store.add("metal", Vector{0, 1, 0});
    store.add("season", Vector{-1, 0, 0});
  }
};

void expect_row(const SenseTable& t, const SenseId& id, ConstVec want, Provenance tag) {
  const auto r = t.row_of(id);
  ASSERT_TRUE(r) << id;
  const auto got = t.row(*r);
  EXPECT_EQ(std::vector<double>(got.begin(), got.end()), std::vector<double>(want.begin(), want.end())) << id;
  EXPECT_EQ(t.tag(*r), tag) << id;
}

struct ToyRun {
  TrainingState initial;
  TrainingState after1, after2, after3;
  PhaseResult p1, p2, p3;
  std::vector<double> store_before;
};

const ToyRun& toy_run() {
  static const ToyRun run = [] {
    ToyRun r;
    const auto& lex = toy::lexicon();
    const auto& store = toy::vectors();
    const auto cfg = toy::config();
    r.store_before = store.data();
    TrainingState st = make_initial_state(lex, store, cfg);
    r.initial = st;
    r.p1 = train_phase1(st, lex, store, cfg);
    r.after1 = st;
    r.p2 = train_phase2(st, lex, store, cfg);
    r.after2 = st;
    r.p3 = train_phase3(st, lex, store, cfg);
    r.after3 = st;
    return r;
  }();
  return run;
}

} // namespace

TEST(InitSenses, EveryProvenanceBranch) {
  InitFixture f;
  const auto init = init_sense_embeddings(f.lex, f.store, 0.2);
  const auto& t = init.table;
  expect_row(t, "river%1", *f.store.find("river"), Provenance::own_word);
  expect_row(t, "depository%1", *f.store.find("depository"), Provenance::own_word);
  // first listed synonym that is a monosemous lemma with a vector
  expect_row(t, "bank%1", *f.store.find("depository"), Provenance::mono_synonym);
  // land (0.6) beats river (0.3) and sloping (0.0), and 0.6 > 0.2
  expect_row(t, "bank%2", *f.store.find("land"), Provenance::gloss_word);
  // best gloss cosine 0.15 < 0.2
  expect_row(t, "spring%1", *f.store.find("spring"), Provenance::fallback);
  expect_row(t, "spring%2", *f.store.find("spring"), Provenance::fallback);
  expect_row(t, "zzz%1", Vector(3, 0.0), Provenance::none);
  expect_row(t, "zzz%2", Vector(3, 0.0), Provenance::none);
  EXPECT_EQ(init.own_word, 3u);
  EXPECT_EQ(init.mono_synonym, 1u);
  EXPECT_EQ(init.gloss_word, 1u);
  EXPECT_EQ(init.fallback, 2u);
  EXPECT_EQ(init.none, 2u);
  EXPECT_EQ(init.warnings.size(), 2u);
}

TEST(InitSenses, ThresholdIsStrict) {
  InitFixture f;
  const auto high = init_sense_embeddings(f.lex, f.store, 0.6);
  expect_row(high.table, "bank%2", *f.store.find("bank"), Provenance::fallback);
  const auto low = init_sense_embeddings(f.lex, f.store, 0.1);
  expect_row(low.table, "spring%1", *f.store.find("coil"), Provenance::gloss_word);
}

TEST(BuildInstances, ScopeOovAndSenseMode) {
  InitFixture f;
  const auto senses = init_sense_embeddings(f.lex, f.store, 0.2).table;
  const auto mono = build_instances(f.lex, f.store, senses, Scope::monosemous, InputMode::word);
  ASSERT_EQ(mono.instances.size(), 2u);
  // "a large natural stream" has no vectors at all
  EXPECT_EQ(mono.dropped_empty, 1u);
  EXPECT_EQ(mono.instances[0].tokens, (std::vector<Token>{"metal"}));
  const auto all = build_instances(f.lex, f.store, senses, Scope::all, InputMode::word);
  EXPECT_EQ(all.dropped_no_target, 2u);
  const auto* bank2 = &all.instances[0];
  for (const auto& i : all.instances)
    if (i.sense_id == "bank%2") bank2 = &i;
  ASSERT_EQ(bank2->sense_id, "bank%2");
  // sloping land beside a river: "beside" and "a" are OOV
  EXPECT_EQ(bank2->tokens, (std::vector<Token>{"sloping", "land", "river"}));

  AssignmentMap asg{{"bank%2", {{4, "river%1"}}}};
  const auto sense_mode = build_instances(f.lex, f.store, senses, Scope::all, InputMode::sense, &asg);
  for (const auto& i : sense_mode.instances) {
    if (i.sense_id != "bank%2") continue;
    ASSERT_EQ(i.inputs.size(), 3u);
    EXPECT_EQ(i.inputs[0].source, InputRef::Source::word);
    EXPECT_EQ(i.inputs[1].source, InputRef::Source::word);
    EXPECT_EQ(i.inputs[2], (InputRef{InputRef::Source::sense, *senses.row_of("river%1")}));
  }
}

TEST(BuildInstances, GlossTruncation) {
  InitFixture f;
  const auto senses = init_sense_embeddings(f.lex, f.store, 0.2).table;
  const auto set = build_instances(f.lex, f.store, senses, Scope::all, InputMode::word, nullptr, 2);
  for (const auto& i : set.instances)
    if (i.sense_id == "bank%2") EXPECT_EQ(i.tokens, (std::vector<Token>{"sloping", "land"}));
}

TEST(BuildInstances, EveryResolvableSenseExactlyOnce) {
  const auto& lex = toy::lexicon();
  const auto st = make_initial_state(lex, toy::vectors(), toy::config());
  const auto set = build_instances(lex, toy::vectors(), st.senses, Scope::all, InputMode::word);
  std::map<SenseId, int> seen;
  for (const auto& i : set.instances) ++seen[i.sense_id];
  EXPECT_EQ(seen.size() + set.dropped_empty + set.dropped_no_target, lex.size());
  for (const auto& [id, n] : seen) EXPECT_EQ(n, 1) << id;
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.delta = 1.5;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
}

TEST(Phase1, NoMonosemousWordsIsError) {
  EmbeddingStore store(2);
  store.add("x", Vector{1, 0});
  const Lexicon lex({entry("a%1", "a", {}, "x"), entry("a%2", "a", {}, "x")});
  auto cfg = toy::config();
  auto st = make_initial_state(lex, store, cfg);
  EXPECT_THROW(train_phase1(st, lex, store, cfg), DataError);
}

TEST(Phase1, SingleInstanceLossStrictlyDecreases) {
  EmbeddingStore store(3);
  store.add("w", Vector{1, 0.5, -0.2});
  store.add("v", Vector{-0.3, 1, 0.4});
  store.add("solo", Vector{0.2, -0.7, 1});
  const Lexicon lex({entry("solo%1", "solo", {}, "w v w")});
  auto cfg = toy::config();
  cfg.hidden = 8;
  cfg.epochs_phase1 = 10;
  auto st = make_initial_state(lex, store, cfg);
  const auto res = train_phase1(st, lex, store, cfg);
  ASSERT_EQ(res.epochs.size(), 10u);
  for (std::size_t i = 1; i < res.epochs.size(); ++i) EXPECT_LT(res.epochs[i].mean_loss, res.epochs[i - 1].mean_loss);
}

TEST(ToyTraining, Phase1OverfitsMonosemousSet) {
  const auto& r = toy_run();
  EXPECT_GE(r.p1.epochs.back().mean_cos, 0.95);
  EXPECT_GE(r.p1.instances, 30u);
  for (std::size_t e = 5; e < r.p1.epochs.size(); ++e)
    EXPECT_LE(r.p1.epochs[e].mean_loss, r.p1.epochs[e - 1].mean_loss + 1e-3) << "epoch " << e + 1;
}

TEST(ToyTraining, Phase1LeavesSensesUntouched) {
  const auto& r = toy_run();
  EXPECT_EQ(r.after1.senses, r.initial.senses);
  EXPECT_EQ(r.after1.sense_opt, r.initial.sense_opt);
  EXPECT_NE(r.after1.params, r.initial.params);
}

TEST(ToyTraining, WordVectorsNeverChange) { EXPECT_EQ(toy::vectors().data(), toy_run().store_before); }

TEST(ToyTraining, Phase2FitsAllSensesAndMovesTargets) {
  const auto& r = toy_run();
  EXPECT_GE(r.p2.epochs.back().mean_cos, 0.9);
  EXPECT_NE(r.after2.senses, r.after1.senses);
  for (std::size_t e = 5; e < r.p2.epochs.size(); ++e)
    EXPECT_LE(r.p2.epochs[e].mean_loss, r.p2.epochs[e - 1].mean_loss + 1e-3) << "epoch " << e + 1;
}

TEST(ToyTraining, Phase3StaysCloseToPhase2) {
  const auto& r = toy_run();
  EXPECT_GE(r.p3.epochs.back().mean_cos, r.p2.epochs.back().mean_cos - 0.05);
  EXPECT_EQ(r.p3.epochs.size(), 10u);
}

TEST(ToyTraining, ZeroSensesStayZero) {
  const auto& r = toy_run();
  for (std::size_t i = 0; i < r.after3.senses.size(); ++i)
    if (r.after3.senses.tag(i) == Provenance::none) EXPECT_TRUE(is_zero(r.after3.senses.row(i)));
}

TEST(Phase3, ReassignmentUsesCurrentSenseVectors) {
  const auto& lex = toy::lexicon();
  const auto& store = toy::vectors();
  auto cfg = toy::config();
  cfg.epochs_phase3 = 4;
  TrainingState st = toy_run().after2;
  SenseTable snapshot = st.senses;
  std::size_t calls = 0;
  bool changed = false;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog&) { snapshot = st.senses; };
  hooks.on_reassign = [&](std::size_t epoch, const AssignmentMap& a) {
    ++calls;
    EXPECT_EQ(epoch, calls);
    EXPECT_EQ(st.senses, snapshot);
    EXPECT_EQ(a, assign_gloss_senses(lex, store, snapshot, cfg.max_gloss));
    if (epoch > 1 && !(snapshot == toy_run().after2.senses)) changed = true;
    // monosemous content tokens always get their only sense
    for (const auto& [gloss_id, m] : a)
      for (const auto& [pos, id] : m) {
        const auto tok = truncated_gloss(*lex.find(gloss_id), cfg.max_gloss)[pos];
        if (lex.is_monosemous(tok)) EXPECT_EQ(id, lex.senses_of(tok)[0]->sense_id);
      }
  };
  train_phase3(st, lex, store, cfg, hooks);
  EXPECT_EQ(calls, 4u);
  EXPECT_TRUE(changed);
}

TEST(Phase3, InputSensesReceiveUpdates) {
  const auto& r = toy_run();
  const auto asg = assign_gloss_senses(toy::lexicon(), toy::vectors(), r.after2.senses, 64);
  ASSERT_FALSE(asg.empty());
  EXPECT_NE(r.after3.senses, r.after2.senses);
}

TEST(Training, ReproducibleWithSameSeed) {
  const auto& lex = toy::lexicon();
  const auto& store = toy::vectors();
  auto cfg = toy::config();
  cfg.epochs_phase1 = 5;
  cfg.epochs_phase2 = 3;
  cfg.epochs_phase3 = 2;
  cfg.batch_size = 4;
  for (bool shuffle : {false, true}) {
    cfg.shuffle = shuffle;
    std::string bytes[2];
    for (auto& b : bytes) {
      auto st = make_initial_state(lex, store, cfg);
      train_phase1(st, lex, store, cfg);
      train_phase2(st, lex, store, cfg);
      train_phase3(st, lex, store, cfg);
      b = toy::checkpoint_bytes(st);
    }
    EXPECT_EQ(bytes[0], bytes[1]);
  }
}

TEST(Training, ParallelJobsDeterministic) {
  const auto& lex = toy::lexicon();
  const auto& store = toy::vectors();
  auto cfg = toy::config();
  cfg.epochs_phase1 = 3;
  cfg.batch_size = 16;
  cfg.jobs = 3;
  std::string bytes[2];
  for (auto& b : bytes) {
    auto st = make_initial_state(lex, store, cfg);
    train_phase1(st, lex, store, cfg);
    b = toy::checkpoint_bytes(st);
  }
  EXPECT_EQ(bytes[0], bytes[1]);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto& st = toy_run().after3;
  const auto first = toy::checkpoint_bytes(st);
  std::istringstream in(first);
  const auto loaded = read_checkpoint(in);
  EXPECT_EQ(toy::checkpoint_bytes(loaded), first);
  EXPECT_EQ(loaded.params.kind, st.params.kind);
  EXPECT_EQ(loaded.params.dims, st.params.dims);
  EXPECT_EQ(loaded.senses.ids(), st.senses.ids());
  EXPECT_EQ(loaded.senses.tags(), st.senses.tags());
  EXPECT_EQ(loaded.param_opt.config, st.param_opt.config);
  for (std::size_t i = 0; i < st.senses.data().size(); ++i)
    EXPECT_EQ(loaded.senses.data()[i], static_cast<double>(static_cast<float>(st.senses.data()[i])));
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = toy::scratch_dir("ckpt");
  const auto path = (dir / "a.ckpt").string();
  save_checkpoint(toy_run().after1, path);
  const auto loaded = load_checkpoint(path);
  EXPECT_EQ(toy::checkpoint_bytes(loaded), toy::read_file(path));
}

TEST(Checkpoint, CorruptMagicRejected) {
  auto bytes = toy::checkpoint_bytes(toy_run().initial);
  bytes[0] = 'X';
  std::istringstream in(bytes);
  EXPECT_THROW(read_checkpoint(in), DataError);
}

TEST(Checkpoint, TruncationRejected) {
  const auto bytes = toy::checkpoint_bytes(toy_run().initial);
  for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{8}, std::size_t{3}}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(read_checkpoint(in), DataError) << cut;
  }
}

TEST(Checkpoint, MissingFile) { EXPECT_THROW(load_checkpoint("/nonexistent/x.ckpt"), DataError); }
