#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "sensedef/cli.hpp"
#include "toy_fixture.hpp"

using namespace sensedef;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> toy_train(const std::string& out, const std::string& extra_phase = "all") {
  return {"train", "--phase", extra_phase, "--cell", "gru", "--lexicon", toy::data_path("toy_lexicon.jsonl"),
          "--vectors", toy::data_path("toy_vectors.txt"), "--out", out, "--hidden", "16", "--epochs1", "6",
          "--epochs2", "3", "--epochs3", "2", "--batch", "4", "--seed", "3", "--no-timestamps"};
}

class CliTest : public ::testing::Test {
protected:
  static void SetUpTestSuite() {
    dir_ = toy::scratch_dir("cli");
    ckpt_ = (dir_ / "toy.ckpt").string();
    const auto r = run(toy_train(ckpt_));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static inline std::filesystem::path dir_;
  static inline std::string ckpt_;
  std::string lex_ = toy::data_path("toy_lexicon.jsonl");
  std::string vec_ = toy::data_path("toy_vectors.txt");
};

} // namespace

TEST(CliUsage, NoSubcommandIsUsageError) {
  const auto r = run({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST(CliUsage, UnknownSubcommandAndFlag) {
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  const auto r = run({"gradcheck", "--bogus"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"train", "--cell", "transformer"}).code, 1);
}

TEST(CliUsage, EverySubcommandHasHelp) {
  EXPECT_EQ(run({"--help"}).code, 0);
  for (const char* sub : {"train", "export-senses", "nearest", "match", "disambiguate", "eval-wordsim", "eval-scws",
                          "eval-wsd", "gradcheck"}) {
    const auto r = run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << sub;
  }
}

TEST(CliUsage, MissingDataFileIsDataError) {
  const auto r = run({"eval-wordsim", "--data", "missing.csv"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("missing.csv"), std::string::npos);
}

TEST(CliUsage, BinaryExitCodes) {
  const std::string bin = SENSEDEF_CLI_PATH;
  auto status = [&](const std::string& args) {
    const int s = std::system((bin + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(s);
  };
  EXPECT_EQ(status("gradcheck --cell rnn"), 0);
  EXPECT_EQ(status("--nope"), 1);
  EXPECT_EQ(status("eval-wordsim --data /nonexistent.csv"), 2);
}

TEST(CliGradcheck, AllCellsPass) {
  const auto r = run({"gradcheck", "--json"});
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_EQ(j.size(), 3u);
  for (const auto& c : j) EXPECT_LT(c.at("max_rel_error").get<double>(), 1e-4);
}

TEST_F(CliTest, TrainWritesLoadableCheckpoint) {
  const auto st = load_checkpoint(ckpt_);
  EXPECT_EQ(st.params.kind, CellKind::gru);
  EXPECT_EQ(st.params.dims.hidden, 16u);
  EXPECT_EQ(st.senses.size(), toy::lexicon().size());
}

TEST_F(CliTest, TrainLogAndJsonSummary) {
  const auto log = (dir_ / "log.jsonl").string();
  auto args = toy_train((dir_ / "b.ckpt").string(), "1");
  args.insert(args.end(), {"--log", log, "--json"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto summary = nlohmann::json::parse(r.out);
  EXPECT_EQ(summary.at("phases").size(), 1u);
  std::istringstream lines(toy::read_file(log));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* k : {"phase", "epoch", "mean_loss", "mean_cos", "instances"}) EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(j.at("epoch").get<int>(), ++n);
  }
  EXPECT_EQ(n, 6);
}

TEST_F(CliTest, SameSeedSameBytes) {
  const auto a = (dir_ / "r1.ckpt").string(), b = (dir_ / "r2.ckpt").string();
  const auto ra = run(toy_train(a)), rb = run(toy_train(b));
  ASSERT_EQ(ra.code, 0);
  ASSERT_EQ(rb.code, 0);
  EXPECT_EQ(toy::read_file(a), toy::read_file(b));
  EXPECT_EQ(toy::read_file(a), toy::read_file(ckpt_));
  auto strip = [](std::string s) { return s.substr(0, s.find("checkpoint written")); };
  EXPECT_EQ(strip(ra.out), strip(rb.out));
  EXPECT_EQ(ra.err, rb.err);
}

TEST_F(CliTest, ResumeContinuesPhases) {
  const auto p1 = (dir_ / "p1.ckpt").string(), p23 = (dir_ / "p23.ckpt").string();
  ASSERT_EQ(run(toy_train(p1, "1")).code, 0);
  auto a2 = toy_train(p23, "2");
  a2.insert(a2.end(), {"--resume", p1});
  ASSERT_EQ(run(a2).code, 0);
  EXPECT_NE(toy::read_file(p1), toy::read_file(p23));
  auto bad = toy_train((dir_ / "x.ckpt").string(), "2");
  bad.insert(bad.end(), {"--resume", (dir_ / "nothing.ckpt").string()});
  EXPECT_EQ(run(bad).code, 2);
}

TEST_F(CliTest, ConfigFilePrecedence) {
  const auto cfg = (dir_ / "cfg.json").string();
  toy::write_file(cfg, R"({"epochs1": 2, "cell": "lstm", "no-shuffle": true, "hidden": 8})");
  const auto out = (dir_ / "cfg.ckpt").string();
  auto args = toy_train(out, "1");
  // drop --hidden 16 and --cell gru so the file supplies them; keep --epochs1 6 to override the file
  args.erase(args.begin() + 11, args.begin() + 13);
  args.erase(args.begin() + 3, args.begin() + 5);
  args.insert(args.end(), {"--config", cfg, "--json"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto st = load_checkpoint(out);
  EXPECT_EQ(st.params.kind, CellKind::lstm);
  EXPECT_EQ(st.params.dims.hidden, 8u);
  EXPECT_NE(r.err.find("phase 1 epoch 6 "), std::string::npos);
  EXPECT_EQ(r.err.find("phase 1 epoch 7 "), std::string::npos);

  toy::write_file(cfg, R"({"epochs1": 2, "learning_rate": 0.5})");
  const auto bad = run({"train", "--config", cfg, "--lexicon", lex_, "--vectors", vec_, "--out", out});
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("learning_rate"), std::string::npos);
  toy::write_file(cfg, "{broken");
  EXPECT_EQ(run({"train", "--config", cfg, "--lexicon", lex_, "--vectors", vec_, "--out", out}).code, 2);
}

TEST_F(CliTest, NearestSenseGivesDescendingLines) {
  const auto r = run({"nearest", "--checkpoint", ckpt_, "--sense", "poly0%1", "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string id;
  double score = 0, prev = 2;
  int n = 0;
  while (in >> id >> score) {
    EXPECT_NE(id, "poly0%1");
    EXPECT_LE(score, prev);
    prev = score;
    ++n;
  }
  EXPECT_EQ(n, 3);
  EXPECT_EQ(run({"nearest", "--checkpoint", ckpt_, "--sense", "nope%1"}).code, 2);
  EXPECT_EQ(run({"nearest", "--checkpoint", ckpt_}).code, 1);
}

TEST_F(CliTest, NearestWord) {
  const auto r = run({"nearest", "--vectors", vec_, "--word", "w01", "--k", "2", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).size(), 2u);
}

TEST_F(CliTest, ExportSensesMatchesCheckpoint) {
  const auto path = (dir_ / "senses.txt").string();
  ASSERT_EQ(run({"export-senses", "--checkpoint", ckpt_, "--out", path}).code, 0);
  const auto store = load_word_vectors(path).store;
  const auto st = load_checkpoint(ckpt_);
  EXPECT_EQ(store.tokens(), st.senses.ids());
  EXPECT_EQ(store.data(), st.senses.data());
}

TEST_F(CliTest, MatchDescription) {
  const auto r = run({"match", "--checkpoint", ckpt_, "--vectors", vec_, "--text", "w01 w02 of w03", "--k", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 4);
  EXPECT_EQ(run({"match", "--checkpoint", ckpt_, "--vectors", vec_, "--text", "qqq"}).code, 2);
}

TEST_F(CliTest, DisambiguateJsonLines) {
  const auto in = (dir_ / "sent.jsonl").string();
  toy::write_file(in, R"({"tokens":["poly0","w01","mono00","zzz"],"targets":[0,2,3]})" "\n");
  const auto r = run({"disambiguate", "--checkpoint", ckpt_, "--lexicon", lex_, "--vectors", vec_, "--input", in});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const auto& a = j.at("assignments");
  EXPECT_EQ(a.at("2"), "mono00%1");
  EXPECT_TRUE(a.at("0") == "poly0%1" || a.at("0") == "poly0%2");
  EXPECT_FALSE(a.contains("3"));
}

TEST_F(CliTest, EvalWordsimSensesAndBaseline) {
  const auto data = (dir_ / "ws.csv").string();
  toy::write_file(data, "word1,word2,score\npoly0,syn0,8\nmono01,mono02,2\nmono03,poly1,5\nmono04,zebra,1\n");
  const auto r = run({"eval-wordsim", "--data", data, "--checkpoint", ckpt_, "--lexicon", lex_, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("n_items"), 4);
  EXPECT_EQ(j.at("n_skipped"), 1);
  const auto b = run({"eval-wordsim", "--data", data, "--baseline-vectors", vec_});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(b.out.find("rho x 100"), std::string::npos);
  EXPECT_EQ(run({"eval-wordsim", "--data", data}).code, 1);
}

TEST_F(CliTest, EvalScws) {
  const auto data = (dir_ / "scws.txt").string();
  toy::write_file(data,
                  "1\tpoly0\tn\tsyn0\tn\tw01 <b>poly0</b> w02\t<b>syn0</b> w03\t7.0\n"
                  "2\tmono01\tn\tmono02\tn\tthe <b>mono01</b>\ta <b>mono02</b> w05\t2.0\n"
                  "3\tpoly1\tn\tmono03\tn\t<b>poly1</b> w09\t<b>mono03</b>\t4.5\n");
  const auto r = run({"eval-scws", "--data", data, "--checkpoint", ckpt_, "--lexicon", lex_, "--vectors", vec_, "--json",
                      "--records"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("records").size(), 3u);
}

TEST_F(CliTest, EvalWsdPredictionsAndBaselines) {
  const auto key = (dir_ / "key.txt").string(), pred = (dir_ / "pred.txt").string(),
             clusters = (dir_ / "clusters.txt").string(), in = (dir_ / "wsd.jsonl").string();
  toy::write_file(key, "d1 poly0%1\nd2 poly1%2\nd3 mono00%1\nd4 poly2%1\n");
  toy::write_file(clusters, "poly2%1 c\npoly2%2 c\n");
  toy::write_file(pred, "d1 poly0%1\nd2 poly1%1\nd3 mono00%1\nd4 poly2%2\nd9 mono01%1\n");
  const auto r = run({"eval-wsd", "--key", key, "--clusters", clusters, "--predictions", pred, "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(nlohmann::json::parse(r.out).at("score").get<double>(), 75.0, 1e-9);
  EXPECT_NE(r.err.find("d9"), std::string::npos);

  toy::write_file(in, R"({"tokens":["poly0","w01","mono00","poly2"],"targets":[{"id":"d1","index":0},{"id":"d3","index":2},{"id":"d4","index":3}]})" "\n"
                      R"({"tokens":["w07","poly1"],"targets":[{"id":"d2","index":1}]})" "\n");
  const auto s2c_run = run({"eval-wsd", "--key", key, "--input", in, "--lexicon", lex_, "--checkpoint", ckpt_,
                            "--vectors", vec_, "--json"});
  ASSERT_EQ(s2c_run.code, 0) << s2c_run.err;
  EXPECT_EQ(nlohmann::json::parse(s2c_run.out).at("attempted"), 4.0);
  std::vector<std::string> rnd{"eval-wsd", "--key", key, "--input", in, "--lexicon", lex_, "--random-baseline",
                               "--seed", "9"};
  const auto r1 = run(rnd), r2 = run(rnd);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_NE(r1.out.find("F1"), std::string::npos);
}
