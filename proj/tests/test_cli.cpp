#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "zeroone/ensemble.hpp"
#include "zeroone/io.hpp"
#include "zeroone/random.hpp"
#include "zeroone/scd.hpp"
#include "zeroone/text.hpp"

using namespace zeroone;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run_cli(const std::string& args, const fs::path& capture) {
  const std::string cmd =
      std::string(ZEROONE_CLI_PATH) + " " + args + " >" + capture.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Sentiment-style fixture: 20 small-vector filler words plus 6 strong class
// words, documents of varying length with one class word each. Within-class
// variation keeps the 01-loss landscape non-degenerate.
void write_fixture(const fs::path& dir) {
  Rng rng(11);
  std::uniform_real_distribution<double> small(-0.3, 0.3);
  std::ofstream emb(dir / "emb.txt");
  std::vector<std::string> fillers;
  for (int i = 0; i < 20; ++i) {
    fillers.push_back("w" + std::to_string(i));
    emb << fillers.back() << ' ' << small(rng) << ' ' << small(rng) << '\n';
  }
  emb << "good 1.0 0.5\ngreat 0.9 0.55\nfine 0.8 0.45\n";
  emb << "bad -1.0 -0.5\nawful -0.9 -0.55\npoor -0.8 -0.45\n";
  emb.close();

  const std::vector<std::string> pos{"good", "great", "fine"};
  const std::vector<std::string> neg{"bad", "awful", "poor"};
  std::ofstream corpus(dir / "corpus.tsv");
  for (int i = 0; i < 20; ++i) {
    for (int cls : {+1, -1}) {
      const auto& pool = cls == +1 ? pos : neg;
      std::vector<std::string> tokens;
      const std::size_t len = 3 + uniform_index(6, rng);
      for (std::size_t t = 0; t < len; ++t) tokens.push_back(fillers[uniform_index(20, rng)]);
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(uniform_index(len + 1, rng)),
                    pool[uniform_index(3, rng)]);
      corpus << cls << '\t';
      for (std::size_t t = 0; t < tokens.size(); ++t) corpus << (t ? " " : "") << tokens[t];
      corpus << '\n';
    }
  }
}

// {a, aa, b, bb} with 1-d embeddings 1, 2, -1, -2 and a single-hidden-unit
// network predicting the sign of the averaged vector.
void write_sign_oracle(const fs::path& dir) {
  std::ofstream(dir / "emb.txt") << "a 1\naa 2\nb -1\nbb -2\n";
  SignNetwork net;
  net.hidden_weights = Matrix(1, 1, 1.0);
  net.hidden_biases = {0.0};
  net.output_weights = {1.0};
  net.output_bias = 0.0;
  save_json(to_json(net), (dir / "member-0.json").string());
  EnsembleManifest manifest;
  manifest.model_type = ModelType::scd01;
  manifest.votes = 1;
  manifest.member_files = {"member-0.json"};
  manifest.embedding_dim = 1;
  save_json(to_json(manifest), (dir / "manifest.json").string());
}

}  // namespace

TEST_CASE("cli featurize matches in-process corpus statistics") {
  TempDir dir("zeroone_cli_featurize");
  write_fixture(dir.path);
  const fs::path log = dir.path / "log.txt";
  const int rc = run_cli("featurize --data " + (dir.path / "corpus.tsv").string() +
                             " --embeddings " + (dir.path / "emb.txt").string() + " --out " +
                             (dir.path / "stats.tsv").string(),
                         log);
  CHECK(rc == 0);

  const Corpus corpus = load_corpus((dir.path / "corpus.tsv").string(), CorpusFormat::tsv);
  const EmbeddingTable table = load_embeddings((dir.path / "emb.txt").string());
  const CorpusStats stats = corpus_stats(corpus, table);
  const std::string out = slurp(dir.path / "stats.tsv");
  CHECK(out.find("documents\t" + std::to_string(stats.documents) + "\n") != std::string::npos);
  CHECK(out.find("mean_tokens\t" + detail::format_double(stats.mean_tokens) + "\n") !=
        std::string::npos);
  CHECK(out.find("oov_rate\t" + detail::format_double(stats.oov_rate) + "\n") !=
        std::string::npos);
  CHECK(out == slurp(log));  // stdout mirrors the file
}

TEST_CASE("cli train writes a loadable run and reruns byte-identically") {
  TempDir dir("zeroone_cli_train");
  write_fixture(dir.path);
  const std::string common = " --data " + (dir.path / "corpus.tsv").string() + " --embeddings " +
                             (dir.path / "emb.txt").string() +
                             " --model scd01 --votes 2 --epochs 30 --hidden 4 --seed 5 --out ";
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("train" + common + (dir.path / "runA").string(), log) == 0);
  REQUIRE(run_cli("train" + common + (dir.path / "runB").string(), log) == 0);

  const EnsembleManifest manifest =
      manifest_from_json(load_json((dir.path / "runA" / "manifest.json").string()));
  CHECK(manifest.votes == 2);
  CHECK(manifest.model_type == ModelType::scd01);
  CHECK(manifest.embedding_dim == 2);
  CHECK(manifest.max_len == 0);
  for (const std::string& member : manifest.member_files) {
    const SignNetwork net = network_from_json(load_json((dir.path / "runA" / member).string()));
    CHECK(net.hidden_nodes() == 4);
  }
  CHECK(fs::exists(dir.path / "runA" / "train-log-0.tsv"));
  CHECK(fs::exists(dir.path / "runA" / "train-log-1.tsv"));

  CHECK(slurp(dir.path / "runA" / "member-0.json") == slurp(dir.path / "runB" / "member-0.json"));
  CHECK(slurp(dir.path / "runA" / "member-1.json") == slurp(dir.path / "runB" / "member-1.json"));
  CHECK(slurp(dir.path / "runA" / "manifest.json") == slurp(dir.path / "runB" / "manifest.json"));
}

TEST_CASE("cli train with votes=1 epochs=0 stores the initialized member") {
  TempDir dir("zeroone_cli_init");
  write_fixture(dir.path);
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("train --data " + (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string() +
                      " --model scd01 --votes 1 --epochs 0 --hidden 3 --seed 9 --out " +
                      (dir.path / "run").string(),
                  log) == 0);
  const Corpus corpus = load_corpus((dir.path / "corpus.tsv").string(), CorpusFormat::tsv);
  const EmbeddingTable table = load_embeddings((dir.path / "emb.txt").string());
  const LabeledDataset data = averaged_dataset(corpus, table);
  TrainConfig config;
  config.epochs = 0;
  config.hidden_nodes = 3;
  config.seed = 9;
  const SignNetwork expect = train(data, config).network;
  const SignNetwork got =
      network_from_json(load_json((dir.path / "run" / "member-0.json").string()));
  CHECK(got == expect);
}

TEST_CASE("cli eval matches the in-process ensemble oracle") {
  TempDir dir("zeroone_cli_eval");
  write_fixture(dir.path);
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("train --data " + (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string() +
                      " --model scd01 --votes 3 --epochs 40 --hidden 4 --seed 5 --out " +
                      (dir.path / "run").string(),
                  log) == 0);
  REQUIRE(run_cli("eval --manifest " + (dir.path / "run" / "manifest.json").string() +
                      " --data " + (dir.path / "corpus.tsv").string() + " --out " +
                      (dir.path / "eval.tsv").string(),
                  log) == 0);

  const Corpus corpus = load_corpus((dir.path / "corpus.tsv").string(), CorpusFormat::tsv);
  const EmbeddingTable table = load_embeddings((dir.path / "emb.txt").string());
  const LabeledDataset data = averaged_dataset(corpus, table);
  Ensemble<SignNetwork> ensemble;
  for (int i = 0; i < 3; ++i)
    ensemble.members.push_back(network_from_json(
        load_json((dir.path / "run" / ("member-" + std::to_string(i) + ".json")).string())));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i)
    correct += vote(ensemble, data.row(i)).label == data.label(i);

  const std::string expect_row = "all\t" + std::to_string(data.size()) + '\t' +
                                 std::to_string(correct) + '\t' +
                                 detail::format_double(static_cast<double>(correct) /
                                                       static_cast<double>(data.size())) +
                                 '\n';
  CHECK(slurp(dir.path / "eval.tsv").find(expect_row) != std::string::npos);
}

TEST_CASE("cli eval goldens: perfect and constant hand-written models") {
  TempDir dir("zeroone_cli_golden");
  std::ofstream(dir.path / "emb.txt") << "good 1 0\nbad -1 0\n";
  std::ofstream(dir.path / "corpus.tsv") << "1\tgood\n1\tgood\n-1\tbad\n-1\tbad\n";

  SignNetwork perfect;
  perfect.hidden_weights = Matrix(2, 1);
  perfect.hidden_weights.data() = {1.0, 0.0};
  perfect.hidden_biases = {0.0};
  perfect.output_weights = {1.0};
  perfect.output_bias = 0.0;
  save_json(to_json(perfect), (dir.path / "member-0.json").string());
  EnsembleManifest manifest;
  manifest.model_type = ModelType::scd01;
  manifest.votes = 1;
  manifest.member_files = {"member-0.json"};
  manifest.embedding_dim = 2;
  save_json(to_json(manifest), (dir.path / "manifest.json").string());

  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("eval --manifest " + (dir.path / "manifest.json").string() + " --data " +
                      (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string(),
                  log) == 0);
  CHECK(slurp(log) ==
        "class\tdocs\tcorrect\taccuracy\n"
        "all\t4\t4\t1\n"
        "positive\t2\t2\t1\n"
        "negative\t2\t2\t1\n");

  SignNetwork constant = perfect;
  constant.output_bias = 10.0;  // always +1
  save_json(to_json(constant), (dir.path / "member-0.json").string());
  REQUIRE(run_cli("eval --manifest " + (dir.path / "manifest.json").string() + " --data " +
                      (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string(),
                  log) == 0);
  CHECK(slurp(log) ==
        "class\tdocs\tcorrect\taccuracy\n"
        "all\t4\t2\t0.5\n"
        "positive\t2\t2\t1\n"
        "negative\t2\t0\t0\n");
}

TEST_CASE("cli attack reproduces the hand-traced oracle run end to end") {
  TempDir dir("zeroone_cli_attack");
  write_sign_oracle(dir.path);
  std::ofstream(dir.path / "corpus.tsv") << "1\tb a\n";
  const fs::path log = dir.path / "log.txt";
  const int rc = run_cli(
      "attack --manifest " + (dir.path / "manifest.json").string() + " --data " +
          (dir.path / "corpus.tsv").string() + " --embeddings " + (dir.path / "emb.txt").string() +
          " --dataset-name toy --out " + (dir.path / "atk").string() + " --dump-adv " +
          (dir.path / "atk" / "adv.txt").string(),
      log);
  REQUIRE(rc == 0);
  CHECK(slurp(dir.path / "atk" / "attack-report.tsv") ==
        "doc_id\tclean_correct\tattacked_correct\tn_substitutions\tqueries\n"
        "0\t1\t0\t1\t6\n"
        "summary\t1\t0\t1\t6\n");
  CHECK(slurp(dir.path / "atk" / "summary.tsv") ==
        "dataset\tmodel\tcl\tadv\tque\n"
        "toy\tscd01\t1\t0\t6\n");
  CHECK(slurp(dir.path / "atk" / "adv.txt") == "0\t[b->bb] a\n");
}

TEST_CASE("cli attack: no candidates means Adv equals Cl; reruns identical") {
  TempDir dir("zeroone_cli_attack2");
  write_fixture(dir.path);
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("train --data " + (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string() +
                      " --model scd01 --votes 2 --epochs 30 --hidden 4 --seed 5 --out " +
                      (dir.path / "run").string(),
                  log) == 0);
  const std::string attack_cmd =
      "attack --manifest " + (dir.path / "run" / "manifest.json").string() + " --data " +
      (dir.path / "corpus.tsv").string() + " --min-similarity 1.5 --sample 8 --seed 4 --out ";
  REQUIRE(run_cli(attack_cmd + (dir.path / "atkA").string(), log) == 0);
  REQUIRE(run_cli(attack_cmd + (dir.path / "atkB").string(), log) == 0);

  const SummaryRow summary = read_summary_file((dir.path / "atkA" / "summary.tsv").string());
  CHECK(summary.after_attack_accuracy == summary.clean_accuracy);
  CHECK(slurp(dir.path / "atkA" / "attack-report.tsv") ==
        slurp(dir.path / "atkB" / "attack-report.tsv"));
  CHECK(slurp(dir.path / "atkA" / "summary.tsv") == slurp(dir.path / "atkB" / "summary.tsv"));
}

TEST_CASE("cli report merges summaries and marks the per-dataset maximum") {
  TempDir dir("zeroone_cli_report");
  std::ofstream(dir.path / "s1.tsv") << "dataset\tmodel\tcl\tadv\tque\n"
                                        "mr\tcnn01\t0.78\t0.131\t442\n";
  std::ofstream(dir.path / "s2.tsv") << "dataset\tmodel\tcl\tadv\tque\n"
                                        "mr\tcnn01-fs\t0.76\t0.409\t519\n";
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("report " + (dir.path / "s1.tsv").string() + " " +
                      (dir.path / "s2.tsv").string() + " --out " + (dir.path / "table.tsv").string(),
                  log) == 0);
  const std::string expect =
      "dataset\tmodel\tcl\tadv\tque\n"
      "mr\tcnn01\t0.78\t0.131\t442\n"
      "mr\tcnn01-fs\t0.76\t0.409*\t519\n";
  CHECK(slurp(dir.path / "table.tsv") == expect);
  CHECK(slurp(log) == expect);
}

TEST_CASE("cli exit codes: 1 usage, 2 data") {
  TempDir dir("zeroone_cli_codes");
  const fs::path log = dir.path / "log.txt";
  CHECK(run_cli("nosuchcommand", log) == 1);
  CHECK(run_cli("train --data missing.tsv", log) == 1);  // missing required flags
  CHECK(run_cli("eval --manifest /nonexistent/m.json --data /nonexistent/c.tsv", log) == 2);
  CHECK(run_cli("--help", log) == 0);
}

TEST_CASE("cli eval rejects a representation mismatch") {
  TempDir dir("zeroone_cli_mismatch");
  write_sign_oracle(dir.path);
  std::ofstream(dir.path / "corpus.tsv") << "1\ta\n-1\tb\n";
  // Claim the dense member file is a conv ensemble: loading must fail.
  EnsembleManifest manifest;
  manifest.model_type = ModelType::cnn01;
  manifest.votes = 1;
  manifest.member_files = {"member-0.json"};
  manifest.embedding_dim = 1;
  manifest.max_len = 8;
  save_json(to_json(manifest), (dir.path / "manifest.json").string());
  const fs::path log = dir.path / "log.txt";
  CHECK(run_cli("eval --manifest " + (dir.path / "manifest.json").string() + " --data " +
                    (dir.path / "corpus.tsv").string() + " --embeddings " +
                    (dir.path / "emb.txt").string(),
                log) == 2);
  CHECK(slurp(log).find("error:") != std::string::npos);
}

TEST_CASE("cli eval is reproducible across thread counts") {
  TempDir dir("zeroone_cli_threads");
  write_fixture(dir.path);
  const fs::path log = dir.path / "log.txt";
  REQUIRE(run_cli("train --data " + (dir.path / "corpus.tsv").string() + " --embeddings " +
                      (dir.path / "emb.txt").string() +
                      " --model cnn01-fs --votes 2 --epochs 15 --filters 4 --max-len 12 "
                      "--seed 3 --out " +
                      (dir.path / "run").string(),
                  log) == 0);
  const std::string eval_cmd = "eval --manifest " + (dir.path / "run" / "manifest.json").string() +
                               " --data " + (dir.path / "corpus.tsv").string() + " --out ";
  REQUIRE(run_cli("--threads 1 " + eval_cmd + (dir.path / "e1.tsv").string(), log) == 0);
  REQUIRE(run_cli("--threads 3 " + eval_cmd + (dir.path / "e3.tsv").string(), log) == 0);
  CHECK(slurp(dir.path / "e1.tsv") == slurp(dir.path / "e3.tsv"));
}
