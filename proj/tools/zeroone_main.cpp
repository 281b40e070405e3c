// Command-line driver: featurize / train / eval / attack / report.
// Exit codes: 0 success, 1 usage error, 2 data or runtime error.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "zeroone/attack.hpp"
#include "zeroone/cnn.hpp"
#include "zeroone/core.hpp"
#include "zeroone/ensemble.hpp"
#include "zeroone/io.hpp"
#include "zeroone/parallel.hpp"
#include "zeroone/random.hpp"
#include "zeroone/scd.hpp"
#include "zeroone/text.hpp"

namespace fs = std::filesystem;
using namespace zeroone;

namespace {

struct DataArgs {
  std::string data;
  std::string format = "tsv";
  std::string embeddings;
};

void add_data_options(CLI::App* cmd, DataArgs& args, bool embeddings_required) {
  cmd->add_option("--data", args.data, "corpus file")->required();
  cmd->add_option("--format", args.format, "corpus format: tsv, mr, polarity-csv, ag-csv")
      ->check(CLI::IsMember({"tsv", "mr", "polarity-csv", "ag-csv"}));
  auto* emb = cmd->add_option("--embeddings", args.embeddings, "GloVe-style embedding file");
  if (embeddings_required) emb->required();
}

Corpus load_corpus_checked(const DataArgs& args) {
  return load_corpus(args.data, parse_corpus_format(args.format));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  return out;
}

// ---------------------------------------------------------------------------
// featurize: dataset statistics against an embedding table

struct FeaturizeArgs {
  DataArgs data;
  std::string out;
};

int cmd_featurize(const FeaturizeArgs& args) {
  const Corpus corpus = load_corpus_checked(args.data);
  const EmbeddingTable table = load_embeddings(args.data.embeddings);
  const CorpusStats stats = corpus_stats(corpus, table);
  std::ostringstream report;
  report << "metric\tvalue\n"
         << "documents\t" << stats.documents << '\n'
         << "mean_tokens\t" << detail::format_double(stats.mean_tokens) << '\n'
         << "oov_rate\t" << detail::format_double(stats.oov_rate) << '\n'
         << "malformed_rows\t" << corpus.malformed_rows << '\n'
         << "filtered_rows\t" << corpus.filtered_rows << '\n'
         << "embedding_tokens\t" << table.size() << '\n'
         << "embedding_dim\t" << table.dim() << '\n';
  std::cout << report.str();
  if (!args.out.empty()) open_out(args.out) << report.str();
  return 0;
}

// ---------------------------------------------------------------------------
// train: k-vote ensemble of the chosen model type

struct TrainArgs {
  DataArgs data;
  std::string model = "scd01";
  std::size_t votes = 8;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t epochs = 1000;
  double learning_rate = 0.1;
  double batch_fraction = 0.75;
  std::size_t feature_pool = 0;  // 0: model default (128 dense, 32 conv)
  std::size_t hidden = 20;
  std::size_t filters = 32;
  std::vector<std::size_t> widths = {3};
  std::size_t max_len = 64;
};

json resolved_config_json(const TrainArgs& args, ModelType type) {
  json config{{"epochs", args.epochs},
              {"learning_rate", args.learning_rate},
              {"batch_fraction", args.batch_fraction},
              {"seed", args.seed}};
  if (is_conv(type)) {
    config["feature_pool_size"] = args.feature_pool == 0 ? 32 : args.feature_pool;
    config["num_filters"] = args.filters;
    config["filter_widths"] = args.widths;
    config["pooling"] = pooling_name(type == ModelType::cnn01_fs ? PoolingMode::positive_sum
                                                                 : PoolingMode::signed_average);
    config["max_len"] = args.max_len;
  } else {
    config["feature_pool_size"] = args.feature_pool == 0 ? 128 : args.feature_pool;
    config["hidden_nodes"] = args.hidden;
    config["binary_mode"] = type == ModelType::scd01_binary;
  }
  return config;
}

int cmd_train(const TrainArgs& args) {
  const ModelType type = parse_model_type(args.model);
  if (args.votes == 0) throw std::runtime_error("votes: must be positive");
  const Corpus corpus = load_corpus_checked(args.data);
  const EmbeddingTable table = load_embeddings(args.data.embeddings);
  fs::create_directories(args.out);

  EnsembleManifest manifest;
  manifest.model_type = type;
  manifest.votes = args.votes;
  manifest.seed = args.seed;
  manifest.embedding_dim = table.dim();
  manifest.max_len = is_conv(type) ? args.max_len : 0;
  manifest.config = resolved_config_json(args, type);
  manifest.inputs = json{{"data", args.data.data},
                         {"format", args.data.format},
                         {"embeddings", args.data.embeddings}};

  const auto member_path = [&](std::size_t i) { return "member-" + std::to_string(i) + ".json"; };
  const auto log_path = [&](std::size_t i) { return "train-log-" + std::to_string(i) + ".tsv"; };

  if (is_conv(type)) {
    auto [docs, labels] = stacked_dataset(corpus, table, args.max_len);
    const ConvDataset dataset(std::move(docs), std::move(labels));
    ConvConfig config;
    config.epochs = args.epochs;
    config.learning_rate = args.learning_rate;
    config.batch_fraction = args.batch_fraction;
    config.feature_pool_size = args.feature_pool == 0 ? 32 : args.feature_pool;
    config.num_filters = args.filters;
    config.filter_widths = args.widths;
    config.seed = args.seed;
    config.pooling =
        type == ModelType::cnn01_fs ? PoolingMode::positive_sum : PoolingMode::signed_average;
    config.validate();
    const std::vector<ConvTrainResult> members = train_conv_members(dataset, config, args.votes);
    for (std::size_t i = 0; i < members.size(); ++i) {
      save_json(to_json(members[i].model), (fs::path(args.out) / member_path(i)).string());
      auto log = open_out((fs::path(args.out) / log_path(i)).string());
      write_train_log(log, members[i].log, "filter");
      manifest.member_files.push_back(member_path(i));
    }
  } else {
    const LabeledDataset dataset = averaged_dataset(corpus, table);
    TrainConfig config;
    config.epochs = args.epochs;
    config.learning_rate = args.learning_rate;
    config.batch_fraction = args.batch_fraction;
    config.feature_pool_size = args.feature_pool == 0 ? 128 : args.feature_pool;
    config.hidden_nodes = args.hidden;
    config.seed = args.seed;
    config.binary_mode = type == ModelType::scd01_binary;
    config.validate();
    const std::vector<TrainResult> members = train_members(dataset, config, args.votes);
    for (std::size_t i = 0; i < members.size(); ++i) {
      save_json(to_json(members[i].network), (fs::path(args.out) / member_path(i)).string());
      auto log = open_out((fs::path(args.out) / log_path(i)).string());
      write_train_log(log, members[i].log, "hidden");
      manifest.member_files.push_back(member_path(i));
    }
  }
  save_json(to_json(manifest), (fs::path(args.out) / "manifest.json").string());
  std::cout << "trained " << args.votes << " " << to_string(type) << " member(s) into " << args.out
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// shared manifest loading for eval/attack

struct LoadedEnsemble {
  EnsembleManifest manifest;
  Ensemble<SignNetwork> dense;
  Ensemble<ConvSignModel> conv;
  bool is_conv = false;
};

LoadedEnsemble load_ensemble(const std::string& manifest_path) {
  LoadedEnsemble loaded;
  loaded.manifest = manifest_from_json(load_json(manifest_path));
  loaded.is_conv = is_conv(loaded.manifest.model_type);
  const fs::path dir = fs::path(manifest_path).parent_path();
  for (const std::string& member : loaded.manifest.member_files) {
    const std::string path = (dir / member).string();
    if (loaded.is_conv)
      loaded.conv.members.push_back(conv_from_json(load_json(path)));
    else
      loaded.dense.members.push_back(network_from_json(load_json(path)));
  }
  return loaded;
}

EmbeddingTable load_table_for(const LoadedEnsemble& loaded, std::string path) {
  if (path.empty()) path = loaded.manifest.inputs.value("embeddings", "");
  if (path.empty())
    throw std::runtime_error("no --embeddings given and the manifest records none");
  EmbeddingTable table = load_embeddings(path);
  if (table.dim() != loaded.manifest.embedding_dim)
    throw std::runtime_error("embedding dim " + std::to_string(table.dim()) +
                             " does not match the manifest's " +
                             std::to_string(loaded.manifest.embedding_dim));
  return table;
}

// ---------------------------------------------------------------------------
// eval: clean accuracy with per-class breakdown

struct EvalArgs {
  std::string manifest;
  DataArgs data;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  const LoadedEnsemble loaded = load_ensemble(args.manifest);
  const Corpus corpus = load_corpus_checked(args.data);
  const EmbeddingTable table = load_table_for(loaded, args.data.embeddings);

  const std::size_t n = corpus.documents.size();
  std::vector<int> predicted(n);
  if (loaded.is_conv) {
    auto [docs, labels] = stacked_dataset(corpus, table, loaded.manifest.max_len);
    parallel_for(n, [&](std::size_t i) { predicted[i] = vote(loaded.conv, docs[i]).label; });
  } else {
    const LabeledDataset dataset = averaged_dataset(corpus, table);
    parallel_for(n,
                 [&](std::size_t i) { predicted[i] = vote(loaded.dense, dataset.row(i)).label; });
  }

  std::size_t correct = 0;
  std::size_t pos_docs = 0;
  std::size_t pos_correct = 0;
  std::size_t neg_docs = 0;
  std::size_t neg_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool ok = predicted[i] == corpus.documents[i].label;
    correct += ok;
    if (corpus.documents[i].label == +1) {
      ++pos_docs;
      pos_correct += ok;
    } else {
      ++neg_docs;
      neg_correct += ok;
    }
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  std::ostringstream report;
  report << "class\tdocs\tcorrect\taccuracy\n"
         << "all\t" << n << '\t' << correct << '\t' << detail::format_double(ratio(correct, n))
         << '\n'
         << "positive\t" << pos_docs << '\t' << pos_correct << '\t'
         << detail::format_double(ratio(pos_correct, pos_docs)) << '\n'
         << "negative\t" << neg_docs << '\t' << neg_correct << '\t'
         << detail::format_double(ratio(neg_correct, neg_docs)) << '\n';
  std::cout << report.str();
  if (!args.out.empty()) open_out(args.out) << report.str();
  return 0;
}

// ---------------------------------------------------------------------------
// attack: word-substitution robustness evaluation producing report + summary TSVs

struct AttackArgs {
  std::string manifest;
  DataArgs data;
  std::string synonym_embeddings;
  std::string out;
  std::string dataset_name;
  std::string dump_adv;
  std::size_t candidates = 50;
  double min_similarity = 0.5;
  double max_perturb = 1.0;
  std::size_t sample = 0;
  std::uint64_t seed = 0;
};

int cmd_attack(const AttackArgs& args) {
  const LoadedEnsemble loaded = load_ensemble(args.manifest);
  const Corpus corpus = load_corpus_checked(args.data);
  const EmbeddingTable table = load_table_for(loaded, args.data.embeddings);

  std::vector<Document> docs = corpus.documents;
  if (args.sample > 0 && args.sample < docs.size()) {
    Rng rng(substream_seed(args.seed, "attack"));
    std::vector<std::size_t> keep = sample_without_replacement(docs.size(), args.sample, rng);
    std::sort(keep.begin(), keep.end());
    std::vector<Document> subset;
    subset.reserve(keep.size());
    for (std::size_t i : keep) subset.push_back(std::move(docs[i]));
    docs = std::move(subset);
  }

  // Synonyms come from a separate table when given (attacker vocabulary
  // decoupled from the defender's featurization).
  const SynonymIndex index = [&] {
    std::vector<std::string> vocabulary;
    for (const Document& doc : docs)
      vocabulary.insert(vocabulary.end(), doc.tokens.begin(), doc.tokens.end());
    if (!args.synonym_embeddings.empty() && args.synonym_embeddings != args.data.embeddings) {
      const EmbeddingTable synonym_table = load_embeddings(args.synonym_embeddings);
      return build_synonym_index(synonym_table, vocabulary, args.candidates, args.min_similarity);
    }
    return build_synonym_index(table, vocabulary, args.candidates, args.min_similarity);
  }();

  AttackConfig config;
  config.max_candidates = args.candidates;
  config.min_similarity = args.min_similarity;
  config.max_perturb = args.max_perturb;

  const std::size_t max_len = loaded.manifest.max_len;
  std::function<VoteResult(const std::vector<std::string>&)> target;
  if (loaded.is_conv) {
    target = [&loaded, &table, max_len](const std::vector<std::string>& tokens) {
      const DocMatrix doc = stack_matrix(Document{tokens, +1}, table, max_len);
      return vote(loaded.conv, doc);
    };
  } else {
    target = [&loaded, &table](const std::vector<std::string>& tokens) {
      const auto [mean, oov] = average_vector(Document{tokens, +1}, table);
      return vote(loaded.dense, std::span<const double>(mean));
    };
  }

  const AttackReport report = evaluate(target, docs, index, config);

  fs::create_directories(args.out);
  {
    auto out = open_out((fs::path(args.out) / "attack-report.tsv").string());
    write_attack_report(out, report, docs);
  }
  SummaryRow summary;
  summary.dataset =
      args.dataset_name.empty() ? fs::path(args.data.data).stem().string() : args.dataset_name;
  summary.model = to_string(loaded.manifest.model_type);
  summary.clean_accuracy = report.clean_accuracy;
  summary.after_attack_accuracy = report.after_attack_accuracy;
  summary.mean_queries = report.mean_queries;
  {
    auto out = open_out((fs::path(args.out) / "summary.tsv").string());
    write_summary(out, summary);
  }
  if (!args.dump_adv.empty()) {
    auto out = open_out(args.dump_adv);
    write_adversarial_dump(out, report, docs);
  }
  std::cout << "attacked " << docs.size() << " document(s): Cl="
            << detail::format_double(report.clean_accuracy)
            << " Adv=" << detail::format_double(report.after_attack_accuracy)
            << " Que=" << detail::format_double(report.mean_queries) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report: merge run summaries into one marked table

struct ReportArgs {
  std::vector<std::string> summaries;
  std::string out;
};

int cmd_report(const ReportArgs& args) {
  std::vector<SummaryRow> rows;
  rows.reserve(args.summaries.size());
  for (const std::string& path : args.summaries) rows.push_back(read_summary_file(path));
  std::ostringstream table;
  write_combined_report(table, rows);
  std::cout << table.str();
  if (!args.out.empty()) open_out(args.out) << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"01-loss sign-activation network toolkit"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = hardware default)");

  FeaturizeArgs featurize_args;
  CLI::App* featurize = app.add_subcommand("featurize", "corpus statistics vs an embedding table");
  featurize->set_config("--config");
  add_data_options(featurize, featurize_args.data, true);
  featurize->add_option("--out", featurize_args.out, "also write the stats TSV here");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "train a majority-vote ensemble");
  train->set_config("--config");
  add_data_options(train, train_args.data, true);
  train->add_option("--model", train_args.model, "scd01, scd01-binary, cnn01, cnn01-fs")
      ->check(CLI::IsMember({"scd01", "scd01-binary", "cnn01", "cnn01-fs"}));
  train->add_option("--votes", train_args.votes, "ensemble size k");
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--seed", train_args.seed, "base RNG seed");
  train->add_option("--epochs", train_args.epochs, "training epochs");
  train->add_option("--learning-rate", train_args.learning_rate, "coordinate step size");
  train->add_option("--batch-fraction", train_args.batch_fraction, "per-class batch fraction");
  train->add_option("--feature-pool", train_args.feature_pool,
                    "coordinate pool size (0 = model default)");
  train->add_option("--hidden", train_args.hidden, "hidden nodes (dense models)");
  train->add_option("--filters", train_args.filters, "filter count (conv models)");
  train->add_option("--widths", train_args.widths, "filter widths, cycled (conv models)");
  train->add_option("--max-len", train_args.max_len, "stacked-matrix token cap (conv models)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "clean accuracy of a trained ensemble");
  eval->set_config("--config");
  eval->add_option("--manifest", eval_args.manifest, "manifest.json from train")->required();
  add_data_options(eval, eval_args.data, false);
  eval->add_option("--out", eval_args.out, "also write the accuracy TSV here");

  AttackArgs attack_args;
  CLI::App* attack = app.add_subcommand("attack", "word-substitution attack evaluation");
  attack->set_config("--config");
  attack->add_option("--manifest", attack_args.manifest, "manifest.json from train")->required();
  add_data_options(attack, attack_args.data, false);
  attack->add_option("--synonym-embeddings", attack_args.synonym_embeddings,
                     "separate attacker vocabulary (defaults to --embeddings)");
  attack->add_option("--out", attack_args.out, "output directory")->required();
  attack->add_option("--dataset-name", attack_args.dataset_name,
                     "summary row dataset label (default: corpus file stem)");
  attack->add_option("--candidates", attack_args.candidates, "synonyms per token");
  attack->add_option("--min-similarity", attack_args.min_similarity, "cosine floor");
  attack->add_option("--max-perturb", attack_args.max_perturb, "substituted-fraction cap");
  attack->add_option("--sample", attack_args.sample, "attack only this many documents (0 = all)");
  attack->add_option("--seed", attack_args.seed, "sampling seed");
  attack->add_option("--dump-adv", attack_args.dump_adv, "write adversarial documents here");

  ReportArgs report_args;
  CLI::App* report = app.add_subcommand("report", "merge attack summaries into one table");
  report->add_option("summaries", report_args.summaries, "summary.tsv files")
      ->required()
      ->expected(-1);
  report->add_option("--out", report_args.out, "also write the combined table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  set_max_threads(threads);
  try {
    if (*featurize) return cmd_featurize(featurize_args);
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*attack) return cmd_attack(attack_args);
    if (*report) return cmd_report(report_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
