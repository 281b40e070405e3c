#pragma once

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "zeroone/attack.hpp"
#include "zeroone/cnn.hpp"
#include "zeroone/core.hpp"
#include "zeroone/scd.hpp"
#include "zeroone/text.hpp"

namespace zeroone {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// model type names (shared by manifests and the CLI)

enum class ModelType { scd01, scd01_binary, cnn01, cnn01_fs };

inline std::string to_string(ModelType type) {
  switch (type) {
    case ModelType::scd01: return "scd01";
    case ModelType::scd01_binary: return "scd01-binary";
    case ModelType::cnn01: return "cnn01";
    case ModelType::cnn01_fs: return "cnn01-fs";
  }
  throw std::invalid_argument("unknown model type");
}

inline ModelType parse_model_type(std::string_view name) {
  if (name == "scd01") return ModelType::scd01;
  if (name == "scd01-binary") return ModelType::scd01_binary;
  if (name == "cnn01") return ModelType::cnn01;
  if (name == "cnn01-fs") return ModelType::cnn01_fs;
  throw std::invalid_argument("unknown model type: " + std::string(name));
}

inline bool is_conv(ModelType type) {
  return type == ModelType::cnn01 || type == ModelType::cnn01_fs;
}

// ---------------------------------------------------------------------------
// JSON model serialization (numbers round-trip bit-exactly for finite doubles)

namespace detail {

inline void require_format(const json& j, std::string_view format) {
  if (!j.is_object() || j.value("format", "") != format)
    throw std::invalid_argument("expected a \"" + std::string(format) + "\" document");
  if (j.value("version", 0) != 1)
    throw std::invalid_argument("unsupported version for " + std::string(format));
}

inline std::vector<double> doubles_field(const json& j, const char* key, std::size_t expect) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_array())
    throw std::invalid_argument(std::string("missing array field: ") + key);
  std::vector<double> out = it->get<std::vector<double>>();
  if (out.size() != expect)
    throw std::invalid_argument(std::string("wrong length for field: ") + key);
  return out;
}

}  // namespace detail

inline json to_json(const SignNetwork& network) {
  network.validate();
  return json{{"format", "sign-network"},
              {"version", 1},
              {"input_dim", network.input_dim()},
              {"hidden_nodes", network.hidden_nodes()},
              {"binary_mode", network.binary_mode},
              {"hidden_weights", network.hidden_weights.data()},
              {"hidden_biases", network.hidden_biases},
              {"output_weights", network.output_weights},
              {"output_bias", network.output_bias}};
}

inline SignNetwork network_from_json(const json& j) {
  detail::require_format(j, "sign-network");
  const std::size_t d = j.at("input_dim").get<std::size_t>();
  const std::size_t h = j.at("hidden_nodes").get<std::size_t>();
  SignNetwork network;
  network.hidden_weights = Matrix(d, h);
  network.hidden_weights.data() = detail::doubles_field(j, "hidden_weights", d * h);
  network.hidden_biases = detail::doubles_field(j, "hidden_biases", h);
  network.output_weights = detail::doubles_field(j, "output_weights", h);
  network.output_bias = j.at("output_bias").get<double>();
  network.binary_mode = j.at("binary_mode").get<bool>();
  network.validate();
  return network;
}

inline std::string pooling_name(PoolingMode mode) {
  return mode == PoolingMode::positive_sum ? "positive-sum" : "signed-average";
}

inline PoolingMode parse_pooling(std::string_view name) {
  if (name == "signed-average") return PoolingMode::signed_average;
  if (name == "positive-sum") return PoolingMode::positive_sum;
  throw std::invalid_argument("unknown pooling mode: " + std::string(name));
}

inline json to_json(const ConvSignModel& model) {
  model.validate();
  json filters = json::array();
  for (const Matrix& f : model.filters)
    filters.push_back(json{{"width", f.rows()}, {"weights", f.data()}});
  return json{{"format", "conv-sign-model"},
              {"version", 1},
              {"embedding_dim", model.embedding_dim()},
              {"pooling", pooling_name(model.pooling)},
              {"filters", std::move(filters)},
              {"filter_biases", model.filter_biases},
              {"output_weights", model.output_weights},
              {"output_bias", model.output_bias}};
}

inline ConvSignModel conv_from_json(const json& j) {
  detail::require_format(j, "conv-sign-model");
  const std::size_t d = j.at("embedding_dim").get<std::size_t>();
  ConvSignModel model;
  model.pooling = parse_pooling(j.at("pooling").get<std::string>());
  const json& filters = j.at("filters");
  if (!filters.is_array() || filters.empty())
    throw std::invalid_argument("conv-sign-model: missing filters");
  for (const json& f : filters) {
    const std::size_t width = f.at("width").get<std::size_t>();
    Matrix m(width, d);
    m.data() = detail::doubles_field(f, "weights", width * d);
    model.filters.push_back(std::move(m));
  }
  const std::size_t F = model.filters.size();
  model.filter_biases = detail::doubles_field(j, "filter_biases", F);
  model.output_weights = detail::doubles_field(j, "output_weights", F);
  model.output_bias = j.at("output_bias").get<double>();
  model.validate();
  return model;
}

// ---------------------------------------------------------------------------
// load/save helpers

inline void save_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read: " + path);
  return json::parse(in);
}

// ---------------------------------------------------------------------------
// ensemble manifest

struct EnsembleManifest {
  ModelType model_type = ModelType::scd01;
  std::size_t votes = 0;
  std::vector<std::string> member_files;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 0;
  std::size_t max_len = 0;  // stacked representation only; 0 for averaged
  json config;              // resolved training configuration
  json inputs;              // paths the run consumed
};

inline json to_json(const EnsembleManifest& manifest) {
  return json{{"format", "ensemble-manifest"},
              {"version", 1},
              {"model_type", to_string(manifest.model_type)},
              {"votes", manifest.votes},
              {"member_files", manifest.member_files},
              {"seed", manifest.seed},
              {"embedding_dim", manifest.embedding_dim},
              {"max_len", manifest.max_len},
              {"config", manifest.config},
              {"inputs", manifest.inputs}};
}

inline EnsembleManifest manifest_from_json(const json& j) {
  detail::require_format(j, "ensemble-manifest");
  EnsembleManifest manifest;
  manifest.model_type = parse_model_type(j.at("model_type").get<std::string>());
  manifest.votes = j.at("votes").get<std::size_t>();
  manifest.member_files = j.at("member_files").get<std::vector<std::string>>();
  manifest.seed = j.at("seed").get<std::uint64_t>();
  manifest.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  manifest.max_len = j.at("max_len").get<std::size_t>();
  manifest.config = j.value("config", json::object());
  manifest.inputs = j.value("inputs", json::object());
  if (manifest.votes == 0 || manifest.member_files.size() != manifest.votes)
    throw std::invalid_argument("ensemble-manifest: member_files must match votes");
  return manifest;
}

// ---------------------------------------------------------------------------
// training log TSV: epoch, node, accepted, full_loss

inline std::string node_name(const NodeRef& node, std::string_view hidden_kind) {
  if (node.is_output) return "output";
  return std::string(hidden_kind) + ":" + std::to_string(node.hidden_index);
}

inline void write_train_log(std::ostream& out, std::span<const TrainLogEntry> log,
                            std::string_view hidden_kind = "hidden") {
  out << "epoch\tnode\taccepted\tfull_loss\n";
  for (const TrainLogEntry& e : log)
    out << e.epoch << '\t' << node_name(e.node, hidden_kind) << '\t' << (e.accepted ? 1 : 0)
        << '\t' << detail::format_double(e.full_loss) << '\n';
}

// ---------------------------------------------------------------------------
// attack report TSV: per-document rows plus one aggregate "summary" row whose
// cells aggregate their columns (Cl, Adv, total substitutions, mean queries)

inline void write_attack_report(std::ostream& out, const AttackReport& report,
                                std::span<const Document> corpus) {
  if (report.outcomes.size() != corpus.size())
    throw std::invalid_argument("attack report and corpus sizes differ");
  out << "doc_id\tclean_correct\tattacked_correct\tn_substitutions\tqueries\n";
  std::size_t total_subs = 0;
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const AttackOutcome& o = report.outcomes[i];
    const bool clean_correct = o.original_label == corpus[i].label;
    const bool attacked_correct = clean_correct && !o.success;
    out << i << '\t' << (clean_correct ? 1 : 0) << '\t' << (attacked_correct ? 1 : 0) << '\t'
        << o.substitutions.size() << '\t' << o.queries << '\n';
    total_subs += o.substitutions.size();
  }
  out << "summary\t" << detail::format_double(report.clean_accuracy) << '\t'
      << detail::format_double(report.after_attack_accuracy) << '\t' << total_subs << '\t'
      << detail::format_double(report.mean_queries) << '\n';
}

// Optional adversarial dump: one line per successful attack with the final
// token sequence; substituted tokens rendered as [old->new].
inline void write_adversarial_dump(std::ostream& out, const AttackReport& report,
                                   std::span<const Document> corpus) {
  if (report.outcomes.size() != corpus.size())
    throw std::invalid_argument("attack report and corpus sizes differ");
  for (std::size_t i = 0; i < report.outcomes.size(); ++i) {
    const AttackOutcome& o = report.outcomes[i];
    if (!o.success) continue;
    std::vector<std::string> rendered = corpus[i].tokens;
    for (const Substitution& s : o.substitutions)
      rendered[s.position] = "[" + s.old_token + "->" + s.new_token + "]";
    out << i << '\t';
    for (std::size_t t = 0; t < rendered.size(); ++t) {
      if (t != 0) out << ' ';
      out << rendered[t];
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// run summaries and the combined report table

struct SummaryRow {
  std::string dataset;
  std::string model;
  double clean_accuracy = 0.0;
  double after_attack_accuracy = 0.0;
  double mean_queries = 0.0;

  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

inline void write_summary(std::ostream& out, const SummaryRow& row) {
  out << "dataset\tmodel\tcl\tadv\tque\n"
      << row.dataset << '\t' << row.model << '\t' << detail::format_double(row.clean_accuracy)
      << '\t' << detail::format_double(row.after_attack_accuracy) << '\t'
      << detail::format_double(row.mean_queries) << '\n';
}

inline SummaryRow read_summary(std::istream& in, const std::string& name = "<summary>") {
  std::string header;
  std::string line;
  if (!std::getline(in, header) || header != "dataset\tmodel\tcl\tadv\tque")
    throw std::runtime_error(name + ": bad summary header");
  if (!std::getline(in, line)) throw std::runtime_error(name + ": missing summary row");
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  if (fields.size() != 5) throw std::runtime_error(name + ": bad summary row");
  SummaryRow row;
  row.dataset = fields[0];
  row.model = fields[1];
  row.clean_accuracy = detail::parse_double(fields[2], 2, name.c_str());
  row.after_attack_accuracy = detail::parse_double(fields[3], 2, name.c_str());
  row.mean_queries = detail::parse_double(fields[4], 2, name.c_str());
  return row;
}

inline SummaryRow read_summary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read: " + path);
  return read_summary(in, path);
}

// Merged table in input order; within each dataset the highest after-attack
// accuracy is marked with '*' (every tied maximum is marked).
inline void write_combined_report(std::ostream& out, std::span<const SummaryRow> rows) {
  out << "dataset\tmodel\tcl\tadv\tque\n";
  for (const SummaryRow& row : rows) {
    double best = row.after_attack_accuracy;
    for (const SummaryRow& other : rows)
      if (other.dataset == row.dataset) best = std::max(best, other.after_attack_accuracy);
    const bool mark = row.after_attack_accuracy == best;
    out << row.dataset << '\t' << row.model << '\t' << detail::format_double(row.clean_accuracy)
        << '\t' << detail::format_double(row.after_attack_accuracy) << (mark ? "*" : "") << '\t'
        << detail::format_double(row.mean_queries) << '\n';
  }
}

// ---------------------------------------------------------------------------
// flat key=value config files ('#' comments, blank lines ignored)

inline std::vector<std::pair<std::string, std::string>> parse_config_file(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq <= first)
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      if (a == std::string::npos) return std::string();
      const auto b = s.find_last_not_of(" \t");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    entries.emplace_back(key, value);
  }
  return entries;
}

}  // namespace zeroone
