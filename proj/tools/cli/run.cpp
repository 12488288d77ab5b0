#include "run.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <system_error>

#include "reclink/audit.hpp"
#include "reclink/error.hpp"
#include "reclink/eval.hpp"
#include "reclink/index.hpp"

namespace reclink::cli {
namespace {

// Everything a command produces, held back until the command succeeded.
struct Outputs {
  struct File {
    std::filesystem::path path;
    std::string text;
  };
  std::vector<File> files;
  std::string stdout_text;

  void add(const std::optional<std::filesystem::path>& path, std::string text) {
    if (path) files.push_back({*path, std::move(text)});
    else stdout_text += text;
  }
};

void commit(const Outputs& outputs, std::ostream& out) {
  for (const auto& f : outputs.files) {
    auto tmp = f.path;
    tmp += ".tmp";
    write_text_file(tmp, f.text);
    std::error_code ec;
    std::filesystem::rename(tmp, f.path, ec);
    if (ec) {
      std::filesystem::remove(tmp, ec);
      throw UserError("cannot write '" + f.path.string() + "'");
    }
  }
  out << outputs.stdout_text;
  out.flush();
}

std::string format_for(const Table& table, const std::optional<std::filesystem::path>& path) {
  if (path && format_from_path(*path) == TableFormat::kJsonl) return format_jsonl(table);
  return format_csv(table);
}

std::unique_ptr<EmbeddingProvider> provider_for(const CommandPlan& plan) {
  if (!plan.provider) throw UserError("--model is required");
  if (const auto* r = std::get_if<RemoteProviderSpec>(&*plan.provider)) {
    return std::make_unique<RemoteProvider>(*r, plan.api_key);
  }
  return make_provider(*plan.provider);
}

double parse_score(const Table& t, std::size_t row, std::size_t col) {
  const auto& text = t.cell(row, col);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw UserError("row " + std::to_string(row + 1) + ", column '" + t.columns()[col] +
                    "': expected a number, got '" + text + "'");
  }
  return v;
}

int parse_label(const Table& t, std::size_t row, std::size_t col) {
  const auto& text = t.cell(row, col);
  if (text == "0") return 0;
  if (text == "1") return 1;
  throw UserError("row " + std::to_string(row + 1) + ", column '" + t.columns()[col] +
                  "': expected 0 or 1, got '" + text + "'");
}

RowId parse_row_id(const Table& t, std::size_t row, std::size_t col) {
  const auto& text = t.cell(row, col);
  RowId v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || v < 0) {
    throw UserError("row " + std::to_string(row + 1) + ", column '" + t.columns()[col] +
                    "': expected a row id, got '" + text + "'");
  }
  return v;
}

void summarize_links(const LinkResult& links, std::size_t queries, std::ostream& log) {
  std::vector<bool> matched(queries, false);
  for (const auto& m : links.matches) {
    if (m.query >= 0 && static_cast<std::size_t>(m.query) < queries) matched[m.query] = true;
  }
  const auto n_matched = static_cast<std::size_t>(std::count(matched.begin(), matched.end(), true));
  log << "  " << queries << " queries, " << n_matched << " matched, " << links.matches.size()
      << " links, " << links.unmatched.size() << " unmatched\n";
  std::map<std::string_view, std::size_t> reasons;
  for (const auto& u : links.unmatched) ++reasons[to_string(u.reason)];
  for (const auto& [reason, n] : reasons) log << "  unmatched " << reason << ": " << n << "\n";
}

int run_merge(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  const auto left = load_table(plan.left);
  const auto right = load_table(plan.right);
  auto provider = provider_for(plan);
  log << (plan.subcommand == Subcommand::kAggregate ? "aggregate" : "merge") << " "
      << to_string(plan.merge.merge_type) << ": " << left.num_rows() << " left rows, "
      << right.num_rows() << " right rows, provider " << provider->describe() << "\n";
  MergeOutput result = plan.subcommand == Subcommand::kAggregate
                           ? aggregate_rows(left, right, plan.merge.left_selector(),
                                            plan.merge.right_selector(), *provider, plan.merge.k,
                                            plan.merge.threshold)
                           : merge(left, right, plan.merge, *provider);
  const auto queries =
      plan.merge.merge_type == MergeType::kOneToMany ? right.num_rows() : left.num_rows();
  summarize_links(result.links, queries, log);

  Outputs outputs;
  outputs.add(plan.out, format_for(result.table, plan.out));
  if (plan.audit_out) outputs.add(plan.audit_out, format_link_audit(result.links));
  commit(outputs, out);
  log << "  wrote " << result.table.num_rows() << " rows\n";
  return 0;
}

int run_dedup(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  const auto table = load_table(plan.input);
  auto provider = provider_for(plan);
  log << "dedup: " << table.num_rows() << " rows, provider " << provider->describe() << "\n";
  auto result = dedup(table, plan.on, *provider, plan.cluster, plan.merge.separator);

  Outputs outputs;
  outputs.add(plan.out, format_for(result.table, plan.out));
  if (plan.audit_out) outputs.add(plan.audit_out, format_cluster_audit(result.assignment));
  commit(outputs, out);
  log << "  " << result.assignment.num_clusters() << " clusters, " << result.table.num_rows()
      << " survivors, " << table.num_rows() - result.table.num_rows() << " removed\n";
  return 0;
}

TrainingDataset load_training_set(const CommandPlan& plan, const std::filesystem::path& path) {
  const auto table = load_table(path);
  const auto& sep = plan.merge.separator;
  switch (plan.train.layout) {
    case TrainLayout::kClusterRows: {
      const auto col = table.column_index(plan.train.cluster_id_col);
      std::vector<ClusterRow> rows;
      for (std::size_t i = 0; i < table.num_rows(); ++i) {
        rows.push_back({table.cell(i, col), serialize_record(table, i, plan.on, sep).text});
      }
      return rows;
    }
    case TrainLayout::kPositivePairs: {
      std::vector<PositivePair> rows;
      for (std::size_t i = 0; i < table.num_rows(); ++i) {
        rows.push_back({serialize_record(table, i, plan.merge.left_selector(), sep).text,
                        serialize_record(table, i, plan.merge.right_selector(), sep).text});
      }
      return rows;
    }
    case TrainLayout::kLabeledPairs: {
      const auto col = table.column_index(plan.train.label_col);
      std::vector<LabeledPair> rows;
      for (std::size_t i = 0; i < table.num_rows(); ++i) {
        rows.push_back({serialize_record(table, i, plan.merge.left_selector(), sep).text,
                        serialize_record(table, i, plan.merge.right_selector(), sep).text,
                        parse_label(table, i, col)});
      }
      return rows;
    }
  }
  throw std::logic_error("unknown training layout");
}

constexpr std::array<std::string_view, 5> kEncoderKeys = {"hash_buckets", "embed_dim", "ngram_min",
                                                          "ngram_max", "encoder_seed"};

std::uint64_t parse_extra(std::string_view key, const std::string& value) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
    throw UserError("config key " + std::string(key) + ": expected an integer, got '" + value + "'");
  }
  return v;
}

int run_train(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  ParsedTrainConfig parsed;
  if (plan.train.config_path) {
    const auto text = read_text_file(*plan.train.config_path);
    try {
      parsed = parse_train_config(text, kEncoderKeys);
    } catch (const UserError& e) {
      throw UserError(plan.train.config_path->string() + ": " + e.what());
    }
  }
  auto config = parsed.config;
  if (plan.seed) config.seed = *plan.seed;
  if (plan.train.epochs) config.epochs = *plan.train.epochs;
  if (plan.train.max_lr) config.max_lr = *plan.train.max_lr;
  config.validate();

  const auto& spec = std::get<BuiltinProviderSpec>(*plan.provider);
  EncoderModel model = [&] {
    if (!spec.model_path.empty()) {
      if (!parsed.extras.empty()) {
        throw UserError("config key " + parsed.extras.front().first +
                        " only applies to a fresh builtin: model");
      }
      return load_model(spec.model_path);
    }
    EncoderConfig ec;
    ec.seed = config.seed;
    for (const auto& [key, value] : parsed.extras) {
      const auto v = parse_extra(key, value);
      if (key == "hash_buckets") ec.hash_buckets = v;
      else if (key == "embed_dim") ec.embed_dim = v;
      else if (key == "ngram_min") ec.ngram_min = static_cast<int>(v);
      else if (key == "ngram_max") ec.ngram_max = static_cast<int>(v);
      else ec.seed = v;
    }
    const auto& t = plan.train;
    if (t.hash_buckets) ec.hash_buckets = *t.hash_buckets;
    if (t.embed_dim) ec.embed_dim = *t.embed_dim;
    if (t.ngram_min) ec.ngram_min = static_cast<int>(*t.ngram_min);
    if (t.ngram_max) ec.ngram_max = static_cast<int>(*t.ngram_max);
    ec.validate();
    return EncoderModel::initialize(ec);
  }();

  const auto train_set = load_training_set(plan, plan.input);
  const auto val_set = load_training_set(plan, plan.val);
  const auto& mc = model.config();
  log << "train: " << std::visit([](const auto& v) { return v.size(); }, train_set)
      << " training rows, " << std::visit([](const auto& v) { return v.size(); }, val_set)
      << " validation rows, encoder " << mc.hash_buckets << "x" << mc.embed_dim << ", "
      << config.epochs << " epochs\n";

  auto result = train(model, train_set, val_set, config);
  for (const auto& e : result.report.epochs) {
    log << "  epoch " << e.epoch << " loss " << e.loss << " validation " << e.validation
        << " lr " << e.lr << "\n";
  }
  const auto& path = *plan.out;
  result.report.best_checkpoint = path.string();
  Outputs outputs;
  if (plan.report_out) outputs.add(plan.report_out, result.report.to_jsonl());
  save_model(result.model, path);
  commit(outputs, out);
  log << "  selected epoch " << result.report.selected_epoch << ", model written to " << path.string()
      << "\n";
  return 0;
}

int run_tune(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  const auto table = load_table(plan.input);
  const auto label_col = table.column_index(plan.eval.label_col);
  std::vector<double> scores(table.num_rows());
  std::vector<int> labels(table.num_rows());
  for (std::size_t i = 0; i < table.num_rows(); ++i) labels[i] = parse_label(table, i, label_col);

  if (!plan.provider) {
    const auto col = table.column_index(plan.eval.score_col);
    for (std::size_t i = 0; i < table.num_rows(); ++i) scores[i] = parse_score(table, i, col);
    log << "tune-threshold: " << table.num_rows() << " scored pairs\n";
  } else {
    auto provider = provider_for(plan);
    log << "tune-threshold: " << table.num_rows() << " pairs, provider " << provider->describe()
        << "\n";
    const auto left = serialize_table(table, plan.merge.left_selector(), plan.merge.separator);
    const auto right = serialize_table(table, plan.merge.right_selector(), plan.merge.separator);
    const auto le = embed_batch(*provider, left);
    const auto re = embed_batch(*provider, right);
    std::size_t invalid = 0;
    for (std::size_t i = 0; i < table.num_rows(); ++i) {
      if (le.valid(i) && re.valid(i)) {
        scores[i] = inner_product(le.vector(i), re.vector(i));
      } else {
        scores[i] = -1.0;
        ++invalid;
      }
    }
    if (invalid) log << "  " << invalid << " pairs without a valid embedding scored -1\n";
  }
  const auto choice = tune_threshold(scores, labels);
  const auto report = pairwise_f1(scores, labels, choice.threshold);
  Outputs outputs;
  outputs.add(plan.out, report.to_json_line());
  commit(outputs, out);
  log << "  " << report.to_key_value() << "\n";
  return 0;
}

int run_eval(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  EvalReport report;
  if (plan.eval.metric == EvalMetric::kTop1) {
    const auto links = load_link_audit(plan.input);
    const auto gold_table = load_table(plan.eval.gold);
    const auto qc = gold_table.column_index("query_id");
    const auto kc = gold_table.column_index("key_id");
    GoldLinks gold;
    for (std::size_t i = 0; i < gold_table.num_rows(); ++i) {
      gold.push_back({parse_row_id(gold_table, i, qc), parse_row_id(gold_table, i, kc)});
    }
    report = top1_accuracy(links, gold);
  } else {
    const auto table = load_table(plan.input);
    const auto sc = table.column_index(plan.eval.score_col);
    const auto lc = table.column_index(plan.eval.label_col);
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < table.num_rows(); ++i) {
      scores.push_back(parse_score(table, i, sc));
      labels.push_back(parse_label(table, i, lc));
    }
    report = pairwise_f1(scores, labels, *plan.threshold);
  }
  Outputs outputs;
  outputs.add(plan.out, report.to_json_line());
  commit(outputs, out);
  log << "eval: " << report.to_key_value() << "\n";
  return 0;
}

int dispatch(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  switch (plan.subcommand) {
    case Subcommand::kMerge:
    case Subcommand::kAggregate:
      return run_merge(plan, out, log);
    case Subcommand::kDedup:
      return run_dedup(plan, out, log);
    case Subcommand::kTrain:
      return run_train(plan, out, log);
    case Subcommand::kTuneThreshold:
      return run_tune(plan, out, log);
    case Subcommand::kEval:
      return run_eval(plan, out, log);
  }
  return 2;
}

}  // namespace

int run(const CommandPlan& plan, std::ostream& out, std::ostream& log) {
  try {
    return dispatch(plan, out, log);
  } catch (const UserError& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  } catch (const ProviderError& e) {
    log << "provider error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    log << "training error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << "\n";
    return 2;
  }
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& log,
               const EnvLookup& env) {
  CommandPlan plan;
  try {
    plan = parse_and_validate(args, env);
  } catch (const HelpRequested& h) {
    out << h.text;
    return 0;
  } catch (const UserError& e) {
    log << "error: " << e.what() << "\n";
    if (args.empty()) log << "run 'reclink --help' for usage\n";
    return 1;
  }
  return run(plan, out, log);
}

}  // namespace reclink::cli
