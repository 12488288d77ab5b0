#include "command_plan.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "reclink/error.hpp"

namespace reclink::cli {
namespace {

using Values = std::map<std::string, std::string>;

struct Flags {
  Values values;
  std::multimap<std::string, CLI::Option*> options;
  std::multimap<const CLI::App*, std::string> required;

  void add(CLI::App* app, const std::string& name, const std::string& help,
           bool required = false) {
    auto* opt = app->add_option("--" + name, values[name], help);
    if (required) this->required.emplace(app, name);
    options.emplace(name, opt);
  }
  bool has(const std::string& name) const {
    auto [lo, hi] = options.equal_range(name);
    return std::any_of(lo, hi, [](const auto& kv) { return kv.second->count() > 0; });
  }
  const std::string& get(const std::string& name) const { return values.at(name); }

  // Checked after parsing so that unknown flags are reported first.
  void check_required(const CLI::App* app) const {
    auto [lo, hi] = required.equal_range(app);
    for (auto it = lo; it != hi; ++it) {
      if (!has(it->second)) throw UserError("--" + it->second + " is required");
    }
  }
};

[[noreturn]] void flag_error(std::string_view flag, const std::string& what) {
  throw UserError("--" + std::string(flag) + ": " + what);
}

std::uint64_t parse_uint(std::string_view flag, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    flag_error(flag, "expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::size_t parse_positive(std::string_view flag, const std::string& text) {
  const auto v = parse_uint(flag, text);
  if (v == 0) flag_error(flag, "must be at least 1");
  return static_cast<std::size_t>(v);
}

double parse_real(std::string_view flag, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    flag_error(flag, "expected a number, got '" + text + "'");
  }
  return v;
}

double parse_similarity(std::string_view flag, const std::string& text) {
  const double v = parse_real(flag, text);
  if (v < -1.0 || v > 1.0) flag_error(flag, "cosine similarity must lie in [-1, 1]");
  return v;
}

ColumnSelector parse_selector(std::string_view flag, const std::string& text) {
  auto sel = ColumnSelector::parse(text);
  if (sel.names.empty() ||
      std::any_of(sel.names.begin(), sel.names.end(), [](const auto& n) { return n.empty(); })) {
    flag_error(flag, "expected a comma-separated list of column names");
  }
  return sel;
}

void add_provider_flags(Flags& f, CLI::App* app, bool model_required) {
  f.add(app, "model", "builtin:<model file>, builtin: (fresh encoder) or remote:<model>@<url>",
        model_required);
  f.add(app, "api-key-env", "Environment variable holding the remote API key");
  f.add(app, "remote-batch-size", "Texts per remote request");
  f.add(app, "remote-timeout", "Seconds per remote request");
  f.add(app, "hash-buckets", "Fresh encoder: hashed feature buckets");
  f.add(app, "embed-dim", "Fresh encoder: embedding dimension");
  f.add(app, "ngram-min", "Fresh encoder: shortest character n-gram");
  f.add(app, "ngram-max", "Fresh encoder: longest character n-gram");
  f.add(app, "seed", "Random seed");
  f.add(app, "separator", "Token placed between serialized fields");
}

void add_merge_flags(Flags& f, CLI::App* app) {
  f.add(app, "left", "Left table (csv or jsonl)", true);
  f.add(app, "right", "Right table (csv or jsonl)", true);
  f.add(app, "on", "Columns shared by both tables");
  f.add(app, "left-on", "Left columns");
  f.add(app, "right-on", "Right columns");
  f.add(app, "k", "Neighbours per query");
  f.add(app, "threshold", "Minimum cosine similarity of a match");
  f.add(app, "out", "Output table (stdout when absent)");
  f.add(app, "audit-out", "Link audit jsonl");
  f.add(app, "threads", "Search threads");
}

EncoderConfig encoder_config(const Flags& f, std::uint64_t seed) {
  EncoderConfig c;
  c.seed = seed;
  if (f.has("hash-buckets")) c.hash_buckets = parse_positive("hash-buckets", f.get("hash-buckets"));
  if (f.has("embed-dim")) c.embed_dim = parse_positive("embed-dim", f.get("embed-dim"));
  if (f.has("ngram-min")) c.ngram_min = static_cast<int>(parse_positive("ngram-min", f.get("ngram-min")));
  if (f.has("ngram-max")) c.ngram_max = static_cast<int>(parse_positive("ngram-max", f.get("ngram-max")));
  try {
    c.validate();
  } catch (const UserError& e) {
    throw UserError(std::string("fresh encoder flags: ") + e.what());
  }
  return c;
}

void resolve_provider(CommandPlan& plan, const Flags& f, const EnvLookup& env) {
  if (!f.has("model")) return;
  auto spec = parse_model_spec(f.get("model"));
  const bool encoder_flags = f.has("hash-buckets") || f.has("embed-dim") ||
                             f.has("ngram-min") || f.has("ngram-max");
  if (auto* b = std::get_if<BuiltinProviderSpec>(&spec)) {
    if (encoder_flags && !b->model_path.empty()) {
      throw UserError("--hash-buckets/--embed-dim/--ngram-* only apply to a fresh builtin: model");
    }
    b->config = encoder_config(f, plan.seed.value_or(0));
  } else {
    auto& r = std::get<RemoteProviderSpec>(spec);
    if (encoder_flags) throw UserError("--hash-buckets/--embed-dim/--ngram-* need a builtin model");
    if (f.has("api-key-env")) r.api_key_env = f.get("api-key-env");
    if (f.has("remote-batch-size")) {
      r.batch_size = parse_positive("remote-batch-size", f.get("remote-batch-size"));
    }
    if (f.has("remote-timeout")) {
      r.timeout_seconds =
          static_cast<int>(parse_positive("remote-timeout", f.get("remote-timeout")));
    }
    const auto key = env(r.api_key_env);
    if (!key || key->empty()) {
      flag_error("model", "remote provider needs an API key in the environment variable " +
                              r.api_key_env + " (see --api-key-env)");
    }
    plan.api_key = *key;
  }
  plan.provider = std::move(spec);
}

void resolve_pair_selectors(MergeSpec& spec, const Flags& f) {
  const bool on = f.has("on");
  const bool lo = f.has("left-on");
  const bool ro = f.has("right-on");
  if (on && (lo || ro)) throw UserError("--on conflicts with --left-on/--right-on");
  if (lo != ro) throw UserError(lo ? "--left-on requires --right-on" : "--right-on requires --left-on");
  if (on) {
    spec.on = parse_selector("on", f.get("on"));
  } else if (lo) {
    spec.left_on = parse_selector("left-on", f.get("left-on"));
    spec.right_on = parse_selector("right-on", f.get("right-on"));
  } else {
    throw UserError("one of --on or --left-on/--right-on is required");
  }
}

void resolve_common(CommandPlan& plan, const Flags& f) {
  if (f.has("seed")) plan.seed = parse_uint("seed", f.get("seed"));
  if (f.has("out")) plan.out = f.get("out");
  if (f.has("audit-out")) plan.audit_out = f.get("audit-out");
  if (f.has("report-out")) plan.report_out = f.get("report-out");
  if (f.has("separator")) {
    if (f.get("separator").empty()) flag_error("separator", "must not be empty");
    plan.merge.separator.token = f.get("separator");
  }
  if (f.has("threads")) plan.merge.search.threads = parse_positive("threads", f.get("threads"));
  if (f.has("threshold")) {
    plan.threshold = parse_real("threshold", f.get("threshold"));
  }
}

void resolve_merge(CommandPlan& plan, const Flags& f, bool aggregate) {
  plan.left = f.get("left");
  plan.right = f.get("right");
  auto& spec = plan.merge;
  resolve_pair_selectors(spec, f);
  if (aggregate) {
    spec.merge_type = MergeType::kManyToMany;
  } else if (f.has("merge-type")) {
    try {
      spec.merge_type = parse_merge_type(f.get("merge-type"));
    } catch (const UserError&) {
      flag_error("merge-type", "expected 1:1, 1:m, m:1 or m:m, got '" + f.get("merge-type") + "'");
    }
  }
  if (f.has("k")) spec.k = parse_positive("k", f.get("k"));
  if (spec.merge_type == MergeType::kOneToOne && spec.k != 1) {
    flag_error("merge-type", "1:1 requires --k 1 (got " + std::to_string(spec.k) + ")");
  }
  spec.threshold = plan.threshold;
  if (f.has("blocking-vars")) spec.blocking = parse_selector("blocking-vars", f.get("blocking-vars"));
  spec.validate();
}

void resolve_dedup(CommandPlan& plan, const Flags& f) {
  plan.input = f.get("input");
  plan.on = parse_selector("on", f.get("on"));
  auto& c = plan.cluster;
  if (f.has("cluster-algorithm")) {
    try {
      c.algorithm = parse_cluster_algorithm(f.get("cluster-algorithm"));
    } catch (const UserError&) {
      flag_error("cluster-algorithm",
                 "expected slink, dbscan or agglomerative, got '" + f.get("cluster-algorithm") + "'");
    }
  }
  if (f.has("cluster-threshold")) {
    if (c.algorithm == ClusterAlgorithm::kDbscan) {
      throw UserError("--cluster-threshold does not apply to dbscan; use --dbscan-similarity");
    }
    c.threshold = 1.0 - parse_similarity("cluster-threshold", f.get("cluster-threshold"));
  }
  if (f.has("linkage")) {
    if (c.algorithm != ClusterAlgorithm::kAgglomerative) {
      throw UserError("--linkage needs --cluster-algorithm agglomerative");
    }
    try {
      c.linkage = parse_linkage_mode(f.get("linkage"));
    } catch (const UserError&) {
      flag_error("linkage", "expected single, complete or average, got '" + f.get("linkage") + "'");
    }
  }
  if (f.has("dbscan-similarity") || f.has("min-samples")) {
    if (c.algorithm != ClusterAlgorithm::kDbscan) {
      throw UserError("--dbscan-similarity/--min-samples need --cluster-algorithm dbscan");
    }
    if (f.has("dbscan-similarity")) {
      c.eps = 1.0 - parse_similarity("dbscan-similarity", f.get("dbscan-similarity"));
    }
    if (f.has("min-samples")) c.min_samples = parse_positive("min-samples", f.get("min-samples"));
  }
  c.validate();
}

void resolve_train(CommandPlan& plan, const Flags& f) {
  plan.input = f.get("input");
  plan.val = f.get("val");
  auto& t = plan.train;
  if (f.has("cluster-id-col")) {
    if (f.has("label-col") || f.has("left-on") || f.has("right-on")) {
      throw UserError("--cluster-id-col conflicts with --label-col/--left-on/--right-on");
    }
    if (!f.has("on")) throw UserError("--cluster-id-col requires --on (the text columns)");
    t.layout = TrainLayout::kClusterRows;
    t.cluster_id_col = f.get("cluster-id-col");
    plan.on = parse_selector("on", f.get("on"));
  } else {
    if (!f.has("left-on") && !f.has("on")) {
      throw UserError("train needs --cluster-id-col with --on, or --left-on/--right-on");
    }
    resolve_pair_selectors(plan.merge, f);
    t.layout = f.has("label-col") ? TrainLayout::kLabeledPairs : TrainLayout::kPositivePairs;
    if (f.has("label-col")) t.label_col = f.get("label-col");
  }
  if (f.has("config")) t.config_path = f.get("config");
  if (f.has("epochs")) t.epochs = parse_uint("epochs", f.get("epochs"));
  if (f.has("max-lr")) {
    t.max_lr = parse_real("max-lr", f.get("max-lr"));
    if (*t.max_lr <= 0) flag_error("max-lr", "must be positive");
  }
  if (f.has("hash-buckets")) t.hash_buckets = parse_positive("hash-buckets", f.get("hash-buckets"));
  if (f.has("embed-dim")) t.embed_dim = parse_positive("embed-dim", f.get("embed-dim"));
  if (f.has("ngram-min")) t.ngram_min = parse_positive("ngram-min", f.get("ngram-min"));
  if (f.has("ngram-max")) t.ngram_max = parse_positive("ngram-max", f.get("ngram-max"));

  const auto& b = std::get<BuiltinProviderSpec>(*plan.provider);
  const bool encoder_flags = t.hash_buckets || t.embed_dim || t.ngram_min || t.ngram_max;
  if (encoder_flags && !b.model_path.empty()) {
    throw UserError("--hash-buckets/--embed-dim/--ngram-* only apply to a fresh builtin: model");
  }
}

void resolve_tune(CommandPlan& plan, const Flags& f) {
  plan.input = f.get("input");
  if (f.has("label-col")) plan.eval.label_col = f.get("label-col");
  if (f.has("score-col")) {
    if (f.has("model") || f.has("on") || f.has("left-on") || f.has("right-on")) {
      throw UserError("--score-col conflicts with --model/--on/--left-on/--right-on");
    }
    plan.eval.score_col = f.get("score-col");
    return;
  }
  if (!f.has("model")) {
    throw UserError("tune-threshold needs --score-col, or --model with --on or --left-on/--right-on");
  }
  resolve_pair_selectors(plan.merge, f);
}

void resolve_eval(CommandPlan& plan, const Flags& f) {
  plan.input = f.get("input");
  auto& e = plan.eval;
  const std::string metric = f.has("metric") ? f.get("metric") : "top1";
  if (metric == "top1") {
    e.metric = EvalMetric::kTop1;
    if (!f.has("gold")) throw UserError("--metric top1 requires --gold");
    if (f.has("score-col") || f.has("label-col") || plan.threshold) {
      throw UserError("--score-col/--label-col/--threshold only apply to --metric pairwise-f1");
    }
    e.gold = f.get("gold");
  } else if (metric == "pairwise-f1") {
    e.metric = EvalMetric::kPairwiseF1;
    if (f.has("gold")) throw UserError("--gold only applies to --metric top1");
    if (!plan.threshold) throw UserError("--metric pairwise-f1 requires --threshold");
    if (f.has("score-col")) e.score_col = f.get("score-col");
    if (f.has("label-col")) e.label_col = f.get("label-col");
  } else {
    flag_error("metric", "expected top1 or pairwise-f1, got '" + metric + "'");
  }
}

}  // namespace

ProviderSpec parse_model_spec(std::string_view text) {
  constexpr std::string_view builtin = "builtin:";
  constexpr std::string_view remote = "remote:";
  if (text.starts_with(builtin)) {
    BuiltinProviderSpec spec;
    spec.model_path = std::string(text.substr(builtin.size()));
    return spec;
  }
  if (text.starts_with(remote)) {
    const auto rest = text.substr(remote.size());
    const auto at = rest.find('@');
    if (at == std::string_view::npos || at == 0 || at + 1 == rest.size()) {
      flag_error("model", "expected remote:<model>@<endpoint>, got '" + std::string(text) + "'");
    }
    RemoteProviderSpec spec;
    spec.model = std::string(rest.substr(0, at));
    spec.endpoint = std::string(rest.substr(at + 1));
    if (!spec.endpoint.starts_with("http://") && !spec.endpoint.starts_with("https://")) {
      flag_error("model", "remote endpoint must start with http:// or https://");
    }
    return spec;
  }
  flag_error("model", "expected builtin:<path> or remote:<model>@<endpoint>, got '" +
                          std::string(text) + "'");
}

CommandPlan parse_and_validate(const std::vector<std::string>& args, const EnvLookup& env) {
  CLI::App app{"reclink: record linkage with embeddings", "reclink"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  Flags f;

  auto* merge = app.add_subcommand("merge", "Link rows of --left to rows of --right");
  add_merge_flags(f, merge);
  f.add(merge, "merge-type", "1:1, 1:m, m:1 (default) or m:m");
  f.add(merge, "blocking-vars", "Only match rows with equal values in these columns");
  add_provider_flags(f, merge, true);

  auto* aggregate = app.add_subcommand("aggregate", "Map fine --left rows to coarse --right rows");
  add_merge_flags(f, aggregate);
  add_provider_flags(f, aggregate, true);

  auto* dedup = app.add_subcommand("dedup", "Drop near-duplicate rows of --input");
  f.add(dedup, "input", "Input table", true);
  f.add(dedup, "on", "Columns to compare", true);
  f.add(dedup, "cluster-threshold", "Similarity at which rows are merged (default 0.7)");
  f.add(dedup, "cluster-algorithm", "slink (default), dbscan or agglomerative");
  f.add(dedup, "linkage", "Agglomerative linkage: single, complete or average");
  f.add(dedup, "dbscan-similarity", "DBSCAN neighbourhood similarity (default 0.7)");
  f.add(dedup, "min-samples", "DBSCAN core point size (default 2)");
  f.add(dedup, "out", "Surviving rows (stdout when absent)");
  f.add(dedup, "audit-out", "Cluster audit jsonl");
  add_provider_flags(f, dedup, true);

  auto* train = app.add_subcommand("train", "Fine-tune a builtin encoder");
  f.add(train, "input", "Training table", true);
  f.add(train, "val", "Validation table", true);
  f.add(train, "on", "Text columns (cluster rows) or columns shared by pairs");
  f.add(train, "left-on", "Left text columns of pairs");
  f.add(train, "right-on", "Right text columns of pairs");
  f.add(train, "cluster-id-col", "Cluster id column");
  f.add(train, "label-col", "0/1 label column of labelled pairs");
  f.add(train, "model", "Initial builtin model (default builtin:)");
  f.add(train, "out", "Trained model file", true);
  f.add(train, "report-out", "Per-epoch report jsonl");
  f.add(train, "config", "Training config file");
  f.add(train, "seed", "Training seed");
  f.add(train, "epochs", "Number of epochs");
  f.add(train, "max-lr", "Peak learning rate");
  f.add(train, "hash-buckets", "Fresh encoder: hashed feature buckets");
  f.add(train, "embed-dim", "Fresh encoder: embedding dimension");
  f.add(train, "ngram-min", "Fresh encoder: shortest character n-gram");
  f.add(train, "ngram-max", "Fresh encoder: longest character n-gram");
  f.add(train, "separator", "Token placed between serialized fields");

  auto* tune = app.add_subcommand("tune-threshold", "Pick the F1-maximizing similarity threshold");
  f.add(tune, "input", "Labelled pairs table", true);
  f.add(tune, "score-col", "Use this score column instead of embedding");
  f.add(tune, "label-col", "0/1 label column (default label)");
  f.add(tune, "on", "Columns shared by both sides");
  f.add(tune, "left-on", "Left columns");
  f.add(tune, "right-on", "Right columns");
  f.add(tune, "out", "Result jsonl (stdout when absent)");
  add_provider_flags(f, tune, false);

  auto* eval = app.add_subcommand("eval", "Score linkage output");
  f.add(eval, "metric", "top1 (default) or pairwise-f1");
  f.add(eval, "input", "Link audit jsonl (top1) or scored pairs table (pairwise-f1)", true);
  f.add(eval, "gold", "Gold links table with query_id,key_id");
  f.add(eval, "score-col", "Score column (default score)");
  f.add(eval, "label-col", "Label column (default label)");
  f.add(eval, "threshold", "Similarity threshold for pairwise-f1");
  f.add(eval, "out", "Report jsonl (stdout when absent)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested{app.help()};
  } catch (const CLI::CallForAllHelp&) {
    throw HelpRequested{app.help("", CLI::AppFormatMode::All)};
  } catch (const CLI::ParseError& e) {
    throw UserError(e.what());
  }

  for (const auto* sub : app.get_subcommands()) f.check_required(sub);

  CommandPlan plan;
  resolve_common(plan, f);
  if (merge->parsed()) {
    plan.subcommand = Subcommand::kMerge;
    resolve_merge(plan, f, false);
  } else if (aggregate->parsed()) {
    plan.subcommand = Subcommand::kAggregate;
    if (f.has("merge-type")) throw UserError("--merge-type does not apply to aggregate");
    resolve_merge(plan, f, true);
  } else if (dedup->parsed()) {
    plan.subcommand = Subcommand::kDedup;
    resolve_dedup(plan, f);
  } else if (train->parsed()) {
    plan.subcommand = Subcommand::kTrain;
    plan.provider = f.has("model") ? parse_model_spec(f.get("model")) : BuiltinProviderSpec{};
    if (!std::holds_alternative<BuiltinProviderSpec>(*plan.provider)) {
      flag_error("model", "only builtin encoders can be trained");
    }
    resolve_train(plan, f);
    return plan;
  } else if (tune->parsed()) {
    plan.subcommand = Subcommand::kTuneThreshold;
    resolve_tune(plan, f);
  } else {
    plan.subcommand = Subcommand::kEval;
    resolve_eval(plan, f);
  }
  resolve_provider(plan, f, env);
  return plan;
}

}  // namespace reclink::cli
