#include "reclink/train.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "reclink/error.hpp"
#include "reclink/eval.hpp"
#include "reclink/index.hpp"
#include "reclink/linkage.hpp"

namespace reclink {

namespace {

// Fisher-Yates with our own bounded draw; std::shuffle and the standard
// distributions are not specified bit-for-bit across standard libraries.
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do r = rng();
    while (r >= limit);
    std::swap(v[i - 1], v[static_cast<std::size_t>(r % bound)]);
  }
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t epoch) {
  std::uint64_t x = seed ^ (epoch + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct TextClass {
  std::vector<std::string> members;
};

std::vector<TextClass> classes_of(const TrainingDataset& dataset) {
  std::vector<TextClass> out;
  if (const auto* pairs = std::get_if<std::vector<PositivePair>>(&dataset)) {
    for (const auto& p : *pairs) out.push_back({{p.left, p.right}});
  } else if (const auto* rows = std::get_if<std::vector<ClusterRow>>(&dataset)) {
    std::map<std::string, std::size_t> index;
    for (const auto& r : *rows) {
      auto [it, inserted] = index.try_emplace(r.cluster, out.size());
      if (inserted) out.emplace_back();
      out[it->second].members.push_back(r.text);
    }
  }
  return out;
}

bool is_labeled(const TrainingDataset& d) {
  return std::holds_alternative<std::vector<LabeledPair>>(d);
}

std::size_t dataset_size(const TrainingDataset& d) {
  return std::visit([](const auto& v) { return v.size(); }, d);
}

void check_dataset(const TrainingDataset& dataset, const TrainConfig& config) {
  if (dataset_size(dataset) == 0) throw UserError("training dataset is empty");
  if (config.loss == LossKind::kOnlineContrastive) {
    const auto* pairs = std::get_if<std::vector<LabeledPair>>(&dataset);
    if (!pairs) throw UserError("online_contrastive loss needs labelled pairs");
    bool pos = false, neg = false;
    for (const auto& p : *pairs) {
      if (p.label != 0 && p.label != 1) throw UserError("pair labels must be 0 or 1");
      (p.label ? pos : neg) = true;
    }
    if (!pos || !neg) {
      throw UserError("online_contrastive loss needs at least one positive and one negative pair");
    }
    return;
  }
  if (is_labeled(dataset)) {
    throw UserError("supcon loss needs positive pairs or cluster rows, not labelled pairs");
  }
  const auto classes = classes_of(dataset);
  const bool any_pair = std::any_of(classes.begin(), classes.end(),
                                    [](const TextClass& c) { return c.members.size() >= 2; });
  if (!any_pair) throw UserError("supcon loss needs at least one class with two or more texts");
}

std::string fmt_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UserError("config key '" + key + "': '" + value + "' is not a number");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw UserError("config key '" + key + "': '" + value + "' is not a non-negative integer");
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void TrainConfig::validate() const {
  if (!(temperature > 0.0)) throw UserError("temperature must be > 0");
  if (!(margin > 0.0 && margin < 2.0)) throw UserError("margin must be in (0, 2)");
  if (!(max_lr >= 0.0) || !std::isfinite(max_lr)) throw UserError("max_lr must be >= 0");
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0)) {
    throw UserError("warmup_fraction must be in (0, 1]");
  }
  if (batch_size < 2) throw UserError("batch_size must be >= 2");
  if (!(weight_decay >= 0.0)) throw UserError("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw UserError("adam betas must be in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw UserError("adam_eps must be > 0");
}

ParsedTrainConfig parse_train_config(std::string_view text,
                                     std::span<const std::string_view> extra_keys) {
  ParsedTrainConfig out;
  auto& c = out.config;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw UserError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(std::string_view(stripped).substr(0, eq));
    const auto value = trim(std::string_view(stripped).substr(eq + 1));

    if (key == "loss") {
      if (value == "supcon") c.loss = LossKind::kSupCon;
      else if (value == "online_contrastive") c.loss = LossKind::kOnlineContrastive;
      else throw UserError("config key 'loss': expected supcon or online_contrastive");
    } else if (key == "eval_mode") {
      if (value == "retrieval_top1") c.eval_mode = EvalMode::kRetrievalTop1;
      else if (value == "pairwise_f1") c.eval_mode = EvalMode::kPairwiseF1;
      else throw UserError("config key 'eval_mode': expected retrieval_top1 or pairwise_f1");
    } else if (key == "temperature") c.temperature = parse_double(key, value);
    else if (key == "margin") c.margin = parse_double(key, value);
    else if (key == "max_lr") c.max_lr = parse_double(key, value);
    else if (key == "warmup_fraction") c.warmup_fraction = parse_double(key, value);
    else if (key == "epochs") c.epochs = parse_uint(key, value);
    else if (key == "batch_size") c.batch_size = parse_uint(key, value);
    else if (key == "weight_decay") c.weight_decay = parse_double(key, value);
    else if (key == "adam_beta1") c.adam_beta1 = parse_double(key, value);
    else if (key == "adam_beta2") c.adam_beta2 = parse_double(key, value);
    else if (key == "adam_eps") c.adam_eps = parse_double(key, value);
    else if (key == "seed") c.seed = parse_uint(key, value);
    else if (std::find(extra_keys.begin(), extra_keys.end(), key) != extra_keys.end()) {
      out.extras.emplace_back(key, value);
    } else {
      throw UserError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  c.validate();
  return out;
}

std::string format_train_config(const TrainConfig& c) {
  std::string s;
  s += "loss = " + std::string(c.loss == LossKind::kSupCon ? "supcon" : "online_contrastive") + "\n";
  s += "temperature = " + fmt_double(c.temperature) + "\n";
  s += "margin = " + fmt_double(c.margin) + "\n";
  s += "max_lr = " + fmt_double(c.max_lr) + "\n";
  s += "warmup_fraction = " + fmt_double(c.warmup_fraction) + "\n";
  s += "epochs = " + std::to_string(c.epochs) + "\n";
  s += "batch_size = " + std::to_string(c.batch_size) + "\n";
  s += "weight_decay = " + fmt_double(c.weight_decay) + "\n";
  s += "adam_beta1 = " + fmt_double(c.adam_beta1) + "\n";
  s += "adam_beta2 = " + fmt_double(c.adam_beta2) + "\n";
  s += "adam_eps = " + fmt_double(c.adam_eps) + "\n";
  s += "seed = " + std::to_string(c.seed) + "\n";
  s += "eval_mode = " +
       std::string(c.eval_mode == EvalMode::kRetrievalTop1 ? "retrieval_top1" : "pairwise_f1") + "\n";
  return s;
}

std::vector<TrainingBatch> build_training_batches(const TrainingDataset& dataset,
                                                  const TrainConfig& config,
                                                  std::uint64_t epoch) {
  config.validate();
  check_dataset(dataset, config);
  std::mt19937_64 rng(mix(config.seed, epoch));
  std::vector<TrainingBatch> batches;

  if (const auto* pairs = std::get_if<std::vector<LabeledPair>>(&dataset)) {
    std::vector<std::size_t> order(pairs->size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      auto& b = batches.emplace_back();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i) {
        const auto& p = (*pairs)[order[i]];
        b.texts.push_back(p.left);
        b.texts.push_back(p.right);
        b.pair_labels.push_back(p.label);
      }
    }
    return batches;
  }

  auto classes = classes_of(dataset);
  std::vector<std::size_t> order(classes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle(order, rng);
  for (auto& c : classes) shuffle(c.members, rng);

  const std::size_t cap = config.batch_size;
  TrainingBatch current;
  const auto flush = [&] {
    if (!current.texts.empty()) batches.push_back(std::move(current));
    current = {};
  };
  for (auto class_id : order) {
    const auto& members = classes[class_id].members;
    std::size_t next = 0;
    while (next < members.size()) {
      const std::size_t room = cap - current.texts.size();
      const std::size_t left = members.size() - next;
      // Split a class only into pieces of two or more so each piece keeps a
      // positive pair; otherwise start a fresh batch.
      std::size_t take = 0;
      if (left <= room) take = left;
      else if (room >= 2) take = (left - room == 1 && room > 2) ? room - 1 : room;
      if (take == 0) {
        flush();
        continue;
      }
      for (std::size_t i = 0; i < take; ++i) {
        current.texts.push_back(members[next + i]);
        current.classes.push_back(class_id);
      }
      next += take;
      if (current.texts.size() == cap) flush();
    }
  }
  flush();

  // Fold batches without a positive pair into their predecessor.
  const auto has_pair = [](const TrainingBatch& b) {
    std::map<std::size_t, std::size_t> count;
    for (auto c : b.classes) {
      if (++count[c] >= 2) return true;
    }
    return false;
  };
  std::vector<TrainingBatch> merged;
  for (auto& b : batches) {
    if (!merged.empty() && !has_pair(b)) {
      auto& prev = merged.back();
      prev.texts.insert(prev.texts.end(), b.texts.begin(), b.texts.end());
      prev.classes.insert(prev.classes.end(), b.classes.begin(), b.classes.end());
    } else {
      merged.push_back(std::move(b));
    }
  }
  // A leading batch without pairs can only be followed by batches we could
  // fold it into; move it forward.
  if (merged.size() > 1 && !has_pair(merged.front())) {
    auto first = std::move(merged.front());
    merged.erase(merged.begin());
    auto& next = merged.front();
    next.texts.insert(next.texts.begin(), first.texts.begin(), first.texts.end());
    next.classes.insert(next.classes.begin(), first.classes.begin(), first.classes.end());
  }
  return merged;
}

double scheduled_lr(const TrainConfig& config, std::size_t step, std::size_t total_steps) {
  if (total_steps == 0) return 0.0;
  const double t = static_cast<double>(step);
  const double total = static_cast<double>(total_steps);
  const double warmup = config.warmup_fraction * total;
  if (t <= warmup) return config.max_lr * t / warmup;
  if (total <= warmup) return config.max_lr;
  return config.max_lr * std::max(0.0, (total - t) / (total - warmup));
}

AdamW::AdamW(std::size_t num_params, double beta1, double beta2, double eps,
             double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay),
      m_(num_params, 0.0), v_(num_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr,
                 std::size_t step) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw UserError("optimizer state does not match parameter shape");
  }
  const double t = static_cast<double>(step);
  const double bias1 = 1.0 - std::pow(beta1_, t);
  const double bias2_sqrt = std::sqrt(1.0 - std::pow(beta2_, t));
  const double step_size = lr / bias1;
  const double decay = 1.0 - lr * weight_decay_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
    const double denom = std::sqrt(v_[i]) / bias2_sqrt + eps_;
    params[i] = params[i] * decay - step_size * m_[i] / denom;
  }
}

EncodedBatch encode_for_training(const EncoderModel& model, std::span<const std::string> texts) {
  const auto dim = model.config().embed_dim;
  EncodedBatch out;
  out.features.reserve(texts.size());
  out.projected = Matrix<double>(texts.size(), dim);
  out.z = Matrix<double>(texts.size(), dim);
  out.norms.resize(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto f = featurize(texts[i], model.config());
    if (f.empty()) {
      throw TrainingError("training text '" + texts[i] + "' has no character n-grams");
    }
    model.project(f, out.projected.row(i));
    double l1 = 0.0;
    for (const auto& x : f) l1 += x.count;
    const double scale = 1.0 / std::max(l1, 1.0);
    for (auto& x : f) x.count *= scale;
    out.features.push_back(std::move(f));

    double sq = 0.0;
    for (double v : out.projected.row(i)) sq += v * v;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0)) throw TrainingError("projection collapsed to zero for '" + texts[i] + "'");
    out.norms[i] = norm;
    auto z = out.z.row(i);
    auto u = out.projected.row(i);
    for (std::size_t j = 0; j < dim; ++j) z[j] = u[j] / norm;
  }
  return out;
}

void backprop_to_weights(const EncodedBatch& batch, const Matrix<double>& grad_z,
                         Matrix<double>& grad_w) {
  const auto dim = grad_z.cols;
  std::vector<double> grad_u(dim);
  for (std::size_t i = 0; i < batch.features.size(); ++i) {
    // z = u / |u|  =>  dL/du = (g - z <z, g>) / |u|
    const auto g = grad_z.row(i);
    const auto z = batch.z.row(i);
    double zg = 0.0;
    for (std::size_t j = 0; j < dim; ++j) zg += z[j] * g[j];
    for (std::size_t j = 0; j < dim; ++j) grad_u[j] = (g[j] - z[j] * zg) / batch.norms[i];
    // u = W^T x  =>  dL/dW[b, :] += x_b * dL/du
    for (const auto& f : batch.features[i]) {
      auto row = grad_w.row(f.bucket);
      for (std::size_t j = 0; j < dim; ++j) row[j] += f.count * grad_u[j];
    }
  }
}

namespace {

// Loss of one batch; adds its gradient into `grad_w`. Pair batches missing
// either label contribute nothing.
double accumulate_batch(const EncoderModel& model, const TrainingBatch& batch,
                        const TrainConfig& config, Matrix<double>& grad_w) {
  const auto encoded = encode_for_training(model, batch.texts);
  LossResult loss;
  if (batch.is_pairs()) {
    const bool pos = std::count(batch.pair_labels.begin(), batch.pair_labels.end(), 1) > 0;
    const bool neg = std::count(batch.pair_labels.begin(), batch.pair_labels.end(), 0) > 0;
    if (!pos || !neg) return 0.0;
    loss = online_contrastive_loss(encoded.z, batch.pair_labels, config.margin);
  } else {
    loss = supcon_loss(encoded.z, batch.classes, config.temperature);
  }
  backprop_to_weights(encoded, loss.grad, grad_w);
  return loss.loss;
}

}  // namespace

BatchLoss batch_loss(const EncoderModel& model, const TrainingBatch& batch,
                     const TrainConfig& config) {
  BatchLoss out;
  out.grad_w = Matrix<double>(model.weights().rows, model.weights().cols);
  out.loss = accumulate_batch(model, batch, config, out.grad_w);
  return out;
}

double validation_metric(const EncoderModel& model, const TrainingDataset& dataset,
                         EvalMode mode) {
  if (mode == EvalMode::kPairwiseF1) {
    const auto* pairs = std::get_if<std::vector<LabeledPair>>(&dataset);
    if (!pairs) throw UserError("pairwise_f1 validation needs labelled pairs");
    std::vector<SerializedRecord> texts;
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      texts.push_back({static_cast<RowId>(2 * i), (*pairs)[i].left});
      texts.push_back({static_cast<RowId>(2 * i + 1), (*pairs)[i].right});
    }
    const auto emb = embed_batch(model, texts);
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const bool ok = emb.valid(2 * i) && emb.valid(2 * i + 1);
      scores.push_back(ok ? inner_product(emb.vector(2 * i), emb.vector(2 * i + 1)) : -1.0);
      labels.push_back((*pairs)[i].label);
    }
    return tune_threshold(scores, labels).f1;
  }

  std::vector<SerializedRecord> queries, keys;
  GoldLinks gold;
  if (const auto* pairs = std::get_if<std::vector<PositivePair>>(&dataset)) {
    for (std::size_t i = 0; i < pairs->size(); ++i) {
      const auto id = static_cast<RowId>(i);
      queries.push_back({id, (*pairs)[i].left});
      keys.push_back({id, (*pairs)[i].right});
      gold.push_back({id, id});
    }
  } else if (const auto* labeled = std::get_if<std::vector<LabeledPair>>(&dataset)) {
    for (const auto& p : *labeled) {
      if (!p.label) continue;
      const auto id = static_cast<RowId>(keys.size());
      queries.push_back({id, p.left});
      keys.push_back({id, p.right});
      gold.push_back({id, id});
    }
  } else {
    // First member of each cluster is its key; the rest query.
    const auto& rows = std::get<std::vector<ClusterRow>>(dataset);
    std::map<std::string, RowId> key_of;
    for (const auto& r : rows) {
      auto it = key_of.find(r.cluster);
      if (it == key_of.end()) {
        const auto id = static_cast<RowId>(keys.size());
        key_of.emplace(r.cluster, id);
        keys.push_back({id, r.text});
      } else {
        const auto qid = static_cast<RowId>(queries.size());
        queries.push_back({qid, r.text});
        gold.push_back({qid, it->second});
      }
    }
  }
  if (queries.empty()) throw UserError("validation set has no retrieval queries");

  const auto key_emb = embed_batch(model, keys);
  const auto query_emb = embed_batch(model, queries);
  if (key_emb.num_valid() == 0) {
    throw TrainingError("encoder produced no finite embedding for any validation key");
  }
  const auto index = VectorIndex::build(key_emb);
  const auto neighbours = index.search(query_emb, 1);
  LinkResult result;
  for (std::size_t q = 0; q < neighbours.size(); ++q) {
    if (neighbours[q].empty()) {
      result.unmatched.push_back({queries[q].row_id, UnmatchedReason::kInvalidEmbedding});
    } else {
      result.matches.push_back({queries[q].row_id, neighbours[q][0].key, neighbours[q][0].score, 1});
    }
  }
  return top1_accuracy(result, gold).value;
}

std::string TrainReport::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::ordered_json j{{"epoch", e.epoch},   {"loss", e.loss},
                             {"validation", e.validation}, {"lr", e.lr},
                             {"steps", e.steps},   {"selected", e.epoch == selected_epoch}};
    if (e.epoch == selected_epoch && !best_checkpoint.empty()) j["checkpoint"] = best_checkpoint;
    out += j.dump() + "\n";
  }
  return out;
}

TrainOutput train(const EncoderModel& model, const TrainingDataset& train_set,
                  const TrainingDataset& validation_set, const TrainConfig& config,
                  const std::optional<std::filesystem::path>& checkpoint) {
  config.validate();
  check_dataset(train_set, config);
  if (config.eval_mode == EvalMode::kPairwiseF1 && !is_labeled(validation_set)) {
    throw UserError("pairwise_f1 evaluation needs a labelled-pairs validation set");
  }
  if (dataset_size(validation_set) == 0) throw UserError("validation dataset is empty");

  TrainOutput out{model, {}};
  if (config.epochs == 0) return out;

  std::vector<std::vector<TrainingBatch>> schedule;
  std::size_t total_steps = 0;
  for (std::size_t e = 1; e <= config.epochs; ++e) {
    schedule.push_back(build_training_batches(train_set, config, e));
    total_steps += schedule.back().size();
  }

  EncoderModel current = model;
  auto& weights = current.mutable_weights();
  AdamW optimizer(weights.data.size(), config.adam_beta1, config.adam_beta2, config.adam_eps,
                  config.weight_decay);
  Matrix<double> grad(weights.rows, weights.cols);
  double best = -1.0;
  std::size_t step = 0;

  for (std::size_t e = 1; e <= config.epochs; ++e) {
    EpochRecord record;
    record.epoch = e;
    double loss_sum = 0.0;
    const auto& batches = schedule[e - 1];
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::fill(grad.data.begin(), grad.data.end(), 0.0);
      const double loss = accumulate_batch(current, batches[b], config, grad);
      double grad_sq = 0.0;
      for (double g : grad.data) grad_sq += g * g;
      if (!std::isfinite(loss) || !std::isfinite(grad_sq)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(e) +
                            ", batch " + std::to_string(b + 1) + " (loss " + fmt_double(loss) +
                            ", grad norm " + fmt_double(std::sqrt(grad_sq)) + ")");
      }
      ++step;
      record.lr = scheduled_lr(config, step, total_steps);
      optimizer.step(weights.data, grad.data, record.lr, step);
      loss_sum += loss;
    }
    if (!std::all_of(weights.data.begin(), weights.data.end(),
                     [](double w) { return std::isfinite(w); })) {
      throw TrainingError("weights became non-finite during epoch " + std::to_string(e));
    }
    record.steps = batches.size();
    record.loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
    record.validation = validation_metric(current, validation_set, config.eval_mode);
    if (record.validation > best) {
      best = record.validation;
      out.model = current;
      out.report.selected_epoch = e;
    }
    out.report.epochs.push_back(record);
  }
  if (checkpoint) {
    save_model(out.model, *checkpoint);
    out.report.best_checkpoint = checkpoint->string();
  }
  return out;
}

}  // namespace reclink
