#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "reclink/encoder.hpp"

namespace reclink {

enum class LossKind { kSupCon, kOnlineContrastive };
enum class EvalMode { kRetrievalTop1, kPairwiseF1 };

struct TrainConfig {
  LossKind loss = LossKind::kSupCon;
  double temperature = 0.07;
  double margin = 0.5;
  double max_lr = 2e-6;
  double warmup_fraction = 1.0;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  EvalMode eval_mode = EvalMode::kRetrievalTop1;

  void validate() const;
};

// Flat "key = value" document; '#' starts a comment. Keys are the TrainConfig
// field names. Unknown keys are rejected unless listed in `extra_keys`, in
// which case their values are returned in `extras`.
struct ParsedTrainConfig {
  TrainConfig config;
  std::vector<std::pair<std::string, std::string>> extras;
};
ParsedTrainConfig parse_train_config(std::string_view text,
                                     std::span<const std::string_view> extra_keys = {});
std::string format_train_config(const TrainConfig& config);

struct PositivePair {
  std::string left;
  std::string right;
};
struct LabeledPair {
  std::string left;
  std::string right;
  int label = 0;  // 1 = match
};
struct ClusterRow {
  std::string cluster;
  std::string text;
};

using TrainingDataset = std::variant<std::vector<PositivePair>,
                                     std::vector<LabeledPair>,
                                     std::vector<ClusterRow>>;

// Texts plus labels, independent of the encoder. For class batches, labels
// are class ids; for pair batches texts are [l0, r0, l1, r1, ...] and
// pair_labels holds one 0/1 per pair.
struct TrainingBatch {
  std::vector<std::string> texts;
  std::vector<std::size_t> classes;
  std::vector<int> pair_labels;

  bool is_pairs() const { return !pair_labels.empty(); }
  friend bool operator==(const TrainingBatch&, const TrainingBatch&) = default;
};

// Deterministic in (seed, epoch). Class datasets are packed class by class
// after shuffling, so every batch contains at least one positive pair.
// Throws UserError when the dataset cannot feed the configured loss.
std::vector<TrainingBatch> build_training_batches(const TrainingDataset& dataset,
                                                  const TrainConfig& config,
                                                  std::uint64_t epoch);

// Loss value plus d loss / d z for every embedding row.
struct LossResult {
  double loss = 0.0;
  Matrix<double> grad;
  std::size_t active_terms = 0;  // anchors (supcon) or hard pairs (online)
};

// Supervised contrastive loss, "L_out" form, averaged over anchors with at
// least one in-batch positive. `z` rows must be unit norm.
LossResult supcon_loss(const Matrix<double>& z,
                       std::span<const std::size_t> classes,
                       double temperature);

// Hard-pair contrastive loss on cosine distance. Rows 2i and 2i+1 of `z`
// form pair i with label labels[i].
LossResult online_contrastive_loss(const Matrix<double>& z,
                                   std::span<const int> labels, double margin);

// Learning rate at step t (1-based) of total_steps: linear warm-up over
// warmup_fraction * total_steps, then linear decay to zero.
double scheduled_lr(const TrainConfig& config, std::size_t step,
                    std::size_t total_steps);

// Decoupled weight decay Adam over a flat parameter vector.
class AdamW {
 public:
  AdamW(std::size_t num_params, double beta1, double beta2, double eps,
        double weight_decay);

  // One update with learning rate `lr`; `step` is 1-based.
  void step(std::span<double> params, std::span<const double> grad, double lr,
            std::size_t step);

  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  std::vector<double> m_, v_;
};

// Forward pass kept for backprop: sparse inputs, raw projections and norms.
struct EncodedBatch {
  std::vector<SparseFeatures> features;  // already l1-scaled
  Matrix<double> projected;              // u
  std::vector<double> norms;             // |u|
  Matrix<double> z;                      // u / |u|
};

// Throws TrainingError when a text has no features.
EncodedBatch encode_for_training(const EncoderModel& model,
                                 std::span<const std::string> texts);

// Accumulates d loss / d W into `grad_w` (same shape as W) given d loss / d z.
void backprop_to_weights(const EncodedBatch& batch,
                         const Matrix<double>& grad_z, Matrix<double>& grad_w);

// Loss and gradient of a batch under the configured objective, end to end
// from W.
struct BatchLoss {
  double loss = 0.0;
  Matrix<double> grad_w;
};
BatchLoss batch_loss(const EncoderModel& model, const TrainingBatch& batch,
                     const TrainConfig& config);

// Validation score of a model on a dataset under `mode`: top-1 retrieval
// accuracy (pairs: left queries right; clusters: first member of each
// cluster is the key) or the best pairwise F1 over tuned thresholds.
double validation_metric(const EncoderModel& model,
                         const TrainingDataset& dataset, EvalMode mode);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // mean batch loss
  double validation = 0.0;
  double lr = 0.0;        // at the epoch's last step
  std::size_t steps = 0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;  // 0 when no epochs ran
  std::string best_checkpoint;

  std::string to_jsonl() const;
};

struct TrainOutput {
  EncoderModel model;
  TrainReport report;
};

// Trains a copy of `model`; returns the epoch with the best validation metric
// (earliest on ties). Saves it to `checkpoint` when given.
TrainOutput train(const EncoderModel& model, const TrainingDataset& train_set,
                  const TrainingDataset& validation_set,
                  const TrainConfig& config,
                  const std::optional<std::filesystem::path>& checkpoint = std::nullopt);

}  // namespace reclink
