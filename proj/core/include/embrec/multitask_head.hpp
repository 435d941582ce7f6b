#pragma once

// Dense multitask head trained over frozen base features.
//
//   features --> shared = relu(W_s x + b_s) --+--> head_0 --> softmax / scalar
//                                             +--> head_1 --> ...
//
// The total loss is the weighted sum of per-task losses,
// L = sum_i w_i * L_i, with cross-entropy for classification tasks and mean
// absolute error for regression tasks. After training, the shared-layer
// activations serve as item embeddings.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "embrec/dataset.hpp"
#include "embrec/matrix.hpp"

namespace embrec {

enum class TaskKind : std::uint8_t { kClassification = 0, kRegression = 1 };

struct TaskSpec {
  std::string name;
  TaskKind kind = TaskKind::kClassification;
  std::size_t n_classes = 0;  // classification only
  double weight = 1.0;
  /// Present for tasks built from metadata; checkpoints do not store labels.
  std::optional<LabelVocabulary> vocabulary;

  static TaskSpec classification(LabelVocabulary vocabulary, double weight = 1.0);
  static TaskSpec classification(std::string name, std::size_t n_classes, double weight = 1.0);
  static TaskSpec regression(std::string name, double weight = 1.0);

  std::size_t output_size() const { return kind == TaskKind::kClassification ? n_classes : 1; }
  /// Throws InvariantError unless weight is finite and positive, a
  /// classification task has at least two classes and any vocabulary
  /// matches n_classes.
  void validate() const;
};

/// Fully connected layer; `weight` is row-major (outputs x inputs).
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out)
      : inputs(in), outputs(out), weight(in * out, 0.0), bias(out, 0.0) {}

  double& w(std::size_t out, std::size_t in) { return weight[out * inputs + in]; }
  double w(std::size_t out, std::size_t in) const { return weight[out * inputs + in]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Trainable parameters (or a gradient of the same shape). Blocks are
/// visited in declaration order: shared weight, shared bias, then weight and
/// bias of each head.
struct Parameters {
  DenseLayer shared;
  std::vector<DenseLayer> heads;

  /// Same shapes, all zeros.
  Parameters zeros_like() const;
  std::size_t count() const;

  template <typename Fn>
  void for_each_block(Fn&& fn) {
    fn(std::string("shared.weight"), std::span<double>(shared.weight));
    fn(std::string("shared.bias"), std::span<double>(shared.bias));
    for (std::size_t k = 0; k < heads.size(); ++k) {
      fn("head" + std::to_string(k) + ".weight", std::span<double>(heads[k].weight));
      fn("head" + std::to_string(k) + ".bias", std::span<double>(heads[k].bias));
    }
  }
  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    const_cast<Parameters*>(this)->for_each_block(
        [&](const std::string& name, std::span<double> block) {
          fn(name, std::span<const double>(block));
        });
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

class MultitaskModel {
 public:
  static constexpr std::size_t kDefaultSharedDim = 1024;

  /// Seeded uniform initialization in +-1/sqrt(fan_in); biases start at 0.
  static MultitaskModel initialize(std::size_t input_dim, std::size_t shared_dim,
                                   std::vector<TaskSpec> tasks, std::uint64_t seed);

  /// Throws InvariantError if shapes disagree with the task list.
  MultitaskModel(std::vector<TaskSpec> tasks, Parameters parameters);

  std::size_t input_dim() const noexcept { return params_.shared.inputs; }
  std::size_t shared_dim() const noexcept { return params_.shared.outputs; }
  const std::vector<TaskSpec>& tasks() const noexcept { return tasks_; }
  const Parameters& parameters() const noexcept { return params_; }
  Parameters& mutable_parameters() noexcept { return params_; }

  void set_task_weights(std::span<const double> weights);

 private:
  std::vector<TaskSpec> tasks_;
  Parameters params_;
};

/// Per-task targets: class indices for classification, values for regression.
using TargetColumn = std::variant<std::vector<std::size_t>, std::vector<double>>;

struct ForwardResult {
  Matrix shared;                // batch x shared_dim, post-rectifier
  std::vector<Matrix> outputs;  // per task: batch x n_classes probabilities, or batch x 1
};

/// Throws InvariantError on empty batch, dimension mismatch or non-finite input.
ForwardResult forward(const MultitaskModel& model, const Matrix& features);

/// Shared-layer activations only; the embedding used for recommendation.
Matrix extract_features(const MultitaskModel& model, const Matrix& features);

struct LossBreakdown {
  std::vector<double> task_losses;
  std::vector<double> weights;
  double total = 0.0;
};

/// Probabilities are clamped to at least this value before taking the log.
inline constexpr double kProbabilityFloor = 1e-12;

LossBreakdown multitask_loss(std::span<const TaskSpec> tasks, std::span<const Matrix> outputs,
                             std::span<const TargetColumn> targets);

struct Backprop {
  Parameters gradients;
  LossBreakdown loss;
};

/// Batch-averaged gradients of the total weighted loss.
Backprop backward(const MultitaskModel& model, const Matrix& features,
                  std::span<const TargetColumn> targets);

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

/// One bias-corrected Adam update of a parameter block in place.
/// `step_index` counts from 1.
void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamSettings& settings, std::size_t step_index);

/// Moment buffers for a whole model, zero-initialized.
struct AdamMoments {
  Parameters first;
  Parameters second;

  static AdamMoments for_model(const MultitaskModel& model);
};

/// Adam step over every parameter block. Throws NumericalError naming the
/// block if any gradient is non-finite; the model is left untouched then.
void adam_step(MultitaskModel& model, const Parameters& gradients, const AdamSettings& settings,
               std::size_t step_index, AdamMoments& moments);

struct TrainConfig {
  AdamSettings adam;
  std::size_t batch_size = 128;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledSet {
  Matrix features;
  std::vector<TargetColumn> targets;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Patience-based stopping on a validation loss sequence. Epochs are 1-based.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the next epoch's validation loss; returns true if it is a new best.
  bool observe(double val_loss);
  bool should_stop() const noexcept { return epochs_without_improvement_ >= patience_; }
  std::size_t best_epoch() const noexcept { return best_epoch_; }
  double best_loss() const noexcept { return best_loss_; }
  std::size_t epochs_seen() const noexcept { return epochs_seen_; }

 private:
  std::size_t patience_;
  std::size_t epochs_seen_ = 0;
  std::size_t best_epoch_ = 0;
  double best_loss_ = 0.0;
  std::size_t epochs_without_improvement_ = 0;
};

struct TrainResult {
  MultitaskModel model;  // parameters from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Shuffled minibatch Adam over the head parameters. Base features are read
/// only. Stops after `patience` epochs without a validation improvement or
/// at `max_epochs`.
TrainResult train_shallow(MultitaskModel model, const LabeledSet& train,
                          const LabeledSet& validation, const TrainConfig& config,
                          const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Total weighted loss over a whole set, evaluated in chunks.
LossBreakdown evaluate_loss(const MultitaskModel& model, const LabeledSet& set);

/// Fraction of rows whose argmax prediction equals the target of `task`.
double classification_accuracy(const MultitaskModel& model, const LabeledSet& set,
                               std::size_t task);

/// Zero-mean unit-variance scaling fitted on training targets.
struct Standardization {
  double mean = 0.0;
  double stddev = 1.0;

  static Standardization fit(std::span<const double> values);
  double apply(double v) const { return (v - mean) / stddev; }
};

// MTH1 checkpoint: "MTH1", u32 input_dim, u32 shared_dim, u32 task count,
// per task {u16 name length, name, u8 kind, u32 out_k, f64 weight}, then
// every parameter block as float64 in declaration order.
std::vector<std::byte> encode_checkpoint(const MultitaskModel& model);
MultitaskModel decode_checkpoint(std::span<const std::byte> bytes, const std::string& source);
void save_checkpoint(const MultitaskModel& model, const std::string& path);
MultitaskModel load_checkpoint(const std::string& path);

/// `epoch,train_loss,val_loss` CSV.
std::string format_history(std::span<const EpochRecord> history);
void save_history(std::span<const EpochRecord> history, const std::string& path);

}  // namespace embrec
