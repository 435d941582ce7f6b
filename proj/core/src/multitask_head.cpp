#include "embrec/multitask_head.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "embrec/error.hpp"
#include "embrec/random.hpp"

namespace embrec {
namespace {

constexpr std::string_view kCheckpointMagic = "MTH1";
constexpr std::size_t kEvalChunk = 1024;

// out = in * W^T + b, four input rows at a time so each weight row is read
// once per block. Every output still sums bias, then inputs in index order.
void dense_forward(const DenseLayer& layer, const Matrix& in, Matrix& out) {
  const std::size_t n = in.rows();
  const std::size_t d = layer.inputs;
  std::size_t r = 0;
  for (; r + 4 <= n; r += 4) {
    const double* x0 = in.row(r).data();
    const double* x1 = x0 + d;
    const double* x2 = x1 + d;
    const double* x3 = x2 + d;
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double* w = layer.weight.data() + o * d;
      double a0 = layer.bias[o], a1 = a0, a2 = a0, a3 = a0;
      for (std::size_t i = 0; i < d; ++i) {
        const double wi = w[i];
        a0 += wi * x0[i];
        a1 += wi * x1[i];
        a2 += wi * x2[i];
        a3 += wi * x3[i];
      }
      out(r, o) = a0;
      out(r + 1, o) = a1;
      out(r + 2, o) = a2;
      out(r + 3, o) = a3;
    }
  }
  for (; r < n; ++r) {
    const double* x = in.row(r).data();
    for (std::size_t o = 0; o < layer.outputs; ++o) {
      const double* w = layer.weight.data() + o * d;
      double acc = layer.bias[o];
      for (std::size_t i = 0; i < d; ++i) acc += w[i] * x[i];
      out(r, o) = acc;
    }
  }
}

void softmax_in_place(std::span<double> z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void check_targets(std::span<const TaskSpec> tasks, std::span<const TargetColumn> targets,
                   std::size_t batch) {
  if (targets.size() != tasks.size()) {
    throw InvariantError("expected " + std::to_string(tasks.size()) + " target columns, got " +
                         std::to_string(targets.size()));
  }
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& task = tasks[k];
    if (task.kind == TaskKind::kClassification) {
      const auto* classes = std::get_if<std::vector<std::size_t>>(&targets[k]);
      if (!classes) throw InvariantError("task '" + task.name + "' expects class indices");
      if (classes->size() != batch) {
        throw InvariantError("task '" + task.name + "' has " + std::to_string(classes->size()) +
                             " targets for a batch of " + std::to_string(batch));
      }
      for (std::size_t c : *classes) {
        if (c >= task.n_classes) {
          throw InvariantError("task '" + task.name + "': target class " + std::to_string(c) +
                               " out of range [0, " + std::to_string(task.n_classes) + ")");
        }
      }
    } else {
      const auto* values = std::get_if<std::vector<double>>(&targets[k]);
      if (!values) throw InvariantError("task '" + task.name + "' expects regression values");
      if (values->size() != batch) {
        throw InvariantError("task '" + task.name + "' has " + std::to_string(values->size()) +
                             " targets for a batch of " + std::to_string(batch));
      }
      for (double v : *values) {
        if (!std::isfinite(v)) throw InvariantError("task '" + task.name + "': non-finite target");
      }
    }
  }
}

void check_features(const MultitaskModel& model, const Matrix& features) {
  if (features.rows() == 0) throw InvariantError("empty feature batch");
  if (features.cols() != model.input_dim()) {
    throw InvariantError("feature dim " + std::to_string(features.cols()) +
                         " does not match model input dim " + std::to_string(model.input_dim()));
  }
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw InvariantError("non-finite input feature");
  }
}

// Pre-activation of the shared layer, kept for the rectifier mask.
Matrix shared_preactivation(const MultitaskModel& model, const Matrix& features) {
  const auto& layer = model.parameters().shared;
  Matrix pre(features.rows(), layer.outputs);
  dense_forward(layer, features, pre);
  return pre;
}

ForwardResult forward_from_pre(const MultitaskModel& model, const Matrix& pre) {
  ForwardResult result;
  result.shared = pre;
  for (double& v : result.shared.data()) v = std::max(v, 0.0);
  const auto& heads = model.parameters().heads;
  result.outputs.reserve(heads.size());
  for (std::size_t k = 0; k < heads.size(); ++k) {
    Matrix out(pre.rows(), heads[k].outputs);
    dense_forward(heads[k], result.shared, out);
    if (model.tasks()[k].kind == TaskKind::kClassification) {
      for (std::size_t r = 0; r < pre.rows(); ++r) softmax_in_place(out.row(r));
    }
    result.outputs.push_back(std::move(out));
  }
  return result;
}

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(source.row(rows[i]).begin(), source.cols(), out.row(i).begin());
  }
  return out;
}

std::vector<TargetColumn> gather_targets(std::span<const TargetColumn> targets,
                                         std::span<const std::size_t> rows) {
  std::vector<TargetColumn> out;
  out.reserve(targets.size());
  for (const auto& column : targets) {
    std::visit(
        [&](const auto& values) {
          using Vec = std::decay_t<decltype(values)>;
          Vec picked;
          picked.reserve(rows.size());
          for (std::size_t r : rows) picked.push_back(values[r]);
          out.emplace_back(std::move(picked));
        },
        column);
  }
  return out;
}

std::size_t target_rows(const TargetColumn& column) {
  return std::visit([](const auto& v) { return v.size(); }, column);
}

}  // namespace

// ---------------------------------------------------------------------------
// TaskSpec

TaskSpec TaskSpec::classification(LabelVocabulary vocabulary, double weight) {
  TaskSpec spec;
  spec.name = vocabulary.attribute();
  spec.kind = TaskKind::kClassification;
  spec.n_classes = vocabulary.size();
  spec.weight = weight;
  spec.vocabulary = std::move(vocabulary);
  spec.validate();
  return spec;
}

TaskSpec TaskSpec::classification(std::string name, std::size_t n_classes, double weight) {
  TaskSpec spec;
  spec.name = std::move(name);
  spec.kind = TaskKind::kClassification;
  spec.n_classes = n_classes;
  spec.weight = weight;
  spec.validate();
  return spec;
}

TaskSpec TaskSpec::regression(std::string name, double weight) {
  TaskSpec spec;
  spec.name = std::move(name);
  spec.kind = TaskKind::kRegression;
  spec.weight = weight;
  spec.validate();
  return spec;
}

void TaskSpec::validate() const {
  if (!std::isfinite(weight) || weight <= 0.0) {
    throw InvariantError("task '" + name + "': weight must be finite and positive");
  }
  if (kind == TaskKind::kClassification) {
    if (n_classes < 2) {
      throw InvariantError("task '" + name + "': classification needs at least 2 classes");
    }
    if (vocabulary && vocabulary->size() != n_classes) {
      throw InvariantError("task '" + name + "': vocabulary size " +
                           std::to_string(vocabulary->size()) + " does not match " +
                           std::to_string(n_classes) + " classes");
    }
  }
}

// ---------------------------------------------------------------------------
// Parameters / model

Parameters Parameters::zeros_like() const {
  Parameters z;
  z.shared = DenseLayer(shared.inputs, shared.outputs);
  for (const auto& h : heads) z.heads.emplace_back(h.inputs, h.outputs);
  return z;
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for_each_block([&](const std::string&, std::span<const double> b) { n += b.size(); });
  return n;
}

MultitaskModel MultitaskModel::initialize(std::size_t input_dim, std::size_t shared_dim,
                                          std::vector<TaskSpec> tasks, std::uint64_t seed) {
  if (input_dim == 0 || shared_dim == 0) throw InvariantError("model dims must be positive");
  if (tasks.empty()) throw InvariantError("a model needs at least one task");
  Rng rng(seed);
  const auto init = [&](DenseLayer& layer) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    for (double& w : layer.weight) w = rng.uniform(-bound, bound);
  };
  Parameters params;
  params.shared = DenseLayer(input_dim, shared_dim);
  init(params.shared);
  for (const auto& task : tasks) {
    task.validate();
    DenseLayer head(shared_dim, task.output_size());
    init(head);
    params.heads.push_back(std::move(head));
  }
  return MultitaskModel(std::move(tasks), std::move(params));
}

MultitaskModel::MultitaskModel(std::vector<TaskSpec> tasks, Parameters parameters)
    : tasks_(std::move(tasks)), params_(std::move(parameters)) {
  if (tasks_.empty()) throw InvariantError("a model needs at least one task");
  if (tasks_.size() != params_.heads.size()) {
    throw InvariantError("task count does not match head count");
  }
  const auto check_layer = [](const DenseLayer& l, const std::string& name) {
    if (l.inputs == 0 || l.outputs == 0 || l.weight.size() != l.inputs * l.outputs ||
        l.bias.size() != l.outputs) {
      throw InvariantError("inconsistent shape in layer " + name);
    }
  };
  check_layer(params_.shared, "shared");
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    tasks_[k].validate();
    const auto& h = params_.heads[k];
    check_layer(h, "head" + std::to_string(k));
    if (h.inputs != params_.shared.outputs || h.outputs != tasks_[k].output_size()) {
      throw InvariantError("head " + std::to_string(k) + " shape does not match task '" +
                           tasks_[k].name + "'");
    }
  }
  params_.for_each_block([](const std::string& name, std::span<const double> block) {
    for (double v : block) {
      if (!std::isfinite(v)) throw InvariantError("non-finite parameter in " + name);
    }
  });
}

void MultitaskModel::set_task_weights(std::span<const double> weights) {
  if (weights.size() != tasks_.size()) throw InvariantError("one weight per task required");
  for (std::size_t k = 0; k < tasks_.size(); ++k) {
    auto updated = tasks_[k];
    updated.weight = weights[k];
    updated.validate();
    tasks_[k] = std::move(updated);
  }
}

// ---------------------------------------------------------------------------
// Forward / loss / backward

ForwardResult forward(const MultitaskModel& model, const Matrix& features) {
  check_features(model, features);
  return forward_from_pre(model, shared_preactivation(model, features));
}

Matrix extract_features(const MultitaskModel& model, const Matrix& features) {
  check_features(model, features);
  Matrix shared = shared_preactivation(model, features);
  for (double& v : shared.data()) v = std::max(v, 0.0);
  return shared;
}

LossBreakdown multitask_loss(std::span<const TaskSpec> tasks, std::span<const Matrix> outputs,
                             std::span<const TargetColumn> targets) {
  if (outputs.size() != tasks.size()) {
    throw InvariantError("expected one output batch per task");
  }
  const std::size_t batch = tasks.empty() ? 0 : outputs[0].rows();
  if (batch == 0) throw InvariantError("empty batch");
  check_targets(tasks, targets, batch);

  LossBreakdown loss;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const Matrix& out = outputs[k];
    if (out.rows() != batch || out.cols() != tasks[k].output_size()) {
      throw InvariantError("output shape mismatch for task '" + tasks[k].name + "'");
    }
    double sum = 0.0;
    if (tasks[k].kind == TaskKind::kClassification) {
      const auto& classes = std::get<std::vector<std::size_t>>(targets[k]);
      for (std::size_t r = 0; r < batch; ++r) {
        sum += -std::log(std::max(out(r, classes[r]), kProbabilityFloor));
      }
    } else {
      const auto& values = std::get<std::vector<double>>(targets[k]);
      for (std::size_t r = 0; r < batch; ++r) sum += std::abs(out(r, 0) - values[r]);
    }
    const double task_loss = sum / static_cast<double>(batch);
    loss.task_losses.push_back(task_loss);
    loss.weights.push_back(tasks[k].weight);
    loss.total += tasks[k].weight * task_loss;
  }
  return loss;
}

Backprop backward(const MultitaskModel& model, const Matrix& features,
                  std::span<const TargetColumn> targets) {
  check_features(model, features);
  const std::size_t n = features.rows();
  const auto& tasks = model.tasks();
  check_targets(tasks, targets, n);

  const Matrix pre = shared_preactivation(model, features);
  const ForwardResult fwd = forward_from_pre(model, pre);

  Backprop bp;
  bp.loss = multitask_loss(tasks, fwd.outputs, targets);
  bp.gradients = model.parameters().zeros_like();

  const auto& params = model.parameters();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_shared(n, model.shared_dim());
  std::vector<double> d_out;

  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& head = params.heads[k];
    auto& g_head = bp.gradients.heads[k];
    const double scale = tasks[k].weight * inv_n;
    d_out.assign(head.outputs, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto probs = fwd.outputs[k].row(r);
      if (tasks[k].kind == TaskKind::kClassification) {
        const std::size_t target = std::get<std::vector<std::size_t>>(targets[k])[r];
        for (std::size_t c = 0; c < head.outputs; ++c) {
          d_out[c] = scale * (probs[c] - (c == target ? 1.0 : 0.0));
        }
      } else {
        const double diff = probs[0] - std::get<std::vector<double>>(targets[k])[r];
        d_out[0] = scale * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
      }
      const auto s = fwd.shared.row(r);
      auto ds = d_shared.row(r);
      for (std::size_t c = 0; c < head.outputs; ++c) {
        const double g = d_out[c];
        if (g == 0.0) continue;
        g_head.bias[c] += g;
        double* gw = g_head.weight.data() + c * head.inputs;
        const double* w = head.weight.data() + c * head.inputs;
        for (std::size_t j = 0; j < head.inputs; ++j) {
          gw[j] += g * s[j];
          ds[j] += g * w[j];
        }
      }
    }
  }

  // Unit-major so each gradient row stays in cache across the batch; rows
  // are still accumulated in batch order.
  auto& g_shared = bp.gradients.shared;
  for (std::size_t j = 0; j < g_shared.outputs; ++j) {
    double* gw = g_shared.weight.data() + j * g_shared.inputs;
    for (std::size_t r = 0; r < n; ++r) {
      const double g = d_shared(r, j);
      if (pre(r, j) <= 0.0 || g == 0.0) continue;
      g_shared.bias[j] += g;
      const auto x = features.row(r);
      for (std::size_t i = 0; i < g_shared.inputs; ++i) gw[i] += g * x[i];
    }
  }
  return bp;
}

// ---------------------------------------------------------------------------
// Adam

void AdamSettings::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvariantError("learning rate must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw InvariantError("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon > 0.0)) throw InvariantError("Adam epsilon must be positive");
}

void adam_update(std::span<double> params, std::span<const double> grads,
                 std::span<double> first_moment, std::span<double> second_moment,
                 const AdamSettings& s, std::size_t step_index) {
  if (step_index < 1) throw InvariantError("Adam step index starts at 1");
  const auto t = static_cast<double>(step_index);
  const double correction1 = 1.0 - std::pow(s.beta1, t);
  const double correction2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_moment[i] = s.beta1 * first_moment[i] + (1.0 - s.beta1) * g;
    second_moment[i] = s.beta2 * second_moment[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = first_moment[i] / correction1;
    const double v_hat = second_moment[i] / correction2;
    params[i] -= s.learning_rate * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

AdamMoments AdamMoments::for_model(const MultitaskModel& model) {
  return {model.parameters().zeros_like(), model.parameters().zeros_like()};
}

void adam_step(MultitaskModel& model, const Parameters& gradients, const AdamSettings& settings,
               std::size_t step_index, AdamMoments& moments) {
  std::vector<std::span<const double>> grad_blocks;
  gradients.for_each_block([&](const std::string& name, std::span<const double> block) {
    for (double g : block) {
      if (!std::isfinite(g)) {
        throw NumericalError("non-finite gradient in parameter block " + name + " at step " +
                             std::to_string(step_index));
      }
    }
    grad_blocks.push_back(block);
  });

  std::vector<std::span<double>> param_blocks, m_blocks, v_blocks;
  const auto collect = [](std::vector<std::span<double>>& out) {
    return [&out](const std::string&, std::span<double> block) { out.push_back(block); };
  };
  model.mutable_parameters().for_each_block(collect(param_blocks));
  moments.first.for_each_block(collect(m_blocks));
  moments.second.for_each_block(collect(v_blocks));
  if (param_blocks.size() != grad_blocks.size() || m_blocks.size() != grad_blocks.size()) {
    throw InvariantError("gradient/moment shapes do not match the model");
  }
  for (std::size_t b = 0; b < param_blocks.size(); ++b) {
    if (param_blocks[b].size() != grad_blocks[b].size() ||
        m_blocks[b].size() != grad_blocks[b].size()) {
      throw InvariantError("gradient/moment block size mismatch");
    }
    adam_update(param_blocks[b], grad_blocks[b], m_blocks[b], v_blocks[b], settings, step_index);
  }
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size == 0) throw InvariantError("batch size must be positive");
  if (max_epochs == 0) throw InvariantError("max_epochs must be positive");
}

bool EarlyStopping::observe(double val_loss) {
  ++epochs_seen_;
  if (best_epoch_ == 0 || val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epochs_seen_;
    epochs_without_improvement_ = 0;
    return true;
  }
  ++epochs_without_improvement_;
  return false;
}

LossBreakdown evaluate_loss(const MultitaskModel& model, const LabeledSet& set) {
  const std::size_t n = set.features.rows();
  if (n == 0) throw InvariantError("cannot evaluate loss on an empty set");
  LossBreakdown total;
  total.task_losses.assign(model.tasks().size(), 0.0);
  for (const auto& t : model.tasks()) total.weights.push_back(t.weight);

  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += kEvalChunk) {
    const std::size_t end = std::min(n, start + kEvalChunk);
    rows.resize(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const Matrix chunk = gather_rows(set.features, rows);
    const auto targets = gather_targets(set.targets, rows);
    const auto fwd = forward(model, chunk);
    const auto part = multitask_loss(model.tasks(), fwd.outputs, targets);
    const double share = static_cast<double>(rows.size()) / static_cast<double>(n);
    for (std::size_t k = 0; k < total.task_losses.size(); ++k) {
      total.task_losses[k] += part.task_losses[k] * share;
    }
  }
  for (std::size_t k = 0; k < total.task_losses.size(); ++k) {
    total.total += total.weights[k] * total.task_losses[k];
  }
  return total;
}

double classification_accuracy(const MultitaskModel& model, const LabeledSet& set,
                               std::size_t task) {
  if (task >= model.tasks().size() ||
      model.tasks()[task].kind != TaskKind::kClassification) {
    throw InvariantError("accuracy requires a classification task");
  }
  const auto fwd = forward(model, set.features);
  const auto& classes = std::get<std::vector<std::size_t>>(set.targets.at(task));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < set.features.rows(); ++r) {
    const auto p = fwd.outputs[task].row(r);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += best == classes[r] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(set.features.rows());
}

TrainResult train_shallow(MultitaskModel model, const LabeledSet& train,
                          const LabeledSet& validation, const TrainConfig& config,
                          const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const std::size_t n = train.features.rows();
  if (n == 0) throw InvariantError("empty training set");
  if (validation.features.rows() == 0) throw InvariantError("empty validation set");
  for (const auto* set : {&train, &validation}) {
    check_targets(model.tasks(), set->targets, set->features.rows());
    for (const auto& column : set->targets) {
      if (target_rows(column) != set->features.rows()) {
        throw InvariantError("target column length does not match feature rows");
      }
    }
  }

  AdamMoments moments = AdamMoments::for_model(model);
  EarlyStopping stopper(config.patience);
  TrainResult result{model, {}, 0, false};
  std::vector<std::size_t> order(n);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(config.seed, epoch));
    rng.shuffle(std::span(order));

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Matrix batch = gather_rows(train.features, rows);
      const auto targets = gather_targets(train.targets, rows);
      const Backprop bp = backward(model, batch, targets);
      adam_step(model, bp.gradients, config.adam, ++step, moments);
    }

    EpochRecord record{epoch, evaluate_loss(model, train).total,
                       evaluate_loss(model, validation).total};
    if (!std::isfinite(record.train_loss) || !std::isfinite(record.val_loss)) {
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (stopper.observe(record.val_loss)) result.model = model;
    if (stopper.should_stop()) {
      result.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  return result;
}

Standardization Standardization::fit(std::span<const double> values) {
  if (values.empty()) throw InvariantError("cannot standardize an empty column");
  const auto n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  return {mean, sd > 0.0 ? sd : 1.0};
}

// ---------------------------------------------------------------------------
// Checkpoints and history

std::vector<std::byte> encode_checkpoint(const MultitaskModel& model) {
  detail::ByteWriter out;
  out.put_bytes(kCheckpointMagic);
  out.put_u32(static_cast<std::uint32_t>(model.input_dim()));
  out.put_u32(static_cast<std::uint32_t>(model.shared_dim()));
  out.put_u32(static_cast<std::uint32_t>(model.tasks().size()));
  for (const auto& task : model.tasks()) {
    if (task.name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvariantError("task name too long for MTH1");
    }
    out.put_u16(static_cast<std::uint16_t>(task.name.size()));
    out.put_bytes(task.name);
    out.put_u8(static_cast<std::uint8_t>(task.kind));
    out.put_u32(static_cast<std::uint32_t>(task.output_size()));
    out.put_f64(task.weight);
  }
  model.parameters().for_each_block([&](const std::string&, std::span<const double> block) {
    for (double v : block) out.put_f64(v);
  });
  const auto bytes = out.bytes();
  return {bytes.begin(), bytes.end()};
}

MultitaskModel decode_checkpoint(std::span<const std::byte> bytes, const std::string& source) {
  detail::ByteReader in(bytes, source);
  if (in.take_string(kCheckpointMagic.size(), "magic") != kCheckpointMagic) {
    in.fail_at(0, "malformed header: missing MTH1 magic");
  }
  const std::uint32_t input_dim = in.take_u32("input dim");
  const std::uint32_t shared_dim = in.take_u32("shared dim");
  const std::uint32_t n_tasks = in.take_u32("task count");
  if (input_dim == 0 || shared_dim == 0 || n_tasks == 0) {
    in.fail_at(4, "malformed header: zero dimension or task count");
  }
  std::vector<TaskSpec> tasks;
  for (std::uint32_t k = 0; k < n_tasks; ++k) {
    const std::uint64_t task_offset = in.offset();
    TaskSpec task;
    task.name = in.take_string(in.take_u16("task name length"), "task name");
    const std::uint8_t kind = in.take_u8("task kind");
    if (kind > 1) in.fail_at(task_offset, "unknown task kind " + std::to_string(kind));
    task.kind = static_cast<TaskKind>(kind);
    const std::uint32_t out_k = in.take_u32("task output size");
    task.weight = in.take_f64("task weight");
    if (task.kind == TaskKind::kClassification) {
      task.n_classes = out_k;
    } else if (out_k != 1) {
      in.fail_at(task_offset, "regression task with output size " + std::to_string(out_k));
    }
    try {
      task.validate();
    } catch (const InvariantError& e) {
      in.fail_at(task_offset, e.what());
    }
    tasks.push_back(std::move(task));
  }

  Parameters params;
  params.shared = DenseLayer(input_dim, shared_dim);
  for (const auto& task : tasks) params.heads.emplace_back(shared_dim, task.output_size());
  const std::uint64_t expected = params.count() * sizeof(double);
  if (in.remaining() < expected) {
    in.fail("truncated payload: expected " + std::to_string(expected) + " parameter bytes, " +
            std::to_string(in.remaining()) + " remain");
  }
  params.for_each_block([&](const std::string& name, std::span<double> block) {
    for (double& v : block) {
      const std::uint64_t at = in.offset();
      v = in.take_f64("parameter");
      if (!std::isfinite(v)) in.fail_at(at, "non-finite parameter in " + name);
    }
  });
  if (!in.at_end()) in.fail(std::to_string(in.remaining()) + " trailing bytes");
  return MultitaskModel(std::move(tasks), std::move(params));
}

void save_checkpoint(const MultitaskModel& model, const std::string& path) {
  detail::write_file_atomically(path, encode_checkpoint(model));
}

MultitaskModel load_checkpoint(const std::string& path) {
  return decode_checkpoint(detail::read_file_bytes(path), path);
}

std::string format_history(std::span<const EpochRecord> history) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss\n";
  char buf[64];
  const auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, res.ptr - buf);
  };
  for (const auto& r : history) {
    out << r.epoch << ',';
    put(r.train_loss);
    out << ',';
    put(r.val_loss);
    out << '\n';
  }
  return out.str();
}

void save_history(std::span<const EpochRecord> history, const std::string& path) {
  const std::string text = format_history(history);
  detail::write_file_atomically(
      path, std::span(reinterpret_cast<const std::byte*>(text.data()), text.size()));
}

}  // namespace embrec
