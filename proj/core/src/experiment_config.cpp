#include "embrec/experiment_config.hpp"

#include <filesystem>
#include <set>

#include "binary_io.hpp"
#include "embrec/error.hpp"
#include "json.hpp"
#include "text_util.hpp"

namespace embrec {
namespace {

using nlohmann::json;

class ConfigReader {
 public:
  ConfigReader(std::string source, std::string base_dir)
      : source_(std::move(source)), base_dir_(std::move(base_dir)) {}

  [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
    throw ConfigError(source_ + ": " + where + ": " + msg);
  }

  void only_keys(const json& obj, const std::string& where,
                 std::initializer_list<std::string_view> allowed) const {
    if (!obj.is_object()) fail(where, "expected an object");
    const std::set<std::string_view> keys(allowed);
    for (const auto& [key, value] : obj.items()) {
      if (!keys.contains(key)) fail(where, "unknown key '" + key + "'");
    }
  }

  template <typename T>
  void read(const json& obj, const std::string& where, const char* key, T& out) const {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return;
    try {
      if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) fail(where + "." + key, "expected a non-negative integer");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      fail(where + "." + key, e.what());
    }
  }

  std::string path(const json& obj, const std::string& where, const char* key,
                   bool required) const {
    std::string raw;
    read(obj, where, key, raw);
    if (raw.empty()) {
      if (required) fail(where, "missing required path '" + std::string(key) + "'");
      return {};
    }
    return resolve(raw);
  }

  std::string resolve(const std::string& raw) const {
    const std::filesystem::path p(raw);
    if (p.is_absolute() || base_dir_.empty()) return p.string();
    return (std::filesystem::path(base_dir_) / p).lexically_normal().string();
  }

 private:
  std::string source_;
  std::string base_dir_;
};

Aggregation parse_aggregation(const ConfigReader& r, const std::string& s) {
  if (s == "max") return Aggregation::kMax;
  if (s == "mean") return Aggregation::kMean;
  r.fail("aggregation", "expected 'max' or 'mean', got '" + s + "'");
}

ExclusionScope parse_exclusion(const ConfigReader& r, const std::string& s) {
  if (s == "global") return ExclusionScope::kGlobal;
  if (s == "user") return ExclusionScope::kUserOnly;
  r.fail("exclusion", "expected 'global' or 'user', got '" + s + "'");
}

FineTuneConfig parse_finetune(const ConfigReader& r, const json& j) {
  const std::string where = "finetune";
  r.only_keys(j, where,
              {"label", "base_embeddings", "metadata", "tasks", "shared_dim", "learning_rate",
               "batch_size", "patience", "max_epochs", "beta1", "beta2", "epsilon", "seed",
               "split_seed", "split", "min_count", "max_missing_fraction", "data_mode", "export",
               "checkpoint", "history"});
  FineTuneConfig ft;
  r.read(j, where, "label", ft.label);
  ft.base_embeddings = r.path(j, where, "base_embeddings", true);
  ft.metadata = r.path(j, where, "metadata", true);
  r.read(j, where, "shared_dim", ft.shared_dim);
  r.read(j, where, "learning_rate", ft.train.adam.learning_rate);
  r.read(j, where, "beta1", ft.train.adam.beta1);
  r.read(j, where, "beta2", ft.train.adam.beta2);
  r.read(j, where, "epsilon", ft.train.adam.epsilon);
  r.read(j, where, "batch_size", ft.train.batch_size);
  r.read(j, where, "patience", ft.train.patience);
  r.read(j, where, "max_epochs", ft.train.max_epochs);
  r.read(j, where, "seed", ft.init_seed);
  ft.train.seed = ft.init_seed;
  ft.split_seed = ft.init_seed;
  r.read(j, where, "split_seed", ft.split_seed);
  r.read(j, where, "min_count", ft.min_count);
  if (j.contains("max_missing_fraction") && !j["max_missing_fraction"].is_null()) {
    double f = 0.0;
    r.read(j, where, "max_missing_fraction", f);
    ft.max_missing_fraction = f;
  }
  if (j.contains("split")) {
    std::vector<double> split;
    r.read(j, where, "split", split);
    if (split.size() != 3) r.fail(where + ".split", "expected three proportions");
    ft.split = {split[0], split[1], split[2]};
  }
  std::string mode = "catalog";
  r.read(j, where, "data_mode", mode);
  if (mode == "catalog") {
    ft.data_mode = FineTuneDataMode::kCatalog;
  } else if (mode == "temporal") {
    ft.data_mode = FineTuneDataMode::kTemporal;
  } else {
    r.fail(where + ".data_mode", "expected 'catalog' or 'temporal'");
  }
  ft.export_path = r.path(j, where, "export", false);
  ft.checkpoint_path = r.path(j, where, "checkpoint", false);
  ft.history_path = r.path(j, where, "history", false);

  const auto tasks = j.find("tasks");
  if (tasks == j.end() || !tasks->is_array() || tasks->empty()) {
    r.fail(where + ".tasks", "expected a non-empty array");
  }
  for (std::size_t i = 0; i < tasks->size(); ++i) {
    const std::string tw = where + ".tasks[" + std::to_string(i) + "]";
    const json& t = (*tasks)[i];
    r.only_keys(t, tw, {"attribute", "kind", "weight"});
    FineTuneTask task;
    r.read(t, tw, "attribute", task.attribute);
    if (task.attribute.empty()) r.fail(tw, "missing attribute");
    std::string kind = "classification";
    r.read(t, tw, "kind", kind);
    if (kind == "classification") {
      task.kind = TaskKind::kClassification;
    } else if (kind == "regression") {
      task.kind = TaskKind::kRegression;
    } else {
      r.fail(tw + ".kind", "expected 'classification' or 'regression'");
    }
    r.read(t, tw, "weight", task.weight);
    ft.tasks.push_back(std::move(task));
  }
  return ft;
}

}  // namespace

std::string FineTuneConfig::row_label() const {
  if (!label.empty()) return label;
  std::string out = "shallow-fine-tune(";
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += ';';
    char weight[32];
    std::snprintf(weight, sizeof weight, "%g", tasks[i].weight);
    out += tasks[i].attribute + ":" + weight;
  }
  return out + ")";
}

void ExperimentConfig::validate() const {
  if (methods.empty() && !finetune) {
    throw InvariantError("experiment needs at least one method or a fine-tune block");
  }
  if (k < 1) throw InvariantError("k must be at least 1");
  if (random_trials < 1) throw InvariantError("random baseline needs at least one trial");
  if (threads < 1) throw InvariantError("threads must be at least 1");
  std::set<std::string> labels;
  const auto check_label = [&](const std::string& label) {
    if (label.empty() || label.find_first_of(",\n") != std::string::npos) {
      throw InvariantError("method label '" + label + "' must be non-empty without commas");
    }
    if (label == "Random" || !labels.insert(label).second) {
      throw InvariantError("duplicate or reserved method label '" + label + "'");
    }
  };
  for (const auto& m : methods) check_label(m.label);
  if (finetune) {
    check_label(finetune->row_label());
    finetune->train.validate();
    if (finetune->shared_dim == 0) throw InvariantError("shared_dim must be positive");
    for (const auto& t : finetune->tasks) {
      if (!(t.weight > 0.0)) throw InvariantError("task weights must be positive");
    }
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir,
                                         const std::string& source) {
  const ConfigReader r(source, base_dir);
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(source, FormatError::Location::kByteOffset, e.byte, e.what());
  }
  r.only_keys(j, "config",
              {"transactions", "catalog", "methods", "k", "aggregation", "exclusion",
               "evaluation_start", "threads", "random_baseline", "finetune", "output"});

  ExperimentConfig cfg;
  cfg.transactions = r.path(j, "config", "transactions", true);
  if (auto catalog = r.path(j, "config", "catalog", false); !catalog.empty()) {
    cfg.catalog = catalog;
  }
  if (const auto methods = j.find("methods"); methods != j.end()) {
    if (!methods->is_array()) r.fail("methods", "expected an array");
    for (std::size_t i = 0; i < methods->size(); ++i) {
      const std::string where = "methods[" + std::to_string(i) + "]";
      r.only_keys((*methods)[i], where, {"label", "embeddings"});
      MethodSpec m;
      r.read((*methods)[i], where, "label", m.label);
      m.embeddings = r.path((*methods)[i], where, "embeddings", true);
      cfg.methods.push_back(std::move(m));
    }
  }
  r.read(j, "config", "k", cfg.k);
  std::string aggregation = "max", exclusion = "global";
  r.read(j, "config", "aggregation", aggregation);
  r.read(j, "config", "exclusion", exclusion);
  cfg.aggregation = parse_aggregation(r, aggregation);
  cfg.exclusion = parse_exclusion(r, exclusion);
  r.read(j, "config", "evaluation_start", cfg.evaluation_start);
  r.read(j, "config", "threads", cfg.threads);
  if (const auto rb = j.find("random_baseline"); rb != j.end()) {
    r.only_keys(*rb, "random_baseline", {"seed", "trials"});
    r.read(*rb, "random_baseline", "seed", cfg.random_seed);
    r.read(*rb, "random_baseline", "trials", cfg.random_trials);
  }
  if (const auto ft = j.find("finetune"); ft != j.end() && !ft->is_null()) {
    cfg.finetune = parse_finetune(r, *ft);
  }
  if (const auto out = j.find("output"); out != j.end()) {
    r.only_keys(*out, "output", {"report", "csv"});
    cfg.report_text = r.path(*out, "output", "report", false);
    cfg.report_csv = r.path(*out, "output", "csv", false);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  const auto dir = std::filesystem::path(path).parent_path().string();
  return parse_experiment_config(text, dir, path);
}

std::vector<std::string> load_catalog(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  const std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  std::vector<std::string> ids;
  std::set<std::string, std::less<>> seen;
  const auto lines = detail::split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (!seen.emplace(lines[i]).second) {
      throw FormatError(path, FormatError::Location::kLine, i + 1,
                        "duplicate item id '" + std::string(lines[i]) + "'");
    }
    ids.emplace_back(lines[i]);
  }
  return ids;
}

}  // namespace embrec
