#include "classic/cli/config_file.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace classic::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string value;
  std::size_t line;
  std::string key;  // section.key
};

[[noreturn]] void bad_value(const Field& f, const std::string& expected) {
  throw ConfigFileError(f.key, f.line, "expected " + expected + ", got \"" + f.value + "\"");
}

std::uint64_t to_u64(const Field& f) {
  std::uint64_t v = 0;
  const auto* end = f.value.data() + f.value.size();
  auto [ptr, ec] = std::from_chars(f.value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(f, "a non-negative integer");
  return v;
}

std::size_t to_size(const Field& f) { return static_cast<std::size_t>(to_u64(f)); }

double to_double(const Field& f) {
  try {
    std::size_t used = 0;
    const double v = std::stod(f.value, &used);
    if (used != f.value.size()) bad_value(f, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(f, "a number");
  }
}

bool to_bool(const Field& f) {
  const std::string v = lower(f.value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(f, "true or false");
}

using Setter = std::function<void(harness::RunConfig&, const Field&)>;

const std::map<std::string, Setter>& setters() {
  using harness::RunConfig;
  static const std::map<std::string, Setter> table = {
      {"model.vocab_buckets", [](RunConfig& c, const Field& f) { c.model.vocab_buckets = to_size(f); }},
      {"model.d_model", [](RunConfig& c, const Field& f) { c.model.d_model = to_size(f); }},
      {"model.n_layers", [](RunConfig& c, const Field& f) { c.model.n_layers = to_size(f); }},
      {"model.n_heads", [](RunConfig& c, const Field& f) { c.model.n_heads = to_size(f); }},
      {"model.ffn_dim", [](RunConfig& c, const Field& f) { c.model.ffn_dim = to_size(f); }},
      {"model.adapter_dim", [](RunConfig& c, const Field& f) { c.model.adapter_dim = to_size(f); }},
      {"model.max_len", [](RunConfig& c, const Field& f) { c.model.max_len = to_size(f); }},
      {"model.dropout", [](RunConfig& c, const Field& f) { c.model.dropout_p = to_double(f); }},
      {"model.train_layer_norm", [](RunConfig& c, const Field& f) { c.model.train_layer_norm = to_bool(f); }},
      {"model.seed", [](RunConfig& c, const Field& f) { c.model.seed = to_u64(f); }},
      {"model.backbone_file", [](RunConfig& c, const Field& f) { c.model.backbone_file = f.value; }},
      {"training.epochs", [](RunConfig& c, const Field& f) { c.training.epochs = to_size(f); }},
      {"training.batch_size", [](RunConfig& c, const Field& f) { c.training.batch_size = to_size(f); }},
      {"training.learning_rate", [](RunConfig& c, const Field& f) { c.training.learning_rate = to_double(f); }},
      {"training.s_max", [](RunConfig& c, const Field& f) { c.training.s_max = to_double(f); }},
      {"training.mask_threshold", [](RunConfig& c, const Field& f) { c.training.mask_threshold = to_double(f); }},
      {"training.embedding_clip", [](RunConfig& c, const Field& f) { c.training.embedding_clip = to_double(f); }},
      {"training.teacher_grad", [](RunConfig& c, const Field& f) { c.training.teacher_grad = to_bool(f); }},
      {"training.early_stop", [](RunConfig& c, const Field& f) { c.training.early_stop = to_bool(f); }},
      {"training.patience", [](RunConfig& c, const Field& f) { c.training.patience = to_size(f); }},
      {"training.baseline",
       [](RunConfig& c, const Field& f) {
         try {
           c.training.baseline = harness::parse_baseline(f.value);
         } catch (const ConfigError&) {
           bad_value(f, "classic, ncl or one");
         }
       }},
      {"losses.lambda_csc", [](RunConfig& c, const Field& f) { c.training.weights.csc = to_double(f); }},
      {"losses.lambda_ced", [](RunConfig& c, const Field& f) { c.training.weights.ced = to_double(f); }},
      {"losses.lambda_cks", [](RunConfig& c, const Field& f) { c.training.weights.cks = to_double(f); }},
      {"losses.temperature", [](RunConfig& c, const Field& f) { c.training.weights.temperature = to_double(f); }},
      {"losses.reduction",
       [](RunConfig& c, const Field& f) {
         const std::string v = lower(f.value);
         if (v == "sum") {
           c.training.reduction = losses::Reduction::kSum;
         } else if (v == "mean") {
           c.training.reduction = losses::Reduction::kMean;
         } else {
           bad_value(f, "sum or mean");
         }
       }},
      {"losses.ablation",
       [](RunConfig& c, const Field& f) {
         try {
           c.training.ablation = parse_ablation(f.value);
         } catch (const ConfigError&) {
           bad_value(f, "full or a list of -CED, -CKS, -CSC");
         }
       }},
      {"data.source", [](RunConfig& c, const Field& f) { c.data.source = f.value; }},
      {"data.seed", [](RunConfig& c, const Field& f) { c.data.synthetic.seed = to_u64(f); }},
      {"data.tasks", [](RunConfig& c, const Field& f) { c.data.synthetic.n_tasks = to_size(f); }},
      {"data.per_task", [](RunConfig& c, const Field& f) { c.data.synthetic.examples_per_task = to_size(f); }},
      {"data.flip", [](RunConfig& c, const Field& f) { c.data.synthetic.flip_fraction = to_double(f); }},
      {"data.classes", [](RunConfig& c, const Field& f) { c.data.synthetic.n_classes = to_size(f); }},
      {"data.max_tasks", [](RunConfig& c, const Field& f) { c.data.max_tasks = to_size(f); }},
      {"run.seeds",
       [](RunConfig& c, const Field& f) {
         c.seeds.clear();
         for (const auto& item : split_list(f.value)) c.seeds.push_back(to_u64({item, f.line, f.key}));
         if (c.seeds.empty()) bad_value(f, "a comma-separated list of seeds");
       }},
      {"run.shuffle_order", [](RunConfig& c, const Field& f) { c.shuffle_order = to_bool(f); }},
      {"run.mode",
       [](RunConfig& c, const Field& f) {
         try {
           c.mode = harness::parse_eval_mode(f.value);
         } catch (const ConfigError&) {
           bad_value(f, "dil or til");
         }
       }},
  };
  return table;
}

const std::set<std::string> kSections = {"model", "training", "losses", "data", "run"};

}  // namespace

ConfigFileError::ConfigFileError(const std::string& key, std::size_t line, const std::string& what)
    : ConfigError((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + key + ": " + what),
      key_(key),
      line_(line) {}

losses::Ablation parse_ablation(const std::string& text) {
  losses::Ablation a;
  const std::string t = lower(trim(text));
  if (t.empty() || t == "full" || t == "none") return a;
  for (std::string item : split_list(t)) {
    if (!item.empty() && item.front() == '-') item.erase(0, 1);
    if (item == "ced") {
      a.no_ced = true;
    } else if (item == "cks") {
      a.no_cks = true;
    } else if (item == "csc") {
      a.no_csc = true;
    } else {
      throw ConfigError("unknown ablation \"" + item + "\" (expected -CED, -CKS or -CSC)");
    }
  }
  return a;
}

harness::RunConfig parse_config(const std::string& text, const std::string& source_name) {
  harness::RunConfig config;
  std::map<std::string, std::size_t> seen;
  std::string section;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    std::string line = raw;
    const auto comment = line.find_first_of("#;");
    if (comment != std::string::npos) line.erase(comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigFileError("[" + section + "]", line_no, "unterminated section header");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (kSections.count(section) == 0) throw ConfigFileError(section, line_no, "unknown section in " + source_name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigFileError(line, line_no, "expected key = value");
    const std::string key = lower(trim(line.substr(0, eq)));
    const std::string full = section.empty() ? key : section + "." + key;
    if (section.empty()) throw ConfigFileError(full, line_no, "key outside any section");
    const auto it = setters().find(full);
    if (it == setters().end()) throw ConfigFileError(full, line_no, "unknown key");
    if (const auto prev = seen.find(full); prev != seen.end()) {
      throw ConfigFileError(full, line_no, "duplicate key (first set on line " + std::to_string(prev->second) + ")");
    }
    seen[full] = line_no;
    it->second(config, {trim(line.substr(eq + 1)), line_no, full});
  }
  if (seen.count("data.source") == 0 || config.data.source.empty()) {
    throw ConfigFileError("data.source", 0, "missing required key (no default) in " + source_name);
  }
  harness::validate(config);
  return config;
}

harness::RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string format_config(const harness::RunConfig& c) {
  const nlohmann::json j = harness::to_json(c);
  std::ostringstream out;
  auto scalar = [](const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  for (const char* section : {"model", "training", "losses", "data", "run"}) {
    out << "[" << section << "]\n";
    for (const auto& [key, value] : j.at(section).items()) {
      if (std::string(section) == "run" && key == "seeds") {
        std::string list;
        for (const auto& s : value) list += (list.empty() ? "" : ",") + s.dump();
        out << key << " = " << list << "\n";
      } else {
        out << key << " = " << scalar(value) << "\n";
      }
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace classic::cli
