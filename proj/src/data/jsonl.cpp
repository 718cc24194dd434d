#include "classic/data/jsonl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "classic/error.hpp"

namespace classic::data {

namespace {

std::vector<std::string> split_ws(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::vector<Example> parse_jsonl(const std::string& contents, const std::string& source_name) {
  std::vector<Example> out;
  std::istringstream in(contents);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    const std::string where = source_name + ":" + std::to_string(line_no) + ": ";
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed JSON (" + e.what() + ")");
    }
    for (const char* key : {"text", "aspect", "label"}) {
      if (!record.is_object() || !record.contains(key) || !record[key].is_string()) {
        throw DataError(where + "missing string field \"" + key + "\"");
      }
    }
    Example ex;
    ex.sentence = split_ws(record["text"].get<std::string>());
    ex.aspect = split_ws(record["aspect"].get<std::string>());
    try {
      ex.label = parse_label(record["label"].get<std::string>());
      validate(ex);
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    }
    out.push_back(std::move(ex));
  }
  if (out.empty()) throw DataError(source_name + ": empty split");
  return out;
}

std::vector<Example> load_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path), path.string()); }

void write_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const Example& ex : examples) {
    nlohmann::json record = {
        {"text", join(ex.sentence)}, {"aspect", join(ex.aspect)}, {"label", std::string(label_name(ex.label))}};
    out << record.dump() << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

void write_suite(const std::filesystem::path& dir, const std::vector<TaskDataset>& suite) {
  for (const TaskDataset& task : suite) {
    const auto task_dir = dir / task.name;
    std::error_code ec;
    std::filesystem::create_directories(task_dir, ec);
    if (ec) throw DataError("cannot create " + task_dir.string() + ": " + ec.message());
    write_jsonl(task_dir / "train.jsonl", task.train);
    write_jsonl(task_dir / "valid.jsonl", task.valid);
    write_jsonl(task_dir / "test.jsonl", task.test);
  }
}

TaskDataset load_task(const std::filesystem::path& dir, const std::string& task_name) {
  TaskDataset task;
  task.name = task_name;
  const auto task_dir = dir / task_name;
  task.train = load_jsonl(task_dir / "train.jsonl");
  task.valid = load_jsonl(task_dir / "valid.jsonl");
  task.test = load_jsonl(task_dir / "test.jsonl");
  return task;
}

std::vector<TaskDataset> load_suite(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory()) names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("no task directories under " + dir.string());
  std::vector<TaskDataset> suite;
  for (const auto& name : names) suite.push_back(load_task(dir, name));
  return suite;
}

}  // namespace classic::data
