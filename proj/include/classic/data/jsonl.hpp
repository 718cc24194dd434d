#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "classic/data/example.hpp"

namespace classic::data {

/// One record per line: {"text": ..., "aspect": ..., "label": ...}, label one
/// of positive/negative/neutral in any case. Text and aspect are split on
/// whitespace. Blank lines are skipped. Throws DataError with the 1-based
/// line number on malformed records, and "empty split" when no record exists.
std::vector<Example> load_jsonl(const std::filesystem::path& path);
std::vector<Example> parse_jsonl(const std::string& contents, const std::string& source_name);

void write_jsonl(const std::filesystem::path& path, const std::vector<Example>& examples);

/// <dir>/<task>/{train,valid,test}.jsonl
void write_suite(const std::filesystem::path& dir, const std::vector<TaskDataset>& suite);
TaskDataset load_task(const std::filesystem::path& dir, const std::string& task_name);
/// Every task subdirectory of `dir`, in name order.
std::vector<TaskDataset> load_suite(const std::filesystem::path& dir);

}  // namespace classic::data
