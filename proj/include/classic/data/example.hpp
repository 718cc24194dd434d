#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace classic::data {

/// Polarity label ids. The classification head always has kNumClasses outputs.
enum Label : int { kNegative = 0, kPositive = 1, kNeutral = 2 };
inline constexpr std::size_t kNumClasses = 3;

/// Parses "negative" / "positive" / "neutral", case-insensitively.
Label parse_label(std::string_view text);
std::string_view label_name(int label);

struct Example {
  std::vector<std::string> sentence;
  std::vector<std::string> aspect;
  int label = kNegative;
};

struct TaskDataset {
  std::string name;
  std::vector<Example> train;
  std::vector<Example> valid;
  std::vector<Example> test;
};

/// Throws DataError unless the sentence is non-empty and the label valid.
void validate(const Example& example);

}  // namespace classic::data
