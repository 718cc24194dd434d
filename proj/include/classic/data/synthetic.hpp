#pragma once

#include <cstdint>
#include <vector>

#include "classic/data/example.hpp"

namespace classic::data {

struct SyntheticSpec {
  std::uint64_t seed = 7;
  std::size_t n_tasks = 6;
  std::size_t examples_per_task = 120;
  double flip_fraction = 0.3;
  /// 2 (negative/positive) or 3 (adds neutral examples with no polarity words).
  std::size_t n_classes = 2;
};

/// Throws ConfigError naming the first out-of-range field.
void validate(const SyntheticSpec& spec);

/// Multi-domain sentiment tasks. Every task draws polarity words from one
/// shared sentiment lexicon; each also has a private lexicon of aspect and
/// filler words. In odd-indexed tasks (0-based) a fixed flip_fraction of the
/// shared words carry the opposite polarity, so sequential training meets
/// conflicting evidence. A sentence is filler + one aspect word + 1 or 3
/// polarity words whose majority polarity is the label. Splits are 70/15/15
/// and class-balanced. Output depends only on `spec`.
std::vector<TaskDataset> generate_synthetic_suite(const SyntheticSpec& spec);

/// Size of the shared sentiment lexicon.
inline constexpr std::size_t kSharedSentimentWords = 16;

}  // namespace classic::data
