#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "classic/data/example.hpp"

namespace classic::data {

struct TokenizerConfig {
  std::size_t vocab_buckets = 1024;
  std::size_t max_len = 32;
};

/// N sequences padded to the longest one in the batch (never past max_len).
struct EncodedBatch {
  std::size_t rows = 0;
  std::size_t length = 0;
  std::vector<std::size_t> token_ids;      // rows x length, kPadId where padded
  std::vector<std::uint8_t> padding_mask;  // rows x length, 1 = real token
  std::vector<int> labels;                 // rows
  int task_id = 0;
};

EncodedBatch encode(const std::vector<const Example*>& examples, const TokenizerConfig& tok, int task_id);
EncodedBatch encode(const std::vector<Example>& examples, const TokenizerConfig& tok, int task_id);

enum class BatchMode {
  kTraining,    // shuffled; a trailing short batch is dropped
  kEvaluation,  // file order; the trailing short batch is kept
};

/// Splits `split` into batches. In training mode the order comes from
/// shuffle_seed and the number of batches B = floor(size / batch_size) feeds
/// the annealing schedule. Throws DataError when batch_size < 2, or when a
/// training split is smaller than one batch.
std::vector<EncodedBatch> batch_iter(const std::vector<Example>& split, std::size_t batch_size,
                                     std::uint64_t shuffle_seed, BatchMode mode, const TokenizerConfig& tok,
                                     int task_id);

}  // namespace classic::data
