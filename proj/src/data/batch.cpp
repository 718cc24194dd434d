#include "classic/data/batch.hpp"

#include <algorithm>
#include <numeric>

#include "classic/autodiff/rng.hpp"
#include "classic/data/tokenizer.hpp"
#include "classic/error.hpp"

namespace classic::data {

EncodedBatch encode(const std::vector<const Example*>& examples, const TokenizerConfig& tok, int task_id) {
  EncodedBatch batch;
  batch.rows = examples.size();
  batch.task_id = task_id;
  std::vector<std::vector<std::size_t>> seqs;
  seqs.reserve(examples.size());
  for (const Example* ex : examples) {
    validate(*ex);
    seqs.push_back(tokenize(*ex, tok.vocab_buckets, tok.max_len));
    batch.length = std::max(batch.length, seqs.back().size());
    batch.labels.push_back(ex->label);
  }
  batch.token_ids.assign(batch.rows * batch.length, kPadId);
  batch.padding_mask.assign(batch.rows * batch.length, 0);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t p = 0; p < seqs[r].size(); ++p) {
      batch.token_ids[r * batch.length + p] = seqs[r][p];
      batch.padding_mask[r * batch.length + p] = 1;
    }
  }
  return batch;
}

EncodedBatch encode(const std::vector<Example>& examples, const TokenizerConfig& tok, int task_id) {
  std::vector<const Example*> ptrs;
  for (const Example& ex : examples) ptrs.push_back(&ex);
  return encode(ptrs, tok, task_id);
}

std::vector<EncodedBatch> batch_iter(const std::vector<Example>& split, std::size_t batch_size,
                                     std::uint64_t shuffle_seed, BatchMode mode, const TokenizerConfig& tok,
                                     int task_id) {
  if (batch_size < 2) throw DataError("batch_size must be >= 2");
  std::vector<std::size_t> order(split.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t n_batches = 0;
  if (mode == BatchMode::kTraining) {
    if (split.size() < batch_size) {
      throw DataError("training split of " + std::to_string(split.size()) + " examples is smaller than batch size " +
                      std::to_string(batch_size));
    }
    Rng rng(shuffle_seed);
    rng.shuffle(order);
    n_batches = split.size() / batch_size;
  } else {
    n_batches = (split.size() + batch_size - 1) / batch_size;
  }
  std::vector<EncodedBatch> batches;
  batches.reserve(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    const std::size_t begin = b * batch_size;
    const std::size_t end = std::min(split.size(), begin + batch_size);
    std::vector<const Example*> members;
    for (std::size_t i = begin; i < end; ++i) members.push_back(&split[order[i]]);
    batches.push_back(encode(members, tok, task_id));
  }
  return batches;
}

}  // namespace classic::data
