#include "classic/data/tokenizer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <string>

#include "classic/error.hpp"

namespace classic::data {

namespace {
std::atomic<std::uint64_t> g_truncations{0};

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}
}  // namespace

Label parse_label(std::string_view text) {
  const std::string key = lower(text);
  if (key == "negative") return kNegative;
  if (key == "positive") return kPositive;
  if (key == "neutral") return kNeutral;
  throw DataError("unknown label \"" + std::string(text) + "\"");
}

std::string_view label_name(int label) {
  switch (label) {
    case kNegative: return "negative";
    case kPositive: return "positive";
    case kNeutral: return "neutral";
    default: throw DataError("label id " + std::to_string(label) + " outside {0,1,2}");
  }
}

void validate(const Example& example) {
  if (example.sentence.empty()) throw DataError("example has an empty sentence");
  if (example.label < 0 || example.label >= static_cast<int>(kNumClasses)) {
    throw DataError("label id " + std::to_string(example.label) + " outside {0,1,2}");
  }
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::size_t token_id(std::string_view token, std::size_t vocab_buckets) {
  if (vocab_buckets < kMinVocabBuckets) {
    throw ConfigError("vocab_buckets must be >= " + std::to_string(kMinVocabBuckets));
  }
  return kFirstWordId + static_cast<std::size_t>(fnv1a(token) % (vocab_buckets - kFirstWordId));
}

std::vector<std::size_t> tokenize(const Example& example, std::size_t vocab_buckets, std::size_t max_len) {
  if (max_len < 4) throw ConfigError("max_len must be >= 4");
  const std::size_t budget = max_len - 3;  // [CLS], [SEP], [SEP]
  std::size_t aspect_len = example.aspect.size();
  std::size_t sentence_len = example.sentence.size();
  if (sentence_len + aspect_len > budget) {
    g_truncations.fetch_add(1, std::memory_order_relaxed);
    // Keep at least one sentence token when there is one.
    aspect_len = std::min(aspect_len, budget - std::min<std::size_t>(1, sentence_len));
    sentence_len = std::min(sentence_len, budget - aspect_len);
  }
  std::vector<std::size_t> ids;
  ids.reserve(sentence_len + aspect_len + 3);
  ids.push_back(kClsId);
  for (std::size_t i = 0; i < sentence_len; ++i) ids.push_back(token_id(example.sentence[i], vocab_buckets));
  ids.push_back(kSepId);
  for (std::size_t i = 0; i < aspect_len; ++i) ids.push_back(token_id(example.aspect[i], vocab_buckets));
  ids.push_back(kSepId);
  return ids;
}

std::uint64_t truncation_count() { return g_truncations.load(std::memory_order_relaxed); }

}  // namespace classic::data
