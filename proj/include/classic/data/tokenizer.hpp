#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "classic/data/example.hpp"

namespace classic::data {

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kClsId = 1;
inline constexpr std::size_t kSepId = 2;
inline constexpr std::size_t kFirstWordId = 3;
inline constexpr std::size_t kMinVocabBuckets = 16;

/// 64-bit FNV-1a over the token's bytes.
std::uint64_t fnv1a(std::string_view bytes);

/// Bucket in [kFirstWordId, vocab_buckets).
std::size_t token_id(std::string_view token, std::size_t vocab_buckets);

/// [CLS] sentence [SEP] aspect [SEP], at most max_len ids. When too long the
/// sentence is cut first (then the aspect), so the layout always ends in [SEP].
/// Truncations are counted in truncation_count().
std::vector<std::size_t> tokenize(const Example& example, std::size_t vocab_buckets, std::size_t max_len);

std::uint64_t truncation_count();

}  // namespace classic::data
