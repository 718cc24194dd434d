#include "classic/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#include "classic/autodiff/rng.hpp"
#include "classic/error.hpp"

namespace classic::data {

namespace {

constexpr std::size_t kAspectsPerTask = 6;
constexpr std::size_t kFillerPerTask = 16;
constexpr std::size_t kMinFiller = 2;
constexpr std::size_t kMaxFiller = 4;
constexpr double kPrivateFillerShare = 0.6;

const std::vector<std::string>& common_filler() {
  static const std::vector<std::string> words = {"the", "a", "this", "it", "was", "is",
                                                 "and", "very", "quite", "really", "so", "but"};
  return words;
}

std::string numbered(const char* prefix, std::size_t task, std::size_t index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%s%02zu_%02zu", prefix, task + 1, index);
  return buf;
}

struct Lexicon {
  std::vector<std::string> sentiment;  // shared
  std::vector<int> base_polarity;      // 0 negative, 1 positive
  std::vector<bool> flipped;
};

Lexicon make_lexicon(Rng& rng, double flip_fraction) {
  Lexicon lex;
  std::vector<std::size_t> order(kSharedSentimentWords);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  lex.base_polarity.assign(kSharedSentimentWords, 0);
  for (std::size_t i = 0; i < kSharedSentimentWords / 2; ++i) lex.base_polarity[order[i]] = 1;
  for (std::size_t w = 0; w < kSharedSentimentWords; ++w) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "senti%02zu", w);
    lex.sentiment.emplace_back(buf);
  }
  const auto n_flip = static_cast<std::size_t>(std::lround(flip_fraction * kSharedSentimentWords));
  rng.shuffle(order);
  lex.flipped.assign(kSharedSentimentWords, false);
  for (std::size_t i = 0; i < n_flip; ++i) lex.flipped[order[i]] = true;
  return lex;
}

Example make_example(Rng& rng, const Lexicon& lex, std::size_t task, int label) {
  const bool odd_task = task % 2 == 1;
  auto polarity = [&](std::size_t w) { return (odd_task && lex.flipped[w]) ? 1 - lex.base_polarity[w] : lex.base_polarity[w]; };
  std::vector<std::size_t> with_label;
  std::vector<std::size_t> against_label;
  for (std::size_t w = 0; w < kSharedSentimentWords; ++w) {
    (polarity(w) == label ? with_label : against_label).push_back(w);
  }

  Example ex;
  ex.label = label;
  const std::size_t n_filler = kMinFiller + rng.index(kMaxFiller - kMinFiller + 1);
  for (std::size_t i = 0; i < n_filler; ++i) {
    if (rng.bernoulli(kPrivateFillerShare)) {
      ex.sentence.push_back(numbered("d", task, rng.index(kFillerPerTask)));
    } else {
      ex.sentence.push_back(common_filler()[rng.index(common_filler().size())]);
    }
  }
  const std::string aspect = numbered("asp", task, rng.index(kAspectsPerTask));
  ex.sentence.push_back(aspect);
  ex.aspect.push_back(aspect);

  if (label != kNeutral) {
    const bool three = rng.bernoulli(0.5);
    const std::size_t n_with = three ? 2 + rng.index(2) : 1;
    const std::size_t n_against = three ? 3 - n_with : 0;
    rng.shuffle(with_label);
    rng.shuffle(against_label);
    for (std::size_t i = 0; i < n_with; ++i) ex.sentence.push_back(lex.sentiment[with_label[i]]);
    for (std::size_t i = 0; i < n_against; ++i) ex.sentence.push_back(lex.sentiment[against_label[i]]);
  }
  rng.shuffle(ex.sentence);
  return ex;
}

std::vector<Example> make_split(Rng& rng, const Lexicon& lex, std::size_t task, std::size_t count,
                                std::size_t n_classes) {
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<int>(i % n_classes);
  rng.shuffle(labels);
  std::vector<Example> out;
  out.reserve(count);
  for (int label : labels) out.push_back(make_example(rng, lex, task, label));
  return out;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.n_tasks < 2) throw ConfigError("n_tasks out of range (need >= 2)");
  if (spec.examples_per_task < 30) throw ConfigError("examples_per_task out of range (need >= 30)");
  if (!(spec.flip_fraction >= 0.0 && spec.flip_fraction <= 1.0)) throw ConfigError("flip_fraction out of range");
  if (spec.n_classes != 2 && spec.n_classes != 3) throw ConfigError("n_classes out of range (2 or 3)");
}

std::vector<TaskDataset> generate_synthetic_suite(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  const Lexicon lex = make_lexicon(rng, spec.flip_fraction);
  const std::size_t n_train = spec.examples_per_task * 70 / 100;
  const std::size_t n_valid = spec.examples_per_task * 15 / 100;
  const std::size_t n_test = spec.examples_per_task - n_train - n_valid;

  std::vector<TaskDataset> suite;
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    TaskDataset task;
    char name[24];
    std::snprintf(name, sizeof(name), "task%02zu", t + 1);
    task.name = name;
    task.train = make_split(rng, lex, t, n_train, spec.n_classes);
    task.valid = make_split(rng, lex, t, n_valid, spec.n_classes);
    task.test = make_split(rng, lex, t, n_test, spec.n_classes);
    suite.push_back(std::move(task));
  }
  return suite;
}

}  // namespace classic::data
