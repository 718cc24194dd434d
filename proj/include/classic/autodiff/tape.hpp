#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "classic/autodiff/tensor.hpp"

namespace classic::ad {

/// Ordered record of executed ops. Ops consult the thread's active tape (see
/// TapeScope); with no active tape, or inside a NoGradScope, nothing is
/// recorded and outputs never require gradient.
class Tape {
 public:
  /// Receives the output gradient and accumulates into the op's inputs.
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  void record(const Tensor& output, BackwardFn backward);

  /// Reverse pass from a scalar loss. Each recorded op runs at most once, in
  /// reverse order of recording; ops whose output received no gradient are
  /// skipped. Gradients accumulate into leaf tensors' grad buffers.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::shared_ptr<TensorNode> output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

/// The tape ops on this thread record to, or nullptr.
Tape* active_tape();

/// True when an op with these inputs should be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
bool should_record(const std::vector<Tensor>& inputs);

/// Installs a tape as the thread's active tape for the scope's lifetime.
class TapeScope {
 public:
  TapeScope();
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

  Tape& tape() { return tape_; }
  void backward(const Tensor& loss) { tape_.backward(loss); }

 private:
  Tape tape_;
  Tape* previous_;
};

/// Suspends recording on this thread.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  bool previous_;
};

}  // namespace classic::ad
