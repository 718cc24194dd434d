#include "classic/autodiff/tape.hpp"

#include "classic/error.hpp"

namespace classic::ad {

namespace {
thread_local Tape* t_active_tape = nullptr;
thread_local bool t_no_grad = false;
}  // namespace

Tape* active_tape() { return t_no_grad ? nullptr : t_active_tape; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

bool should_record(const std::vector<Tensor>& inputs) {
  if (active_tape() == nullptr) return false;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return true;
  }
  return false;
}

void Tape::record(const Tensor& output, BackwardFn backward) {
  entries_.push_back(Entry{output.node(), std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
  }
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;
    it->backward(it->output->grad);
  }
}

TapeScope::TapeScope() : previous_(t_active_tape) { t_active_tape = &tape_; }

TapeScope::~TapeScope() { t_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(t_no_grad) { t_no_grad = true; }

NoGradScope::~NoGradScope() { t_no_grad = previous_; }

}  // namespace classic::ad
