#include "gapcast/nd/graph.hpp"

#include <stdexcept>

namespace gapcast::nd {

bool Graph::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const auto* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void Graph::record(std::function<void()> backward) {
  if (consumed_) throw std::logic_error("graph already differentiated");
  nodes_.push_back(std::move(backward));
}

void Graph::backward(Tensor root) {
  if (!recording_) throw std::logic_error("backward on a non-recording graph");
  if (consumed_) throw std::logic_error("backward called twice on the same graph");
  if (root.size() != 1) throw std::invalid_argument("backward root must be a scalar, got " + shape_string(root.shape()));
  consumed_ = true;
  root.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
}

}  // namespace gapcast::nd
