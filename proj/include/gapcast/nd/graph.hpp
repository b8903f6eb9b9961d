#pragma once

#include <functional>
#include <vector>

#include "gapcast/nd/tensor.hpp"

namespace gapcast::nd {

/// Tape of executed operations for reverse-mode differentiation.
///
/// Operations append their backward rule in execution order, which is a valid
/// topological order; backward() replays the rules once, newest first. A graph
/// built with recording disabled evaluates forward only.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }
  std::size_t node_count() const { return nodes_.size(); }

  /// True when an op on these inputs must register a backward rule.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(std::function<void()> backward);

  /// Seeds d(root)/d(root) = 1 and runs every recorded rule once in reverse.
  /// The tape is consumed; a second call throws.
  void backward(Tensor root);

 private:
  bool recording_;
  bool consumed_ = false;
  std::vector<std::function<void()>> nodes_;
};

}  // namespace gapcast::nd
