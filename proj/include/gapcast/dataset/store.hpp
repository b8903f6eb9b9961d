#pragma once

#include <array>
#include <stdexcept>

#include "gapcast/dataset/dataset.hpp"

namespace gapcast::dataset {

/// What the caller intends to do with fetched data.
enum class Phase { gradient, evaluation };

class SplitLeakError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Split-tagged access to a dataset. Every fetch is counted in pixels per
/// (split, phase); fetching validation or test data in the gradient phase throws.
class SequenceStore {
 public:
  explicit SequenceStore(Dataset data) : data_(std::move(data)) {}

  std::size_t size(Split s) const { return data_[s].size(); }
  std::size_t window_length() const { return data_.window_length; }
  std::vector<std::string> volcano_ids() const { return data_.volcano_ids(); }

  const SceneSequence& fetch(Split s, std::size_t index, Phase phase);

  /// Pixels (inputs plus target) handed out so far.
  std::size_t pixel_reads(Split s, Phase phase) const {
    return reads_[static_cast<std::size_t>(s)][static_cast<std::size_t>(phase)];
  }
  std::size_t blocked_reads() const { return blocked_; }

 private:
  Dataset data_;
  std::array<std::array<std::size_t, 2>, 3> reads_{};
  std::size_t blocked_ = 0;
};

}  // namespace gapcast::dataset
