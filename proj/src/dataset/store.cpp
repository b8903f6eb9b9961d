#include "gapcast/dataset/store.hpp"

namespace gapcast::dataset {

const SceneSequence& SequenceStore::fetch(Split s, std::size_t index, Phase phase) {
  if (phase == Phase::gradient && s != Split::train) {
    ++blocked_;
    throw SplitLeakError("refusing to read " + std::string(to_string(s)) + " sequence " + std::to_string(index) +
                         " during gradient computation");
  }
  const auto& seqs = data_[s];
  if (index >= seqs.size()) {
    throw std::out_of_range(std::string(to_string(s)) + " sequence " + std::to_string(index) + " out of range");
  }
  const auto& seq = seqs[index];
  reads_[static_cast<std::size_t>(s)][static_cast<std::size_t>(phase)] += (seq.length() + 1) * seq.target.grid.size();
  return seq;
}

}  // namespace gapcast::dataset
