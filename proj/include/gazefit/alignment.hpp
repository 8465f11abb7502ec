#pragma once

#include <cstddef>
#include <vector>

namespace gazefit {

// Inclusive subword index range [first, last] covered by one segment.
struct SubwordRange {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t size() const { return last - first + 1; }
  friend bool operator==(const SubwordRange&, const SubwordRange&) = default;
};

// Segment index -> contiguous subword range. Ranges are nonempty, ordered and
// partition [0, total_subwords).
struct Alignment {
  std::vector<SubwordRange> ranges;

  std::size_t segments() const { return ranges.size(); }
  std::size_t total_subwords() const { return ranges.empty() ? 0 : ranges.back().last + 1; }
  friend bool operator==(const Alignment&, const Alignment&) = default;
};

}  // namespace gazefit
