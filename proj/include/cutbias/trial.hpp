#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cutbias {

// One trial dataset: biomarker quantile in [0,1], arm indicator
// (1 = experimental, 0 = control) and binary response per subject.
struct TrialData {
  std::vector<double> biomarker;
  std::vector<std::uint8_t> arm;
  std::vector<std::uint8_t> response;

  std::size_t size() const { return biomarker.size(); }

  std::size_t arm_size(int m) const {
    std::size_t n = 0;
    for (auto a : arm) n += (a == m);
    return n;
  }

  void clear() {
    biomarker.clear();
    arm.clear();
    response.clear();
  }

  bool operator==(const TrialData&) const = default;
};

}  // namespace cutbias
