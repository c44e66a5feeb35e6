#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>

#include "empdis/error.hpp"

namespace empdis {

enum class Target { empathy, distress };
enum class Split { train, dev, test };

inline constexpr Target kTargets[] = {Target::empathy, Target::distress};

const char* to_string(Target t);
const char* to_string(Split s);
Target target_from_string(std::string_view s);
Split split_from_string(std::string_view s);

// Valid interval for gold scores and emitted predictions.
struct ScoreRange {
  double lo = 1.0;
  double hi = 7.0;

  double clamp(double v) const { return std::min(hi, std::max(lo, v)); }
  bool contains(double v) const { return v >= lo && v <= hi; }

  void validate() const {
    if (!(lo < hi)) {
      raise(ErrorCode::ConfigInvalid, "score_range requires lo < hi");
    }
  }
};

}  // namespace empdis
