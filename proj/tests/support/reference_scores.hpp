#pragma once

#include <array>

namespace testutil {

// Published EMP-track scores of the system this project replicates: four
// base models and four ensembles, each row carrying the averaged Pearson
// correlation alongside the per-target values. The suites check that the
// averaged column is consistent with the per-target columns under the
// official metric.
struct ReferenceScore {
  const char* system;
  double averaged;
  double empathy;
  double distress;
};

inline constexpr std::array<ReferenceScore, 8> kReferenceScores = {{
    {"twitter-roberta-emotion", 0.3189, 0.3389, 0.2991},
    {"twitter-roberta-sentiment", 0.294, 0.3128, 0.2753},
    {"unsup-simcse-roberta", 0.35285, 0.3311, 0.3746},
    {"roberta-base", 0.29075, 0.3444, 0.2371},
    {"ensemble-mean", 0.34619, 0.3585, 0.3339},
    {"ensemble-linear-regression", 0.3285, 0.3349, 0.3221},
    {"ensemble-svr", 0.3221, 0.3837, 0.2605},
    {"ensemble-xgboost", 0.2898, 0.3502, 0.2294},
}};

// The submitted mean ensemble as it appears on the final leaderboard
// (rank 3), and the same value as usually quoted at three decimals.
inline constexpr double kSubmittedMeanAveraged = 0.34619;
inline constexpr double kLeaderboardScore = 0.3462;
inline constexpr double kLeaderboardScore3dp = 0.346;

}  // namespace testutil
