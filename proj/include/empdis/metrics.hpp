#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace empdis {

// Pearson's r, two-pass (means first, then centered moments). Errors:
// LengthMismatch, TooFew (n < 2), ZeroVariance (either vector constant;
// never silently reported as 0).
double pearson(std::span<const double> x, std::span<const double> y);

// Arithmetic mean of the two per-target correlations, the task's official
// ranking metric. Errors: OutOfRange unless both inputs lie in [-1, 1].
double averaged_pearson(double r_empathy, double r_distress);

struct EvalReport {
  double pearson_empathy = 0.0;
  double pearson_distress = 0.0;
  double averaged_pearson = 0.0;
  std::size_t n_examples = 0;
  std::string run_id;
};

EvalReport evaluate(std::span<const double> pred_empathy,
                    std::span<const double> pred_distress,
                    std::span<const double> gold_empathy,
                    std::span<const double> gold_distress,
                    const std::string& run_id);

// Display form, 4 decimal places.
std::string format_report(const EvalReport& report);

// Machine-readable key-value block, full precision.
std::string report_block(const EvalReport& report);

// Appends a report block to the results log under an exclusive lock.
void append_report(const std::filesystem::path& log_path,
                   const EvalReport& report);

}  // namespace empdis
