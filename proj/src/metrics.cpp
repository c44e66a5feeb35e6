#include "empdis/metrics.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <string>

#include "empdis/error.hpp"

namespace empdis {

namespace {

double mean_of(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    raise(ErrorCode::LengthMismatch,
          "pearson: " + std::to_string(x.size()) + " vs " +
              std::to_string(y.size()) + " values");
  }
  if (x.size() < 2) {
    raise(ErrorCode::TooFew, "pearson needs at least 2 points, got " +
                                 std::to_string(x.size()));
  }

  const double mx = mean_of(x);
  const double my = mean_of(y);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }

  if (sxx == 0.0) {
    raise(ErrorCode::ZeroVariance, "pearson: first vector is constant");
  }
  if (syy == 0.0) {
    raise(ErrorCode::ZeroVariance, "pearson: second vector is constant");
  }
  return sxy / std::sqrt(sxx * syy);
}

double averaged_pearson(double r_empathy, double r_distress) {
  // pearson() may exceed the unit interval by rounding; allow its slack.
  const auto in_range = [](double r) {
    return r >= -1.0 - 1e-12 && r <= 1.0 + 1e-12;
  };
  if (!in_range(r_empathy) || !in_range(r_distress)) {
    raise(ErrorCode::OutOfRange, "correlations must lie in [-1, 1]");
  }
  return (r_empathy + r_distress) / 2.0;
}

EvalReport evaluate(std::span<const double> pred_empathy,
                    std::span<const double> pred_distress,
                    std::span<const double> gold_empathy,
                    std::span<const double> gold_distress,
                    const std::string& run_id) {
  if (pred_empathy.size() != gold_empathy.size() ||
      pred_distress.size() != gold_distress.size() ||
      pred_empathy.size() != pred_distress.size()) {
    raise(ErrorCode::LengthMismatch, "evaluate: lists must share one length");
  }
  EvalReport report;
  report.run_id = run_id;
  report.n_examples = pred_empathy.size();
  report.pearson_empathy = pearson(pred_empathy, gold_empathy);
  report.pearson_distress = pearson(pred_distress, gold_distress);
  report.averaged_pearson =
      averaged_pearson(report.pearson_empathy, report.pearson_distress);
  return report;
}

std::string format_report(const EvalReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%s  n=%zu  r_empathy=%.4f  r_distress=%.4f  averaged=%.4f",
                report.run_id.c_str(), report.n_examples,
                report.pearson_empathy, report.pearson_distress,
                report.averaged_pearson);
  return buf;
}

std::string report_block(const EvalReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "run_id=%s\n"
                "n=%zu\n"
                "pearson_empathy=%.17g\n"
                "pearson_distress=%.17g\n"
                "averaged_pearson=%.17g\n\n",
                report.run_id.c_str(), report.n_examples,
                report.pearson_empathy, report.pearson_distress,
                report.averaged_pearson);
  return buf;
}

void append_report(const std::filesystem::path& log_path,
                   const EvalReport& report) {
  const std::string block = report_block(report);
  const int fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) {
    raise(ErrorCode::IoError, "cannot open results log " + log_path.string());
  }
  ::flock(fd, LOCK_EX);
  const ssize_t written = ::write(fd, block.data(), block.size());
  ::flock(fd, LOCK_UN);
  ::close(fd);
  if (written != static_cast<ssize_t>(block.size())) {
    raise(ErrorCode::IoError, "short write to results log " + log_path.string());
  }
}

}  // namespace empdis
