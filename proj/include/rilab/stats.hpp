#pragma once

#include <cstdint>
#include <vector>

namespace rilab {

// Proportion estimate with a Wilson score interval.
struct Estimate {
  double value = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  double std_error = 0;
  std::int64_t successes = 0;
  std::int64_t replicates = 0;
};

double normal_quantile(double p);
Estimate wilson(std::int64_t successes, std::int64_t n, double confidence = 0.99);

struct ChiSquare {
  double statistic = 0;
  double dof = 0;
  double p_value = 1;
};

// Goodness of fit of counts against cell probabilities.  Cells with expected
// count below min_expected are pooled into one cell.
ChiSquare chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probs,
                         double min_expected = 5);
// Homogeneity of two count vectors over the same cells; cells where both
// counts are small are pooled.
ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b,
                                double min_expected = 5);
// Independence in a rows x cols contingency table (row-major counts).
ChiSquare chi_square_independence(const std::vector<double>& table, std::size_t rows, std::size_t cols);

// Sample covariance of (a, b) pairs with a delta-method standard error.
class CovarianceAccumulator {
 public:
  void add(double a, double b);
  void merge(const CovarianceAccumulator& o);
  std::int64_t count() const { return n_; }
  double mean_a() const { return sa_ / double(n_); }
  double mean_b() const { return sb_ / double(n_); }
  double covariance() const;
  double std_error() const;

 private:
  std::int64_t n_ = 0;
  double sa_ = 0, sb_ = 0, sab_ = 0, saa_ = 0, sbb_ = 0, saab_ = 0, sabb_ = 0, saabb_ = 0;
};

struct CovarianceEstimate {
  double cov = 0;
  double std_error = 0;
  double ci_lo = 0;
  double ci_hi = 0;
  std::int64_t replicates = 0;
};

CovarianceEstimate summarize(const CovarianceAccumulator& acc, double confidence = 0.99);

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
};

// Weighted least squares y = a + b x; empty weights mean unit weights.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w = {});

}  // namespace rilab
