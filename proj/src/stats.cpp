#include "rilab/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "rilab/errors.hpp"

namespace rilab {

double normal_quantile(double p) {
  require(p > 0 && p < 1, "normal_quantile: p must lie in (0,1)");
  return boost::math::quantile(boost::math::normal(), p);
}

Estimate wilson(std::int64_t k, std::int64_t n, double confidence) {
  require(n >= 0 && k >= 0 && k <= n, "wilson: need 0 <= successes <= n");
  require(confidence > 0 && confidence < 1, "wilson: confidence must lie in (0,1)");
  Estimate e;
  e.successes = k;
  e.replicates = n;
  if (n == 0) {
    e.ci_hi = 1;
    return e;
  }
  const double z = normal_quantile(0.5 + confidence / 2);
  const double p = double(k) / double(n);
  const double nn = double(n);
  const double denom = 1 + z * z / nn;
  const double center = (p + z * z / (2 * nn)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / denom;
  e.value = p;
  e.ci_lo = std::max(0.0, center - half);
  e.ci_hi = std::min(1.0, center + half);
  e.std_error = std::sqrt(p * (1 - p) / nn);
  return e;
}

namespace {
ChiSquare finish(double stat, double dof) {
  ChiSquare c;
  c.statistic = stat;
  c.dof = dof;
  if (dof <= 0) return c;
  c.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
  return c;
}
}  // namespace

ChiSquare chi_square_gof(const std::vector<double>& observed, const std::vector<double>& probs,
                         double min_expected) {
  require(observed.size() == probs.size(), "chi_square_gof: size mismatch");
  double n = 0;
  for (auto o : observed) n += o;
  double stat = 0, pooled_o = 0, pooled_e = 0;
  int cells = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probs[i];
    if (e < min_expected) {
      pooled_o += observed[i];
      pooled_e += e;
      continue;
    }
    stat += (observed[i] - e) * (observed[i] - e) / e;
    ++cells;
  }
  if (pooled_e > 0) {
    stat += (pooled_o - pooled_e) * (pooled_o - pooled_e) / pooled_e;
    ++cells;
  } else if (pooled_o > 0) {
    return finish(INFINITY, std::max(cells - 1, 1));
  }
  return finish(stat, cells - 1);
}

ChiSquare chi_square_two_sample(const std::vector<double>& a, const std::vector<double>& b, double min_expected) {
  require(a.size() == b.size(), "chi_square_two_sample: size mismatch");
  double na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    na += a[i];
    nb += b[i];
  }
  require(na > 0 && nb > 0, "chi_square_two_sample: empty sample");
  const double n = na + nb;
  std::vector<std::pair<double, double>> cells;
  double pa = 0, pb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double col = a[i] + b[i];
    if (std::min(na, nb) * col / n < min_expected) {
      pa += a[i];
      pb += b[i];
    } else {
      cells.emplace_back(a[i], b[i]);
    }
  }
  if (pa + pb > 0) cells.emplace_back(pa, pb);
  double stat = 0;
  for (const auto& [x, y] : cells) {
    const double col = x + y;
    const double ea = na * col / n, eb = nb * col / n;
    stat += (x - ea) * (x - ea) / ea + (y - eb) * (y - eb) / eb;
  }
  return finish(stat, double(cells.size()) - 1);
}

ChiSquare chi_square_independence(const std::vector<double>& t, std::size_t rows, std::size_t cols) {
  require(t.size() == rows * cols, "chi_square_independence: size mismatch");
  std::vector<double> r(rows, 0), c(cols, 0);
  double n = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      r[i] += t[i * cols + j];
      c[j] += t[i * cols + j];
      n += t[i * cols + j];
    }
  require(n > 0, "chi_square_independence: empty table");
  std::size_t nr = 0, nc = 0;
  for (auto x : r) nr += x > 0;
  for (auto x : c) nc += x > 0;
  double stat = 0;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (r[i] == 0 || c[j] == 0) continue;
      const double e = r[i] * c[j] / n;
      stat += (t[i * cols + j] - e) * (t[i * cols + j] - e) / e;
    }
  return finish(stat, double((nr > 0 ? nr - 1 : 0) * (nc > 0 ? nc - 1 : 0)));
}

void CovarianceAccumulator::add(double a, double b) {
  ++n_;
  sa_ += a;
  sb_ += b;
  sab_ += a * b;
  saa_ += a * a;
  sbb_ += b * b;
  saab_ += a * a * b;
  sabb_ += a * b * b;
  saabb_ += a * a * b * b;
}

void CovarianceAccumulator::merge(const CovarianceAccumulator& o) {
  n_ += o.n_;
  sa_ += o.sa_;
  sb_ += o.sb_;
  sab_ += o.sab_;
  saa_ += o.saa_;
  sbb_ += o.sbb_;
  saab_ += o.saab_;
  sabb_ += o.sabb_;
  saabb_ += o.saabb_;
}

double CovarianceAccumulator::covariance() const {
  if (n_ == 0) return 0;
  return sab_ / double(n_) - mean_a() * mean_b();
}

double CovarianceAccumulator::std_error() const {
  if (n_ < 2) return INFINITY;
  const double n = double(n_);
  const double al = mean_a(), be = mean_b();
  // E[(a - al)^2 (b - be)^2] expanded in raw moments.
  const double m22 = saabb_ / n - 2 * be * saab_ / n + be * be * saa_ / n - 2 * al * sabb_ / n +
                     4 * al * be * sab_ / n - 2 * al * be * be * sa_ / n + al * al * sbb_ / n -
                     2 * al * al * be * sb_ / n + al * al * be * be;
  const double c = covariance();
  return std::sqrt(std::max(0.0, m22 - c * c) / n);
}

CovarianceEstimate summarize(const CovarianceAccumulator& acc, double confidence) {
  CovarianceEstimate e;
  e.cov = acc.covariance();
  e.std_error = acc.std_error();
  e.replicates = acc.count();
  const double z = normal_quantile(0.5 + confidence / 2);
  e.ci_lo = e.cov - z * e.std_error;
  e.ci_hi = e.cov + z * e.std_error;
  return e;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& w) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  require(w.empty() || w.size() == x.size(), "fit_line: weight size mismatch");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0, "fit_line: degenerate abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (w.empty()) {
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_se = x.size() > 2 ? std::sqrt(rss / double(x.size() - 2) / sxx) : 0;
  } else {
    // Weights are inverse variances.
    f.slope_se = std::sqrt(1 / sxx);
  }
  return f;
}

}  // namespace rilab
