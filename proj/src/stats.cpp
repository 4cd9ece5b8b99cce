#include "pfgm/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfgm/error.hpp"
#include "pfgm/numeric.hpp"

namespace pfgm {

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw DomainError("ks_statistic: no samples");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const auto na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_value(std::size_t n, double alpha) {
  if (n == 0 || !(alpha > 0.0 && alpha < 1.0)) throw DomainError("ks_critical_value: bad arguments");
  // c(alpha) = sqrt(-ln(alpha / 2) / 2); 1.628 at alpha = 0.01.
  const double c = std::sqrt(-0.5 * std::log(0.5 * alpha));
  return c / std::sqrt(static_cast<double>(n));
}

namespace {

double mean_pair_distance(const Mat& a, const Mat& b, bool same) {
  const auto na = static_cast<std::size_t>(a.rows()), nb = static_cast<std::size_t>(b.rows());
  const Eigen::Index dim = a.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < na; ++i) {
    const auto start = same ? i + 1 : 0;
    total += detail::pairwise_sum(start, nb, [&](std::size_t j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double d = a(static_cast<Eigen::Index>(i), k) - b(static_cast<Eigen::Index>(j), k);
        s += d * d;
      }
      return std::sqrt(s);
    });
  }
  const double pairs = same ? 0.5 * static_cast<double>(na) * static_cast<double>(na - 1)
                            : static_cast<double>(na) * static_cast<double>(nb);
  return total / pairs;
}

}  // namespace

double energy_distance(const Mat& a, const Mat& b) {
  if (a.cols() != b.cols()) throw DimensionError("energy_distance: dimension mismatch");
  if (a.rows() < 2 || b.rows() < 2) throw DomainError("energy_distance: need at least two points per set");
  return 2.0 * mean_pair_distance(a, b, false) - mean_pair_distance(a, a, true) - mean_pair_distance(b, b, true);
}

std::vector<int> solve_assignment(const Mat& cost) {
  // Shortest augmenting path with potentials (Hungarian method), O(n^3).
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw DimensionError("solve_assignment: cost must be square");
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double wasserstein2(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("wasserstein2: sets must have equal shape");
  if (a.rows() == 0) throw DomainError("wasserstein2: empty sets");
  Mat cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) total += cost(i, match[static_cast<std::size_t>(i)]);
  return std::sqrt(total / static_cast<double>(a.rows()));
}

double wasserstein2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.size() != b.size() || a.empty()) throw DomainError("wasserstein2_1d: need equal nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(total / static_cast<double>(a.size()));
}

double chi_relative_std(int n) {
  if (n < 1) throw DomainError("chi_relative_std: n must be >= 1");
  const double mu = std::sqrt(2.0) * std::exp(std::lgamma(0.5 * (n + 1)) - std::lgamma(0.5 * n));
  return std::sqrt(std::max(0.0, n - mu * mu)) / mu;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace pfgm
