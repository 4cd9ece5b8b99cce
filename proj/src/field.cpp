#include "pfgm/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "pfgm/error.hpp"
#include "pfgm/numeric.hpp"

namespace pfgm {

namespace {
constexpr int kMaxTreeOrder = 8;
}

Vec AugmentedPoint::joined() const {
  Vec out(x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = z;
  return out;
}

AugmentedPoint AugmentedPoint::split(const Vec& aug) {
  if (aug.size() < 2) throw DimensionError("augmented point needs at least two coordinates");
  return {aug.head(aug.size() - 1), aug[aug.size() - 1]};
}

namespace {

void check_query(const AugmentedPoint& q, const Dataset& d) {
  if (d.empty()) throw DomainError("field of an empty dataset");
  if (q.x.size() != d.dim())
    throw DimensionError("query dimension " + std::to_string(q.x.size()) + " does not match dataset dimension " +
                         std::to_string(d.dim()));
}

[[noreturn]] void throw_singular(std::size_t i) {
  throw SingularityError("query coincides with source " + std::to_string(i), i);
}

using Array = Eigen::ArrayXd;

// Squared augmented distances from q to every source; returns the minimum.
double squared_distances(const AugmentedPoint& q, const Dataset& d, Array& r2) {
  const Mat& p = d.points();
  r2.setConstant(static_cast<Eigen::Index>(d.size()), q.z * q.z);
  for (int j = 0; j < d.dim(); ++j) r2 += (p.col(j).array() - q.x[j]).square();
  Eigen::Index at = 0;
  const double r2min = r2.minCoeff(&at);
  if (r2min < kSingularRadius * kSingularRadius) throw_singular(static_cast<std::size_t>(at));
  return r2min;
}

// Unnormalized weights scaled so the largest is at most one.
void scaled_weights(const AugmentedPoint& q, const Dataset& d, Array& w) {
  const double r2min = squared_distances(q, d, w);
  const int twice_p = d.dim() + 1;
  w = r2min / w;
  const Array ratio = w;
  for (int i = 1; i < twice_p / 2; ++i) w *= ratio;
  if (twice_p % 2) w *= ratio.sqrt();
  if (d.has_charges()) w *= d.charges().array();
}

// Pairwise reduction over blocks; each block is summed with Eigen's packet
// reduction.
template <class Expr>
double blocked_sum(const Expr& e) {
  constexpr Eigen::Index kBlock = 256;
  const Eigen::Index n = e.size();
  const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
  return detail::pairwise_sum(0, blocks, [&](std::size_t b) {
    const auto start = static_cast<Eigen::Index>(b) * kBlock;
    return e.segment(start, std::min(kBlock, n - start)).sum();
  });
}

}  // namespace

Vec field_weights(const AugmentedPoint& q, const Dataset& d) {
  check_query(q, d);
  Array w;
  scaled_weights(q, d, w);
  return (w / blocked_sum(w)).matrix();
}

Vec empirical_field(const AugmentedPoint& q, const Dataset& d) {
  check_query(q, d);
  thread_local Array w, term;
  scaled_weights(q, d, w);
  const double total = blocked_sum(w);
  const int n = d.dim();
  Vec e(n + 1);
  for (int j = 0; j < n; ++j) {
    term = w * (q.x[j] - d.points().col(j).array());
    e[j] = blocked_sum(term) / total;
  }
  e[n] = q.z;
  return e;
}

FieldEstimate normalize(const Vec& e_hat, int n, double gamma) {
  if (gamma < 0.0) throw DomainError("gamma must be nonnegative");
  const double denom = e_hat.norm() + gamma;
  if (!(denom > 0.0)) throw NumericalError("normalized field undefined: zero field with gamma = 0");
  return {e_hat, -std::sqrt(static_cast<double>(n)) * e_hat / denom, gamma};
}

FieldEstimate normalized_field(const AugmentedPoint& q, const Dataset& d, double gamma) {
  return normalize(empirical_field(q, d), d.dim(), gamma);
}

Mat normalized_field_batch(const Mat& queries, const Dataset& d, double gamma) {
  if (queries.cols() != d.dim() + 1) throw DimensionError("batch queries must have N+1 columns");
  Mat out(queries.rows(), queries.cols());
  for (Eigen::Index r = 0; r < queries.rows(); ++r)
    out.row(r) = normalized_field(AugmentedPoint::split(queries.row(r).transpose()), d, gamma).v.transpose();
  return out;
}

Vec unnormalized_field(const AugmentedPoint& q, const Dataset& d) {
  check_query(q, d);
  Array k;
  squared_distances(q, d, k);
  const int n = d.dim();
  const int twice_p = n + 1;
  k = k.unaryExpr([twice_p](double r2) { return detail::inv_pow_half(r2, twice_p); });
  if (d.has_charges()) k *= d.charges().array();
  Vec e(n + 1);
  Array term;
  for (int j = 0; j < n; ++j) {
    term = k * (q.x[j] - d.points().col(j).array());
    e[j] = blocked_sum(term);
  }
  e[n] = q.z * blocked_sum(k);
  return e;
}

Vec discrete_charge_field(const Vec& y, const Dataset& charges, double sign) {
  if (charges.empty()) throw DomainError("no charges");
  if (y.size() != charges.dim()) throw DimensionError("query dimension does not match charge dimension");
  const int n = charges.dim();
  Vec e = Vec::Zero(n);
  for (std::size_t i = 0; i < charges.size(); ++i) {
    const Vec r = y - charges.point(i);
    const double r2 = r.squaredNorm();
    if (r2 < kSingularRadius * kSingularRadius) throw_singular(i);
    e += charges.charge(i) * detail::inv_pow_half(r2, n) * r;
  }
  return sign * e;
}

// ---------------------------------------------------------------------------
// Tree code

TreeCode::TreeCode(const Dataset& d, std::size_t leaf_capacity, double theta, int order)
    : dim_(d.dim()), leaf_capacity_(leaf_capacity), theta_(theta), expansion_order_(order) {
  if (order < 0 || order > kMaxTreeOrder) throw DomainError("tree expansion order must be in [0, 8]");
  if (d.empty()) throw DomainError("tree over an empty dataset");
  if (leaf_capacity == 0) throw DomainError("leaf capacity must be >= 1");
  if (!(theta >= 0.0)) throw DomainError("opening angle must be nonnegative");
  order_.resize(d.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  points_ = d.points();
  charges_ = d.charges();
  nodes_.reserve(2 * d.size() / leaf_capacity + 2);
  build(0, d.size());
  Mat reordered(points_.rows(), points_.cols());
  Vec q(charges_.size());
  for (std::size_t k = 0; k < order_.size(); ++k) {
    reordered.row(static_cast<Eigen::Index>(k)) = points_.row(static_cast<Eigen::Index>(order_[k]));
    q[static_cast<Eigen::Index>(k)] = charges_[static_cast<Eigen::Index>(order_[k])];
  }
  points_ = std::move(reordered);
  charges_ = std::move(q);
}

int TreeCode::build(std::size_t begin, std::size_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = Vec::Constant(dim_, std::numeric_limits<double>::infinity());
  node.hi = Vec::Constant(dim_, -std::numeric_limits<double>::infinity());
  node.centroid = Vec::Zero(dim_);
  for (std::size_t k = begin; k < end; ++k) {
    const auto row = static_cast<Eigen::Index>(order_[k]);
    const Vec p = points_.row(row).transpose();
    node.lo = node.lo.cwiseMin(p);
    node.hi = node.hi.cwiseMax(p);
    node.charge += charges_[row];
    node.centroid += charges_[row] * p;
  }
  node.centroid /= node.charge;
  double r2max = 0.0;
  if (expansion_order_ > 0) {
    for (int j = 0; 2 * j <= expansion_order_; ++j)
      for (int m = 0; m + 2 * j <= expansion_order_; ++m)
        node.moments.push_back(Vec::Zero(static_cast<Eigen::Index>(std::pow(dim_, m))));
  }
  for (std::size_t k = begin; k < end; ++k) {
    const auto row = static_cast<Eigen::Index>(order_[k]);
    const Vec delta = points_.row(row).transpose() - node.centroid;
    const double beta = delta.squaredNorm();
    r2max = std::max(r2max, beta);
    if (expansion_order_ == 0) continue;
    // Tensor powers of delta, built by repeated outer products.
    Vec power = Vec::Constant(1, charges_[row]);
    for (int m = 0; m <= expansion_order_; ++m) {
      double scale = 1.0;
      for (int j = 0; m + 2 * j <= expansion_order_; ++j, scale *= beta)
        node.moments[slot(m, j)] += scale * power;
      if (m == expansion_order_) break;
      Vec next(power.size() * dim_);
      for (Eigen::Index i = 0; i < power.size(); ++i) next.segment(i * dim_, dim_) = power[i] * delta;
      power = std::move(next);
    }
  }
  node.diameter = 2.0 * std::sqrt(r2max);

  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  Eigen::Index axis = 0;
  const double extent = (node.hi - node.lo).maxCoeff(&axis);
  if (end - begin <= leaf_capacity_ || extent == 0.0) return index;

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                     return points_(static_cast<Eigen::Index>(a), axis) < points_(static_cast<Eigen::Index>(b), axis);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(index)].left = left;
  nodes_[static_cast<std::size_t>(index)].right = right;
  return index;
}

void TreeCode::accumulate(int index, const Vec& q, Sums& out) const {
  const Node& node = nodes_[static_cast<std::size_t>(index)];
  const int twice_p = dim_ + 1;
  Vec r(dim_ + 1);
  r.head(dim_) = q.head(dim_) - node.centroid;
  r[dim_] = q[dim_];
  const double dist = r.norm();
  if (node.diameter < theta_ * dist) {
    const double r2 = dist * dist;
    const double s = detail::inv_pow_half(r2, twice_p);  // |r|^-D with D = N + 1
    out.field += node.charge * s * r;
    out.weight += node.charge * s;
    if (expansion_order_ > 0) add_expansion(node, r, s, out);
    return;
  }
  if (!node.leaf()) {
    accumulate(node.left, q, out);
    accumulate(node.right, q, out);
    return;
  }
  for (std::size_t k = node.begin; k < node.end; ++k) {
    const auto row = static_cast<Eigen::Index>(k);
    r.head(dim_) = q.head(dim_) - points_.row(row).transpose();
    const double r2 = r.squaredNorm();
    if (r2 < kSingularRadius * kSingularRadius) throw_singular(order_[k]);
    const double w = charges_[row] * detail::inv_pow_half(r2, twice_p);
    out.field += w * r;
    out.weight += w;
  }
}

std::size_t TreeCode::slot(int m, int j) const {
  // Slots are grouped by j; group j holds m = 0 .. order - 2j.
  std::size_t base = 0;
  for (int jj = 0; jj < j; ++jj) base += static_cast<std::size_t>(expansion_order_ - 2 * jj + 1);
  return base + static_cast<std::size_t>(m);
}

void TreeCode::add_expansion(const Node& node, const Vec& r, double s, Sums& out) const {
  // Along the segment from the centroid to a source, |r - t d|^-D has Taylor
  // coefficients in t given by Gegenbauer polynomials with lambda = D / 2:
  //   [t^k] = |r|^-D sum_j c_kj 2^(k-2j) (r.d)^(k-2j) |d|^(2j) |r|^(2j-2k),
  //   c_kj = (-1)^j (lambda)_(k-j) / (j! (k-2j)!).
  // The field kernel (r - t d)|r - t d|^-D picks up r [t^k] - d [t^(k-1)].
  const int p = expansion_order_;
  const double lambda = 0.5 * static_cast<double>(dim_ + 1);
  const double rho2 = r.squaredNorm();
  const auto rx = r.head(dim_);

  // contracted[slot(m, j)] holds the moment with all m indices contracted
  // against r, and vec[slot(m, j)] leaves the last index free (m >= 1).
  std::vector<double> contracted(node.moments.size(), 0.0);
  std::vector<Vec> vec(node.moments.size());
  for (int j = 0; 2 * j <= p; ++j) {
    for (int m = 0; m + 2 * j <= p; ++m) {
      const std::size_t idx = slot(m, j);
      Vec t = node.moments[idx];
      for (int c = 0; c + 1 < m; ++c) {
        // Contract the first remaining index.
        const Eigen::Index stride = t.size() / dim_;
        Vec reduced = Vec::Zero(stride);
        for (int a = 0; a < dim_; ++a) reduced += rx[a] * t.segment(a * stride, stride);
        t = std::move(reduced);
      }
      if (m >= 1) {
        vec[idx] = t;
        contracted[idx] = rx.dot(t);
      } else {
        contracted[idx] = t[0];
      }
    }
  }

  double weight = 0.0;
  Vec field_x = Vec::Zero(dim_);
  for (int k = 1; k <= p; ++k) {
    double pochhammer_base = 1.0;  // (lambda)_(k) built incrementally below
    for (int i = 0; i < k; ++i) pochhammer_base *= lambda + i;
    double poch = pochhammer_base;  // (lambda)_(k - j)
    double jfact = 1.0;
    for (int j = 0; 2 * j <= k; ++j) {
      if (j > 0) {
        poch /= lambda + (k - j);
        jfact *= j;
      }
      const int m = k - 2 * j;
      const double coef = (j % 2 ? -1.0 : 1.0) * poch / (jfact * std::tgamma(m + 1.0)) * std::ldexp(1.0, m) *
                          std::pow(rho2, static_cast<double>(j - k));
      weight += coef * contracted[slot(m, j)];
      // The same coefficient at order k feeds the -d [t^k] part of order k + 1.
      if (k + 1 <= p && m + 1 + 2 * j <= p) field_x -= coef * vec[slot(m + 1, j)];
    }
  }
  // k = 0 term of [t^k] times d feeds order 1: sum q d = 0 about the centroid.
  out.field += (s * weight) * r;
  out.field.head(dim_) += s * field_x;
  out.weight += s * weight;
}

TreeCode::Sums TreeCode::evaluate(const AugmentedPoint& q) const {
  if (q.x.size() != dim_) throw DimensionError("query dimension does not match tree dimension");
  Sums out{Vec::Zero(dim_ + 1), 0.0};
  accumulate(0, q.joined(), out);
  return out;
}

TreeCode build_tree(const Dataset& d, std::size_t leaf_capacity, double theta, int order) {
  return TreeCode(d, leaf_capacity, theta, order);
}

Vec tree_field(const AugmentedPoint& q, const TreeCode& tree) { return tree.evaluate(q).field; }

Vec tree_empirical_field(const AugmentedPoint& q, const TreeCode& tree) {
  const auto sums = tree.evaluate(q);
  Vec e = sums.field / sums.weight;
  e[tree.dim()] = q.z;
  return e;
}

}  // namespace pfgm
