#pragma once

#include <cstddef>
#include <vector>

#include "pfgm/dataset.hpp"
#include "pfgm/geometry.hpp"

namespace pfgm {

// A point (x, z) of the augmented space R^(N+1). Data sits at z = 0.
struct AugmentedPoint {
  Vec x;
  double z = 0.0;

  Vec joined() const;
  static AugmentedPoint split(const Vec& aug);
};

struct FieldEstimate {
  Vec e_hat;  // empirical field, a convex combination of (q - x_i)
  Vec v;      // -sqrt(N) e_hat / (|e_hat| + gamma)
  double stabilizer = 0.0;
};

// Queries closer than this to a source are rejected.
inline constexpr double kSingularRadius = 1e-12;

// Normalized kernel weights w_i ∝ q_i |q - x_i|^-(N+1), summing to one.
Vec field_weights(const AugmentedPoint& q, const Dataset& d);

// E(q) = sum_i w_i (q - x_i) with the weights above; E_z == q.z exactly.
Vec empirical_field(const AugmentedPoint& q, const Dataset& d);

FieldEstimate normalized_field(const AugmentedPoint& q, const Dataset& d, double gamma);
FieldEstimate normalize(const Vec& e_hat, int n, double gamma);

// Rows of `queries` are augmented points; returns one v per row.
Mat normalized_field_batch(const Mat& queries, const Dataset& d, double gamma);

// sum_i q_i (q - x_i) / |q - x_i|^(N+1), without the normalizing constant.
Vec unnormalized_field(const AugmentedPoint& q, const Dataset& d);

// E(y) = sign * sum_i q_i (y - x_i) / |y - x_i|^n for charges living in R^n.
Vec discrete_charge_field(const Vec& y, const Dataset& charges, double sign = 1.0);

// Barnes-Hut tree over the sources of a dataset (at z = 0). A node is
// replaced by its Cartesian multipole expansion about the charge centroid,
// truncated after `order` terms, when diameter / distance < theta. Order 0 is
// the plain monopole. Moment storage per node grows as dim^order, so high
// orders are only practical in low dimension.
class TreeCode {
 public:
  struct Node {
    Vec lo, hi;          // bounding box
    Vec centroid;        // charge-weighted mean of contained points
    double charge = 0.0;
    double diameter = 0.0;  // 2 * max distance from centroid to a contained point
    // moments[slot(m, j)] = sum_i q_i |d_i|^(2j) d_i^{(x) m}, d_i = x_i - c,
    // flattened with the first index most significant.
    std::vector<Vec> moments;
    std::size_t begin = 0, end = 0;  // range into order()
    int left = -1, right = -1;
    bool leaf() const { return left < 0; }
  };

  TreeCode(const Dataset& d, std::size_t leaf_capacity, double theta, int order = 4);

  double theta() const { return theta_; }
  int expansion_order() const { return expansion_order_; }
  std::size_t leaf_capacity() const { return leaf_capacity_; }
  int dim() const { return dim_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<std::size_t>& order() const { return order_; }

  // Unnormalized field sum and the matching kernel-weight sum.
  struct Sums {
    Vec field;
    double weight = 0.0;
  };
  Sums evaluate(const AugmentedPoint& q) const;

 private:
  int build(std::size_t begin, std::size_t end);
  std::size_t slot(int m, int j) const;
  void add_expansion(const Node& node, const Vec& r, double s, Sums& out) const;
  void accumulate(int node, const Vec& q, Sums& out) const;

  int dim_;
  std::size_t leaf_capacity_;
  double theta_;
  int expansion_order_;
  Mat points_;  // reordered, one point per row
  Vec charges_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

TreeCode build_tree(const Dataset& d, std::size_t leaf_capacity, double theta, int order = 4);
Vec tree_field(const AugmentedPoint& q, const TreeCode& tree);
// Tree-approximated empirical field E (normalized by the weight sum).
Vec tree_empirical_field(const AugmentedPoint& q, const TreeCode& tree);

}  // namespace pfgm
