#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace pfgm {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Data dimension N and the augmented dimension N+1.
struct Dim {
  int n = 2;

  explicit Dim(int data_dim);
  int aug() const { return n + 1; }
};

// Seeded 64-bit generator. The stream id is mixed into the seed with
// SplitMix64, so (seed, stream) pairs give independent reproducible streams.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // A child generator whose stream is derived from this one's (seed, stream)
  // and `index`. Does not advance this generator.
  Rng split(std::uint64_t index) const;

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // N(0, 1)
  double gamma(double shape);            // Gamma(shape, 1)
  std::uint64_t below(std::uint64_t n);  // uniform integer in [0, n)

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

// Area of the unit sphere {x in R^(n+1) : |x| = 1}.
double surface_area_unit_sphere(int n);

// Green's function of the Laplacian in R^n (n >= 3).
double greens_potential(const Vec& x, const Vec& y, int n);

// Gradient of greens_potential with respect to x.
Vec greens_gradient(const Vec& x, const Vec& y, int n);

// Uniform direction on the unit sphere in R^(n+1).
Vec sample_unit_sphere(int n, Rng& rng);

Vec sample_gaussian(int dim, double sigma, Rng& rng);

}  // namespace pfgm
