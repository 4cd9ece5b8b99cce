#include "pfgm/geometry.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pfgm/error.hpp"

namespace pfgm {

Dim::Dim(int data_dim) : n(data_dim) {
  if (data_dim < 1) throw DomainError("data dimension must be >= 1");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

Rng Rng::split(std::uint64_t index) const {
  return Rng(seed_, splitmix64(stream_id_ * 0x9e3779b97f4a7c15ULL + index + 1));
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
  return std::gamma_distribution<double>(shape, 1.0)(engine_);
}

std::uint64_t Rng::below(std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
}

double surface_area_unit_sphere(int n) {
  if (n < 1) throw DomainError("surface_area_unit_sphere: n must be >= 1");
  const double h = 0.5 * (n + 1);
  return 2.0 * std::exp(h * std::log(std::numbers::pi) - std::lgamma(h));
}

namespace {

void check_kernel_args(const Vec& x, const Vec& y, int n, double& r) {
  if (n < 3) throw DomainError("Green's kernel requires n >= 3, got " + std::to_string(n));
  if (x.size() != n || y.size() != n) throw DimensionError("Green's kernel: vectors must have dimension n");
  r = (x - y).norm();
  if (r == 0.0) throw SingularityError("Green's kernel evaluated at x = y", 0);
}

}  // namespace

double greens_potential(const Vec& x, const Vec& y, int n) {
  double r = 0.0;
  check_kernel_args(x, y, n, r);
  return 1.0 / ((n - 2) * surface_area_unit_sphere(n - 1) * std::pow(r, n - 2));
}

Vec greens_gradient(const Vec& x, const Vec& y, int n) {
  double r = 0.0;
  check_kernel_args(x, y, n, r);
  return -(x - y) / (surface_area_unit_sphere(n - 1) * std::pow(r, n));
}

Vec sample_unit_sphere(int n, Rng& rng) {
  if (n < 1) throw DomainError("sample_unit_sphere: n must be >= 1");
  Vec u(n + 1);
  double norm = 0.0;
  do {
    for (int i = 0; i <= n; ++i) u[i] = rng.normal();
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

Vec sample_gaussian(int dim, double sigma, Rng& rng) {
  if (!(sigma > 0.0)) throw DomainError("sample_gaussian: sigma must be positive");
  if (dim < 1) throw DomainError("sample_gaussian: dim must be >= 1");
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v[i] = sigma * rng.normal();
  return v;
}

}  // namespace pfgm
