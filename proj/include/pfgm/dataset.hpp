#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pfgm/geometry.hpp"

namespace pfgm {

// Point cloud in R^N, one point per row. Coordinates are stored column-major,
// so each coordinate is a contiguous array (field kernels sweep them).
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Mat points, std::optional<Vec> charges = std::nullopt);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  bool empty() const { return points_.rows() == 0; }
  int dim() const { return static_cast<int>(points_.cols()); }

  const Mat& points() const { return points_; }
  Vec point(std::size_t i) const { return points_.row(static_cast<Eigen::Index>(i)).transpose(); }

  bool has_charges() const { return charges_.has_value(); }
  // All ones when no charges were given.
  Vec charges() const;
  double charge(std::size_t i) const {
    return charges_ ? (*charges_)[static_cast<Eigen::Index>(i)] : 1.0;
  }
  double total_charge() const;

  bool centered() const { return centered_; }

  Dataset subset(const std::vector<std::size_t>& indices) const;

 private:
  friend Dataset center(const Dataset& d);

  Mat points_;
  std::optional<Vec> charges_;
  bool centered_ = false;
};

struct DatasetStats {
  double mean_sq_norm = 0.0;
  double max_norm = 0.0;
  std::size_t count = 0;
};

enum class ToyName { heart, disk, gaussians, checkerboard };

ToyName parse_toy_name(std::string_view name);
std::string_view to_string(ToyName name);

// 2-D toy distributions, all with bounded support.
Dataset generate_toy(ToyName name, std::size_t count, Rng& rng);

// Membership test for the heart region x^2 + (y - |x|^(2/3))^2 <= 1.
bool in_heart(double x, double y);

Vec mean(const Dataset& d);
Dataset center(const Dataset& d);
DatasetStats stats(const Dataset& d);

struct CsvOptions {
  bool header = false;
  bool charge_column = false;
};

Dataset load_csv(const std::string& path, const CsvOptions& opts = {});
Dataset parse_csv(std::string_view text, const CsvOptions& opts = {});
void save_csv(const Dataset& d, const std::string& path, const CsvOptions& opts = {});
std::string format_csv(const Dataset& d, const CsvOptions& opts = {});

}  // namespace pfgm
