#include "pfgm/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pfgm/error.hpp"

namespace pfgm {

Dataset::Dataset(Mat points, std::optional<Vec> charges)
    : points_(std::move(points)), charges_(std::move(charges)) {
  if (charges_) {
    if (charges_->size() != points_.rows())
      throw DimensionError("charge count does not match point count");
    for (Eigen::Index i = 0; i < charges_->size(); ++i)
      if (!((*charges_)[i] > 0.0)) throw DomainError("charges must be positive");
  }
}

Vec Dataset::charges() const {
  return charges_ ? *charges_ : Vec::Ones(points_.rows());
}

double Dataset::total_charge() const {
  return charges_ ? charges_->sum() : static_cast<double>(points_.rows());
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Mat p(static_cast<Eigen::Index>(indices.size()), points_.cols());
  std::optional<Vec> q;
  if (charges_) q = Vec(p.rows());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size()) throw DomainError("subset index out of range");
    const auto row = static_cast<Eigen::Index>(k);
    p.row(row) = points_.row(static_cast<Eigen::Index>(indices[k]));
    if (q) (*q)[row] = (*charges_)[static_cast<Eigen::Index>(indices[k])];
  }
  return Dataset(std::move(p), std::move(q));
}

ToyName parse_toy_name(std::string_view name) {
  if (name == "heart") return ToyName::heart;
  if (name == "disk") return ToyName::disk;
  if (name == "gaussians") return ToyName::gaussians;
  if (name == "checkerboard") return ToyName::checkerboard;
  throw DomainError("unknown toy dataset '" + std::string(name) + "'");
}

std::string_view to_string(ToyName name) {
  switch (name) {
    case ToyName::heart: return "heart";
    case ToyName::disk: return "disk";
    case ToyName::gaussians: return "gaussians";
    case ToyName::checkerboard: return "checkerboard";
  }
  return "unknown";
}

bool in_heart(double x, double y) {
  const double c = y - std::cbrt(x * x);
  return x * x + c * c <= 1.0;
}

namespace {

constexpr int kMixtureComponents = 8;
constexpr double kMixtureRadius = 1.0;
constexpr double kMixtureSigma = 0.1;

std::array<double, 2> draw_point(ToyName name, Rng& rng) {
  using std::numbers::pi;
  switch (name) {
    case ToyName::disk: {
      const double r = std::sqrt(rng.uniform());
      const double a = rng.uniform(0.0, 2.0 * pi);
      return {r * std::cos(a), r * std::sin(a)};
    }
    case ToyName::heart: {
      for (;;) {
        const double x = rng.uniform(-1.0, 1.0);
        const double y = rng.uniform(-1.0, 2.0);
        if (in_heart(x, y)) return {x, y};
      }
    }
    case ToyName::gaussians: {
      const auto k = static_cast<double>(rng.below(kMixtureComponents));
      const double a = 2.0 * pi * k / kMixtureComponents;
      for (;;) {
        const double dx = kMixtureSigma * rng.normal();
        const double dy = kMixtureSigma * rng.normal();
        if (dx * dx + dy * dy <= 9.0 * kMixtureSigma * kMixtureSigma)
          return {kMixtureRadius * std::cos(a) + dx, kMixtureRadius * std::sin(a) + dy};
      }
    }
    case ToyName::checkerboard: {
      // 4x4 board on [-1, 1]^2, dark cells where (i + j) is even.
      const auto cell = rng.below(8);
      const auto i = static_cast<int>(cell / 2);
      const int j = 2 * static_cast<int>(cell % 2) + (i % 2);
      return {-1.0 + 0.5 * (i + rng.uniform()), -1.0 + 0.5 * (j + rng.uniform())};
    }
  }
  throw DomainError("unknown toy dataset");
}

}  // namespace

Dataset generate_toy(ToyName name, std::size_t count, Rng& rng) {
  if (count == 0) throw DomainError("generate_toy: count must be >= 1");
  Mat p(static_cast<Eigen::Index>(count), 2);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const auto xy = draw_point(name, rng);
    p(i, 0) = xy[0];
    p(i, 1) = xy[1];
  }
  return Dataset(std::move(p));
}

Vec mean(const Dataset& d) {
  if (d.empty()) throw DomainError("mean of empty dataset");
  return d.points().colwise().mean().transpose();
}

Dataset center(const Dataset& d) {
  if (d.empty()) throw DomainError("cannot center an empty dataset");
  const Vec mu = mean(d);
  Mat p = d.points().rowwise() - mu.transpose();
  // A second pass removes the rounding residue of the first.
  p.rowwise() -= p.colwise().mean();
  Dataset out(std::move(p), d.has_charges() ? std::optional<Vec>(d.charges()) : std::nullopt);
  out.centered_ = true;
  return out;
}

DatasetStats stats(const Dataset& d) {
  if (d.empty()) throw DomainError("stats of empty dataset");
  const Vec sq = d.points().rowwise().squaredNorm();
  return {sq.mean(), std::sqrt(sq.maxCoeff()), d.size()};
}

namespace {

double parse_field(std::string_view field, std::size_t row) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
  double value = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ": non-numeric field '" + std::string(field) + "'", row);
  return value;
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvOptions& opts) {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool skipped_header = !opts.header;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<double> values;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      values.push_back(parse_field(line.substr(start, comma - start), line_no));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows.empty()) {
      width = values.size();
      if (opts.charge_column && width < 2)
        throw ParseError("row " + std::to_string(line_no) + ": charge column needs at least one coordinate", line_no);
    } else if (values.size() != width) {
      throw ParseError("row " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                           " fields, got " + std::to_string(values.size()),
                       line_no);
    }
    if (opts.charge_column && !(values.back() > 0.0))
      throw ParseError("row " + std::to_string(line_no) + ": charge must be positive", line_no);
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no);

  const auto dims = static_cast<Eigen::Index>(opts.charge_column ? width - 1 : width);
  Mat p(static_cast<Eigen::Index>(rows.size()), dims);
  std::optional<Vec> q;
  if (opts.charge_column) q = Vec(p.rows());
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < dims; ++j) p(i, j) = r[static_cast<std::size_t>(j)];
    if (q) (*q)[i] = r.back();
  }
  return Dataset(std::move(p), std::move(q));
}

Dataset load_csv(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), opts);
}

namespace {

void append_double(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

}  // namespace

std::string format_csv(const Dataset& d, const CsvOptions& opts) {
  std::string out;
  if (opts.header) {
    for (int j = 0; j < d.dim(); ++j) {
      if (j) out += ',';
      out += "x" + std::to_string(j + 1);
    }
    if (opts.charge_column) out += ",charge";
    out += '\n';
  }
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.dim(); ++j) {
      if (j) out += ',';
      append_double(out, d.points()(static_cast<Eigen::Index>(i), j));
    }
    if (opts.charge_column) {
      out += ',';
      append_double(out, d.charge(i));
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& d, const std::string& path, const CsvOptions& opts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write '" + path + "'");
  out << format_csv(d, opts);
}

}  // namespace pfgm
