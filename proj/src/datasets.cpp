#include "punn/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace punn {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.features = features.gather_rows(indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels[i]);
  out.num_classes = num_classes;
  out.feature_names = feature_names;
  out.class_names = class_names;
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (std::size_t y : labels) counts[y] += 1;
  return counts;
}

// ---------------------------------------------------------------------------
// Synthetic sets

SyntheticKind parse_synthetic_kind(std::string_view name) {
  for (auto k : {SyntheticKind::Moons, SyntheticKind::Circles, SyntheticKind::Xor,
                 SyntheticKind::Helix, SyntheticKind::Rings}) {
    if (name == to_string(k)) return k;
  }
  throw ConfigError("unknown synthetic dataset '" + std::string(name) +
                    "' (expected moons, circles, xor, helix or rings)");
}

std::string_view to_string(SyntheticKind kind) noexcept {
  switch (kind) {
    case SyntheticKind::Moons: return "moons";
    case SyntheticKind::Circles: return "circles";
    case SyntheticKind::Xor: return "xor";
    case SyntheticKind::Helix: return "helix";
    case SyntheticKind::Rings: return "rings";
  }
  return "?";
}

std::array<double, 2> helix_point(std::size_t cls, double t) noexcept {
  const double phase = t + double(cls) * std::numbers::pi;
  return {t * std::cos(phase), t * std::sin(phase)};
}

std::array<double, 2> ring_band(std::size_t cls) noexcept {
  return {double(cls), double(cls) + 0.6};
}

namespace {

double linspace(double lo, double hi, std::size_t count, std::size_t i, bool endpoint) {
  if (count <= 1) return lo;
  const double steps = endpoint ? double(count - 1) : double(count);
  return lo + (hi - lo) * double(i) / steps;
}

}  // namespace

Dataset make_synthetic(SyntheticKind kind, std::size_t n, double noise, std::uint64_t seed) {
  if (n < 2) throw ConfigError("synthetic datasets need at least 2 samples");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
  Rng rng(seed);
  Dataset ds;
  ds.features = DenseMatrix(n, 2);
  ds.labels.assign(n, 0);
  ds.feature_names = {"x1", "x2"};
  const double pi = std::numbers::pi;

  switch (kind) {
    case SyntheticKind::Moons:
    case SyntheticKind::Circles: {
      const std::size_t n_out = n / 2;
      const std::size_t n_in = n - n_out;
      for (std::size_t i = 0; i < n; ++i) {
        const bool outer = i < n_out;
        const std::size_t j = outer ? i : i - n_out;
        const std::size_t count = outer ? n_out : n_in;
        double x, y;
        if (kind == SyntheticKind::Moons) {
          const double a = linspace(0.0, pi, count, j, true);
          x = outer ? std::cos(a) : 1.0 - std::cos(a);
          y = outer ? std::sin(a) : 1.0 - std::sin(a) - 0.5;
        } else {
          const double a = linspace(0.0, 2.0 * pi, count, j, false);
          const double r = outer ? 1.0 : 0.5;
          x = r * std::cos(a);
          y = r * std::sin(a);
        }
        ds.features(i, 0) = x;
        ds.features(i, 1) = y;
        ds.labels[i] = outer ? 0 : 1;
      }
      ds.num_classes = 2;
      ds.class_names = kind == SyntheticKind::Moons
                           ? std::vector<std::string>{"upper", "lower"}
                           : std::vector<std::string>{"outer", "inner"};
      break;
    }
    case SyntheticKind::Xor: {
      static constexpr double centers[4][2] = {{-1, -1}, {1, 1}, {-1, 1}, {1, -1}};
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 4;
        ds.features(i, 0) = centers[c][0];
        ds.features(i, 1) = centers[c][1];
        ds.labels[i] = c < 2 ? 0 : 1;
      }
      ds.num_classes = 2;
      ds.class_names = {"same_sign", "opposite_sign"};
      break;
    }
    case SyntheticKind::Helix: {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 2;
        auto p = helix_point(c, rng.uniform(0.0, 4.0 * pi));
        ds.features(i, 0) = p[0];
        ds.features(i, 1) = p[1];
        ds.labels[i] = c;
      }
      ds.num_classes = 2;
      ds.class_names = {"arm0", "arm1"};
      break;
    }
    case SyntheticKind::Rings: {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = i % 3;
        auto band = ring_band(c);
        // uniform over the annulus area
        const double u = rng.uniform();
        const double r = std::sqrt(band[0] * band[0] + u * (band[1] * band[1] - band[0] * band[0]));
        const double a = rng.uniform(0.0, 2.0 * pi);
        ds.features(i, 0) = r * std::cos(a);
        ds.features(i, 1) = r * std::sin(a);
        ds.labels[i] = c;
      }
      ds.num_classes = 3;
      ds.class_names = {"ring0", "ring1", "ring2"};
      break;
    }
  }

  if (noise > 0.0) {
    for (double& v : ds.features.values()) v += noise * rng.normal();
  }
  // shuffle sample order
  auto perm = rng.permutation(n);
  return ds.subset(perm);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    cells.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos
                                                                             : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column, bool header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open CSV file '" + path.string() + "'");
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    rows.push_back(split_row(line));
    line_numbers.push_back(line_no);
  }
  if (rows.empty()) throw ParseError("CSV file '" + path.string() + "' is empty");

  std::vector<std::string> names;
  if (header) {
    names = rows.front();
    rows.erase(rows.begin());
    line_numbers.erase(line_numbers.begin());
    if (rows.empty()) throw ParseError("CSV file '" + path.string() + "' has a header but no data");
  }
  const std::size_t ncols = header ? names.size() : rows.front().size();
  if (ncols < 2) throw ParseError("CSV needs at least one feature column and a label column");
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != ncols) {
      throw ParseError("CSV line " + std::to_string(line_numbers[r]) + " has " +
                       std::to_string(rows[r].size()) + " cells, expected " + std::to_string(ncols));
    }
  }

  std::size_t label_idx = ncols;
  if (header) {
    for (std::size_t c = 0; c < ncols; ++c) {
      if (names[c] == label_column) label_idx = c;
    }
  }
  if (label_idx == ncols) {
    long long idx = 0;
    auto res = std::from_chars(label_column.data(), label_column.data() + label_column.size(), idx);
    if (res.ec != std::errc() || res.ptr != label_column.data() + label_column.size()) {
      throw ParseError("unknown label column '" + std::string(label_column) + "'");
    }
    if (idx < 0) idx += static_cast<long long>(ncols);
    if (idx < 0 || idx >= static_cast<long long>(ncols)) {
      throw ParseError("label column index " + std::string(label_column) + " out of range");
    }
    label_idx = std::size_t(idx);
  }

  Dataset ds;
  ds.features = DenseMatrix(rows.size(), ncols - 1);
  ds.labels.resize(rows.size());
  std::map<std::string, std::size_t> codes;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t f = 0;
    for (std::size_t c = 0; c < ncols; ++c) {
      if (c == label_idx) continue;
      double v = 0.0;
      if (!parse_double(rows[r][c], v)) {
        throw ParseError("CSV line " + std::to_string(line_numbers[r]) + ", column " +
                         std::to_string(c + 1) + ": '" + rows[r][c] + "' is not a number");
      }
      ds.features(r, f++) = v;
    }
    const std::string& label = rows[r][label_idx];
    auto [it, inserted] = codes.try_emplace(label, codes.size());
    if (inserted) ds.class_names.push_back(label);
    ds.labels[r] = it->second;
  }
  ds.num_classes = codes.size();
  for (std::size_t c = 0; c < ncols; ++c) {
    if (c == label_idx) continue;
    ds.feature_names.push_back(header ? names[c] : "x" + std::to_string(ds.feature_names.size() + 1));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Standardization

void StandardizationStats::apply(DenseMatrix& x) const {
  if (x.cols() != mean.size()) throw InputShapeError("standardization dimension mismatch");
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = (x(i, j) - mean[j]) / stddev[j];
  }
}

std::vector<double> StandardizationStats::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) throw InputShapeError("standardization dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) / stddev[j];
  return out;
}

StandardizationStats fit_standardization(const DenseMatrix& x) {
  if (x.rows() == 0) throw InputShapeError("cannot standardize an empty dataset");
  StandardizationStats s;
  s.mean.assign(x.cols(), 0.0);
  s.stddev.assign(x.cols(), 0.0);
  const double n = double(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) s.mean[j] += x(i, j);
  }
  for (double& m : s.mean) m /= n;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      const double d = x(i, j) - s.mean[j];
      s.stddev[j] += d * d;
    }
  }
  for (double& v : s.stddev) {
    v = std::sqrt(v / n);
    // constant features (up to rounding of the mean) stay unscaled
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

StandardizationStats standardize(Dataset& train, std::span<Dataset* const> others) {
  StandardizationStats stats = fit_standardization(train.features);
  stats.apply(train.features);
  for (Dataset* ds : others) stats.apply(ds->features);
  return stats;
}

// ---------------------------------------------------------------------------
// Splitting

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw SplitError("test fraction must lie in [0, 1)");
  }
  const auto counts = ds.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] < 2) {
      throw SplitError("class " + std::to_string(c) + " has " + std::to_string(counts[c]) +
                       " sample(s); stratified splitting needs at least 2");
    }
  }
  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[ds.labels[i]].push_back(i);

  Rng rng(seed);
  std::vector<long long> take(ds.num_classes);
  long long total = 0;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    rng.shuffle(std::span<std::size_t>(by_class[c]));
    take[c] = std::llround(test_fraction * double(counts[c]));
    take[c] = std::min<long long>(take[c], static_cast<long long>(counts[c]) - 1);
    total += take[c];
  }
  const long long target = std::llround(test_fraction * double(ds.size()));
  // nudge classes with the largest rounding slack until within one of target
  while (std::llabs(total - target) > 1) {
    const long long dir = total < target ? 1 : -1;
    std::size_t best = ds.num_classes;
    double best_gap = 0.0;
    for (std::size_t c = 0; c < ds.num_classes; ++c) {
      const long long next = take[c] + dir;
      if (next < 0 || next > static_cast<long long>(counts[c]) - 1) continue;
      const double gap = dir * (test_fraction * double(counts[c]) - double(take[c]));
      if (best == ds.num_classes || gap > best_gap) {
        best = c;
        best_gap = gap;
      }
    }
    if (best == ds.num_classes) break;
    take[best] += dir;
    total += dir;
  }

  Split s;
  for (std::size_t c = 0; c < ds.num_classes; ++c) {
    for (std::size_t i = 0; i < by_class[c].size(); ++i) {
      (static_cast<long long>(i) < take[c] ? s.test_indices : s.train_indices).push_back(by_class[c][i]);
    }
  }
  std::sort(s.train_indices.begin(), s.train_indices.end());
  std::sort(s.test_indices.begin(), s.test_indices.end());
  s.train = ds.subset(s.train_indices);
  s.test = ds.subset(s.test_indices);
  return s;
}

Dataset reorder_classes(const Dataset& ds, std::span<const std::size_t> order) {
  if (order.size() != ds.num_classes) {
    throw ConfigError("class order must list each of the " + std::to_string(ds.num_classes) +
                      " classes once");
  }
  std::vector<std::size_t> new_id(ds.num_classes, ds.num_classes);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (order[i] >= ds.num_classes || new_id[order[i]] != ds.num_classes) {
      throw ConfigError("class order must be a permutation of 0.." + std::to_string(ds.num_classes - 1));
    }
    new_id[order[i]] = i;
  }
  Dataset out = ds;
  for (auto& y : out.labels) y = new_id[y];
  if (!ds.class_names.empty()) {
    for (std::size_t i = 0; i < order.size(); ++i) out.class_names[i] = ds.class_names[order[i]];
  }
  return out;
}

// ---------------------------------------------------------------------------
// IDX / MNIST

namespace {

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw ParseError("IDX file '" + path.string() + "' is truncated in its header");
  }
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

std::vector<unsigned char> read_payload(std::istream& in, std::size_t bytes,
                                        const std::filesystem::path& path) {
  std::vector<unsigned char> buf(bytes);
  if (!in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes))) {
    throw ParseError("IDX file '" + path.string() + "' is truncated: expected " +
                     std::to_string(bytes) + " payload bytes");
  }
  return buf;
}

}  // namespace

DenseMatrix read_idx_images(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open IDX file '" + path.string() + "'");
  const std::uint32_t magic = read_be32(in, path);
  if (magic != 0x00000803) {
    throw ParseError("IDX image file '" + path.string() + "' has bad magic number");
  }
  const std::size_t count = read_be32(in, path);
  const std::size_t rows = read_be32(in, path);
  const std::size_t cols = read_be32(in, path);
  auto buf = read_payload(in, count * rows * cols, path);
  DenseMatrix x(count, rows * cols);
  auto v = x.values();
  for (std::size_t i = 0; i < buf.size(); ++i) v[i] = double(buf[i]);
  return x;
}

std::vector<std::size_t> read_idx_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open IDX file '" + path.string() + "'");
  const std::uint32_t magic = read_be32(in, path);
  if (magic != 0x00000801) {
    throw ParseError("IDX label file '" + path.string() + "' has bad magic number");
  }
  const std::size_t count = read_be32(in, path);
  auto buf = read_payload(in, count, path);
  return {buf.begin(), buf.end()};
}

MnistData load_mnist(const std::filesystem::path& dir) {
  auto load = [&](const char* images, const char* labels) {
    Dataset ds;
    ds.features = read_idx_images(dir / images);
    ds.labels = read_idx_labels(dir / labels);
    if (ds.labels.size() != ds.features.rows()) {
      throw ParseError("MNIST image and label counts differ in '" + dir.string() + "'");
    }
    for (std::size_t y : ds.labels) {
      if (y > 9) throw ParseError("MNIST label out of range 0..9");
    }
    ds.num_classes = 10;
    for (int c = 0; c < 10; ++c) ds.class_names.push_back(std::to_string(c));
    return ds;
  };
  return {load("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
          load("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")};
}

}  // namespace punn
