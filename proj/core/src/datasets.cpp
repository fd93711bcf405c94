#include "dio/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>

#include "dio/rng.hpp"

namespace dio {

Shape Dataset::sample_shape() const {
  Shape s(inputs.shape().begin() + 1, inputs.shape().end());
  return s;
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  const std::size_t d = sample_dim();
  Shape shape = inputs.shape();
  shape[0] = idx.size();
  Tensor x(shape);
  std::vector<int> y(idx.size());
  auto src = inputs.data();
  auto dst = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * d), d,
                dst.begin() + static_cast<std::ptrdiff_t>(i * d));
    y[i] = labels[idx[i]];
  }
  return {x, std::move(y), num_classes, split, provenance};
}

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (inputs.rank() < 2 || inputs.dim(0) != labels.size())
    throw std::invalid_argument("dataset: inputs/labels count mismatch");
  for (double v : inputs.data())
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("dataset: input outside [0,1]");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw std::invalid_argument("dataset: label outside [0,K)");
}

namespace {

// Regular simplex with unit pairwise distance: one-hot vertices, centred,
// scaled by 1/sqrt(2).
std::vector<std::vector<double>> simplex_means(std::size_t k, std::size_t d, double separation) {
  std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
  const double s = separation / std::sqrt(2.0);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t j = 0; j < k; ++j) means[c][j] = s * ((c == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(k));
  return means;
}

// Random orthonormal d x d matrix via Gram-Schmidt on Gaussian columns.
std::vector<std::vector<double>> random_rotation(std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (auto& col : q)
    for (auto& v : col) v = rng.normal();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double p = 0.0;
      for (std::size_t t = 0; t < d; ++t) p += q[i][t] * q[j][t];
      for (std::size_t t = 0; t < d; ++t) q[i][t] -= p * q[j][t];
    }
    double n = 0.0;
    for (double v : q[i]) n += v * v;
    n = std::sqrt(n);
    for (double& v : q[i]) v /= n;
  }
  return q;  // rows are orthonormal
}

}  // namespace

Dataset make_gaussians(const GaussianSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("make_gaussians: K must be >= 2");
  if (spec.dim < spec.classes) throw std::invalid_argument("make_gaussians: need dim >= K");
  if (!(spec.separation > 0)) throw std::invalid_argument("make_gaussians: separation must be > 0");
  if (spec.per_class < 1) throw std::invalid_argument("make_gaussians: per_class must be >= 1");
  if (!(spec.sigma >= 0)) throw std::invalid_argument("make_gaussians: sigma must be >= 0");

  auto means = simplex_means(spec.classes, spec.dim, spec.separation);
  if (spec.rotate) {
    const auto q = random_rotation(spec.dim, spec.rotation_seed);
    for (auto& m : means) {
      std::vector<double> r(spec.dim, 0.0);
      for (std::size_t i = 0; i < spec.dim; ++i)
        for (std::size_t t = 0; t < spec.dim; ++t) r[t] += m[i] * q[i][t];
      m = std::move(r);
    }
  }

  const std::size_t n = spec.classes * spec.per_class;
  Tensor x({n, spec.dim});
  std::vector<int> y(n);
  Rng rng(spec.seed);
  auto xd = x.data();
  // Classes interleaved so every prefix of the set is (nearly) balanced.
  for (std::size_t c = 0; c < spec.classes; ++c)
    for (std::size_t s = 0; s < spec.per_class; ++s) {
      const std::size_t row = s * spec.classes + c;
      y[row] = static_cast<int>(c);
      for (std::size_t j = 0; j < spec.dim; ++j)
        xd[row * spec.dim + j] =
            std::clamp(spec.center + means[c][j] + spec.sigma * rng.normal(), 0.0, 1.0);
    }
  Dataset out{x, std::move(y), spec.classes, Split::train, {}};
  out.provenance = "gaussians(K=" + std::to_string(spec.classes) + ",d=" + std::to_string(spec.dim) +
                   ",n_per_class=" + std::to_string(spec.per_class) +
                   ",separation=" + std::to_string(spec.separation) +
                   ",sigma=" + std::to_string(spec.sigma) + ",seed=" + std::to_string(spec.seed) + ")";
  return out;
}

Dataset make_gaussians(std::size_t classes, std::size_t dim, std::size_t per_class,
                       double separation, std::uint64_t seed) {
  GaussianSpec spec;
  spec.classes = classes;
  spec.dim = dim;
  spec.per_class = per_class;
  spec.separation = separation;
  spec.seed = seed;
  return make_gaussians(spec);
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IdxError("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off, const std::string& what) {
  if (b.size() < off + 4) throw IdxError(what + ": truncated header");
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                              static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(b.data(), 4);
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes) {
  const auto ib = read_all(images);
  const auto lb = read_all(labels);
  const std::string iname = images.string(), lname = labels.string();

  if (be32(ib, 0, iname) != kImagesMagic) throw IdxError(iname + ": bad magic for IDX images");
  if (be32(lb, 0, lname) != kLabelsMagic) throw IdxError(lname + ": bad magic for IDX labels");
  const std::size_t n = be32(ib, 4, iname), h = be32(ib, 8, iname), w = be32(ib, 12, iname);
  const std::size_t nl = be32(lb, 4, lname);
  if (n != nl)
    throw IdxError("count mismatch: " + std::to_string(n) + " images vs " + std::to_string(nl) + " labels");
  if (n == 0 || h == 0 || w == 0) throw IdxError(iname + ": empty dimensions");
  if (ib.size() < 16 + n * h * w) throw IdxError(iname + ": truncated pixel data");
  if (lb.size() < 8 + n) throw IdxError(lname + ": truncated label data");

  Tensor x({n, 1, h, w});
  auto xd = x.data();
  for (std::size_t i = 0; i < n * h * w; ++i) xd[i] = static_cast<double>(ib[16 + i]) / 255.0;

  std::vector<int> y(n);
  int max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = lb[8 + i];
    max_label = std::max(max_label, y[i]);
    if (num_classes > 0 && static_cast<std::size_t>(y[i]) >= num_classes)
      throw IdxError(lname + ": label " + std::to_string(y[i]) + " at index " + std::to_string(i) +
                     " outside [0," + std::to_string(num_classes) + ")");
  }
  Dataset out{x, std::move(y), num_classes > 0 ? num_classes : static_cast<std::size_t>(max_label) + 1,
              Split::train, "idx:" + iname};
  return out;
}

void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  const Shape& s = data.inputs.shape();
  std::size_t h = 0, w = 0;
  if (s.size() == 3) {
    h = s[1];
    w = s[2];
  } else if (s.size() == 4 && s[1] == 1) {
    h = s[2];
    w = s[3];
  } else {
    throw IdxError("write_idx: expected (n,h,w) or (n,1,h,w), got " + to_string(s));
  }
  std::ofstream io(images, std::ios::binary);
  std::ofstream lo(labels, std::ios::binary);
  if (!io || !lo) throw IdxError("write_idx: cannot open output files");
  put_be32(io, kImagesMagic);
  put_be32(io, static_cast<std::uint32_t>(data.size()));
  put_be32(io, static_cast<std::uint32_t>(h));
  put_be32(io, static_cast<std::uint32_t>(w));
  for (double v : data.inputs.data())
    io.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  put_be32(lo, kLabelsMagic);
  put_be32(lo, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) lo.put(static_cast<char>(static_cast<unsigned char>(y)));
}

// ---------------------------------------------------------------------------
// Batching

namespace {

std::vector<Batch> make_batches(const Dataset& data, const std::vector<std::size_t>& order,
                                std::size_t batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(end));
    Dataset sub = data.subset(idx);
    out.push_back({sub.inputs, std::move(sub.labels), std::move(idx)});
  }
  return out;
}

}  // namespace

std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed) {
  Rng rng(shuffle_seed);
  return make_batches(data, rng.permutation(data.size()), batch_size);
}

std::vector<Batch> sequential_batches(const Dataset& data, std::size_t batch_size) {
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  return make_batches(data, order, batch_size);
}

// ---------------------------------------------------------------------------

std::string DataSpec::id() const {
  if (kind == "idx") return "idx:" + train_images;
  return "gaussians-K" + std::to_string(gaussians.classes) + "-d" + std::to_string(gaussians.dim);
}

DataPair load_data(const DataSpec& spec) {
  if (spec.kind == "gaussians") {
    GaussianSpec test = spec.gaussians;
    test.per_class = spec.test_per_class;
    test.seed = spec.test_seed;
    DataPair out{make_gaussians(spec.gaussians), make_gaussians(test)};
    out.test.split = Split::test;
    return out;
  }
  if (spec.kind == "idx") {
    DataPair out{load_idx(spec.train_images, spec.train_labels, spec.num_classes),
                 load_idx(spec.test_images, spec.test_labels, spec.num_classes)};
    const std::size_t k = std::max(out.train.num_classes, out.test.num_classes);
    out.train.num_classes = out.test.num_classes = k;
    out.test.split = Split::test;
    return out;
  }
  throw std::invalid_argument("unknown dataset kind '" + spec.kind + "'");
}

}  // namespace dio
