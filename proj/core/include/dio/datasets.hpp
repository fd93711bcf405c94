#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dio/tensor.hpp"

namespace dio {

enum class Split { train, test };

/// Labeled inputs in [0,1]. inputs is (n, d) or (n, c, h, w).
struct Dataset {
  Tensor inputs;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  Split split = Split::train;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t sample_dim() const { return inputs.size() / labels.size(); }
  Shape sample_shape() const;
  /// Rows `idx` as a new dataset (copied).
  Dataset subset(const std::vector<std::size_t>& idx) const;
  /// Throws std::invalid_argument if any invariant is broken.
  void validate() const;
};

/// Parameters of the Gaussian-blob generator.
///
/// Class means are the vertices of a regular simplex with pairwise distance
/// `separation`, centred at `center` in every coordinate. With `rotate` the
/// simplex is carried into a random orthonormal frame (seeded by
/// `rotation_seed`) so the class signal is spread over all d coordinates;
/// otherwise it lives in the first K axes. Samples are mean + sigma * N(0,I),
/// clamped to [0,1].
struct GaussianSpec {
  std::size_t classes = 4;
  std::size_t dim = 20;
  std::size_t per_class = 500;
  double separation = 0.5;
  double sigma = 0.05;
  double center = 0.5;
  bool rotate = true;
  std::uint64_t rotation_seed = 7;
  std::uint64_t seed = 1;
};

Dataset make_gaussians(const GaussianSpec& spec);
/// Short form with defaults for the remaining fields.
Dataset make_gaussians(std::size_t classes, std::size_t dim, std::size_t per_class,
                       double separation, std::uint64_t seed);

class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an IDX image file (magic 0x00000803, big-endian dims, u8 pixels)
/// and its label file (magic 0x00000801). Pixels are divided by 255; the
/// result has shape (n,1,h,w). Labels >= num_classes are rejected when
/// num_classes > 0, otherwise K is max label + 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes = 0);

/// Writes a (n,h,w) / (n,1,h,w) dataset back to IDX; pixels are rounded
/// from [0,1] to bytes.
void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

struct Batch {
  Tensor inputs;
  std::vector<int> labels;
  std::vector<std::size_t> indices;
};

/// Every sample exactly once, permuted by `shuffle_seed`; last batch may be
/// partial.
std::vector<Batch> batches(const Dataset& data, std::size_t batch_size, std::uint64_t shuffle_seed);
/// In-order batches, no shuffling.
std::vector<Batch> sequential_batches(const Dataset& data, std::size_t batch_size);

/// Where a run's train/test data comes from.
struct DataSpec {
  std::string kind = "gaussians";  // "gaussians" | "idx"
  GaussianSpec gaussians;          // per_class is the train count
  std::size_t test_per_class = 500;
  std::uint64_t test_seed = 2;     // test draws share the class means
  std::string train_images, train_labels, test_images, test_labels;
  std::size_t num_classes = 0;     // idx only; 0 infers

  std::string id() const;
};

struct DataPair {
  Dataset train;
  Dataset test;
};

/// Throws std::invalid_argument for an unknown kind, IdxError for bad files.
DataPair load_data(const DataSpec& spec);

}  // namespace dio
