#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cfcl/common.hpp"

namespace cfcl {

// Points with class labels. Labels are read only by the partitioner and the
// evaluation metrics, never by training.
struct LabeledDataset {
  std::vector<Vector> points;
  std::vector<int> labels;
  int class_count = 0;
  // Image shape when the points are flattened gray-scale images; 0 otherwise.
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return points.size(); }
  std::size_t dim() const { return points.empty() ? 0 : points.front().size(); }
};

// Isotropic Gaussian blobs; class c is centred at (cos 2πc/C, sin 2πc/C, 0...).
LabeledDataset gen_synthetic(int classes, std::size_t per_class, std::size_t dim, double spread,
                             Rng& rng);

// IDX (big-endian) unsigned-byte images (magic 0x00000803) and labels
// (magic 0x00000801). Pixels are scaled to [0, 1] by /255.
LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

// Writes pixels round(255 * x) clamped to [0, 255]. Requires rows*cols == dim.
void write_idx(const LabeledDataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// Class subsets per device. When devices*classes_per_device is a multiple of
// class_count every class is held by exactly the same number of devices;
// otherwise subsets are uniform and resampled until every class is covered.
std::vector<std::vector<int>> assign_class_subsets(int class_count, std::size_t devices,
                                                   int classes_per_device, Rng& rng);

// Splits each class's points disjointly (in equal shares) among the devices
// that hold it.
std::vector<LabeledDataset> partition_noniid(const LabeledDataset& ds, std::size_t devices,
                                             int classes_per_device, Rng& rng);

enum class AugmentationFamily { gaussian_noise, random_scale, random_crop_pad, horizontal_flip, blur };

struct AugmentationStep {
  AugmentationFamily family = AugmentationFamily::gaussian_noise;
  // gaussian_noise: sigma. random_scale: max relative deviation of the scale
  // factor. random_crop_pad: max pixel shift. horizontal_flip / blur: the
  // probability of applying the transform.
  double amount = 0.0;
};

// Steps applied in order. Image families need rows*cols == dim.
struct AugmentationSpec {
  std::vector<AugmentationStep> steps;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

Vector augment(std::span<const double> x, const AugmentationSpec& spec, Rng& rng);

}  // namespace cfcl
