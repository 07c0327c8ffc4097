#include "cfcl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

namespace cfcl {

LabeledDataset gen_synthetic(int classes, std::size_t per_class, std::size_t dim, double spread,
                             Rng& rng) {
  if (classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
  if (dim < 2) throw ConfigError("synthetic data needs dim >= 2");
  if (per_class == 0) throw ConfigError("synthetic data needs per_class >= 1");
  if (!(spread >= 0.0)) throw ConfigError("synthetic spread must be non-negative");
  LabeledDataset ds;
  ds.class_count = classes;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int c = 0; c < classes; ++c) {
    Vector center(dim, 0.0);
    const double angle = 2.0 * std::numbers::pi * c / classes;
    center[0] = std::cos(angle);
    center[1] = std::sin(angle);
    for (std::size_t q = 0; q < per_class; ++q) {
      Vector p = center;
      for (double& v : p) v += spread * noise(rng);
      ds.points.push_back(std::move(p));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > buf.size()) throw ParseError("truncated IDX header in " + path.string());
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16),
                         static_cast<char>(v >> 8), static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);
  if (read_be32(img, 0, images_path) != 0x00000803) {
    throw ParseError("bad IDX image magic in " + images_path.string());
  }
  if (read_be32(lab, 0, labels_path) != 0x00000801) {
    throw ParseError("bad IDX label magic in " + labels_path.string());
  }
  const std::size_t count = read_be32(img, 4, images_path);
  const std::size_t rows = read_be32(img, 8, images_path);
  const std::size_t cols = read_be32(img, 12, images_path);
  const std::size_t label_count = read_be32(lab, 4, labels_path);
  if (count != label_count) {
    throw ParseError("IDX count mismatch: " + std::to_string(count) + " images, " +
                     std::to_string(label_count) + " labels");
  }
  const std::size_t dim = rows * cols;
  if (img.size() < 16 + count * dim) throw ParseError("truncated IDX image data in " + images_path.string());
  if (lab.size() < 8 + count) throw ParseError("truncated IDX label data in " + labels_path.string());

  LabeledDataset ds;
  ds.rows = rows;
  ds.cols = cols;
  ds.points.reserve(count);
  ds.labels.reserve(count);
  int max_label = -1;
  for (std::size_t q = 0; q < count; ++q) {
    Vector p(dim);
    const unsigned char* px = img.data() + 16 + q * dim;
    for (std::size_t d = 0; d < dim; ++d) p[d] = px[d] / 255.0;
    ds.points.push_back(std::move(p));
    const int label = lab[8 + q];
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.class_count = max_label + 1;
  return ds;
}

void write_idx(const LabeledDataset& ds, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
  std::size_t rows = ds.rows, cols = ds.cols;
  if (rows * cols == 0) {
    rows = 1;
    cols = ds.dim();
  }
  if (rows * cols != ds.dim()) throw ShapeError("IDX image shape does not match point dimension");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw ParseError("cannot open IDX output files");
  write_be32(img, 0x00000803);
  write_be32(img, static_cast<std::uint32_t>(ds.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  for (const auto& p : ds.points) {
    for (double v : p) {
      const double scaled = std::clamp(std::round(v * 255.0), 0.0, 255.0);
      img.put(static_cast<char>(static_cast<unsigned char>(scaled)));
    }
  }
  write_be32(lab, 0x00000801);
  write_be32(lab, static_cast<std::uint32_t>(ds.size()));
  for (int l : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
}

std::vector<std::vector<int>> assign_class_subsets(int class_count, std::size_t devices,
                                                   int classes_per_device, Rng& rng) {
  if (classes_per_device < 1 || classes_per_device > class_count) {
    throw InfeasibleError("classes_per_device must be in [1, " + std::to_string(class_count) + "]");
  }
  const std::size_t slots = devices * static_cast<std::size_t>(classes_per_device);
  if (slots < static_cast<std::size_t>(class_count)) {
    throw InfeasibleError("cannot cover " + std::to_string(class_count) + " classes with " +
                          std::to_string(devices) + " devices holding " +
                          std::to_string(classes_per_device) + " each");
  }
  std::vector<std::vector<int>> subsets(devices);
  const auto k = static_cast<std::size_t>(classes_per_device);

  if (slots % static_cast<std::size_t>(class_count) == 0) {
    // Balanced design: deal a shuffled deck holding each class equally often.
    const std::size_t reps = slots / static_cast<std::size_t>(class_count);
    std::vector<int> deck;
    for (std::size_t r = 0; r < reps; ++r)
      for (int c = 0; c < class_count; ++c) deck.push_back(c);
    for (int attempt = 0; attempt < 10000; ++attempt) {
      std::shuffle(deck.begin(), deck.end(), rng);
      bool ok = true;
      for (std::size_t d = 0; d < devices && ok; ++d) {
        std::vector<int> s(deck.begin() + static_cast<long>(d * k), deck.begin() + static_cast<long>((d + 1) * k));
        std::sort(s.begin(), s.end());
        ok = std::adjacent_find(s.begin(), s.end()) == s.end();
        subsets[d] = std::move(s);
      }
      if (ok) return subsets;
    }
    // Cyclic fallback over a random class permutation.
    std::vector<int> perm(static_cast<std::size_t>(class_count));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t d = 0; d < devices; ++d) {
      subsets[d].clear();
      for (std::size_t q = 0; q < k; ++q) subsets[d].push_back(perm[(d * k + q) % perm.size()]);
      std::sort(subsets[d].begin(), subsets[d].end());
    }
    return subsets;
  }

  std::vector<int> all(static_cast<std::size_t>(class_count));
  std::iota(all.begin(), all.end(), 0);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    std::vector<bool> seen(all.size(), false);
    for (std::size_t d = 0; d < devices; ++d) {
      subsets[d].clear();
      std::sample(all.begin(), all.end(), std::back_inserter(subsets[d]), k, rng);
      for (int c : subsets[d]) seen[static_cast<std::size_t>(c)] = true;
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) return subsets;
  }
  throw InfeasibleError("failed to find a class assignment covering every class");
}

std::vector<LabeledDataset> partition_noniid(const LabeledDataset& ds, std::size_t devices,
                                             int classes_per_device, Rng& rng) {
  if (devices == 0) throw InfeasibleError("partition needs at least one device");
  const auto subsets = assign_class_subsets(ds.class_count, devices, classes_per_device, rng);
  std::vector<std::vector<std::size_t>> holders(static_cast<std::size_t>(ds.class_count));
  for (std::size_t d = 0; d < devices; ++d)
    for (int c : subsets[d]) holders[static_cast<std::size_t>(c)].push_back(d);

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
  for (std::size_t q = 0; q < ds.size(); ++q) by_class[static_cast<std::size_t>(ds.labels[q])].push_back(q);

  std::vector<LabeledDataset> out(devices);
  for (auto& part : out) {
    part.class_count = ds.class_count;
    part.rows = ds.rows;
    part.cols = ds.cols;
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t h = holders[c].size();
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t lo = idx.size() * r / h, hi = idx.size() * (r + 1) / h;
      auto& part = out[holders[c][r]];
      for (std::size_t q = lo; q < hi; ++q) {
        part.points.push_back(ds.points[idx[q]]);
        part.labels.push_back(ds.labels[idx[q]]);
      }
    }
  }
  return out;
}

namespace {

void require_image(const AugmentationSpec& spec, std::size_t dim) {
  if (spec.rows * spec.cols != dim || dim == 0) {
    throw ShapeError("image augmentation needs rows*cols == input dimension");
  }
}

Vector shift_image(const Vector& x, std::size_t rows, std::size_t cols, long dy, long dx) {
  Vector out(x.size(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const long sr = static_cast<long>(r) + dy;
    if (sr < 0 || sr >= static_cast<long>(rows)) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const long sc = static_cast<long>(c) + dx;
      if (sc < 0 || sc >= static_cast<long>(cols)) continue;
      out[r * cols + c] = x[static_cast<std::size_t>(sr) * cols + static_cast<std::size_t>(sc)];
    }
  }
  return out;
}

}  // namespace

Vector augment(std::span<const double> x, const AugmentationSpec& spec, Rng& rng) {
  Vector out(x.begin(), x.end());
  for (const auto& step : spec.steps) {
    switch (step.family) {
      case AugmentationFamily::gaussian_noise: {
        if (step.amount <= 0.0) break;
        std::normal_distribution<double> noise(0.0, step.amount);
        for (double& v : out) v += noise(rng);
        break;
      }
      case AugmentationFamily::random_scale: {
        if (step.amount <= 0.0) break;
        const double s = 1.0 + step.amount * (2.0 * uniform01(rng) - 1.0);
        for (double& v : out) v *= s;
        break;
      }
      case AugmentationFamily::random_crop_pad: {
        require_image(spec, out.size());
        const long m = static_cast<long>(step.amount);
        if (m <= 0) break;
        std::uniform_int_distribution<long> shift(-m, m);
        const long dy = shift(rng), dx = shift(rng);
        out = shift_image(out, spec.rows, spec.cols, dy, dx);
        break;
      }
      case AugmentationFamily::horizontal_flip: {
        require_image(spec, out.size());
        if (!(uniform01(rng) < step.amount)) break;
        for (std::size_t r = 0; r < spec.rows; ++r)
          std::reverse(out.begin() + static_cast<long>(r * spec.cols),
                       out.begin() + static_cast<long>((r + 1) * spec.cols));
        break;
      }
      case AugmentationFamily::blur: {
        require_image(spec, out.size());
        if (!(uniform01(rng) < step.amount)) break;
        // 3x3 binomial kernel, edge pixels replicate.
        static constexpr double kernel[3] = {0.25, 0.5, 0.25};
        const Vector src = out;
        const auto rows = static_cast<long>(spec.rows), cols = static_cast<long>(spec.cols);
        for (long r = 0; r < rows; ++r) {
          for (long c = 0; c < cols; ++c) {
            double s = 0.0;
            for (long i = -1; i <= 1; ++i) {
              for (long j = -1; j <= 1; ++j) {
                const long rr = std::clamp(r + i, 0L, rows - 1), cc = std::clamp(c + j, 0L, cols - 1);
                s += kernel[i + 1] * kernel[j + 1] * src[static_cast<std::size_t>(rr * cols + cc)];
              }
            }
            out[static_cast<std::size_t>(r * cols + c)] = s;
          }
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace cfcl
