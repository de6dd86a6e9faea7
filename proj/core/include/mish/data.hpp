#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mish/tensor.hpp"

namespace mish {

enum class Split { train, test };

// Images are (N, H, W, C) single precision in [0, 1] as loaded; additive
// noise may push values outside that range.
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  Split split = Split::train;
  int num_classes = 10;

  int64_t size() const { return images.rank() ? images.dim(0) : 0; }
  int64_t sample_elems() const {
    return images.rank() ? static_cast<int64_t>(images.size()) / std::max<int64_t>(1, images.dim(0)) : 0;
  }
};

// Big-endian IDX pair (0x00000803 image magic, 0x00000801 label magic),
// pixels scaled by 1/255. Wrong magic -> FormatError naming the observed
// value; short data -> LengthError.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);
// Inverse of load_idx; pixels are written as round(p * 255) clamped to a byte.
void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path);

// The 3073-byte-record binary layout: data_batch_1..5.bin + test_batch.bin
// under dir, planar RGB, scaled 1/255.
Dataset load_cifar10_binary(const std::string& dir, Split split);
void save_cifar10_binary(const Dataset& train_set, const Dataset& test_set,
                         const std::string& dir);

// Adds seeded N(0, sigma^2) to every pixel. Values are deliberately not
// re-clamped; labels are untouched.
Dataset corrupt_gaussian(const Dataset& ds, double sigma, uint64_t seed);

// Gaussian blobs around seeded random class centers, (N, 1, 1, dim).
// Linearly separable for small spread.
Dataset synth_blobs(int64_t n_per_class, int num_classes, int64_t dim,
                    double spread, uint64_t seed);

// Glyph-rendered digit images: each sample is one of ten fixed digit shapes
// with seeded scale/position/contrast jitter and pixel noise. channels 1
// gives IDX-shaped 28x28 data; channels 3 gives 32x32 color data with a
// per-class hue bias. Stand-in corpus for runs where the real datasets are
// not on disk.
Dataset synth_digits(int64_t n, uint64_t seed, int64_t img = 28, int channels = 1,
                     double noise = 0.15);

// Subsets rows [0, n) (or fewer if the set is smaller).
Dataset head(const Dataset& ds, int64_t n);

}  // namespace mish
