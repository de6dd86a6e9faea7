#include "mish/data.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "mish/errors.hpp"

namespace fs = std::filesystem;

namespace mish {
namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("mish_data_test_" + std::to_string(counter_++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  fs::path operator/(const std::string& name) const { return path_ / name; }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

void put_be32(std::ofstream& os, uint32_t v) {
  uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

// Two 2x3 images with hand-picked bytes.
void write_idx_fixture(const fs::path& images, const fs::path& labels,
                       uint32_t image_magic = 0x00000803) {
  std::ofstream img(images, std::ios::binary);
  put_be32(img, image_magic);
  put_be32(img, 2);
  put_be32(img, 2);
  put_be32(img, 3);
  const uint8_t px[12] = {0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60};
  img.write(reinterpret_cast<const char*>(px), 12);
  img.close();

  std::ofstream lab(labels, std::ios::binary);
  put_be32(lab, 0x00000801);
  put_be32(lab, 2);
  const uint8_t ls[2] = {7, 3};
  lab.write(reinterpret_cast<const char*>(ls), 2);
}

TEST(LoadIdx, RecoversHandcraftedBytes) {
  TempDir dir;
  write_idx_fixture(dir / "img", dir / "lab");
  Dataset ds = load_idx((dir / "img").string(), (dir / "lab").string());
  EXPECT_EQ(ds.size(), 2);
  EXPECT_EQ(ds.images.dim(1), 2);
  EXPECT_EQ(ds.images.dim(2), 3);
  EXPECT_EQ(ds.images.dim(3), 1);
  EXPECT_EQ(ds.labels[0], 7);
  EXPECT_EQ(ds.labels[1], 3);
  const uint8_t px[12] = {0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60};
  for (int i = 0; i < 12; ++i)
    EXPECT_FLOAT_EQ(ds.images.data[i], static_cast<float>(px[i]) / 255.0f);
}

TEST(LoadIdx, WrongMagicNamesObservedValue) {
  TempDir dir;
  write_idx_fixture(dir / "img", dir / "lab", 0x00000802);
  try {
    load_idx((dir / "img").string(), (dir / "lab").string());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("0x00000802"), std::string::npos);
  }
}

TEST(LoadIdx, TruncatedPayloadIsLengthError) {
  TempDir dir;
  write_idx_fixture(dir / "img", dir / "lab");
  // Chop two bytes off the image payload.
  auto full = fs::file_size(dir / "img");
  fs::resize_file(dir / "img", full - 2);
  EXPECT_THROW(load_idx((dir / "img").string(), (dir / "lab").string()), LengthError);
}

TEST(LoadIdx, MissingFileIsIoError) {
  TempDir dir;
  EXPECT_THROW(load_idx((dir / "nope").string(), (dir / "nope2").string()), IoError);
}

TEST(SaveIdx, RoundTripIsBitwise) {
  Dataset ds = synth_digits(64, 3);
  TempDir dir;
  save_idx(ds, (dir / "img").string(), (dir / "lab").string());
  Dataset back = load_idx((dir / "img").string(), (dir / "lab").string());
  ASSERT_EQ(back.size(), ds.size());
  ASSERT_EQ(back.images.data.size(), ds.images.data.size());
  for (size_t i = 0; i < ds.images.data.size(); ++i) {
    // Loader pixels are k/255 by construction, so the write quantizes to the
    // identical byte and the reload is bit-identical.
    float quantized = std::round(ds.images.data[i] * 255.0f) / 255.0f;
    ASSERT_EQ(back.images.data[i], quantized);
  }
  for (size_t i = 0; i < ds.labels.size(); ++i) ASSERT_EQ(back.labels[i], ds.labels[i]);

  // A second round trip is exactly stable.
  TempDir dir2;
  save_idx(back, (dir2 / "img").string(), (dir2 / "lab").string());
  Dataset back2 = load_idx((dir2 / "img").string(), (dir2 / "lab").string());
  for (size_t i = 0; i < back.images.data.size(); ++i)
    ASSERT_EQ(back2.images.data[i], back.images.data[i]);
}

TEST(Cifar10, HandcraftedRecordRecovered) {
  TempDir dir;
  // data_batch_1: two records; remaining batches empty but present.
  {
    std::ofstream os(dir / "data_batch_1.bin", std::ios::binary);
    std::vector<uint8_t> rec(3073, 0);
    rec[0] = 9;
    rec[1] = 255;          // R plane, pixel 0
    rec[1 + 1024] = 128;   // G plane, pixel 0
    rec[1 + 2048] = 64;    // B plane, pixel 0
    rec[1 + 1023] = 17;    // R plane, last pixel
    os.write(reinterpret_cast<const char*>(rec.data()), 3073);
    std::vector<uint8_t> rec2(3073, 1);
    rec2[0] = 4;
    os.write(reinterpret_cast<const char*>(rec2.data()), 3073);
  }
  for (int i = 2; i <= 5; ++i)
    std::ofstream(dir / ("data_batch_" + std::to_string(i) + ".bin"), std::ios::binary);
  {
    std::ofstream os(dir / "test_batch.bin", std::ios::binary);
    std::vector<uint8_t> rec(3073, 2);
    rec[0] = 1;
    os.write(reinterpret_cast<const char*>(rec.data()), 3073);
  }

  Dataset train = load_cifar10_binary(dir.path().string(), Split::train);
  EXPECT_EQ(train.size(), 2);
  EXPECT_EQ(train.labels[0], 9);
  EXPECT_EQ(train.labels[1], 4);
  EXPECT_FLOAT_EQ(train.images.data[0], 1.0f);            // R of pixel 0
  EXPECT_FLOAT_EQ(train.images.data[1], 128.0f / 255.0f); // G of pixel 0
  EXPECT_FLOAT_EQ(train.images.data[2], 64.0f / 255.0f);  // B of pixel 0
  EXPECT_FLOAT_EQ(train.images.data[1023 * 3], 17.0f / 255.0f);

  Dataset test = load_cifar10_binary(dir.path().string(), Split::test);
  EXPECT_EQ(test.size(), 1);
  EXPECT_EQ(test.labels[0], 1);
}

TEST(Cifar10, MisalignedRecordIsFormatError) {
  TempDir dir;
  for (int i = 1; i <= 5; ++i)
    std::ofstream(dir / ("data_batch_" + std::to_string(i) + ".bin"), std::ios::binary);
  {
    std::ofstream os(dir / "data_batch_1.bin", std::ios::binary);
    std::vector<uint8_t> bad(3000, 0);
    os.write(reinterpret_cast<const char*>(bad.data()), 3000);
  }
  std::ofstream(dir / "test_batch.bin", std::ios::binary);
  EXPECT_THROW(load_cifar10_binary(dir.path().string(), Split::train), FormatError);
}

TEST(Cifar10, MissingFileIsIoErrorWithPath) {
  TempDir dir;
  try {
    load_cifar10_binary(dir.path().string(), Split::test);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("test_batch.bin"), std::string::npos);
  }
}

TEST(Cifar10, SaveLoadRoundTrip) {
  Dataset train = synth_digits(50, 5, 32, 3);
  Dataset test = synth_digits(10, 6, 32, 3);
  TempDir dir;
  save_cifar10_binary(train, test, dir.path().string());
  Dataset back = load_cifar10_binary(dir.path().string(), Split::train);
  ASSERT_EQ(back.size(), 50);
  for (size_t i = 0; i < back.images.data.size(); ++i) {
    float quantized = std::round(train.images.data[i] * 255.0f) / 255.0f;
    ASSERT_EQ(back.images.data[i], quantized);
  }
}

TEST(CorruptGaussian, SigmaZeroIsIdentity) {
  Dataset ds = synth_digits(16, 9);
  Dataset noisy = corrupt_gaussian(ds, 0.0, 123);
  for (size_t i = 0; i < ds.images.data.size(); ++i)
    ASSERT_EQ(noisy.images.data[i], ds.images.data[i]);
}

TEST(CorruptGaussian, NoiseStatisticsMatch) {
  Dataset ds = synth_digits(1600, 10);  // ~1.25M pixels
  const double sigma = 0.5;
  Dataset noisy = corrupt_gaussian(ds, sigma, 321);
  size_t n = ds.images.data.size();
  ASSERT_GE(n, 1000000u);
  double sum = 0.0, ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(noisy.images.data[i]) - ds.images.data[i];
    sum += d;
    ss += d * d;
  }
  double mean = sum / static_cast<double>(n);
  double sd = std::sqrt(ss / static_cast<double>(n) - mean * mean);
  EXPECT_LE(std::abs(mean), 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  EXPECT_NEAR(sd, sigma, 0.02 * sigma);
  // Labels untouched, values not clamped.
  for (size_t i = 0; i < ds.labels.size(); ++i) ASSERT_EQ(noisy.labels[i], ds.labels[i]);
  bool outside = false;
  for (float v : noisy.images.data) outside = outside || v < 0.0f || v > 1.0f;
  EXPECT_TRUE(outside);
}

TEST(CorruptGaussian, DeterministicUnderSeed) {
  Dataset ds = synth_digits(32, 11);
  Dataset a = corrupt_gaussian(ds, 0.3, 77);
  Dataset b = corrupt_gaussian(ds, 0.3, 77);
  for (size_t i = 0; i < a.images.data.size(); ++i)
    ASSERT_EQ(a.images.data[i], b.images.data[i]);
}

TEST(CorruptGaussian, VarianceGrowsWithSigma) {
  Dataset ds = synth_digits(200, 12);
  auto pixel_var = [&](const Dataset& d) {
    double sum = 0.0, ss = 0.0;
    for (float v : d.images.data) {
      sum += v;
      ss += static_cast<double>(v) * v;
    }
    double n = static_cast<double>(d.images.data.size());
    return ss / n - (sum / n) * (sum / n);
  };
  double v1 = pixel_var(corrupt_gaussian(ds, 0.25, 5));
  double v2 = pixel_var(corrupt_gaussian(ds, 0.75, 5));
  EXPECT_GT(v2, v1);
}

TEST(CorruptGaussian, NegativeSigmaRejected) {
  Dataset ds = synth_digits(4, 13);
  EXPECT_THROW(corrupt_gaussian(ds, -0.1, 0), std::invalid_argument);
}

TEST(SynthBlobs, SpreadZeroCollapsesToCenters) {
  Dataset ds = synth_blobs(5, 3, 4, 0.0, 99);
  EXPECT_EQ(ds.size(), 15);
  // All samples of one class identical.
  for (int cls = 0; cls < 3; ++cls) {
    const float* first = nullptr;
    for (int64_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] != cls) continue;
      const float* px = ds.images.ptr() + i * 4;
      if (!first) {
        first = px;
        continue;
      }
      for (int d = 0; d < 4; ++d) ASSERT_EQ(px[d], first[d]);
    }
  }
}

TEST(SynthBlobs, DeterministicUnderSeed) {
  Dataset a = synth_blobs(10, 2, 8, 0.2, 1);
  Dataset b = synth_blobs(10, 2, 8, 0.2, 1);
  for (size_t i = 0; i < a.images.data.size(); ++i)
    ASSERT_EQ(a.images.data[i], b.images.data[i]);
}

TEST(SynthDigits, ShapesLabelsAndDeterminism) {
  Dataset a = synth_digits(128, 5);
  EXPECT_EQ(a.images.dim(1), 28);
  EXPECT_EQ(a.images.dim(3), 1);
  EXPECT_EQ(a.num_classes, 10);
  for (int l : a.labels) {
    ASSERT_GE(l, 0);
    ASSERT_LT(l, 10);
  }
  for (float v : a.images.data) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
  Dataset b = synth_digits(128, 5);
  for (size_t i = 0; i < a.images.data.size(); ++i)
    ASSERT_EQ(a.images.data[i], b.images.data[i]);

  Dataset color = synth_digits(16, 5, 32, 3);
  EXPECT_EQ(color.images.dim(1), 32);
  EXPECT_EQ(color.images.dim(3), 3);
}

}  // namespace
}  // namespace mish
