#include "mish/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "mish/errors.hpp"
#include "mish/rng.hpp"

namespace mish {

namespace {

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;
constexpr int64_t kCifarRecord = 3073;  // 1 label byte + 32*32*3 planar pixels

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  is.seekg(0, std::ios::end);
  std::streamoff len = is.tellg();
  is.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(len));
  is.read(reinterpret_cast<char*>(buf.data()), len);
  if (!is) throw IoError("read failed: " + path);
  return buf;
}

uint32_t be32(const uint8_t* p) {
  return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_be32(std::ofstream& os, uint32_t v) {
  uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::string hex_magic(uint32_t v) {
  char buf[16];
  snprintf(buf, sizeof(buf), "0x%08x", v);
  return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::vector<uint8_t> img = read_file(images_path);
  std::vector<uint8_t> lab = read_file(labels_path);

  if (img.size() < 16) throw LengthError("idx image header truncated: " + images_path);
  if (lab.size() < 8) throw LengthError("idx label header truncated: " + labels_path);

  uint32_t img_magic = be32(img.data());
  if (img_magic != kImageMagic)
    throw FormatError("idx image magic " + hex_magic(img_magic) + ", expected " +
                      hex_magic(kImageMagic) + " in " + images_path);
  uint32_t lab_magic = be32(lab.data());
  if (lab_magic != kLabelMagic)
    throw FormatError("idx label magic " + hex_magic(lab_magic) + ", expected " +
                      hex_magic(kLabelMagic) + " in " + labels_path);

  uint64_t n = be32(img.data() + 4);
  uint64_t h = be32(img.data() + 8);
  uint64_t w = be32(img.data() + 12);
  if (h == 0 || w == 0 || n > (uint64_t(1) << 32) || h * w > (uint64_t(1) << 24))
    throw FormatError("idx image dimensions out of range in " + images_path);
  uint64_t want = n * h * w;
  if (want / std::max<uint64_t>(1, h * w) != n)
    throw FormatError("idx image dimension overflow in " + images_path);
  if (img.size() != 16 + want)
    throw LengthError("idx image payload is " + std::to_string(img.size() - 16) +
                      " bytes, header declares " + std::to_string(want) + ": " + images_path);

  uint64_t n_lab = be32(lab.data() + 4);
  if (n_lab != n)
    throw FormatError("idx label count " + std::to_string(n_lab) + " != image count " +
                      std::to_string(n));
  if (lab.size() != 8 + n_lab)
    throw LengthError("idx label payload is " + std::to_string(lab.size() - 8) +
                      " bytes, header declares " + std::to_string(n_lab) + ": " + labels_path);

  Dataset ds;
  ds.images = Tensor<float>({int64_t(n), int64_t(h), int64_t(w), 1});
  for (uint64_t i = 0; i < want; ++i)
    ds.images.data[i] = static_cast<float>(img[16 + i]) / 255.0f;
  ds.labels.resize(n);
  int max_label = 0;
  for (uint64_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = std::max(10, max_label + 1);
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  if (ds.images.rank() != 4 || ds.images.dim(3) != 1)
    throw std::invalid_argument("save_idx: expected (N, H, W, 1) images");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open for write: " + images_path);
  put_be32(img, kImageMagic);
  put_be32(img, static_cast<uint32_t>(ds.images.dim(0)));
  put_be32(img, static_cast<uint32_t>(ds.images.dim(1)));
  put_be32(img, static_cast<uint32_t>(ds.images.dim(2)));
  for (float v : ds.images.data) {
    int q = static_cast<int>(std::lround(v * 255.0f));
    uint8_t b = static_cast<uint8_t>(std::clamp(q, 0, 255));
    img.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!img) throw IoError("write failed: " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open for write: " + labels_path);
  put_be32(lab, kLabelMagic);
  put_be32(lab, static_cast<uint32_t>(ds.labels.size()));
  for (int l : ds.labels) {
    uint8_t b = static_cast<uint8_t>(l);
    lab.write(reinterpret_cast<const char*>(&b), 1);
  }
  if (!lab) throw IoError("write failed: " + labels_path);
}

namespace {

void append_cifar_file(Dataset& ds, const std::string& path, int64_t& row) {
  std::vector<uint8_t> buf = read_file(path);
  if (buf.size() % kCifarRecord != 0)
    throw FormatError("cifar batch size " + std::to_string(buf.size()) +
                      " is not a multiple of 3073: " + path);
  int64_t records = static_cast<int64_t>(buf.size()) / kCifarRecord;
  for (int64_t r = 0; r < records; ++r) {
    const uint8_t* rec = buf.data() + r * kCifarRecord;
    ds.labels[row] = rec[0];
    float* out = ds.images.ptr() + row * 32 * 32 * 3;
    // planar R,G,B -> interleaved HWC
    for (int64_t p = 0; p < 32 * 32; ++p) {
      out[p * 3 + 0] = static_cast<float>(rec[1 + p]) / 255.0f;
      out[p * 3 + 1] = static_cast<float>(rec[1 + 1024 + p]) / 255.0f;
      out[p * 3 + 2] = static_cast<float>(rec[1 + 2048 + p]) / 255.0f;
    }
    ++row;
  }
}

int64_t cifar_file_records(const std::string& path) {
  std::error_code ec;
  auto sz = std::filesystem::file_size(path, ec);
  if (ec) throw IoError("cannot stat: " + path);
  if (sz % kCifarRecord != 0)
    throw FormatError("cifar batch size " + std::to_string(sz) +
                      " is not a multiple of 3073: " + path);
  return static_cast<int64_t>(sz / kCifarRecord);
}

}  // namespace

Dataset load_cifar10_binary(const std::string& dir, Split split) {
  std::vector<std::string> files;
  if (split == Split::train) {
    for (int i = 1; i <= 5; ++i)
      files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back(dir + "/test_batch.bin");
  }
  int64_t total = 0;
  for (const std::string& f : files) total += cifar_file_records(f);

  Dataset ds;
  ds.split = split;
  ds.num_classes = 10;
  ds.images = Tensor<float>({total, 32, 32, 3});
  ds.labels.resize(static_cast<size_t>(total));
  int64_t row = 0;
  for (const std::string& f : files) append_cifar_file(ds, f, row);
  return ds;
}

void save_cifar10_binary(const Dataset& train_set, const Dataset& test_set,
                         const std::string& dir) {
  auto write_records = [](const Dataset& ds, const std::string& path, int64_t begin,
                          int64_t end) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    for (int64_t i = begin; i < end; ++i) {
      uint8_t label = static_cast<uint8_t>(ds.labels[i]);
      os.write(reinterpret_cast<const char*>(&label), 1);
      const float* px = ds.images.ptr() + i * 32 * 32 * 3;
      for (int ch = 0; ch < 3; ++ch)
        for (int64_t p = 0; p < 32 * 32; ++p) {
          int q = static_cast<int>(std::lround(px[p * 3 + ch] * 255.0f));
          uint8_t b = static_cast<uint8_t>(std::clamp(q, 0, 255));
          os.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    if (!os) throw IoError("write failed: " + path);
  };
  if (train_set.images.dim(1) != 32 || train_set.images.dim(3) != 3)
    throw std::invalid_argument("save_cifar10_binary: expected (N, 32, 32, 3) images");
  int64_t n = train_set.size();
  int64_t per = (n + 4) / 5;
  for (int i = 0; i < 5; ++i) {
    int64_t b = std::min<int64_t>(n, i * per);
    int64_t e = std::min<int64_t>(n, (i + 1) * per);
    write_records(train_set, dir + "/data_batch_" + std::to_string(i + 1) + ".bin", b, e);
  }
  write_records(test_set, dir + "/test_batch.bin", 0, test_set.size());
}

Dataset corrupt_gaussian(const Dataset& ds, double sigma, uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("corrupt_gaussian: sigma must be >= 0");
  Dataset out = ds;
  if (sigma == 0.0) return out;
  RandomEngine rng(seed);
  for (float& v : out.images.data)
    v = static_cast<float>(static_cast<double>(v) + rng.normal(0.0, sigma));
  return out;
}

Dataset synth_blobs(int64_t n_per_class, int num_classes, int64_t dim, double spread,
                    uint64_t seed) {
  if (n_per_class < 1 || num_classes < 1 || dim < 1)
    throw std::invalid_argument("synth_blobs: counts must be >= 1");
  RandomEngine rng(seed);
  std::vector<double> centers(static_cast<size_t>(num_classes) * dim);
  for (double& c : centers) c = rng.uniform(-1.0, 1.0);

  int64_t n = n_per_class * num_classes;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.images = Tensor<float>({n, 1, 1, dim});
  ds.labels.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    int cls = static_cast<int>(i % num_classes);
    ds.labels[i] = cls;
    float* px = ds.images.ptr() + i * dim;
    const double* c = centers.data() + static_cast<int64_t>(cls) * dim;
    for (int64_t d = 0; d < dim; ++d)
      px[d] = static_cast<float>(c[d] + (spread > 0.0 ? rng.normal(0.0, spread) : 0.0));
  }
  return ds;
}

namespace {

// 5x7 digit glyphs.
constexpr std::array<const char*, 10> kGlyphs = {
    ".###."
    "#...#"
    "#...#"
    "#...#"
    "#...#"
    "#...#"
    ".###.",
    "..#.."
    ".##.."
    "..#.."
    "..#.."
    "..#.."
    "..#.."
    ".###.",
    ".###."
    "#...#"
    "....#"
    ".###."
    "#...."
    "#...."
    "#####",
    ".###."
    "#...#"
    "....#"
    ".##.."
    "....#"
    "#...#"
    ".###.",
    "...#."
    "..##."
    ".#.#."
    "#..#."
    "#####"
    "...#."
    "...#.",
    "#####"
    "#...."
    "#...."
    "####."
    "....#"
    "#...#"
    ".###.",
    ".###."
    "#...."
    "#...."
    "####."
    "#...#"
    "#...#"
    ".###.",
    "#####"
    "....#"
    "...#."
    "..#.."
    "..#.."
    "..#.."
    "..#..",
    ".###."
    "#...#"
    "#...#"
    ".###."
    "#...#"
    "#...#"
    ".###.",
    ".###."
    "#...#"
    "#...#"
    ".####"
    "....#"
    "#...#"
    ".###."};

// Fixed per-class colors for the 3-channel variant.
constexpr std::array<std::array<float, 3>, 10> kPalette = {{
    {0.95f, 0.35f, 0.35f},
    {0.35f, 0.95f, 0.35f},
    {0.35f, 0.45f, 0.95f},
    {0.95f, 0.85f, 0.30f},
    {0.85f, 0.35f, 0.90f},
    {0.35f, 0.90f, 0.90f},
    {0.95f, 0.60f, 0.25f},
    {0.60f, 0.95f, 0.60f},
    {0.60f, 0.60f, 0.95f},
    {0.90f, 0.90f, 0.90f},
}};

}  // namespace

Dataset synth_digits(int64_t n, uint64_t seed, int64_t img, int channels, double noise) {
  if (n < 1) throw std::invalid_argument("synth_digits: n must be >= 1");
  if (channels != 1 && channels != 3)
    throw std::invalid_argument("synth_digits: channels must be 1 or 3");
  RandomEngine rng(seed);

  Dataset ds;
  ds.num_classes = 10;
  ds.images = Tensor<float>({n, img, img, channels});
  ds.labels.resize(static_cast<size_t>(n));

  for (int64_t i = 0; i < n; ++i) {
    int cls = static_cast<int>(rng.uniform_index(10));
    ds.labels[i] = cls;
    const char* glyph = kGlyphs[static_cast<size_t>(cls)];

    int64_t scale = 2 + static_cast<int64_t>(rng.uniform_index(2));  // 2 or 3
    int64_t gw = 5 * scale, gh = 7 * scale;
    int64_t cx = (img - gw) / 2, cy = (img - gh) / 2;
    int64_t jx = static_cast<int64_t>(rng.uniform_index(5)) - 2;
    int64_t jy = static_cast<int64_t>(rng.uniform_index(5)) - 2;
    int64_t x0 = std::clamp<int64_t>(cx + jx, 0, img - gw);
    int64_t y0 = std::clamp<int64_t>(cy + jy, 0, img - gh);
    double contrast = rng.uniform(0.55, 1.0);

    float* px = ds.images.ptr() + i * img * img * channels;
    for (int64_t y = 0; y < img; ++y)
      for (int64_t x = 0; x < img; ++x) {
        double ink = 0.0;
        int64_t gy = (y - y0) / scale, gx = (x - x0) / scale;
        if (y >= y0 && y < y0 + gh && x >= x0 && x < x0 + gw &&
            glyph[gy * 5 + gx] == '#')
          ink = contrast;
        for (int c = 0; c < channels; ++c) {
          double color = channels == 3 ? kPalette[static_cast<size_t>(cls)][c] : 1.0;
          double v = ink * color + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
          px[(y * img + x) * channels + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
  }
  return ds;
}

Dataset head(const Dataset& ds, int64_t n) {
  n = std::min(n, ds.size());
  Dataset out;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  std::vector<int64_t> shape = ds.images.shape;
  shape[0] = n;
  out.images = Tensor<float>(shape);
  int64_t per = ds.sample_elems();
  std::copy(ds.images.data.begin(), ds.images.data.begin() + n * per, out.images.data.begin());
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + n);
  return out;
}

}  // namespace mish
