#include "mish/landscape.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mish/data.hpp"
#include "mish/errors.hpp"

namespace mish {

void GridSpec::validate() const {
  if (resolution < 2) throw std::invalid_argument("grid: resolution must be >= 2");
  if (!(x_hi > x_lo) || !(y_hi > y_lo))
    throw std::invalid_argument("grid: ranges must be non-degenerate");
}

Field2D output_landscape(const ActivationKind& activation, uint64_t seed,
                         const GridSpec& grid, int depth, int width) {
  grid.validate();
  if (depth < 2) throw std::invalid_argument("output_landscape: depth must be >= 2");

  NetworkSpec spec;
  spec.initializer = Initializer::glorot_uniform;
  spec.seed = seed;
  int64_t in = 2;
  for (int i = 0; i < depth - 1; ++i) {
    spec.layers.push_back(LayerDesc::Dense(in, width));
    spec.layers.push_back(LayerDesc::Act(activation));
    in = width;
  }
  spec.layers.push_back(LayerDesc::Dense(in, 1));
  Network<double> net = Network<double>::build(spec, {2});

  Field2D field;
  field.grid = grid;
  field.values.resize(static_cast<size_t>(grid.resolution) * grid.resolution);

  const int res = grid.resolution;
  // One row of grid points per forward batch.
  for (int row = 0; row < res; ++row) {
    Tensor<double> batch({res, 2});
    for (int col = 0; col < res; ++col) {
      batch.data[col * 2 + 0] = grid.x_at(col);
      batch.data[col * 2 + 1] = grid.y_at(row);
    }
    Tensor<double> out = net.forward(batch, Mode::eval);
    for (int col = 0; col < res; ++col) {
      double v = out.data[col];
      field.at(row, col) = v;
      if (!std::isfinite(v)) field.has_nonfinite = true;
    }
  }
  return field;
}

namespace {

double field_std(const Field2D& f) {
  double mean = 0.0;
  for (double v : f.values) mean += v;
  mean /= static_cast<double>(f.values.size());
  double ss = 0.0;
  for (double v : f.values) {
    double d = v - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(f.values.size()));
}

}  // namespace

double roughness(const Field2D& field) {
  const int res = field.grid.resolution;
  double sd = field_std(field);
  if (sd == 0.0) return 0.0;
  double acc = 0.0;
  int64_t count = 0;
  for (int r = 1; r + 1 < res; ++r)
    for (int c = 1; c + 1 < res; ++c) {
      double lap = field.at(r + 1, c) + field.at(r - 1, c) + field.at(r, c + 1) +
                   field.at(r, c - 1) - 4.0 * field.at(r, c);
      acc += std::abs(lap);
      ++count;
    }
  return acc / (static_cast<double>(count) * sd);
}

double total_variation(const Field2D& field) {
  const int res = field.grid.resolution;
  double sd = field_std(field);
  if (sd == 0.0) return 0.0;
  double acc = 0.0;
  int64_t count = 0;
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) {
      if (c + 1 < res) {
        acc += std::abs(field.at(r, c + 1) - field.at(r, c));
        ++count;
      }
      if (r + 1 < res) {
        acc += std::abs(field.at(r + 1, c) - field.at(r, c));
        ++count;
      }
    }
  return acc / (static_cast<double>(count) * sd);
}

Field2D loss_slice(Network<double>& net, const Dataset& eval_subset, uint64_t seed,
                   const GridSpec& grid) {
  grid.validate();
  if (eval_subset.size() == 0) throw std::invalid_argument("loss_slice: empty subset");

  auto params = net.parameters();
  std::vector<std::vector<double>> theta;
  theta.reserve(params.size());
  for (auto* p : params) theta.push_back(p->value);

  RandomEngine rng(mix_seed(seed, 0x511ceu));
  auto draw_direction = [&] {
    std::vector<std::vector<double>> dir(params.size());
    for (size_t pi = 0; pi < params.size(); ++pi) {
      auto& p = *params[pi];
      auto& d = dir[pi];
      d.resize(p.value.size());
      int64_t bs = p.block_size;
      for (size_t start = 0; start < d.size(); start += static_cast<size_t>(bs)) {
        size_t end = std::min(d.size(), start + static_cast<size_t>(bs));
        double dn = 0.0, tn = 0.0;
        int tries = 0;
        for (;;) {
          dn = 0.0;
          for (size_t j = start; j < end; ++j) {
            d[j] = rng.normal();
            dn += d[j] * d[j];
          }
          dn = std::sqrt(dn);
          if (dn > 0.0) break;
          if (++tries > 8) throw std::runtime_error("loss_slice: zero-norm direction block");
        }
        for (size_t j = start; j < end; ++j) tn += theta[pi][j] * theta[pi][j];
        tn = std::sqrt(tn);
        double scale = tn / dn;  // zero parameter block zeroes the direction
        for (size_t j = start; j < end; ++j) d[j] *= scale;
      }
    }
    return dir;
  };
  auto d1 = draw_direction();
  auto d2 = draw_direction();

  const bool flatten = net.input_shape().size() == 1;
  // Fixed evaluation batches, reused at every grid point.
  std::vector<int64_t> idx(static_cast<size_t>(eval_subset.size()));
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int64_t>(i);

  Field2D field;
  field.grid = grid;
  field.values.resize(static_cast<size_t>(grid.resolution) * grid.resolution);

  const int res = grid.resolution;
  for (int row = 0; row < res; ++row) {
    double beta = grid.y_at(row);
    for (int col = 0; col < res; ++col) {
      double alpha = grid.x_at(col);
      for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& val = params[pi]->value;
        for (size_t j = 0; j < val.size(); ++j)
          val[j] = theta[pi][j] + alpha * d1[pi][j] + beta * d2[pi][j];
      }
      auto [loss, acc] = evaluate<double>(net, eval_subset);
      (void)acc;
      field.at(row, col) = loss;
      if (!std::isfinite(loss)) field.has_nonfinite = true;
    }
  }

  for (size_t pi = 0; pi < params.size(); ++pi) params[pi]->value = theta[pi];
  (void)flatten;
  return field;
}

void export_field(const Field2D& field, const std::string& path, FieldFormat format) {
  const int res = field.grid.resolution;
  if (format == FieldFormat::csv) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "x,y,value\n";
    char buf[96];
    for (int r = 0; r < res; ++r)
      for (int c = 0; c < res; ++c) {
        snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", field.grid.x_at(c),
                 field.grid.y_at(r), field.at(r, c));
        os << buf;
      }
    if (!os) throw IoError("write failed: " + path);
    return;
  }

  double mn = field.values[0], mx = field.values[0];
  for (double v : field.values) {
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  bool degenerate = !(mx > mn);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os << "P5\n";
  if (degenerate) os << "# degenerate-scale\n";
  os << "# min=" << mn << " max=" << mx << "\n";
  os << res << ' ' << res << "\n255\n";
  for (int r = 0; r < res; ++r)
    for (int c = 0; c < res; ++c) {
      double v = field.at(r, c);
      uint8_t b = 0;
      if (!degenerate && std::isfinite(v))
        b = static_cast<uint8_t>(std::lround(255.0 * (v - mn) / (mx - mn)));
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  if (!os) throw IoError("write failed: " + path);
}

Field2D import_field_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(is, line) || line != "x,y,value")
    throw FormatError("field csv: bad header in " + path);
  std::vector<double> xs, ys, vs;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    double x, y, v;
    if (sscanf(line.c_str(), "%lf,%lf,%lf", &x, &y, &v) != 3)
      throw FormatError("field csv: bad row in " + path);
    xs.push_back(x);
    ys.push_back(y);
    vs.push_back(v);
  }
  size_t n = vs.size();
  int res = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (static_cast<size_t>(res) * res != n)
    throw FormatError("field csv: row count is not a square in " + path);
  Field2D f;
  f.grid.resolution = res;
  f.grid.x_lo = xs.front();
  f.grid.x_hi = xs[static_cast<size_t>(res - 1)];
  f.grid.y_lo = ys.front();
  f.grid.y_hi = ys.back();
  f.values = std::move(vs);
  for (double v : f.values)
    if (!std::isfinite(v)) f.has_nonfinite = true;
  return f;
}

}  // namespace mish
