#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mish/activations.hpp"
#include "mish/nn.hpp"

namespace mish {

struct GridSpec {
  double x_lo = -10.0, x_hi = 10.0;
  double y_lo = -10.0, y_hi = 10.0;
  int resolution = 256;  // points per axis

  void validate() const;
  double x_at(int col) const {
    return x_lo + (x_hi - x_lo) * static_cast<double>(col) / (resolution - 1);
  }
  double y_at(int row) const {
    return y_lo + (y_hi - y_lo) * static_cast<double>(row) / (resolution - 1);
  }
};

// Rectangular scalar field; values[row * resolution + col], row follows y.
struct Field2D {
  std::vector<double> values;
  GridSpec grid;
  bool has_nonfinite = false;  // set when the generating network diverged

  double& at(int row, int col) { return values[static_cast<size_t>(row) * grid.resolution + col]; }
  double at(int row, int col) const {
    return values[static_cast<size_t>(row) * grid.resolution + col];
  }
};

// Scalar output of a randomly initialized depth-layer MLP
// (2 -> width -> ... -> width -> 1, Glorot uniform, no batchnorm/dropout)
// sampled over the grid. Weight draws depend on the seed only, never on the
// activation, so paired fields isolate the activation's effect.
Field2D output_landscape(const ActivationKind& activation, uint64_t seed,
                         const GridSpec& grid, int depth = 5, int width = 64);

// Mean absolute 5-point Laplacian over interior cells, divided by the field's
// standard deviation. Scale-free: invariant under v -> a*v + b. A constant
// field scores 0.
double roughness(const Field2D& field);
// Mean |forward difference| per axis over the std, same normalization.
double total_variation(const Field2D& field);

// Loss over a 2-D slice of parameter space: theta + alpha d1 + beta d2 with
// seeded Gaussian directions rescaled block-wise (dense row / conv filter /
// whole vector) to the parameter block norms. Eval-mode statistics over the
// given subset. The network's parameters are restored on exit.
Field2D loss_slice(Network<double>& net, const Dataset& eval_subset, uint64_t seed,
                   const GridSpec& grid);

enum class FieldFormat { csv, pgm };

// csv: header x,y,value, row-major rows. pgm: binary P5, min-max scaled to
// 0-255; a degenerate scale (max == min) writes zeros and a comment flag.
void export_field(const Field2D& field, const std::string& path, FieldFormat format);

// Reads back a CSV written by export_field.
Field2D import_field_csv(const std::string& path);

}  // namespace mish
