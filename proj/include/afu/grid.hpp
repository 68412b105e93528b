#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "afu/tensor.hpp"

namespace afu {

// Square sampling lattice over a rectangle of the (x0, x1) plane.
struct GridSpec {
  double x0_min = -3.0, x0_max = 3.0;
  double x1_min = -3.0, x1_max = 3.0;
  std::size_t resolution = 201;
};

// Scalar field on a GridSpec. Row-major: row i is x1[i], column j is x0[j].
struct GridField {
  GridSpec spec;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * spec.resolution + j]; }
  std::vector<double> x0() const;
  std::vector<double> x1() const;
};

// Fills a batch with the (x0, x1) points of one grid row and writes one score
// per point. Must be safe to call concurrently.
using RowEvaluator = std::function<void(const Tensor& points, std::span<double> scores)>;

// Evaluates every grid row independently (OpenMP over rows). Output order is
// row-major regardless of scheduling. Throws NumericError on non-finite
// scores.
GridField evaluate_grid(const GridSpec& spec, const RowEvaluator& eval);

// Mean absolute 5-point Laplacian over interior points, in grid units.
// Throws RangeError for resolution < 3.
double roughness(const GridField& field);

struct Point2 {
  double x0 = 0.0, x1 = 0.0;
};
using Polyline = std::vector<Point2>;

// Marching-squares level set {field == level}, with crossing segments joined
// into polylines (closed loops repeat their first point at the end).
// Corners with value >= level count as inside; ambiguous saddles are resolved
// by the cell-centre average.
std::vector<Polyline> boundary_extract(const GridField& field, double level = 0.0);

// CSV writers: fields as x0,x1,score; polylines as line,x0,x1.
void write_field_csv(const GridField& field, const std::filesystem::path& path);
void write_polylines_csv(const std::vector<Polyline>& lines, const std::filesystem::path& path);

}  // namespace afu
