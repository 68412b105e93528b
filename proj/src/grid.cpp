#include "afu/grid.hpp"

#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <unordered_map>

#include "afu/error.hpp"

namespace afu {

std::vector<double> GridField::x0() const {
  return linspace(spec.x0_min, spec.x0_max, spec.resolution);
}

std::vector<double> GridField::x1() const {
  return linspace(spec.x1_min, spec.x1_max, spec.resolution);
}

GridField evaluate_grid(const GridSpec& spec, const RowEvaluator& eval) {
  const std::size_t res = spec.resolution;
  GridField field{spec, std::vector<double>(res * res, 0.0)};
  const auto xs = field.x0();
  const auto ys = field.x1();

  bool finite = true;
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) reduction(&& : finite)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(res); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    Tensor points(Shape{res, 2}, 0.0);
    for (std::size_t j = 0; j < res; ++j) {
      points.at(j, 0) = xs[j];
      points.at(j, 1) = ys[i];
    }
    std::span<double> row(field.values.data() + i * res, res);
    try {
      eval(points, row);
    } catch (...) {
#pragma omp critical(afu_grid_failure)
      if (!failure) failure = std::current_exception();
      continue;
    }
    for (double v : row) finite = finite && std::isfinite(v);
  }
  if (failure) std::rethrow_exception(failure);
  if (!finite) throw NumericError("grid evaluation produced a non-finite score");
  return field;
}

double roughness(const GridField& field) {
  const std::size_t res = field.spec.resolution;
  if (res < 3) throw RangeError("roughness needs a resolution of at least 3");
  double total = 0.0;
  for (std::size_t i = 1; i + 1 < res; ++i) {
    for (std::size_t j = 1; j + 1 < res; ++j) {
      const double lap = field.at(i + 1, j) + field.at(i - 1, j) + field.at(i, j + 1) +
                         field.at(i, j - 1) - 4.0 * field.at(i, j);
      total += std::abs(lap);
    }
  }
  const auto interior = static_cast<double>((res - 2) * (res - 2));
  return total / interior;
}

namespace {

// Edge keys: horizontal edge (i, j)-(i, j+1) -> 2*(i*res+j);
// vertical edge (i, j)-(i+1, j) -> 2*(i*res+j)+1.
struct EdgeKeyer {
  std::size_t res;
  std::size_t horizontal(std::size_t i, std::size_t j) const { return 2 * (i * res + j); }
  std::size_t vertical(std::size_t i, std::size_t j) const { return 2 * (i * res + j) + 1; }
};

}  // namespace

std::vector<Polyline> boundary_extract(const GridField& field, double level) {
  const std::size_t res = field.spec.resolution;
  const auto xs = field.x0();
  const auto ys = field.x1();
  const EdgeKeyer key{res};

  auto crossing = [&](std::size_t edge) {
    const std::size_t cell = edge / 2;
    const std::size_t i = cell / res, j = cell % res;
    const bool vertical = edge % 2 == 1;
    const std::size_t i2 = vertical ? i + 1 : i, j2 = vertical ? j : j + 1;
    const double va = field.at(i, j), vb = field.at(i2, j2);
    const double t = (level - va) / (vb - va);
    if (vertical) return Point2{xs[j], t >= 1.0 ? ys[i2] : ys[i] + t * (ys[i2] - ys[i])};
    return Point2{t >= 1.0 ? xs[j2] : xs[j] + t * (xs[j2] - xs[j]), ys[i]};
  };

  std::vector<std::array<std::size_t, 2>> segments;
  for (std::size_t i = 0; i + 1 < res; ++i) {
    for (std::size_t j = 0; j + 1 < res; ++j) {
      const double v0 = field.at(i, j), v1 = field.at(i, j + 1);
      const double v2 = field.at(i + 1, j + 1), v3 = field.at(i + 1, j);
      const int c = (v0 >= level ? 1 : 0) | (v1 >= level ? 2 : 0) | (v2 >= level ? 4 : 0) |
                    (v3 >= level ? 8 : 0);
      if (c == 0 || c == 15) continue;
      const std::size_t bottom = key.horizontal(i, j), top = key.horizontal(i + 1, j);
      const std::size_t left = key.vertical(i, j), right = key.vertical(i, j + 1);
      const bool centre_inside = (v0 + v1 + v2 + v3) / 4.0 >= level;
      switch (c) {
        case 1: case 14: segments.push_back({left, bottom}); break;
        case 2: case 13: segments.push_back({bottom, right}); break;
        case 3: case 12: segments.push_back({left, right}); break;
        case 4: case 11: segments.push_back({right, top}); break;
        case 6: case 9: segments.push_back({bottom, top}); break;
        case 7: case 8: segments.push_back({left, top}); break;
        case 5:
          if (centre_inside) {
            segments.push_back({left, top});
            segments.push_back({bottom, right});
          } else {
            segments.push_back({left, bottom});
            segments.push_back({right, top});
          }
          break;
        case 10:
          if (centre_inside) {
            segments.push_back({left, bottom});
            segments.push_back({right, top});
          } else {
            segments.push_back({bottom, right});
            segments.push_back({left, top});
          }
          break;
        default: break;
      }
    }
  }

  // Each crossed edge is shared by at most two segments.
  std::unordered_map<std::size_t, std::vector<std::size_t>> by_edge;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_edge[segments[s][0]].push_back(s);
    by_edge[segments[s][1]].push_back(s);
  }

  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> lines;

  auto trace = [&](std::size_t start_seg, std::size_t start_edge) {
    Polyline line{crossing(start_edge)};
    std::size_t seg = start_seg, edge = start_edge;
    while (true) {
      used[seg] = true;
      const std::size_t next_edge = segments[seg][0] == edge ? segments[seg][1] : segments[seg][0];
      line.push_back(crossing(next_edge));
      edge = next_edge;
      std::size_t next_seg = segments.size();
      for (auto s : by_edge[edge]) {
        if (!used[s]) next_seg = s;
      }
      if (next_seg == segments.size()) break;
      seg = next_seg;
    }
    lines.push_back(std::move(line));
  };

  // Open chains start at an edge touched by exactly one segment (the border).
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    for (auto e : segments[s]) {
      if (!used[s] && by_edge[e].size() == 1) trace(s, e);
    }
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) trace(s, segments[s][0]);
  }
  return lines;
}

void write_field_csv(const GridField& field, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  const auto xs = field.x0();
  const auto ys = field.x1();
  const std::size_t res = field.spec.resolution;
  out << "x0,x1,score\n";
  for (std::size_t i = 0; i < res; ++i)
    for (std::size_t j = 0; j < res; ++j) out << xs[j] << ',' << ys[i] << ',' << field.at(i, j) << '\n';
}

void write_polylines_csv(const std::vector<Polyline>& lines, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(17);
  out << "line,x0,x1\n";
  for (std::size_t l = 0; l < lines.size(); ++l)
    for (const auto& p : lines[l]) out << l << ',' << p.x0 << ',' << p.x1 << '\n';
}

}  // namespace afu
