#include "primht/hough.hpp"

#include "primht/parallel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

namespace primht {

namespace {

double to_axis_coord(const RegionAxis& ax, double value) {
  if (ax.scale == AxisScale::kLinear) return value;
  return std::log(std::abs(value));
}

std::pair<double, double> axis_coord_bounds(const RegionAxis& ax) {
  double a = to_axis_coord(ax, ax.lo), b = to_axis_coord(ax, ax.hi);
  if (a > b) std::swap(a, b);
  return {a, b};
}

double from_axis_coord(const RegionAxis& ax, double t) {
  if (ax.scale == AxisScale::kLinear) return t;
  const double sign = ax.lo < 0.0 ? -1.0 : 1.0;
  return sign * std::exp(t);
}

}  // namespace

long ParameterRegion::total_cells() const {
  long total = 1;
  for (const auto& ax : axes) total *= ax.cells;
  return total;
}

int ParameterRegion::cell_of(int axis, double value) const {
  const auto& ax = axes[static_cast<std::size_t>(axis)];
  if (ax.scale == AxisScale::kLogAbs) {
    // The axis covers one sign only.
    if ((ax.lo < 0.0) != (value < 0.0) || value == 0.0) return -1;
  }
  const auto [lo, hi] = axis_coord_bounds(ax);
  const double t = to_axis_coord(ax, value);
  if (t < lo || t > hi) return -1;
  const int c = static_cast<int>((t - lo) / (hi - lo) * ax.cells);
  return std::min(c, ax.cells - 1);
}

double ParameterRegion::center_of(int axis, int c) const {
  const auto& ax = axes[static_cast<std::size_t>(axis)];
  const auto [lo, hi] = axis_coord_bounds(ax);
  return from_axis_coord(ax, lo + (c + 0.5) * (hi - lo) / ax.cells);
}

double ParameterRegion::width_of(int axis, int c) const {
  const auto& ax = axes[static_cast<std::size_t>(axis)];
  const auto [lo, hi] = axis_coord_bounds(ax);
  const double e0 = from_axis_coord(ax, lo + c * (hi - lo) / ax.cells);
  const double e1 = from_axis_coord(ax, lo + (c + 1) * (hi - lo) / ax.cells);
  return std::abs(e1 - e0);
}

long ParameterRegion::flatten(const std::vector<int>& cell) const {
  long flat = 0;
  for (std::size_t d = 0; d < axes.size(); ++d) flat = flat * axes[d].cells + cell[d];
  return flat;
}

std::vector<int> ParameterRegion::unflatten(long flat) const {
  std::vector<int> cell(axes.size());
  for (std::size_t d = axes.size(); d-- > 0;) {
    cell[d] = static_cast<int>(flat % axes[d].cells);
    flat /= axes[d].cells;
  }
  return cell;
}

Eigen::VectorXd ParameterRegion::cell_center(long flat) const {
  const auto cell = unflatten(flat);
  Eigen::VectorXd center(dim());
  for (int d = 0; d < dim(); ++d) center(d) = center_of(d, cell[static_cast<std::size_t>(d)]);
  return center;
}

ParameterRegion init_region(FamilyId family, const Aabb& bounds, const HoughConfig& config) {
  const double d = bounds.diagonal();
  if (!(d > 0.0)) throw InvalidInput("init_region: degenerate bounds");
  const auto& spec = family_spec(family);
  const int cells = spec.dim <= 2   ? config.cells_low_dim
                    : spec.dim == 3 ? config.cells_3d
                                    : config.cells_4d;
  auto radius = [&] { return RegionAxis{d / 200.0, d / 2.0, cells, AxisScale::kLinear}; };
  auto offset = [&](double half) { return RegionAxis{-half, half, cells, AxisScale::kLinear}; };

  ParameterRegion region;
  switch (family) {
    case FamilyId::kPlane:
      region.axes = {offset(d / 2.0)};
      break;
    case FamilyId::kSphere:
    case FamilyId::kCylinder:
      region.axes = {radius()};
      break;
    case FamilyId::kCone:
      region.axes = {RegionAxis{-400.0, -0.01, cells, AxisScale::kLogAbs}, offset(d)};
      break;
    case FamilyId::kTorus:
    case FamilyId::kEllipsoid:
    case FamilyId::kHelicalStrip:
      region.axes = {radius(), radius()};
      break;
    case FamilyId::kNcxCylinder:
      region.axes = {radius(), RegionAxis{-0.45, 0.45, cells, AxisScale::kLinear}};
      break;
    case FamilyId::kRevSurface:
      region.axes = {radius(), offset(d)};
      break;
    case FamilyId::kNcxCone:
      region.axes = {radius(), RegionAxis{-0.45, 0.45, cells, AxisScale::kLinear}, offset(d),
                     offset(d)};
      break;
    case FamilyId::kHelicalSurface:
      region.axes = {radius(), radius(), offset(d), offset(d)};
      break;
  }
  return region;
}

std::uint64_t Accumulator::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

Accumulator vote(const Points3& points, FamilyId family, const ParameterRegion& region,
                 const HoughConfig& config) {
  const long M = region.total_cells();
  if (M > config.max_cells)
    throw CapExceeded("vote: accumulator for " + to_string(family) + " needs " + std::to_string(M) +
                      " cells (cap " + std::to_string(config.max_cells) + ")");

  HtOptions opt = config.ht;
  for (int dimIdx : swept_dims(family)) {
    auto& sweep = opt.sweep[static_cast<std::size_t>(dimIdx)];
    if (sweep.empty()) {
      const int cells = region.axes[static_cast<std::size_t>(dimIdx)].cells;
      sweep.resize(static_cast<std::size_t>(cells));
      for (int c = 0; c < cells; ++c) sweep[static_cast<std::size_t>(c)] = region.center_of(dimIdx, c);
    }
  }

  // Keep the combined partial-buffer footprint bounded (5 bytes per cell per
  // worker: the uint32 partial plus the dedup mark).
  int workers = std::max(1, config.workers);
  while (workers > 1 && 5.0 * static_cast<double>(M) * workers > 256e6) --workers;

  std::vector<std::vector<std::uint32_t>> partials(
      static_cast<std::size_t>(workers), std::vector<std::uint32_t>(static_cast<std::size_t>(M), 0));

  const int dim = region.dim();
  parallel_chunks(points.cols(), workers, [&](Index begin, Index end, int worker) {
    auto& acc = partials[static_cast<std::size_t>(worker)];
    std::vector<std::uint8_t> seen(static_cast<std::size_t>(M), 0);
    std::vector<long> touched;
    std::vector<int> cell(static_cast<std::size_t>(dim));
    for (Index i = begin; i < end; ++i) {
      const HtSamples samples = solve_ht_sample(family, points.col(i), opt);
      for (const auto& s : samples.samples) {
        bool inside = true;
        for (int a = 0; a < dim; ++a) {
          const int c = region.cell_of(a, s(a));
          if (c < 0) {
            inside = false;
            break;
          }
          cell[static_cast<std::size_t>(a)] = c;
        }
        if (!inside) continue;
        const long flat = region.flatten(cell);
        if (!seen[static_cast<std::size_t>(flat)]) {
          seen[static_cast<std::size_t>(flat)] = 1;
          touched.push_back(flat);
          ++acc[static_cast<std::size_t>(flat)];
        }
      }
      for (long f : touched) seen[static_cast<std::size_t>(f)] = 0;
      touched.clear();
    }
  });

  Accumulator out;
  out.family = family;
  out.region = region;
  out.counts.assign(static_cast<std::size_t>(M), 0);
  for (const auto& part : partials) {
    for (long c = 0; c < M; ++c) out.counts[static_cast<std::size_t>(c)] += part[static_cast<std::size_t>(c)];
  }
  return out;
}

std::vector<Peak> find_peaks(const Accumulator& acc, double persistence_fraction) {
  const long M = acc.region.total_cells();
  std::vector<long> order;
  for (long c = 0; c < M; ++c) {
    if (acc.counts[static_cast<std::size_t>(c)] > 0) order.push_back(c);
  }
  if (order.empty()) return {};
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    const auto ca = acc.counts[static_cast<std::size_t>(a)], cb = acc.counts[static_cast<std::size_t>(b)];
    return ca > cb || (ca == cb && a < b);
  });

  // Union-find over processed cells; each component remembers its birth cell
  // (the first, i.e. highest / lexicographically smallest, cell it grew from).
  std::vector<int> comp(static_cast<std::size_t>(M), -1);  // cell -> dsu node, -1 = unprocessed
  std::vector<int> parent;
  std::vector<long> birth_cell;
  std::vector<std::uint32_t> birth_count;
  std::function<int(int)> find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  };

  struct Dead {
    long cell;
    std::uint32_t birth;
    double persistence;
  };
  std::vector<Dead> dead;

  const int dim = acc.region.dim();
  std::vector<int> cell(static_cast<std::size_t>(dim));
  for (long flat : order) {
    const std::uint32_t level = acc.counts[static_cast<std::size_t>(flat)];
    // Collect distinct neighbouring components among already-processed cells.
    std::vector<int> roots;
    {
      const auto multi = acc.region.unflatten(flat);
      long stride = 1;
      for (int d = dim - 1; d >= 0; --d) {
        const int cells_d = acc.region.axes[static_cast<std::size_t>(d)].cells;
        for (int delta : {-1, 1}) {
          const int nd = multi[static_cast<std::size_t>(d)] + delta;
          if (nd < 0 || nd >= cells_d) continue;
          const long nflat = flat + delta * stride;
          const int node = comp[static_cast<std::size_t>(nflat)];
          if (node < 0) continue;
          const int root = find(node);
          if (std::find(roots.begin(), roots.end(), root) == roots.end()) roots.push_back(root);
        }
        stride *= cells_d;
      }
    }

    if (roots.empty()) {
      // New component born at this cell.
      const int node = static_cast<int>(parent.size());
      parent.push_back(node);
      birth_cell.push_back(flat);
      birth_count.push_back(level);
      comp[static_cast<std::size_t>(flat)] = node;
      continue;
    }

    // Elder rule: the component with the higher (or lexicographically earlier)
    // birth survives; the others die here.
    int elder = roots[0];
    for (std::size_t i = 1; i < roots.size(); ++i) {
      const int r = roots[i];
      const bool older = birth_count[static_cast<std::size_t>(r)] > birth_count[static_cast<std::size_t>(elder)] ||
                         (birth_count[static_cast<std::size_t>(r)] == birth_count[static_cast<std::size_t>(elder)] &&
                          birth_cell[static_cast<std::size_t>(r)] < birth_cell[static_cast<std::size_t>(elder)]);
      if (older) elder = r;
    }
    for (int r : roots) {
      if (r == elder) continue;
      dead.push_back({birth_cell[static_cast<std::size_t>(r)], birth_count[static_cast<std::size_t>(r)],
                      static_cast<double>(birth_count[static_cast<std::size_t>(r)]) - level});
      parent[static_cast<std::size_t>(r)] = elder;
    }
    comp[static_cast<std::size_t>(flat)] = elder;
  }

  // Components that never merged die at level zero.
  for (std::size_t i = 0; i < parent.size(); ++i) {
    if (parent[i] == static_cast<int>(i))
      dead.push_back({birth_cell[i], birth_count[i], static_cast<double>(birth_count[i])});
  }

  const double max_count = static_cast<double>(acc.counts[static_cast<std::size_t>(order.front())]);
  std::vector<Peak> peaks;
  for (const auto& d : dead) {
    if (d.persistence > persistence_fraction * max_count) {
      Peak p;
      p.flat = d.cell;
      p.center = acc.region.cell_center(d.cell);
      p.height = d.birth;
      p.persistence = d.persistence;
      peaks.push_back(std::move(p));
    }
  }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return a.height > b.height || (a.height == b.height && a.flat < b.flat);
  });
  return peaks;
}

std::optional<PrimitiveInstance> peak_to_instance(const Peak& peak, FamilyId family) {
  if (!admissible(family, peak.center)) return std::nullopt;
  PrimitiveInstance inst;
  inst.family = family;
  inst.params = peak.center;
  return inst;
}

void dump_accumulator(const Accumulator& acc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  out << "{\"dims\":" << acc.region.dim() << ",\"los\":[";
  for (int d = 0; d < acc.region.dim(); ++d) {
    out << (d ? "," : "") << acc.region.axes[static_cast<std::size_t>(d)].lo;
  }
  out << "],\"his\":[";
  for (int d = 0; d < acc.region.dim(); ++d) {
    out << (d ? "," : "") << acc.region.axes[static_cast<std::size_t>(d)].hi;
  }
  out << "],\"cells\":[";
  for (int d = 0; d < acc.region.dim(); ++d) {
    out << (d ? "," : "") << acc.region.axes[static_cast<std::size_t>(d)].cells;
  }
  out << "],\"scales\":[";
  for (int d = 0; d < acc.region.dim(); ++d) {
    out << (d ? "," : "")
        << (acc.region.axes[static_cast<std::size_t>(d)].scale == AxisScale::kLinear ? "\"linear\""
                                                                                     : "\"log\"");
  }
  out << "]}\n";
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(acc.counts.data()),
            static_cast<std::streamsize>(acc.counts.size() * sizeof(std::uint32_t)));
}

}  // namespace primht
