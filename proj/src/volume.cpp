#include "ctomics/volume.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include <json.hpp>

#include "ctomics/fio.hpp"
#include "ctomics/parallel.hpp"

namespace ctomics {

using nlohmann::json;

bool geometry_equal(const Geometry& a, const Geometry& b) {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    if (format_double(a.spacing[i]) != format_double(b.spacing[i])) return false;
    if (format_double(a.origin[i]) != format_double(b.origin[i])) return false;
  }
  return true;
}

void require_same_geometry(const Geometry& a, const Geometry& b, const char* what) {
  if (!geometry_equal(a, b))
    fail(ErrorCode::geometry_mismatch, std::string("geometry differs: ") + what);
}

void require_binary_mask(const MaskVolume& m, const char* what) {
  for (uint8_t v : m.labels)
    if (v > 1) fail(ErrorCode::bad_mask_labels, std::string(what) + ": label > 1");
}

void require_territory_mask(const MaskVolume& m) {
  for (uint8_t v : m.labels)
    if (v > 4) fail(ErrorCode::bad_mask_labels, "territory mask: label > 4");
}

// ---- file pair IO ----------------------------------------------------------

namespace {

std::string strip_json_suffix(const std::string& path) {
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0)
    return path.substr(0, path.size() - 5);
  return path;
}

Geometry parse_header(const std::string& base, const std::string& want_dtype) {
  const std::string jpath = base + ".json";
  if (!std::filesystem::exists(jpath))
    fail(ErrorCode::header_missing, jpath);
  json j;
  try {
    j = json::parse(read_file(jpath));
  } catch (const json::exception&) {
    fail(ErrorCode::header_invalid, "not valid json: " + jpath);
  }
  const char* keys[] = {"dims", "spacing_mm", "origin_mm", "dtype", "order"};
  if (!j.is_object() || j.size() != 5)
    fail(ErrorCode::header_invalid, "expected exactly 5 header keys: " + jpath);
  for (const char* k : keys)
    if (!j.contains(k)) fail(ErrorCode::header_invalid, std::string("missing key ") + k);

  if (!j["dtype"].is_string() || !j["order"].is_string())
    fail(ErrorCode::header_invalid, "dtype/order must be strings");
  const std::string dtype = j["dtype"].get<std::string>();
  if (dtype != "int16-le" && dtype != "uint8")
    fail(ErrorCode::unsupported_dtype, "dtype '" + dtype + "' in " + jpath);
  if (dtype != want_dtype)
    fail(ErrorCode::unsupported_dtype, "expected " + want_dtype + ", got " + dtype);
  if (j["order"].get<std::string>() != "x-fastest")
    fail(ErrorCode::header_invalid, "unsupported order");

  Geometry g;
  auto arr3 = [&](const char* k, auto check, auto assign) {
    const json& a = j[k];
    if (!a.is_array() || a.size() != 3)
      fail(ErrorCode::header_invalid, std::string(k) + " must be a 3-array");
    for (int i = 0; i < 3; ++i) {
      if (!check(a[i])) fail(ErrorCode::header_invalid, std::string("bad ") + k);
      assign(i, a[i]);
    }
  };
  arr3(
      "dims", [](const json& v) { return v.is_number_integer() && v.get<int64_t>() >= 1 && v.get<int64_t>() <= (1 << 20); },
      [&](int i, const json& v) { g.dims[i] = v.get<int>(); });
  arr3(
      "spacing_mm", [](const json& v) { return v.is_number() && v.get<double>() > 0 && std::isfinite(v.get<double>()); },
      [&](int i, const json& v) { g.spacing[i] = v.get<double>(); });
  arr3(
      "origin_mm", [](const json& v) { return v.is_number() && std::isfinite(v.get<double>()); },
      [&](int i, const json& v) { g.origin[i] = v.get<double>(); });
  if (g.voxel_count() > size_t(1) << 31)
    fail(ErrorCode::header_invalid, "volume too large");
  return g;
}

std::string header_text(const Geometry& g, const std::string& dtype) {
  json j;
  j["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
  j["spacing_mm"] = {g.spacing[0], g.spacing[1], g.spacing[2]};
  j["origin_mm"] = {g.origin[0], g.origin[1], g.origin[2]};
  j["dtype"] = dtype;
  j["order"] = "x-fastest";
  return j.dump();
}

}  // namespace

Volume load_volume(const std::string& path) {
  const std::string base = strip_json_suffix(path);
  Volume v;
  v.geom = parse_header(base, "int16-le");
  const std::string raw = read_file(base + ".raw");
  const size_t n = v.geom.voxel_count();
  if (raw.size() != n * 2)
    fail(ErrorCode::payload_size_mismatch,
         base + ".raw: got " + std::to_string(raw.size()) + " bytes, want " +
             std::to_string(n * 2));
  v.hu.resize(n);
  const auto* b = reinterpret_cast<const uint8_t*>(raw.data());
  for (size_t i = 0; i < n; ++i) {
    auto u = static_cast<uint16_t>(b[2 * i] | (uint16_t(b[2 * i + 1]) << 8));
    auto h = static_cast<int16_t>(u);
    v.hu[i] = std::clamp(h, kHuMin, kHuMax);
  }
  return v;
}

void save_volume(const Volume& v, const std::string& path) {
  const std::string base = strip_json_suffix(path);
  const size_t n = v.geom.voxel_count();
  if (v.hu.size() != n) fail(ErrorCode::payload_size_mismatch, "hu size vs dims");
  std::string raw(n * 2, '\0');
  for (size_t i = 0; i < n; ++i) {
    auto u = static_cast<uint16_t>(v.hu[i]);
    raw[2 * i] = char(u & 0xff);
    raw[2 * i + 1] = char(u >> 8);
  }
  write_file_atomic(base + ".raw", raw);
  write_file_atomic(base + ".json", header_text(v.geom, "int16-le"));
}

MaskVolume load_mask(const std::string& path) {
  const std::string base = strip_json_suffix(path);
  MaskVolume m;
  m.geom = parse_header(base, "uint8");
  const std::string raw = read_file(base + ".raw");
  const size_t n = m.geom.voxel_count();
  if (raw.size() != n)
    fail(ErrorCode::payload_size_mismatch,
         base + ".raw: got " + std::to_string(raw.size()) + " bytes, want " +
             std::to_string(n));
  m.labels.assign(raw.begin(), raw.end());
  return m;
}

void save_mask(const MaskVolume& m, const std::string& path) {
  const std::string base = strip_json_suffix(path);
  if (m.labels.size() != m.geom.voxel_count())
    fail(ErrorCode::payload_size_mismatch, "labels size vs dims");
  write_file_atomic(base + ".raw",
                    std::string(m.labels.begin(), m.labels.end()));
  write_file_atomic(base + ".json", header_text(m.geom, "uint8"));
}

// ---- connected components --------------------------------------------------

ComponentSet connected_components(const MaskVolume& mask, int connectivity) {
  if (connectivity != 6 && connectivity != 18 && connectivity != 26)
    fail(ErrorCode::bad_argument, "connectivity must be 6, 18 or 26");

  std::array<std::array<int, 3>, 26> nbr{};
  int nn = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (m == 0) continue;
        if (connectivity == 6 && m > 1) continue;
        if (connectivity == 18 && m > 2) continue;
        nbr[nn++] = {dx, dy, dz};
      }

  const Geometry& g = mask.geom;
  ComponentSet out;
  out.label_map.assign(g.voxel_count(), 0);
  std::vector<size_t> stack;

  for (size_t seed = 0; seed < mask.labels.size(); ++seed) {
    if (!mask.labels[seed] || out.label_map[seed]) continue;
    const int id = int(out.components.size()) + 1;
    Component comp;
    comp.id = id;
    out.label_map[seed] = id;
    stack.assign(1, seed);
    while (!stack.empty()) {
      size_t cur = stack.back();
      stack.pop_back();
      comp.voxels.push_back(cur);
      auto [x, y, z] = g.coords(cur);
      for (int i = 0; i < nn; ++i) {
        int qx = x + nbr[i][0], qy = y + nbr[i][1], qz = z + nbr[i][2];
        if (qx < 0 || qy < 0 || qz < 0 || qx >= g.dims[0] || qy >= g.dims[1] ||
            qz >= g.dims[2])
          continue;
        size_t q = g.index(qx, qy, qz);
        if (mask.labels[q] && !out.label_map[q]) {
          out.label_map[q] = id;
          stack.push_back(q);
        }
      }
    }
    std::sort(comp.voxels.begin(), comp.voxels.end());
    out.components.push_back(std::move(comp));
  }
  return out;
}

// ---- distance transforms ---------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (x - i*s)^2 + f[i]; sources with f == inf are
// skipped. Exact squared distances, no approximation.
void dt1d(const double* f, double* d, int n, double s, int* v, double* z) {
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double xq = q * s;
    double cross = -kInf;
    while (k >= 0) {
      const double xp = v[k] * s;
      cross = (f[q] + xq * xq - (f[v[k]] + xp * xp)) / (2.0 * (xq - xp));
      if (cross <= z[k])
        --k;
      else
        break;
    }
    ++k;
    v[k] = q;
    z[k] = (k == 0) ? -kInf : cross;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d, d + n, kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    double xq = q * s;
    while (z[j + 1] < xq) ++j;
    double dx = xq - double(v[j]) * s;
    d[q] = dx * dx + f[v[j]];
  }
}

}  // namespace

std::vector<double> distance_transform_2d(const uint8_t* inside, int nx, int ny,
                                          double sx, double sy) {
  const size_t n = size_t(nx) * size_t(ny);
  std::vector<double> sq(n, kInf);

  // pass 1: squared distance to nearest outside voxel within each x-row
  for (int y = 0; y < ny; ++y) {
    const uint8_t* row = inside + size_t(y) * nx;
    double* out = sq.data() + size_t(y) * nx;
    int last = -1;
    for (int x = 0; x < nx; ++x) {
      if (!row[x]) {
        out[x] = 0.0;
        last = x;
      } else if (last >= 0) {
        double dx = (x - last) * sx;
        out[x] = dx * dx;
      }
    }
    last = -1;
    for (int x = nx - 1; x >= 0; --x) {
      if (!row[x]) {
        last = x;
      } else if (last >= 0) {
        double dx = (last - x) * sx;
        out[x] = std::min(out[x], dx * dx);
      }
    }
  }

  // pass 2: parabola envelope along y
  std::vector<double> f(ny), d(ny), z(size_t(ny) + 1);
  std::vector<int> v(ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) f[y] = sq[size_t(y) * nx + x];
    dt1d(f.data(), d.data(), ny, sy, v.data(), z.data());
    for (int y = 0; y < ny; ++y) sq[size_t(y) * nx + x] = d[y];
  }

  // beyond-grid ring counts as outside
  std::vector<double> dist(n, 0.0);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      size_t i = size_t(y) * nx + x;
      if (!inside[i]) continue;
      double bx = std::min((x + 1) * sx, (nx - x) * sx);
      double by = std::min((y + 1) * sy, (ny - y) * sy);
      double b = std::min(bx, by);
      dist[i] = std::sqrt(std::min(sq[i], b * b));
    }
  return dist;
}

std::vector<double> distance_transform_slices_serial(const MaskVolume& mask) {
  const Geometry& g = mask.geom;
  std::vector<double> out(g.voxel_count(), 0.0);
  const size_t slice = size_t(g.dims[0]) * size_t(g.dims[1]);
  for (int z = 0; z < g.dims[2]; ++z) {
    auto d = distance_transform_2d(mask.labels.data() + slice * z, g.dims[0],
                                   g.dims[1], g.spacing[0], g.spacing[1]);
    std::copy(d.begin(), d.end(), out.begin() + slice * z);
  }
  return out;
}

std::vector<double> distance_transform_slices(const MaskVolume& mask, int threads) {
  const Geometry& g = mask.geom;
  std::vector<double> out(g.voxel_count(), 0.0);
  const size_t slice = size_t(g.dims[0]) * size_t(g.dims[1]);
  const int nt = clamp_threads(threads);
  const int nz = g.dims[2];
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int z = 0; z < nz; ++z) {
    auto d = distance_transform_2d(mask.labels.data() + slice * z, g.dims[0],
                                   g.dims[1], g.spacing[0], g.spacing[1]);
    std::copy(d.begin(), d.end(), out.begin() + slice * z);
  }
  return out;
}

namespace {

std::vector<double> dt3d_impl(const MaskVolume& mask, int threads, bool parallel) {
  const Geometry& g = mask.geom;
  const int nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];
  const double sx = g.spacing[0], sy = g.spacing[1], sz = g.spacing[2];
  const size_t n = g.voxel_count();
  std::vector<double> sq(n, kInf);
  const int nt = parallel ? clamp_threads(threads) : 1;

  // pass 1 along x, per (y,z) line
  const int nyz = ny * nz;
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int yz = 0; yz < nyz; ++yz) {
    int y = yz % ny, z = yz / ny;
    const size_t base = g.index(0, y, z);
    const uint8_t* row = mask.labels.data() + base;
    double* out = sq.data() + base;
    int last = -1;
    for (int x = 0; x < nx; ++x) {
      if (!row[x]) {
        out[x] = 0.0;
        last = x;
      } else if (last >= 0) {
        double dx = (x - last) * sx;
        out[x] = dx * dx;
      }
    }
    last = -1;
    for (int x = nx - 1; x >= 0; --x) {
      if (!row[x]) {
        last = x;
      } else if (last >= 0) {
        double dx = (last - x) * sx;
        out[x] = std::min(out[x], dx * dx);
      }
    }
  }

  // pass 2 along y, per (x,z) line
  const int nxz = nx * nz;
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int xz = 0; xz < nxz; ++xz) {
    int x = xz % nx, z = xz / nx;
    std::vector<double> f(ny), d(ny), zz(size_t(ny) + 1);
    std::vector<int> v(ny);
    for (int y = 0; y < ny; ++y) f[y] = sq[g.index(x, y, z)];
    dt1d(f.data(), d.data(), ny, sy, v.data(), zz.data());
    for (int y = 0; y < ny; ++y) sq[g.index(x, y, z)] = d[y];
  }

  // pass 3 along z, per (x,y) line
  const int nxy = nx * ny;
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int xy = 0; xy < nxy; ++xy) {
    int x = xy % nx, y = xy / nx;
    std::vector<double> f(nz), d(nz), zz(size_t(nz) + 1);
    std::vector<int> v(nz);
    for (int z = 0; z < nz; ++z) f[z] = sq[g.index(x, y, z)];
    dt1d(f.data(), d.data(), nz, sz, v.data(), zz.data());
    for (int z = 0; z < nz; ++z) sq[g.index(x, y, z)] = d[z];
  }

  std::vector<double> dist(n, 0.0);
#pragma omp parallel for num_threads(nt) schedule(static)
  for (int z = 0; z < nz; ++z)
    for (int y = 0; y < ny; ++y)
      for (int x = 0; x < nx; ++x) {
        size_t i = g.index(x, y, z);
        if (!mask.labels[i]) continue;
        double bx = std::min((x + 1) * sx, (nx - x) * sx);
        double by = std::min((y + 1) * sy, (ny - y) * sy);
        double bz = std::min((z + 1) * sz, (nz - z) * sz);
        double b = std::min(bx, std::min(by, bz));
        dist[i] = std::sqrt(std::min(sq[i], b * b));
      }
  return dist;
}

}  // namespace

std::vector<double> distance_transform_3d(const MaskVolume& mask, int threads) {
  return dt3d_impl(mask, threads, true);
}

std::vector<double> distance_transform_3d_serial(const MaskVolume& mask) {
  return dt3d_impl(mask, 0, false);
}

}  // namespace ctomics
