#include "ptycho/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ptycho/image_io.hpp"
#include "ptycho/rng.hpp"

namespace ptycho {

double wavelength_from_kev(double energy_kev) {
  if (!(energy_kev > 0.0)) throw std::invalid_argument("energy must be > 0");
  const double h = 6.62607015e-34, c = 2.99792458e8, e = 1.602176634e-19;
  return h * c / (energy_kev * 1e3 * e);
}

const std::string& Recipe::get(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end()) throw std::invalid_argument("recipe: missing key '" + key + "'");
  return it->second;
}

double Recipe::get_double(const std::string& key) const {
  try {
    return std::stod(get(key));
  } catch (const std::invalid_argument&) {
    throw;
  } catch (...) {
    throw std::invalid_argument("recipe: key '" + key + "' is not a number");
  }
}

double Recipe::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

std::int64_t Recipe::get_int(const std::string& key) const {
  try {
    return std::stoll(get(key));
  } catch (const std::invalid_argument&) {
    throw;
  } catch (...) {
    throw std::invalid_argument("recipe: key '" + key + "' is not an integer");
  }
}

std::int64_t Recipe::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t Recipe::get_seed(const std::string& key) const {
  // seeds are mandatory: datasets must be reproducible without entropy defaults
  return static_cast<std::uint64_t>(get_int(key));
}

void Recipe::set(const std::string& key, double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  kv[key] = os.str();
}

void Recipe::set(const std::string& key, std::int64_t v) { kv[key] = std::to_string(v); }

Recipe parse_recipe_text(const std::string& text) {
  Recipe r;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("recipe: line " + std::to_string(lineno) +
                                  " is not 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("recipe: empty key on line " + std::to_string(lineno));
    r.kv[key] = val;
  }
  return r;
}

Recipe load_recipe(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("recipe: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_recipe_text(buf.str());
}

Recipe preset_recipe(const std::string& name) {
  Recipe r;
  r.set("seed_probe", std::int64_t(1));
  r.set("seed_noise", std::int64_t(2));
  r.set("seed_object", std::int64_t(3));
  r.set("noiseless", std::int64_t(0));
  r.set("nu", 0.0);
  r.set("energy_kev", 8.7);
  if (name == "farfield") {
    r.set("model", "farfield");
    r.set("photons", 1e6);
    r.set("box", std::int64_t(190));
    r.set("object", std::int64_t(128));
    r.set("probe", std::int64_t(64));
    r.set("step_px", std::int64_t(6));
    r.set("pixel_pitch", 7e-6 / 12.0);
    r.set("detector_distance", 14.6);
    r.set("detector_pitch", 55e-6);
    r.set("aperture_width", 7e-6);
    r.set("aperture_distance", 0.15);
    r.set("mag_source", "blobs");
    r.set("phase_source", "checkerblobs");
  } else if (name == "nearfield" || name == "nearfield-desk") {
    bool desk = name != "nearfield";
    r.set("model", "nearfield");
    r.set("grid", std::int64_t(desk ? 256 : 512));
    r.set("object", std::int64_t(desk ? 96 : 192));
    r.set("step_px", std::int64_t(desk ? 22 : 44));
    r.set("grid_counts", std::int64_t(5));
    r.set("z", 0.047);
    r.set("pixel_pitch", 0.6e-6);
    r.set("probe_fwhm", 19e-6);
    r.set("flux", 1e4);
    r.set("mag_source", "blobs");
    r.set("phase_source", "checkerblobs");
  } else if (name == "bragg" || name == "bragg-desk") {
    bool desk = name != "bragg";
    r.set("model", "bragg");
    r.set("photons", 1e6);
    r.set("two_theta_deg", 60.0);
    r.set("voxel_pitch", 66e-9);
    r.set("box_x", std::int64_t(desk ? 32 : 64));
    r.set("box_y", std::int64_t(desk ? 80 : 162));
    r.set("box_z", std::int64_t(desk ? 56 : 112));
    r.set("cuboid_x", std::int64_t(desk ? 14 : 26));
    r.set("cuboid_y", std::int64_t(desk ? 40 : 56));
    r.set("cuboid_z", std::int64_t(desk ? 28 : 50));
    r.set("probe_y", std::int64_t(desk ? 48 : 96));
    r.set("probe_z", std::int64_t(desk ? 32 : 64));
    r.set("probe_u", std::int64_t(64));
    r.set("probe_fwhm", 396e-9);
    r.set("angle_half_deg", desk ? 0.06 : 0.14);
    r.set("angle_step_deg", 0.02);
    r.set("raster_ny", std::int64_t(desk ? 15 : 41));
    r.set("raster_nz", std::int64_t(desk ? 10 : 24));
    r.set("step_y", std::int64_t(2));
    r.set("step_z", std::int64_t(2));
    r.set("support_margin_x", 0.15);
    r.set("support_pad_yz", std::int64_t(6));
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (farfield | nearfield | nearfield-desk | bragg | bragg-desk)");
  }
  return r;
}

namespace {

std::vector<double> procedural_source(const std::string& name, const Shape& shape,
                                      std::uint64_t seed) {
  const std::size_t R = shape[0], C = shape[1];
  std::vector<double> img(R * C, 0.0);
  CounterRng rng = CounterRng::from(seed, 0x9e0);
  if (name == "constant") {
    std::fill(img.begin(), img.end(), 1.0);
    return img;
  }
  if (name == "ramp") {
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) img[i * C + j] = double(j) / double(C - 1);
    return img;
  }
  bool checker = name == "checker" || name == "checkerblobs";
  bool blobs = name == "blobs" || name == "checkerblobs";
  if (!checker && !blobs)
    throw std::invalid_argument("unknown procedural phantom '" + name + "'");
  if (checker) {
    std::size_t cell = std::max<std::size_t>(4, R / 16);
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j)
        img[i * C + j] += ((i / cell + j / cell) % 2) ? 0.6 : 0.2;
  }
  if (blobs) {
    const int nblobs = 14;
    for (int b = 0; b < nblobs; ++b) {
      double ci = rng.uniform() * double(R);
      double cj = rng.uniform() * double(C);
      double sg = (0.04 + 0.10 * rng.uniform()) * double(std::min(R, C));
      double amp = (rng.uniform() < 0.35 ? -1.0 : 1.0) * (0.4 + 0.6 * rng.uniform());
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
          double d2 = (double(i) - ci) * (double(i) - ci) + (double(j) - cj) * (double(j) - cj);
          img[i * C + j] += amp * std::exp(-0.5 * d2 / (sg * sg));
        }
    }
  }
  double lo = img[0], hi = img[0];
  for (double v : img) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double span = hi > lo ? hi - lo : 1.0;
  for (double& v : img) v = (v - lo) / span;
  return img;
}

std::vector<double> bilinear_resample(const std::vector<double>& src, std::size_t sr,
                                      std::size_t sc, std::size_t dr, std::size_t dc) {
  std::vector<double> dst(dr * dc);
  for (std::size_t i = 0; i < dr; ++i)
    for (std::size_t j = 0; j < dc; ++j) {
      double fi = (dr == 1) ? 0.0 : double(i) * double(sr - 1) / double(dr - 1);
      double fj = (dc == 1) ? 0.0 : double(j) * double(sc - 1) / double(dc - 1);
      std::size_t i0 = std::min<std::size_t>(std::size_t(fi), sr - 1);
      std::size_t j0 = std::min<std::size_t>(std::size_t(fj), sc - 1);
      std::size_t i1 = std::min(i0 + 1, sr - 1);
      std::size_t j1 = std::min(j0 + 1, sc - 1);
      double ti = fi - double(i0), tj = fj - double(j0);
      dst[i * dc + j] = (1 - ti) * ((1 - tj) * src[i0 * sc + j0] + tj * src[i0 * sc + j1]) +
                        ti * ((1 - tj) * src[i1 * sc + j0] + tj * src[i1 * sc + j1]);
    }
  return dst;
}

std::vector<double> load_source(const std::string& source, const Shape& shape,
                                std::uint64_t seed) {
  if (source.find('.') != std::string::npos || source.find('/') != std::string::npos) {
    GrayImage img = read_pgm(source);
    if (img.rows == shape[0] && img.cols == shape[1]) return img.data;
    return bilinear_resample(img.data, img.rows, img.cols, shape[0], shape[1]);
  }
  return procedural_source(source, shape, seed);
}

} // namespace

ComplexField phantom_2d(const Shape& object_shape, const std::string& mag_source,
                        const std::string& phase_source, const Shape& box_shape,
                        double phase_min, double phase_max, std::uint64_t seed) {
  if (object_shape.size() != 2 || box_shape.size() != 2)
    throw std::invalid_argument("phantom_2d: shapes must be 2D");
  for (std::size_t a = 0; a < 2; ++a)
    if (object_shape[a] > box_shape[a])
      throw std::invalid_argument("phantom_2d: object larger than the simulation box");
  std::vector<double> mag = load_source(mag_source, object_shape, CounterRng::mix(seed));
  std::vector<double> ph = load_source(phase_source, object_shape, CounterRng::mix(seed ^ 0xabcdef));
  ComplexField inner(object_shape);
  for (std::size_t i = 0; i < inner.data.size(); ++i)
    inner.data[i] = std::polar(mag[i], phase_min + ph[i] * (phase_max - phase_min));
  PatchWindow w;
  w.offset = {std::int64_t((box_shape[0] - object_shape[0]) / 2),
              std::int64_t((box_shape[1] - object_shape[1]) / 2)};
  w.extent = {std::int64_t(object_shape[0]), std::int64_t(object_shape[1])};
  return embed_patch(inner, w, box_shape);
}

ComplexField probe_square_aperture(double width_m, double zeta_m, double lambda, double pitch,
                                   const Shape& shape, double photons) {
  if (shape.size() != 2) throw std::invalid_argument("probe_square_aperture: 2D shape");
  if (!(width_m > 0.0) || width_m > double(std::min(shape[0], shape[1])) * pitch)
    throw std::invalid_argument("probe_square_aperture: width must fit in the field");
  ComplexField p(shape);
  p.pitch = {pitch, pitch};
  double c0 = 0.5 * double(shape[0] - 1), c1 = 0.5 * double(shape[1] - 1);
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j) {
      bool inside = std::abs((double(i) - c0) * pitch) < 0.5 * width_m &&
                    std::abs((double(j) - c1) * pitch) < 0.5 * width_m;
      p.at(i, j) = inside ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
    }
  if (zeta_m != 0.0) p = fresnel_propagate(p, zeta_m, lambda);
  double n2 = norm2(p);
  double s = std::sqrt(photons / n2);
  for (cplx& v : p.data) v *= s;
  return p;
}

ComplexField probe_gaussian_speckle(double fwhm_m, double pitch, const Shape& shape,
                                    FluxMode mode, double flux, std::uint64_t seed) {
  if (!(fwhm_m > 0.0)) throw std::invalid_argument("probe_gaussian_speckle: fwhm must be > 0");
  ComplexField p(shape);
  p.pitch = {pitch, pitch};
  double c0 = 0.5 * double(shape[0] - 1), c1 = 0.5 * double(shape[1] - 1);
  double k = 4.0 * std::log(2.0) / (fwhm_m * fwhm_m); // intensity FWHM
  for (std::size_t i = 0; i < shape[0]; ++i)
    for (std::size_t j = 0; j < shape[1]; ++j) {
      double dx = (double(i) - c0) * pitch, dy = (double(j) - c1) * pitch;
      double inten = std::exp(-k * (dx * dx + dy * dy));
      CounterRng rng = CounterRng::from(seed, 0xd1f, i * shape[1] + j);
      double phase = 2.0 * std::numbers::pi * rng.uniform();
      p.at(i, j) = std::polar(std::sqrt(inten), phase);
    }
  // one short free-space step correlates the per-pixel diffuser phases
  double lambda_ref = wavelength_from_kev(8.7);
  double z_spk = pitch * pitch / lambda_ref;
  p = fresnel_propagate(p, z_spk, lambda_ref);

  if (mode == FluxMode::TotalPhotons) {
    double s = std::sqrt(flux / norm2(p));
    for (cplx& v : p.data) v *= s;
  } else {
    // mean |P|^2 over the envelope support (inside the intensity FWHM)
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < shape[0]; ++i)
      for (std::size_t j = 0; j < shape[1]; ++j) {
        double dx = (double(i) - c0) * pitch, dy = (double(j) - c1) * pitch;
        if (std::exp(-k * (dx * dx + dy * dy)) >= 0.5) {
          acc += std::norm(p.at(i, j));
          ++count;
        }
      }
    if (count == 0) throw std::invalid_argument("probe_gaussian_speckle: fwhm below one pixel");
    double s = std::sqrt(flux / (acc / double(count)));
    for (cplx& v : p.data) v *= s;
  }
  return p;
}

double intensity_fwhm_px(const ComplexField& probe) {
  const std::size_t R = probe.shape[0], C = probe.shape[1];
  double c0 = 0.5 * double(R - 1), c1 = 0.5 * double(C - 1);
  std::size_t nbins = std::min(R, C) / 2;
  std::vector<double> sum(nbins, 0.0);
  std::vector<std::size_t> cnt(nbins, 0);
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) {
      double r = std::hypot(double(i) - c0, double(j) - c1);
      std::size_t bin = std::size_t(r);
      if (bin < nbins) {
        sum[bin] += std::norm(probe.at(i, j));
        cnt[bin]++;
      }
    }
  for (std::size_t b = 0; b < nbins; ++b)
    if (cnt[b]) sum[b] /= double(cnt[b]);
  double peak = sum[0];
  for (std::size_t b = 0; b + 1 < nbins; ++b) {
    if (sum[b] >= 0.5 * peak && sum[b + 1] < 0.5 * peak) {
      double t = (0.5 * peak - sum[b]) / (sum[b + 1] - sum[b]);
      return 2.0 * (double(b) + t);
    }
  }
  return 2.0 * double(nbins);
}

ScanPlan raster_plan(std::int64_t step_px, std::size_t count0, std::size_t count1,
                     const Shape& host_shape, const Shape& patch_shape) {
  if (step_px <= 0) throw std::invalid_argument("raster_plan: step must be positive");
  if (count0 == 0 || count1 == 0) throw std::invalid_argument("raster_plan: empty grid");
  ScanPlan plan;
  std::array<std::int64_t, 2> span{std::int64_t(patch_shape[0]) + step_px * std::int64_t(count0 - 1),
                                   std::int64_t(patch_shape[1]) + step_px * std::int64_t(count1 - 1)};
  std::array<std::int64_t, 2> margin;
  for (std::size_t a = 0; a < 2; ++a) {
    std::int64_t m = std::int64_t(host_shape[a]) - span[a];
    if (m < 0)
      throw std::invalid_argument("raster_plan: grid exceeds the host on axis " +
                                  std::to_string(a));
    margin[a] = m / 2;
  }
  for (std::size_t i = 0; i < count0; ++i)
    for (std::size_t j = 0; j < count1; ++j) {
      PatchWindow w;
      w.offset = {margin[0] + step_px * std::int64_t(i), margin[1] + step_px * std::int64_t(j)};
      w.extent = {std::int64_t(patch_shape[0]), std::int64_t(patch_shape[1])};
      plan.windows.push_back(std::move(w));
    }
  double ov0 = 1.0 - double(step_px) / double(patch_shape[0]);
  double ov1 = 1.0 - double(step_px) / double(patch_shape[1]);
  plan.overlap_fraction = 0.5 * (std::max(0.0, ov0) + std::max(0.0, ov1));
  return plan;
}

std::vector<double> angle_plan(double half_range_rad, double step_rad) {
  if (!(step_rad > 0.0)) throw std::invalid_argument("angle_plan: step must be > 0");
  if (half_range_rad < 0.0) throw std::invalid_argument("angle_plan: negative half range");
  std::size_t half_count = std::size_t(std::floor(half_range_rad / step_rad + 0.5));
  std::size_t n = 2 * half_count + 1;
  std::vector<double> angles(n);
  for (std::size_t i = 0; i < n; ++i)
    angles[i] = (double(i) - double(half_count)) * step_rad;
  return angles;
}

ComplexField crystal_phantom(const Shape& box_shape, const Shape& cuboid_shape,
                             std::uint64_t seed) {
  if (box_shape.size() != 3 || cuboid_shape.size() != 3)
    throw std::invalid_argument("crystal_phantom: shapes must be 3D");
  for (std::size_t a = 0; a < 3; ++a)
    if (cuboid_shape[a] > box_shape[a])
      throw std::invalid_argument("crystal_phantom: cuboid larger than the box");

  std::array<double, 3> half{0.5 * double(cuboid_shape[0] - 1), 0.5 * double(cuboid_shape[1] - 1),
                             0.5 * double(cuboid_shape[2] - 1)};
  const std::size_t cub_n = shape_numel(cuboid_shape);
  std::vector<char> inside(cub_n);

  double occupancy = 0.0;
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    CounterRng rng = CounterRng::from(seed, 0xc135ull, attempt);
    std::size_t nfaces = 6 + std::size_t(rng.uniform() * 5.0);
    std::vector<std::array<double, 4>> planes(nfaces); // n.x, n.y, n.z, d
    for (auto& pl : planes) {
      double nx = rng.gaussian(), ny = rng.gaussian(), nz = rng.gaussian();
      double nn = std::sqrt(nx * nx + ny * ny + nz * nz);
      nx /= nn; ny /= nn; nz /= nn;
      double reach = std::abs(nx) * half[0] + std::abs(ny) * half[1] + std::abs(nz) * half[2];
      pl = {nx, ny, nz, (0.35 + 0.4 * rng.uniform()) * reach};
    }
    std::size_t count = 0;
    for (std::size_t x = 0; x < cuboid_shape[0]; ++x)
      for (std::size_t y = 0; y < cuboid_shape[1]; ++y)
        for (std::size_t z = 0; z < cuboid_shape[2]; ++z) {
          double dx = double(x) - half[0], dy = double(y) - half[1], dz = double(z) - half[2];
          bool in = true;
          for (const auto& pl : planes)
            if (pl[0] * dx + pl[1] * dy + pl[2] * dz > pl[3]) {
              in = false;
              break;
            }
          inside[(x * cuboid_shape[1] + y) * cuboid_shape[2] + z] = in;
          count += in;
        }
    occupancy = double(count) / double(cub_n);
    if (occupancy >= 0.2 && occupancy <= 0.45) break;
  }
  if (occupancy < 0.2 || occupancy > 0.45)
    throw NumericError("crystal_phantom: no acceptable polyhedron after 64 sub-seeds");

  // smooth low-order polynomial phase inside, peak 1 rad
  CounterRng prng = CounterRng::from(seed, 0xf5e);
  std::array<double, 9> coef;
  for (double& c : coef) c = 2.0 * prng.uniform() - 1.0;
  auto poly = [&](double u, double v, double w) {
    return coef[0] * u + coef[1] * v + coef[2] * w + coef[3] * u * u + coef[4] * v * v +
           coef[5] * w * w + coef[6] * u * v + coef[7] * u * w + coef[8] * v * w;
  };
  double pmax = 0.0;
  for (std::size_t x = 0; x < cuboid_shape[0]; ++x)
    for (std::size_t y = 0; y < cuboid_shape[1]; ++y)
      for (std::size_t z = 0; z < cuboid_shape[2]; ++z) {
        if (!inside[(x * cuboid_shape[1] + y) * cuboid_shape[2] + z]) continue;
        double u = (double(x) - half[0]) / std::max(half[0], 0.5);
        double v = (double(y) - half[1]) / std::max(half[1], 0.5);
        double w = (double(z) - half[2]) / std::max(half[2], 0.5);
        pmax = std::max(pmax, std::abs(poly(u, v, w)));
      }
  double pscale = pmax > 0.0 ? 1.0 / pmax : 0.0;

  ComplexField out(box_shape);
  std::array<std::size_t, 3> off{(box_shape[0] - cuboid_shape[0]) / 2,
                                 (box_shape[1] - cuboid_shape[1]) / 2,
                                 (box_shape[2] - cuboid_shape[2]) / 2};
  for (std::size_t x = 0; x < cuboid_shape[0]; ++x)
    for (std::size_t y = 0; y < cuboid_shape[1]; ++y)
      for (std::size_t z = 0; z < cuboid_shape[2]; ++z) {
        if (!inside[(x * cuboid_shape[1] + y) * cuboid_shape[2] + z]) continue;
        double u = (double(x) - half[0]) / std::max(half[0], 0.5);
        double v = (double(y) - half[1]) / std::max(half[1], 0.5);
        double w = (double(z) - half[2]) / std::max(half[2], 0.5);
        out.at(off[0] + x, off[1] + y, off[2] + z) =
            std::polar(0.5, pscale * poly(u, v, w));
      }
  return out;
}

RealField poissonize(const RealField& h, std::uint64_t seed) {
  RealField out(h.shape);
  for (std::size_t i = 0; i < h.data.size(); ++i) {
    if (h.data[i] < 0.0) throw std::invalid_argument("poissonize: negative mean");
    CounterRng rng = CounterRng::from(seed, 0x9015, i);
    out.data[i] = double(poisson_sample(rng, h.data[i]));
  }
  return out;
}

ComplexField bragg_probe_volume(const ComplexField& profile, const Shape& probe_shape,
                                double two_theta, double pitch) {
  if (profile.ndim() != 2 || probe_shape.size() != 3)
    throw std::invalid_argument("bragg_probe_volume: profile 2D, volume 3D");
  ComplexField p3(probe_shape);
  p3.pitch = {pitch, pitch, pitch};
  const double cu = std::cos(two_theta), su = std::sin(two_theta);
  const double uc = 0.5 * double(profile.shape[0] - 1);
  const double zc = 0.5 * double(profile.shape[1] - 1);
  const double xc = 0.5 * double(probe_shape[0] - 1);
  const double yc = 0.5 * double(probe_shape[1] - 1);
  const double zcc = 0.5 * double(probe_shape[2] - 1);
  for (std::size_t x = 0; x < probe_shape[0]; ++x)
    for (std::size_t y = 0; y < probe_shape[1]; ++y) {
      // in-plane transverse coordinate of this (x, y) column w.r.t. the beam
      // axis through the volume center; the beam is constant along k_i
      double u = cu * (double(x) - xc) - su * (double(y) - yc) + uc;
      std::int64_t u0 = std::int64_t(std::floor(u));
      double tu = u - double(u0);
      for (std::size_t z = 0; z < probe_shape[2]; ++z) {
        double zp = (double(z) - zcc) + zc;
        std::int64_t z0 = std::int64_t(std::floor(zp));
        double tz = zp - double(z0);
        auto sample = [&](std::int64_t a, std::int64_t b) -> cplx {
          if (a < 0 || b < 0 || a >= std::int64_t(profile.shape[0]) ||
              b >= std::int64_t(profile.shape[1]))
            return cplx(0.0, 0.0);
          return profile.at(std::size_t(a), std::size_t(b));
        };
        p3.at(x, y, z) = (1 - tu) * ((1 - tz) * sample(u0, z0) + tz * sample(u0, z0 + 1)) +
                         tu * ((1 - tz) * sample(u0 + 1, z0) + tz * sample(u0 + 1, z0 + 1));
      }
    }
  return p3;
}

namespace {

struct BuiltGeometry {
  Dataset ds;
  ComplexField recon_truth; // bragg: truth cropped to the recon window
};

void build_farfield(const Recipe& r, Dataset& ds) {
  double lambda = wavelength_from_kev(r.get_double("energy_kev"));
  std::size_t box = std::size_t(r.get_int("box"));
  std::size_t obj = std::size_t(r.get_int("object"));
  std::size_t prb = std::size_t(r.get_int("probe"));
  std::int64_t step = r.get_int("step_px");
  double pitch = r.get_double("pixel_pitch");
  ds.photons = r.get_double("photons");

  ds.far.lambda = lambda;
  ds.far.detector_distance = r.get_double("detector_distance");
  ds.far.detector_pitch = r.get_double("detector_pitch");
  ds.far.object_shape = {box, box};
  ds.far.probe_shape = {prb, prb};
  ds.far.pixel_pitch = {pitch, pitch};
  ds.far.nu = r.get_double("nu", 0.0);

  ds.object_true = phantom_2d({obj, obj}, r.get("mag_source"), r.get("phase_source"),
                              {box, box}, r.get_double("phase_min", -std::numbers::pi),
                              r.get_double("phase_max", std::numbers::pi), ds.seed_object);
  ds.object_region.offset = {std::int64_t((box - obj) / 2), std::int64_t((box - obj) / 2)};
  ds.object_region.extent = {std::int64_t(obj), std::int64_t(obj)};
  ds.probe_true = probe_square_aperture(r.get_double("aperture_width"),
                                        r.get_double("aperture_distance"), lambda, pitch,
                                        {prb, prb}, ds.photons);
  std::size_t counts = std::size_t((std::int64_t(box) - std::int64_t(prb)) / step) + 1;
  counts = std::size_t(r.get_int("grid_counts", std::int64_t(counts)));
  ds.plan = raster_plan(step, counts, counts, {box, box}, {prb, prb});
  ds.counts_scale = double(prb * prb);
}

void build_nearfield(const Recipe& r, Dataset& ds) {
  double lambda = wavelength_from_kev(r.get_double("energy_kev"));
  std::size_t grid = std::size_t(r.get_int("grid"));
  std::size_t obj = std::size_t(r.get_int("object"));
  double pitch = r.get_double("pixel_pitch");
  ds.photons = r.get_double("flux");

  ds.near.lambda = lambda;
  ds.near.z = r.get_double("z");
  ds.near.pixel_pitch = {pitch, pitch};
  ds.near.object_shape = {obj, obj};
  ds.near.probe_shape = {grid, grid};
  ds.near.nu = r.get_double("nu", 0.0);

  ds.object_true = phantom_2d({obj, obj}, r.get("mag_source"), r.get("phase_source"),
                              {obj, obj}, r.get_double("phase_min", -std::numbers::pi),
                              r.get_double("phase_max", std::numbers::pi), ds.seed_object);
  ds.object_region.offset = {0, 0};
  ds.object_region.extent = {std::int64_t(obj), std::int64_t(obj)};
  ds.probe_true = probe_gaussian_speckle(r.get_double("probe_fwhm"), pitch, {grid, grid},
                                         FluxMode::MeanPerPixel, ds.photons, ds.seed_probe);
  std::size_t counts = std::size_t(r.get_int("grid_counts"));
  ds.plan = raster_plan(r.get_int("step_px"), counts, counts, {grid, grid}, {obj, obj});
  ds.counts_scale = 1.0;
}

void build_bragg(const Recipe& r, Dataset& ds) {
  double lambda = wavelength_from_kev(r.get_double("energy_kev"));
  double pitch = r.get_double("voxel_pitch");
  double two_theta = r.get_double("two_theta_deg") * std::numbers::pi / 180.0;
  Shape box{std::size_t(r.get_int("box_x")), std::size_t(r.get_int("box_y")),
            std::size_t(r.get_int("box_z"))};
  Shape cuboid{std::size_t(r.get_int("cuboid_x")), std::size_t(r.get_int("cuboid_y")),
               std::size_t(r.get_int("cuboid_z"))};
  Shape probe_shape{box[0], std::size_t(r.get_int("probe_y")), std::size_t(r.get_int("probe_z"))};
  ds.photons = r.get_double("photons");

  ds.bragg.voxel_pitch = pitch;
  ds.bragg.projection_axis = 1; // k_f || y
  ds.bragg.two_theta = two_theta;
  ds.bragg.lambda = lambda;
  ds.bragg.box_shape = box;
  ds.bragg.probe_shape = probe_shape;
  ds.bragg.nu = r.get_double("nu", 0.0);
  double deg = std::numbers::pi / 180.0;
  ds.bragg.angles = angle_plan(r.get_double("angle_half_deg") * deg,
                               r.get_double("angle_step_deg") * deg);

  // loose support: +15% of the cuboid thickness along x, fixed pad in y/z
  double margin_x = r.get_double("support_margin_x");
  std::size_t pad_yz = std::size_t(r.get_int("support_pad_yz"));
  Shape recon{std::min(box[0], std::size_t(std::ceil(double(cuboid[0]) * (1.0 + margin_x)))),
              std::min(box[1], cuboid[1] + 2 * pad_yz), std::min(box[2], cuboid[2] + 2 * pad_yz)};
  ds.bragg.recon_shape = recon;
  ds.bragg.recon_window.offset = {std::int64_t((box[0] - recon[0]) / 2),
                                  std::int64_t((box[1] - recon[1]) / 2),
                                  std::int64_t((box[2] - recon[2]) / 2)};
  ds.bragg.recon_window.extent = {std::int64_t(recon[0]), std::int64_t(recon[1]),
                                  std::int64_t(recon[2])};

  ds.object_true = crystal_phantom(box, cuboid, ds.seed_object);
  ds.object_region = ds.bragg.recon_window;

  ComplexField profile = probe_gaussian_speckle(
      r.get_double("probe_fwhm"), pitch,
      {std::size_t(r.get_int("probe_u")), probe_shape[2]}, FluxMode::TotalPhotons,
      ds.photons, ds.seed_probe);
  ds.probe_true = bragg_probe_volume(profile, probe_shape, two_theta, pitch);

  // angle-major plan: for each rocking angle, a (ny x nz) raster in (y, z)
  std::size_t ny = std::size_t(r.get_int("raster_ny"));
  std::size_t nz = std::size_t(r.get_int("raster_nz"));
  std::int64_t sy = r.get_int("step_y"), sz = r.get_int("step_z");
  std::int64_t my = (std::int64_t(box[1]) - std::int64_t(probe_shape[1]) -
                     sy * std::int64_t(ny - 1));
  std::int64_t mz = (std::int64_t(box[2]) - std::int64_t(probe_shape[2]) -
                     sz * std::int64_t(nz - 1));
  if (my < 0 || mz < 0) throw std::invalid_argument("bragg recipe: raster exceeds the box");
  my /= 2;
  mz /= 2;
  for (std::size_t a = 0; a < ds.bragg.angles.size(); ++a)
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t iz = 0; iz < nz; ++iz) {
        PatchWindow w;
        w.offset = {0, my + sy * std::int64_t(iy), mz + sz * std::int64_t(iz)};
        w.extent = {std::int64_t(probe_shape[0]), std::int64_t(probe_shape[1]),
                    std::int64_t(probe_shape[2])};
        ds.plan.windows.push_back(std::move(w));
        ds.plan.angle_index.push_back(a);
      }
  ds.plan.overlap_fraction =
      0.5 * ((1.0 - double(sy) / double(probe_shape[1])) +
             (1.0 - double(sz) / double(probe_shape[2])));
  Shape det;
  for (std::size_t a = 0; a < 3; ++a)
    if (a != ds.bragg.projection_axis) det.push_back(probe_shape[a]);
  ds.counts_scale = double(shape_numel(det));
}

} // namespace

Shape Dataset::pattern_shape() const {
  switch (kind) {
    case ModelKind::FarField: return far.probe_shape;
    case ModelKind::NearField: return near.probe_shape;
    case ModelKind::Bragg: {
      Shape det;
      for (std::size_t a = 0; a < 3; ++a)
        if (a != bragg.projection_axis) det.push_back(bragg.probe_shape[a]);
      return det;
    }
  }
  return {};
}

std::unique_ptr<ForwardModel> Dataset::make_model() const {
  std::unique_ptr<ForwardModel> model;
  switch (kind) {
    case ModelKind::FarField:
      model = std::make_unique<FarFieldModel>(far, plan);
      break;
    case ModelKind::NearField:
      model = std::make_unique<NearFieldModel>(near, plan);
      break;
    case ModelKind::Bragg:
      model = std::make_unique<BraggModel>(bragg, plan, probe_true);
      break;
  }
  if (!y.empty()) model->set_measurements(y);
  return model;
}

Dataset build_dataset(const Recipe& recipe) {
  Dataset ds;
  ds.recipe = recipe;
  const std::string& model = recipe.get("model");
  ds.seed_probe = recipe.get_seed("seed_probe");
  ds.seed_noise = recipe.get_seed("seed_noise");
  ds.seed_object = recipe.get_seed("seed_object");
  ds.noiseless = recipe.get_int("noiseless", 0) != 0;

  if (model == "farfield") {
    ds.kind = ModelKind::FarField;
    build_farfield(recipe, ds);
  } else if (model == "nearfield") {
    ds.kind = ModelKind::NearField;
    build_nearfield(recipe, ds);
  } else if (model == "bragg") {
    ds.kind = ModelKind::Bragg;
    build_bragg(recipe, ds);
  } else {
    throw std::invalid_argument("recipe: unknown model '" + model + "'");
  }

  std::unique_ptr<ForwardModel> fm = ds.make_model();
  ComplexField sim_object = ds.object_true;
  if (ds.kind == ModelKind::Bragg)
    sim_object = extract_patch(ds.object_true, ds.bragg.recon_window);
  const std::size_t J = ds.plan.size();
  ds.y.reserve(J);
  for (std::size_t j = 0; j < J; ++j) {
    RealField h = fm->predict_one(sim_object, ds.probe_true, j);
    if (ds.noiseless) {
      ds.y.push_back(std::move(h));
      continue;
    }
    // counts are drawn in physical photon units and rescaled back to the
    // model's intensity units, so shot noise matches the photon budget
    RealField phys(h.shape);
    for (std::size_t i = 0; i < h.data.size(); ++i) phys.data[i] = h.data[i] / ds.counts_scale;
    RealField noisy = poissonize(phys, CounterRng::mix(ds.seed_noise ^ (0xACC0 + j)));
    for (std::size_t i = 0; i < noisy.data.size(); ++i) noisy.data[i] *= ds.counts_scale;
    ds.y.push_back(std::move(noisy));
  }
  return ds;
}

DatasetSummary summarize_recipe(const Recipe& recipe) {
  DatasetSummary s;
  s.model = recipe.get("model");
  if (s.model == "farfield") {
    std::size_t box = std::size_t(recipe.get_int("box"));
    std::size_t prb = std::size_t(recipe.get_int("probe"));
    std::int64_t step = recipe.get_int("step_px");
    std::size_t counts = std::size_t((std::int64_t(box) - std::int64_t(prb)) / step) + 1;
    counts = std::size_t(recipe.get_int("grid_counts", std::int64_t(counts)));
    s.patterns = counts * counts;
    s.pattern_shape = {prb, prb};
    s.photons = recipe.get_double("photons");
    double lambda = wavelength_from_kev(recipe.get_double("energy_kev"));
    s.fringe_scale = std::sqrt(lambda * recipe.get_double("aperture_distance"));
  } else if (s.model == "nearfield") {
    std::size_t grid = std::size_t(recipe.get_int("grid"));
    std::size_t counts = std::size_t(recipe.get_int("grid_counts"));
    s.patterns = counts * counts;
    s.pattern_shape = {grid, grid};
    s.photons = recipe.get_double("flux");
    NearFieldGeometry g;
    g.lambda = wavelength_from_kev(recipe.get_double("energy_kev"));
    g.z = recipe.get_double("z");
    double pitch = recipe.get_double("pixel_pitch");
    g.pixel_pitch = {pitch, pitch};
    g.probe_shape = {grid, grid};
    g.object_shape = {std::size_t(recipe.get_int("object")), std::size_t(recipe.get_int("object"))};
    s.fresnel_number = g.fresnel_number();
  } else if (s.model == "bragg") {
    double deg = std::numbers::pi / 180.0;
    std::size_t nangles =
        angle_plan(recipe.get_double("angle_half_deg") * deg, recipe.get_double("angle_step_deg") * deg)
            .size();
    s.patterns = nangles * std::size_t(recipe.get_int("raster_ny")) *
                 std::size_t(recipe.get_int("raster_nz"));
    s.pattern_shape = {std::size_t(recipe.get_int("box_x")), std::size_t(recipe.get_int("probe_z"))};
    s.photons = recipe.get_double("photons");
  } else {
    throw std::invalid_argument("recipe: unknown model '" + s.model + "'");
  }
  return s;
}

} // namespace ptycho
