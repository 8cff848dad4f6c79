#pragma once
#include <map>
#include <string>

#include "ptycho/field.hpp"
#include "ptycho/models.hpp"

namespace ptycho {

// CODATA: h = 6.62607015e-34 J s, c = 2.99792458e8 m/s, e = 1.602176634e-19 C.
// lambda = h c / E; energy in keV, wavelength in meters.
double wavelength_from_kev(double energy_kev);

// Flat key-value experiment recipe (parsed from text or built from presets).
struct Recipe {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_seed(const std::string& key) const; // mandatory, no entropy defaults
  void set(const std::string& key, const std::string& value) { kv[key] = value; }
  void set(const std::string& key, double v);
  void set(const std::string& key, std::int64_t v);
};

Recipe parse_recipe_text(const std::string& text);
Recipe load_recipe(const std::string& path);
Recipe preset_recipe(const std::string& name); // farfield | nearfield | nearfield-desk | bragg | bragg-desk

// 2D phantom: magnitude/phase from grayscale files or named procedural
// sources ("blobs", "checker", "checkerblobs", "ramp", "constant"), embedded
// centrally in the simulation box.
ComplexField phantom_2d(const Shape& object_shape, const std::string& mag_source,
                        const std::string& phase_source, const Shape& box_shape,
                        double phase_min, double phase_max, std::uint64_t seed);

// Square aperture Fresnel-propagated by zeta, rescaled to the photon budget.
ComplexField probe_square_aperture(double width_m, double zeta_m, double lambda, double pitch,
                                   const Shape& shape, double photons);

enum class FluxMode { TotalPhotons, MeanPerPixel };

// Gaussian envelope through a random-phase diffuser, correlated by one short
// free-space step, normalized to the requested flux.
ComplexField probe_gaussian_speckle(double fwhm_m, double pitch, const Shape& shape,
                                    FluxMode mode, double flux, std::uint64_t seed);

// FWHM of the azimuthally averaged intensity, in pixels (probe diagnostics).
double intensity_fwhm_px(const ComplexField& probe);

ScanPlan raster_plan(std::int64_t step_px, std::size_t count0, std::size_t count1,
                     const Shape& host_shape, const Shape& patch_shape);

std::vector<double> angle_plan(double half_range_rad, double step_rad);

// Faceted crystal inside the cuboid: magnitude 0.5, smooth low-order phase,
// occupancy kept in [0.2, 0.45] by resampling sub-seeds.
ComplexField crystal_phantom(const Shape& box_shape, const Shape& cuboid_shape,
                             std::uint64_t seed);

// Independent Poisson draw per pixel with mean h, deterministic from seed
// (per-pixel counter streams).
RealField poissonize(const RealField& h, std::uint64_t seed);

// 3D probe volume: the 2D transverse speckle profile swept along the incident
// beam (in the xy plane, 2-theta away from the exit axis y), constant along
// propagation. profile axes are (transverse-in-plane u, vertical z).
ComplexField bragg_probe_volume(const ComplexField& profile, const Shape& probe_shape,
                                double two_theta, double pitch);

struct Dataset {
  ModelKind kind = ModelKind::FarField;
  FarFieldGeometry far;
  NearFieldGeometry near;
  BraggGeometry bragg;
  ScanPlan plan;
  std::vector<RealField> y;
  ComplexField object_true; // empty when withheld
  ComplexField probe_true;
  PatchWindow object_region; // where the ground-truth image lives in object_true
  std::uint64_t seed_probe = 0, seed_noise = 0, seed_object = 0;
  double photons = 0.0;
  bool noiseless = false;
  double counts_scale = 1.0; // model-units per physical count (far/Bragg: M)
  Recipe recipe;

  Shape pattern_shape() const;
  std::unique_ptr<ForwardModel> make_model() const;
};

struct DatasetSummary {
  std::size_t patterns = 0;
  Shape pattern_shape;
  double photons = 0.0;
  std::string model;
  double fresnel_number = 0.0; // near-field only
  double fringe_scale = 0.0;   // far-field sqrt(lambda zeta)
};

Dataset build_dataset(const Recipe& recipe);
DatasetSummary summarize_recipe(const Recipe& recipe); // dry-run: plan + shapes only

} // namespace ptycho
