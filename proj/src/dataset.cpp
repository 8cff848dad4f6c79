#include "ptycho/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace ptycho {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_raw(const fs::path& path, const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("dataset: cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(data), std::streamsize(bytes));
  if (!out) throw IoError("dataset: write failed for " + path.string());
}

std::vector<char> read_raw(const fs::path& path, std::size_t expected_bytes) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("dataset: cannot open " + path.string());
  std::size_t size = std::size_t(in.tellg());
  if (size != expected_bytes)
    throw IoError("dataset: " + path.string() + " has " + std::to_string(size) +
                  " bytes, expected " + std::to_string(expected_bytes));
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), std::streamsize(size));
  if (!in) throw IoError("dataset: read failed for " + path.string());
  return buf;
}

json shape_json(const Shape& s) {
  json a = json::array();
  for (std::size_t e : s) a.push_back(e);
  return a;
}

Shape shape_from_json(const json& a) {
  Shape s;
  for (const auto& v : a) s.push_back(v.get<std::size_t>());
  return s;
}

json array_entry(const std::string& file, const char* dtype, const json& shape) {
  return json{{"file", file}, {"dtype", dtype}, {"shape", shape}};
}

void write_complex(const fs::path& dir, const std::string& file, const ComplexField& f) {
  write_raw(dir / file, f.data.data(), f.data.size() * sizeof(cplx));
}

ComplexField read_complex(const fs::path& dir, const std::string& file, const Shape& shape) {
  ComplexField f(shape);
  auto buf = read_raw(dir / file, f.data.size() * sizeof(cplx));
  std::memcpy(f.data.data(), buf.data(), buf.size());
  return f;
}

} // namespace

void save_dataset(const std::string& dir_s, const Dataset& ds) {
  fs::path dir(dir_s);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("dataset: cannot create directory " + dir_s);

  const std::size_t J = ds.plan.size();
  Shape pat = ds.pattern_shape();

  // y: [J, pattern...]
  {
    std::vector<double> buf;
    buf.reserve(J * shape_numel(pat));
    for (const RealField& f : ds.y) buf.insert(buf.end(), f.data.begin(), f.data.end());
    write_raw(dir / "y.bin", buf.data(), buf.size() * sizeof(double));
  }
  // positions: [J, ndim] int64 offsets
  std::size_t ndim = ds.plan.windows[0].offset.size();
  {
    std::vector<std::int64_t> buf;
    buf.reserve(J * ndim);
    for (const PatchWindow& w : ds.plan.windows)
      buf.insert(buf.end(), w.offset.begin(), w.offset.end());
    write_raw(dir / "positions.bin", buf.data(), buf.size() * sizeof(std::int64_t));
  }
  json arrays;
  Shape yshape = pat;
  yshape.insert(yshape.begin(), J);
  arrays["y"] = array_entry("y.bin", "float64", shape_json(yshape));
  arrays["positions"] = array_entry("positions.bin", "int64", shape_json(Shape{J, ndim}));
  if (ds.object_true.size()) {
    write_complex(dir, "object_true.bin", ds.object_true);
    arrays["object_true"] =
        array_entry("object_true.bin", "complex128", shape_json(ds.object_true.shape));
  }
  if (ds.probe_true.size()) {
    write_complex(dir, "probe_true.bin", ds.probe_true);
    arrays["probe_true"] =
        array_entry("probe_true.bin", "complex128", shape_json(ds.probe_true.shape));
  }
  if (ds.kind == ModelKind::Bragg) {
    write_raw(dir / "angles.bin", ds.bragg.angles.data(), ds.bragg.angles.size() * sizeof(double));
    arrays["angles"] =
        array_entry("angles.bin", "float64", shape_json(Shape{ds.bragg.angles.size()}));
    std::vector<std::int64_t> ai(ds.plan.angle_index.begin(), ds.plan.angle_index.end());
    write_raw(dir / "angle_index.bin", ai.data(), ai.size() * sizeof(std::int64_t));
    arrays["angle_index"] = array_entry("angle_index.bin", "int64", shape_json(Shape{J}));
  }

  json geo;
  switch (ds.kind) {
    case ModelKind::FarField:
      geo = {{"lambda", ds.far.lambda},
             {"detector_distance", ds.far.detector_distance},
             {"detector_pitch", ds.far.detector_pitch},
             {"object_shape", shape_json(ds.far.object_shape)},
             {"probe_shape", shape_json(ds.far.probe_shape)},
             {"pixel_pitch", ds.far.pixel_pitch},
             {"nu", ds.far.nu}};
      break;
    case ModelKind::NearField:
      geo = {{"lambda", ds.near.lambda},
             {"z", ds.near.z},
             {"pixel_pitch", ds.near.pixel_pitch},
             {"object_shape", shape_json(ds.near.object_shape)},
             {"probe_shape", shape_json(ds.near.probe_shape)},
             {"nu", ds.near.nu}};
      break;
    case ModelKind::Bragg: {
      std::vector<std::vector<double>> qvecs;
      for (std::size_t a = 0; a < ds.bragg.angles.size(); ++a) {
        auto q = ds.bragg.q_vector(a);
        qvecs.push_back({q[0], q[1], q[2]});
      }
      geo = {{"voxel_pitch", ds.bragg.voxel_pitch},
             {"projection_axis", ds.bragg.projection_axis},
             {"two_theta", ds.bragg.two_theta},
             {"lambda", ds.bragg.lambda},
             {"box_shape", shape_json(ds.bragg.box_shape)},
             {"probe_shape", shape_json(ds.bragg.probe_shape)},
             {"recon_shape", shape_json(ds.bragg.recon_shape)},
             {"recon_offset", ds.bragg.recon_window.offset},
             {"q_vectors", qvecs},
             {"nu", ds.bragg.nu}};
      break;
    }
  }

  json manifest = {
      {"format", "ptychoad-dataset-v1"},
      {"endianness", "little"},
      {"model", model_kind_name(ds.kind)},
      {"arrays", arrays},
      {"geometry", geo},
      {"window_extent", ds.plan.windows[0].extent},
      {"object_region_offset", ds.object_region.offset},
      {"object_region_extent", ds.object_region.extent},
      {"overlap_fraction", ds.plan.overlap_fraction},
      {"seeds",
       {{"probe", ds.seed_probe}, {"noise", ds.seed_noise}, {"object", ds.seed_object}}},
      {"photons", ds.photons},
      {"noiseless", ds.noiseless},
      {"counts_scale", ds.counts_scale},
      {"recipe", ds.recipe.kv},
  };
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("dataset: cannot open manifest in " + dir_s);
  mf << manifest.dump(2) << "\n";
  if (!mf) throw IoError("dataset: manifest write failed in " + dir_s);
}

Dataset load_dataset(const std::string& dir_s) {
  fs::path dir(dir_s);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IoError("dataset: cannot open " + (dir / "manifest.json").string());
  json manifest = json::parse(mf, nullptr, true);
  if (manifest.value("format", "") != "ptychoad-dataset-v1")
    throw IoError("dataset: unrecognized container format in " + dir_s);

  Dataset ds;
  std::string model = manifest.at("model").get<std::string>();
  const json& geo = manifest.at("geometry");
  const json& arrays = manifest.at("arrays");

  Shape yshape = shape_from_json(arrays.at("y").at("shape"));
  std::size_t J = yshape[0];
  Shape pat(yshape.begin() + 1, yshape.end());

  if (model == "farfield") {
    ds.kind = ModelKind::FarField;
    ds.far.lambda = geo.at("lambda").get<double>();
    ds.far.detector_distance = geo.at("detector_distance").get<double>();
    ds.far.detector_pitch = geo.at("detector_pitch").get<double>();
    ds.far.object_shape = shape_from_json(geo.at("object_shape"));
    ds.far.probe_shape = shape_from_json(geo.at("probe_shape"));
    ds.far.pixel_pitch = geo.at("pixel_pitch").get<std::vector<double>>();
    ds.far.nu = geo.at("nu").get<double>();
  } else if (model == "nearfield") {
    ds.kind = ModelKind::NearField;
    ds.near.lambda = geo.at("lambda").get<double>();
    ds.near.z = geo.at("z").get<double>();
    ds.near.pixel_pitch = geo.at("pixel_pitch").get<std::vector<double>>();
    ds.near.object_shape = shape_from_json(geo.at("object_shape"));
    ds.near.probe_shape = shape_from_json(geo.at("probe_shape"));
    ds.near.nu = geo.at("nu").get<double>();
  } else if (model == "bragg") {
    ds.kind = ModelKind::Bragg;
    ds.bragg.voxel_pitch = geo.at("voxel_pitch").get<double>();
    ds.bragg.projection_axis = geo.at("projection_axis").get<std::size_t>();
    ds.bragg.two_theta = geo.at("two_theta").get<double>();
    ds.bragg.lambda = geo.at("lambda").get<double>();
    ds.bragg.box_shape = shape_from_json(geo.at("box_shape"));
    ds.bragg.probe_shape = shape_from_json(geo.at("probe_shape"));
    ds.bragg.recon_shape = shape_from_json(geo.at("recon_shape"));
    ds.bragg.recon_window.offset = geo.at("recon_offset").get<std::vector<std::int64_t>>();
    ds.bragg.recon_window.extent.assign(ds.bragg.recon_shape.begin(), ds.bragg.recon_shape.end());
    ds.bragg.nu = geo.at("nu").get<double>();
    auto abuf = read_raw(dir / "angles.bin",
                         shape_from_json(arrays.at("angles").at("shape"))[0] * sizeof(double));
    ds.bragg.angles.resize(abuf.size() / sizeof(double));
    std::memcpy(ds.bragg.angles.data(), abuf.data(), abuf.size());
  } else {
    throw IoError("dataset: unknown model '" + model + "' in " + dir_s);
  }

  // scan plan
  std::vector<std::int64_t> extent = manifest.at("window_extent").get<std::vector<std::int64_t>>();
  std::size_t ndim = extent.size();
  auto pbuf = read_raw(dir / "positions.bin", J * ndim * sizeof(std::int64_t));
  const std::int64_t* pos = reinterpret_cast<const std::int64_t*>(pbuf.data());
  ds.plan.windows.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    ds.plan.windows[j].offset.assign(pos + j * ndim, pos + (j + 1) * ndim);
    ds.plan.windows[j].extent = extent;
  }
  ds.plan.overlap_fraction = manifest.value("overlap_fraction", 0.0);
  if (manifest.contains("object_region_offset")) {
    ds.object_region.offset =
        manifest.at("object_region_offset").get<std::vector<std::int64_t>>();
    ds.object_region.extent =
        manifest.at("object_region_extent").get<std::vector<std::int64_t>>();
  }
  if (ds.kind == ModelKind::Bragg) {
    auto aibuf = read_raw(dir / "angle_index.bin", J * sizeof(std::int64_t));
    const std::int64_t* ai = reinterpret_cast<const std::int64_t*>(aibuf.data());
    ds.plan.angle_index.assign(ai, ai + J);
  }

  // measurements
  {
    auto ybuf = read_raw(dir / "y.bin", J * shape_numel(pat) * sizeof(double));
    const double* yp = reinterpret_cast<const double*>(ybuf.data());
    ds.y.resize(J);
    for (std::size_t j = 0; j < J; ++j) {
      ds.y[j] = RealField(pat);
      std::memcpy(ds.y[j].data.data(), yp + j * shape_numel(pat),
                  shape_numel(pat) * sizeof(double));
    }
  }
  if (arrays.contains("object_true"))
    ds.object_true = read_complex(dir, "object_true.bin",
                                  shape_from_json(arrays.at("object_true").at("shape")));
  if (arrays.contains("probe_true"))
    ds.probe_true =
        read_complex(dir, "probe_true.bin", shape_from_json(arrays.at("probe_true").at("shape")));

  const json& seeds = manifest.at("seeds");
  ds.seed_probe = seeds.at("probe").get<std::uint64_t>();
  ds.seed_noise = seeds.at("noise").get<std::uint64_t>();
  ds.seed_object = seeds.at("object").get<std::uint64_t>();
  ds.photons = manifest.at("photons").get<double>();
  ds.noiseless = manifest.at("noiseless").get<bool>();
  ds.counts_scale = manifest.at("counts_scale").get<double>();
  if (manifest.contains("recipe"))
    ds.recipe.kv = manifest.at("recipe").get<std::map<std::string, std::string>>();

  // restore pitch metadata on the probe
  if (ds.probe_true.size()) {
    if (ds.kind == ModelKind::NearField)
      ds.probe_true.pitch = ds.near.pixel_pitch;
    else if (ds.kind == ModelKind::Bragg)
      ds.probe_true.pitch = {ds.bragg.voxel_pitch, ds.bragg.voxel_pitch, ds.bragg.voxel_pitch};
    else
      ds.probe_true.pitch = ds.far.pixel_pitch;
  }
  return ds;
}

void save_checkpoint(const std::string& dir_s, const ComplexField& object,
                     const ComplexField& probe, std::size_t iteration) {
  fs::path dir(dir_s);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("checkpoint: cannot create directory " + dir_s);
  write_complex(dir, "object.bin", object);
  write_complex(dir, "probe.bin", probe);
  json manifest = {
      {"format", "ptychoad-checkpoint-v1"},
      {"endianness", "little"},
      {"iteration", iteration},
      {"arrays",
       {{"object", array_entry("object.bin", "complex128", shape_json(object.shape))},
        {"probe", array_entry("probe.bin", "complex128", shape_json(probe.shape))}}},
  };
  std::ofstream mf(dir / "manifest.json");
  if (!mf) throw IoError("checkpoint: cannot open manifest in " + dir_s);
  mf << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir_s) {
  fs::path dir(dir_s);
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw IoError("checkpoint: cannot open " + (dir / "manifest.json").string());
  json manifest = json::parse(mf, nullptr, true);
  Checkpoint cp;
  cp.iteration = manifest.at("iteration").get<std::size_t>();
  cp.object = read_complex(dir, "object.bin",
                           shape_from_json(manifest.at("arrays").at("object").at("shape")));
  cp.probe = read_complex(dir, "probe.bin",
                          shape_from_json(manifest.at("arrays").at("probe").at("shape")));
  return cp;
}

} // namespace ptycho
