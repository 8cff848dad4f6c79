#include "ptycho/image_io.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ptycho {

void write_pgm(const std::string& path, const RealField& img, double lo, double hi, int bits) {
  if (img.ndim() != 2) throw std::invalid_argument("write_pgm: image must be 2D");
  if (bits != 8 && bits != 16) throw std::invalid_argument("write_pgm: bits must be 8 or 16");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_pgm: cannot open " + path);
  const int maxval = bits == 8 ? 255 : 65535;
  out << "P5\n" << img.shape[1] << " " << img.shape[0] << "\n" << maxval << "\n";
  double span = hi > lo ? hi - lo : 1.0;
  for (double v : img.data) {
    double t = (v - lo) / span;
    long q = std::lround(std::clamp(t, 0.0, 1.0) * maxval);
    if (bits == 8) {
      unsigned char b = static_cast<unsigned char>(q);
      out.write(reinterpret_cast<const char*>(&b), 1);
    } else {
      unsigned char b[2] = {static_cast<unsigned char>(q >> 8),
                            static_cast<unsigned char>(q & 0xff)};
      out.write(reinterpret_cast<const char*>(b), 2);
    }
  }
  if (!out) throw IoError("write_pgm: write failed for " + path);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_pgm: cannot open " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw IoError("read_pgm: not a PGM file: " + path);
  auto next_token = [&in, &path]() {
    std::string tok;
    for (;;) {
      if (!(in >> tok)) throw IoError("read_pgm: truncated header in " + path);
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
  };
  std::size_t cols = std::stoul(next_token());
  std::size_t rows = std::stoul(next_token());
  long maxval = std::stol(next_token());
  if (maxval <= 0 || maxval > 65535) throw IoError("read_pgm: bad maxval in " + path);
  GrayImage img;
  img.rows = rows;
  img.cols = cols;
  img.data.resize(rows * cols);
  if (magic == "P2") {
    for (double& v : img.data) {
      long q;
      if (!(in >> q)) throw IoError("read_pgm: truncated data in " + path);
      v = double(q) / double(maxval);
    }
  } else {
    in.get(); // single whitespace after maxval
    int bytes = maxval > 255 ? 2 : 1;
    for (double& v : img.data) {
      unsigned char b[2] = {0, 0};
      in.read(reinterpret_cast<char*>(b), bytes);
      if (!in) throw IoError("read_pgm: truncated data in " + path);
      long q = bytes == 1 ? b[0] : (long(b[0]) << 8) | b[1];
      v = double(q) / double(maxval);
    }
  }
  return img;
}

namespace {

RealField central_slice(const ComplexField& f, bool magnitude) {
  // 2D fields export directly; 3D fields export the central slice on axis 0.
  Shape s2;
  std::size_t base = 0, count = 0;
  if (f.ndim() == 2) {
    s2 = f.shape;
    count = f.size();
  } else {
    s2 = {f.shape[1], f.shape[2]};
    count = f.shape[1] * f.shape[2];
    base = (f.shape[0] / 2) * count;
  }
  RealField out(s2);
  for (std::size_t i = 0; i < count; ++i)
    out.data[i] = magnitude ? std::abs(f.data[base + i]) : std::arg(f.data[base + i]);
  return out;
}

} // namespace

void export_field_images(const std::string& prefix, const ComplexField& field, int bits,
                         double phase_mask_threshold) {
  RealField mag = central_slice(field, true);
  RealField ph = central_slice(field, false);
  double lo = mag.data[0], hi = mag.data[0];
  for (double v : mag.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (phase_mask_threshold > 0.0) {
    for (std::size_t i = 0; i < ph.data.size(); ++i)
      if (mag.data[i] < phase_mask_threshold) ph.data[i] = 0.0;
  }
  write_pgm(prefix + "_mag.pgm", mag, lo, hi, bits);
  write_pgm(prefix + "_phase.pgm", ph, -std::numbers::pi, std::numbers::pi, bits);
  std::ostringstream side;
  side << "magnitude_min = " << lo << "\n"
       << "magnitude_max = " << hi << "\n"
       << "phase_min = " << -std::numbers::pi << "\n"
       << "phase_max = " << std::numbers::pi << "\n"
       << "bits = " << bits << "\n";
  if (phase_mask_threshold > 0.0) side << "phase_mask = " << phase_mask_threshold << "\n";
  write_text_file(prefix + "_scale.txt", side.str());
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

} // namespace ptycho
