#pragma once
#include <string>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho {

// Binary PGM (P5), 8- or 16-bit (16-bit samples are big-endian per the spec).
void write_pgm(const std::string& path, const RealField& img, double lo, double hi,
               int bits = 16);

struct GrayImage {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data; // normalized by maxval to [0,1]
};

GrayImage read_pgm(const std::string& path);

// Magnitude/phase exports with the scaling recorded in a sidecar text file.
void export_field_images(const std::string& prefix, const ComplexField& field, int bits = 16,
                         double phase_mask_threshold = 0.0);

void write_text_file(const std::string& path, const std::string& content);

} // namespace ptycho
