#pragma once
#include <string>

#include "ptycho/sim.hpp"

namespace ptycho {

// On-disk container: one directory with manifest.json plus raw little-endian
// arrays (float64 / interleaved complex128), one file per named array.
void save_dataset(const std::string& dir, const Dataset& ds);
Dataset load_dataset(const std::string& dir);

// Checkpoints reuse the container layout (object.bin / probe.bin).
void save_checkpoint(const std::string& dir, const ComplexField& object,
                     const ComplexField& probe, std::size_t iteration);
struct Checkpoint {
  ComplexField object, probe;
  std::size_t iteration = 0;
};
Checkpoint load_checkpoint(const std::string& dir);

} // namespace ptycho
