#pragma once

#include <cstdint>
#include <filesystem>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::data {

// Procedural stand-in for NIH thin-smear crops: a pink, roughly elliptical
// cell on black. Parasitized cells (label 0) carry one to three dark purple
// chromatin/ring stains; uninfected cells (label 1) may carry faint pale
// artefacts instead. Size varies like the real crops (about 100-160 px).
nn::Tensor synth_cell(int label, std::uint64_t seed);

// Writes `per_class` PNGs into each of <out>/Parasitized and <out>/Uninfected.
void write_synth_cells(const std::filesystem::path& out, std::size_t per_class, std::uint64_t seed);

}  // namespace e2emd::data
