#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "e2emd/nn/tensor.hpp"

namespace e2emd::data {

// Directory names of the NIH "cell_images" layout; index = class label.
inline const std::vector<std::string> kClassDirs{"Parasitized", "Uninfected"};

// Image count of the NIH malaria set as often cited (the archive itself holds 27,558).
inline constexpr std::size_t kCitedImageCount = 27588;

struct LabeledImage {
  nn::Tensor pixels;
  int label = 0;
  std::string source;
};

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

struct Dataset {
  std::vector<LabeledImage> samples;
  LoadReport report;
};

// Loads <root>/Parasitized/* and <root>/Uninfected/*, sorted by path.
// Undecodable files are skipped and listed in the report. A missing or empty
// class directory is a LayoutError.
// With `limit` > 0 only stratified_subset(limit, seed) of the listed files is
// decoded.
Dataset load_dataset(const std::filesystem::path& root, const nn::Shape& input, std::size_t limit = 0,
                     std::uint64_t seed = 0);

// n indices keeping the class proportions: class c gets floor(n * n_c / N),
// leftover slots go to the classes in label order. Members are drawn with a
// seeded shuffle per class; the result is sorted.
std::vector<std::size_t> stratified_subset(const std::vector<int>& labels, std::size_t n, std::uint64_t seed);

struct DatasetSplit {
  std::vector<std::size_t> train, val, test;
  std::uint64_t seed = 0;
};

struct SplitRatios {
  double train = 0.8, val = 0.1, test = 0.1;
};

// Stratified: within each class the indices are shuffled with a seeded
// stream, the first floor(val * n) go to val, the next floor(test * n) to
// test and the rest to train. Each list is returned sorted.
DatasetSplit split(const std::vector<int>& labels, SplitRatios ratios, std::uint64_t seed);

std::vector<int> labels_of(const std::vector<LabeledImage>& samples);

// Stacks samples[indices] into one N x C x H x W batch.
nn::Tensor stack(const std::vector<LabeledImage>& samples, const std::vector<std::size_t>& indices);

}  // namespace e2emd::data
