#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "greyfeed/descriptors.hpp"
#include "greyfeed/image.hpp"
#include "greyfeed/rng.hpp"

namespace greyfeed {

struct SyntheticSample {
  Image image;
  Eigen::ArrayXd labels;     // 17-element 0/1, implication-closed
  std::uint64_t seed = 0;
  std::vector<int> placed;   // descriptor index per stamp, in draw order
  int regenerated = 0;       // placement retries that forced a fresh seed
};

// Skewed stamp-class distribution: bars, circles, quads and stars dominate;
// subcategories, pentagons and plain patches are rare.
Eigen::ArrayXd default_class_mix();

// Dark-on-light stamp of one descriptor family, centred at (cx, cy) with
// nominal radius r. Draws all randomness up front, then rasterizes.
void render_shape(Image& img, int descriptor, double cx, double cy, double r, Rng& rng);

// Pre-jitter vertex count for the polygon families, 0 for everything else.
int polygon_sides(int descriptor);

SyntheticSample make_sample(std::uint64_t seed, const Eigen::ArrayXd& mix,
                            Eigen::Index height = 1048, Eigen::Index width = 400);

// Per-sample seeds are derived from (seed, index), so any sample can be
// regenerated on its own.
std::vector<SyntheticSample> generate_samples(int n, std::uint64_t seed,
                                              const Eigen::ArrayXd& mix,
                                              Eigen::Index height = 1048,
                                              Eigen::Index width = 400);

struct ManifestEntry {
  std::string filename;
  Eigen::ArrayXd labels;
  std::uint64_t seed = 0;
};

// PGM per sample plus manifest.csv (filename, semicolon-joined codes, seed).
// Returns the manifest path.
std::string write_dataset(const std::string& dir, const std::vector<SyntheticSample>& samples);

// Same tree as write_dataset(dir, generate_samples(...)), but one sample in
// memory at a time, so dataset size is bounded by disk alone. on_sample sees
// each sample after it is written.
std::string generate_dataset(const std::string& dir, int n, std::uint64_t seed,
                             const Eigen::ArrayXd& mix, Eigen::Index height = 1048,
                             Eigen::Index width = 400,
                             const std::function<void(const SyntheticSample&)>& on_sample = {});

std::vector<ManifestEntry> read_manifest(const std::string& path);

}  // namespace greyfeed
