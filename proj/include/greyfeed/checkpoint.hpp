#pragma once

#include <cstdint>
#include <string>

#include "greyfeed/layers.hpp"

namespace greyfeed {

// Everything needed to rebuild a model and feed it the same way it was fed
// during training.
struct CheckpointMeta {
  std::string channels = "B-H-N";
  std::string resize_mode = "aspect";  // squish | aspect
  int target_h = 352, target_w = 144;
  std::string loss = "bce";
  int batch_size = 32;  // evaluation must batch as training did to match bit-for-bit
  std::uint64_t seed = 0;
};

struct LoadedCheckpoint {
  CheckpointMeta meta;
  Model model;
};

// Versioned binary container: model spec, feed metadata, parameter arrays,
// batchnorm running stats. Round-trips byte-stably.
void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace greyfeed
