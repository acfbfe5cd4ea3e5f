#pragma once

#include <array>
#include <string>
#include <string_view>

#include "greyfeed/resample.hpp"
#include "greyfeed/tensor.hpp"

namespace greyfeed {

// One interpolation method per output channel. Only the nine listed channel
// codes are admissible: the three homogeneous stacks and the six orderings of
// {B, H, N} — a closed set, not free combination.
struct ChannelConfig {
  InterpMethod r = InterpMethod::bilinear;
  InterpMethod g = InterpMethod::bilinear;
  InterpMethod b = InterpMethod::bilinear;
};

// The admissible codes, in a fixed presentation order.
const std::array<std::string, 9>& channel_config_codes();

// "B-H-N" → (bilinear, hamming, nearest). Rejects malformed strings and
// well-formed combinations outside the admissible nine.
ChannelConfig parse_config(std::string_view code);
std::string config_code(const ChannelConfig& cfg);

// Stacks three differently-interpolated copies of one greyscale image into a
// [3, target_h, target_w] tensor, channels in R,G,B order.
Tensor compose(const Image& img, const ChannelConfig& cfg, const ResizePolicy& policy);

}  // namespace greyfeed
