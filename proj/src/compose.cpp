#include "greyfeed/compose.hpp"

#include <algorithm>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

char method_letter(InterpMethod m) {
  switch (m) {
    case InterpMethod::bilinear: return 'B';
    case InterpMethod::hamming: return 'H';
    case InterpMethod::nearest: return 'N';
  }
  throw ParamError("unknown interpolation method");
}

InterpMethod letter_method(char c, std::string_view code) {
  switch (c) {
    case 'B': return InterpMethod::bilinear;
    case 'H': return InterpMethod::hamming;
    case 'N': return InterpMethod::nearest;
  }
  throw ParseError("channel config '" + std::string(code) + "': bad method token '" +
                   std::string(1, c) + "'");
}

}  // namespace

const std::array<std::string, 9>& channel_config_codes() {
  static const std::array<std::string, 9> codes = {
      "B-B-B", "B-H-N", "B-N-H", "H-B-N", "H-H-H", "H-N-B", "N-B-H", "N-H-B", "N-N-N",
  };
  return codes;
}

ChannelConfig parse_config(std::string_view code) {
  if (code.size() != 5 || code[1] != '-' || code[3] != '-')
    throw ParseError("channel config '" + std::string(code) + "': want M-M-M with M in {B,H,N}");
  ChannelConfig cfg;
  cfg.r = letter_method(code[0], code);
  cfg.g = letter_method(code[2], code);
  cfg.b = letter_method(code[4], code);
  const auto& codes = channel_config_codes();
  if (std::find(codes.begin(), codes.end(), std::string(code)) == codes.end())
    throw ParseError("channel config '" + std::string(code) +
                     "' is not one of the admissible nine combinations");
  return cfg;
}

std::string config_code(const ChannelConfig& cfg) {
  std::string s = "?-?-?";
  s[0] = method_letter(cfg.r);
  s[2] = method_letter(cfg.g);
  s[4] = method_letter(cfg.b);
  return s;
}

Tensor compose(const Image& img, const ChannelConfig& cfg, const ResizePolicy& policy) {
  const std::array<InterpMethod, 3> methods = {cfg.r, cfg.g, cfg.b};
  const Eigen::Index hw = policy.target_h * policy.target_w;
  Eigen::ArrayXd data(3 * hw);
  for (Eigen::Index k = 0; k < 3; ++k) {
    Image ch = apply_policy(img, policy, methods[static_cast<std::size_t>(k)]);
    data.segment(k * hw, hw) = Eigen::Map<const Eigen::ArrayXd>(ch.pixels.data(), hw);
  }
  return Tensor::from_data({3, policy.target_h, policy.target_w}, std::move(data));
}

}  // namespace greyfeed
