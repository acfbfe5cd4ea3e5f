#include "greyfeed/descriptors.hpp"

namespace greyfeed {

const std::array<std::string_view, kNumDescriptors>& descriptor_codes() {
  static const std::array<std::string_view, kNumDescriptors> codes = {
      "D01", "D01-01", "D01-02", "D02", "D02-01", "D03", "D04", "D05", "D06",
      "D07", "D08",    "D09",    "D10", "D11",    "D12", "D13", "D14",
  };
  return codes;
}

std::string_view descriptor_code(int index) { return descriptor_codes().at(static_cast<std::size_t>(index)); }

int find_descriptor(std::string_view code) {
  const auto& codes = descriptor_codes();
  for (int i = 0; i < kNumDescriptors; ++i) {
    if (codes[static_cast<std::size_t>(i)] == code) return i;
  }
  return -1;
}

int descriptor_parent(int index) {
  switch (index) {
    case D01_01:
    case D01_02:
      return D01;
    case D02_01:
      return D02;
    default:
      return -1;
  }
}

}  // namespace greyfeed
