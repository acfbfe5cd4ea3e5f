#pragma once

#include <array>
#include <string_view>

namespace greyfeed {

// The 17 footwear descriptor classes, in canonical report order.
inline constexpr int kNumDescriptors = 17;

enum Descriptor : int {
  D01 = 0,
  D01_01,
  D01_02,
  D02,
  D02_01,
  D03,
  D04,
  D05,
  D06,
  D07,
  D08,
  D09,
  D10,
  D11,
  D12,
  D13,
  D14,
};

const std::array<std::string_view, kNumDescriptors>& descriptor_codes();

std::string_view descriptor_code(int index);

// -1 if the code is unknown.
int find_descriptor(std::string_view code);

// Index of the parent class (D01-01 -> D01, D01-02 -> D01, D02-01 -> D02),
// or -1 for top-level descriptors.
int descriptor_parent(int index);

// Set parents implied by present subcategories; labels is a 17-element 0/1
// array in canonical order.
template <class Vec>
void apply_label_implications(Vec& labels) {
  for (int i = 0; i < kNumDescriptors; ++i) {
    const int p = descriptor_parent(i);
    if (p >= 0 && labels[i] != 0) labels[p] = 1;
  }
}

}  // namespace greyfeed
