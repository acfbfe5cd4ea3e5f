#pragma once

#include <string>
#include <vector>

#include "greyfeed/tensor.hpp"

namespace greyfeed {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.1;
};

// Parameters that share one learning rate and freeze flag. Groups are held in
// depth order: earliest backbone stage first, preproc+head last.
struct ParamGroup {
  std::string name;
  std::vector<Tensor> params;
  double lr = 1e-3;
  bool frozen = false;
};

// Adam with decoupled weight decay: the bias-corrected moment step first, then
// p -= lr*wd*p as a separate assignment. Frozen groups keep state and step
// count untouched, so a group unfrozen later starts its trajectory fresh.
class AdamW {
 public:
  explicit AdamW(std::vector<ParamGroup> groups, AdamWConfig config = {});

  void step();
  void zero_grad();

  std::vector<ParamGroup>& groups() { return groups_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

 private:
  struct Slot {
    Eigen::ArrayXd m, v;
  };

  std::vector<ParamGroup> groups_;
  AdamWConfig cfg_;
  std::vector<std::vector<Slot>> slots_;
  std::vector<long> steps_;
};

// Geometric ramp from lr_min (first group) to lr_max (last); a single group
// gets lr_max, the rate the head would have received.
std::vector<double> discriminative_lrs(std::size_t n_groups, double lr_min, double lr_max);

void set_discriminative_lrs(std::vector<ParamGroup>& groups, double lr_min, double lr_max);

}  // namespace greyfeed
