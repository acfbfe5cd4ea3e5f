#include "greyfeed/optim.hpp"

#include <cmath>

#include "greyfeed/error.hpp"

namespace greyfeed {

AdamW::AdamW(std::vector<ParamGroup> groups, AdamWConfig config)
    : groups_(std::move(groups)), cfg_(config) {
  if (cfg_.beta1 < 0.0 || cfg_.beta1 >= 1.0 || cfg_.beta2 < 0.0 || cfg_.beta2 >= 1.0)
    throw ParamError("adamw: betas must lie in [0,1)");
  if (cfg_.eps <= 0.0) throw ParamError("adamw: eps must be positive");
  if (cfg_.weight_decay < 0.0) throw ParamError("adamw: negative weight decay");
  slots_.resize(groups_.size());
  steps_.assign(groups_.size(), 0);
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    slots_[gi].resize(groups_[gi].params.size());
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      const auto n = groups_[gi].params[pi].numel();
      slots_[gi][pi].m = Eigen::ArrayXd::Zero(n);
      slots_[gi][pi].v = Eigen::ArrayXd::Zero(n);
    }
  }
}

void AdamW::step() {
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    ParamGroup& group = groups_[gi];
    if (group.frozen) continue;
    if (!(group.lr > 0.0))
      throw ParamError("adamw: group '" + group.name + "' has non-positive lr");
    const long t = ++steps_[gi];
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t));
    for (std::size_t pi = 0; pi < group.params.size(); ++pi) {
      Tensor& p = group.params[pi];
      Eigen::ArrayXd& data = p.data();
      Slot& slot = slots_[gi][pi];
      if (p.has_grad()) {
        const Eigen::ArrayXd& g = p.grad();
        if (!g.allFinite())
          throw NumericError("adamw: non-finite gradient in group '" + group.name + "'");
        slot.m = cfg_.beta1 * slot.m + (1.0 - cfg_.beta1) * g;
        slot.v = cfg_.beta2 * slot.v + (1.0 - cfg_.beta2) * g.square();
      } else {
        slot.m *= cfg_.beta1;
        slot.v *= cfg_.beta2;
      }
      data -= group.lr * (slot.m / bc1) / ((slot.v / bc2).sqrt() + cfg_.eps);
      if (cfg_.weight_decay != 0.0) data -= (group.lr * cfg_.weight_decay) * data;
    }
  }
}

void AdamW::zero_grad() {
  for (ParamGroup& group : groups_)
    for (Tensor& p : group.params) p.zero_grad();
}

std::vector<double> discriminative_lrs(std::size_t n_groups, double lr_min, double lr_max) {
  if (n_groups == 0) throw ParamError("discriminative_lrs: no parameter groups");
  if (!(lr_min > 0.0) || !(lr_max > 0.0))
    throw ParamError("discriminative_lrs: rates must be positive");
  if (lr_min > lr_max) throw ParamError("discriminative_lrs: lr_min exceeds lr_max");
  std::vector<double> lrs(n_groups, lr_max);
  if (n_groups == 1) return lrs;
  const double ratio = lr_max / lr_min;
  for (std::size_t i = 0; i < n_groups; ++i)
    lrs[i] = lr_min * std::pow(ratio, double(i) / double(n_groups - 1));
  lrs.back() = lr_max;  // pin the endpoint against pow round-off
  return lrs;
}

void set_discriminative_lrs(std::vector<ParamGroup>& groups, double lr_min, double lr_max) {
  const std::vector<double> lrs = discriminative_lrs(groups.size(), lr_min, lr_max);
  for (std::size_t i = 0; i < groups.size(); ++i) groups[i].lr = lrs[i];
}

}  // namespace greyfeed
