#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greyfeed/descriptors.hpp"
#include "greyfeed/optim.hpp"
#include "greyfeed/rng.hpp"
#include "greyfeed/tensor.hpp"
#include "greyfeed/tensor_ops.hpp"

namespace greyfeed {

enum class PreprocKind { cbn_1, cbn_3, inc, inc_d, no_tfm };

PreprocKind preproc_from_string(const std::string& name);
std::string preproc_name(PreprocKind kind);

struct PreprocSpec {
  PreprocKind kind = PreprocKind::inc_d;
  int branch_width = 8;  // inc variants only
};

struct ModelSpec {
  PreprocSpec preproc;
  std::vector<int> backbone_channels{16, 32, 64, 128};
  int head_hidden = 512;
  double head_dropout1 = 0.25;
  double head_dropout2 = 0.5;
  int n_classes = kNumDescriptors;
};

struct Conv2dLayer {
  Tensor weight, bias;  // [Cout,Cin,k,k], [Cout]
  int stride = 1, pad = 0;

  Conv2dLayer(Rng& rng, int cin, int cout, int k, int stride, int pad);
  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, pad); }
  void collect(std::vector<Tensor>& out) const;
};

struct BatchNorm2dLayer {
  Tensor gamma, beta;
  BnStats stats;
  double momentum = 0.1, eps = 1e-5;

  explicit BatchNorm2dLayer(int channels, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, BnMode mode) {
    return batchnorm2d(x, gamma, beta, stats, mode, momentum, eps);
  }
  void collect(std::vector<Tensor>& out) const;
};

struct BatchNorm1dLayer {
  Tensor gamma, beta;
  BnStats stats;
  double momentum = 0.1, eps = 1e-5;

  explicit BatchNorm1dLayer(int features, double momentum = 0.1, double eps = 1e-5);
  Tensor forward(const Tensor& x, BnMode mode) {
    return batchnorm1d(x, gamma, beta, stats, mode, momentum, eps);
  }
  void collect(std::vector<Tensor>& out) const;
};

struct LinearLayer {
  Tensor weight, bias;  // [out,in], [out]

  LinearLayer(Rng& rng, int in, int out);
  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(std::vector<Tensor>& out) const;
};

// All kinds keep spatial extents and emit 3 channels; only the path in between
// differs. no_tfm holds no layers at all.
struct Preproc {
  PreprocSpec spec;
  std::vector<Conv2dLayer> branches;   // inc variants: 1x1, 3x3, 5x5
  std::vector<Conv2dLayer> reduce;     // cbn conv, or the reducing 1x1
  std::vector<BatchNorm2dLayer> norm;

  Preproc(const PreprocSpec& spec, Rng& rng);
  Tensor forward(const Tensor& x, BnMode mode);
  void collect(std::vector<Tensor>& out) const;
};

struct BackboneStage {
  Conv2dLayer conv;
  BatchNorm2dLayer bn;

  BackboneStage(Rng& rng, int cin, int cout) : conv(rng, cin, cout, 3, 2, 1), bn(cout) {}
  void collect(std::vector<Tensor>& out) const;
};

// conv3x3/s2 → bn → relu per stage. When frozen the stages normalize by their
// running stats regardless of the training flag, so repeated phase-1 steps
// leave every backbone bit untouched.
struct Backbone {
  std::vector<BackboneStage> stages;
  bool frozen = false;

  Backbone(const std::vector<int>& channels, Rng& rng);
  Tensor forward(const Tensor& x, bool training);
};

struct Head {
  BatchNorm1dLayer bn1, bn2;
  LinearLayer fc1, fc2;
  double drop1, drop2;

  Head(Rng& rng, int in_features, int hidden, int n_classes, double d1, double d2);
  Tensor forward(const Tensor& x, bool training, Rng& rng);
  void collect(std::vector<Tensor>& out) const;
};

struct Model {
  ModelSpec spec;
  Preproc preproc;
  Backbone backbone;
  Head head;

  Model(const ModelSpec& spec, std::uint64_t seed);

  Tensor forward(const Tensor& x, bool training, Rng& rng);

  // Freezing stops optimizer updates (via the group flag), gradient flow, and
  // running-stat drift in one go.
  void set_frozen(bool frozen);

  // Ordered: one group per backbone stage (earliest first), then preproc+head.
  std::vector<ParamGroup> param_groups();
  std::vector<Tensor> parameters();
  std::vector<BnStats*> running_stats();
  long param_count();
};

}  // namespace greyfeed
