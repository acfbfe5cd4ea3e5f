#include "greyfeed/layers.hpp"

#include <cmath>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

Eigen::ArrayXd glorot(Rng& rng, Eigen::Index n, double fan_in, double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Eigen::ArrayXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out(i) = rng.uniform(-limit, limit);
  return out;
}

}  // namespace

PreprocKind preproc_from_string(const std::string& name) {
  if (name == "cbn_1") return PreprocKind::cbn_1;
  if (name == "cbn_3") return PreprocKind::cbn_3;
  if (name == "inc") return PreprocKind::inc;
  if (name == "inc_d") return PreprocKind::inc_d;
  if (name == "no_tfm") return PreprocKind::no_tfm;
  throw ParamError("unknown preprocessing kind '" + name + "'");
}

std::string preproc_name(PreprocKind kind) {
  switch (kind) {
    case PreprocKind::cbn_1: return "cbn_1";
    case PreprocKind::cbn_3: return "cbn_3";
    case PreprocKind::inc: return "inc";
    case PreprocKind::inc_d: return "inc_d";
    case PreprocKind::no_tfm: return "no_tfm";
  }
  throw ParamError("unknown preprocessing kind");
}

Conv2dLayer::Conv2dLayer(Rng& rng, int cin, int cout, int k, int stride, int pad)
    : stride(stride), pad(pad) {
  if (cin < 1 || cout < 1 || k < 1)
    throw ParamError("conv layer: channels and kernel must be positive");
  const Eigen::Index n = Eigen::Index(cout) * cin * k * k;
  weight = Tensor::from_data({cout, cin, k, k},
                             glorot(rng, n, double(cin) * k * k, double(cout) * k * k), true);
  bias = Tensor::zeros({cout}, true);
}

void Conv2dLayer::collect(std::vector<Tensor>& out) const {
  out.push_back(weight);
  out.push_back(bias);
}

BatchNorm2dLayer::BatchNorm2dLayer(int channels, double momentum, double eps)
    : gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)),
      stats(channels),
      momentum(momentum),
      eps(eps) {}

void BatchNorm2dLayer::collect(std::vector<Tensor>& out) const {
  out.push_back(gamma);
  out.push_back(beta);
}

BatchNorm1dLayer::BatchNorm1dLayer(int features, double momentum, double eps)
    : gamma(Tensor::full({features}, 1.0, true)),
      beta(Tensor::zeros({features}, true)),
      stats(features),
      momentum(momentum),
      eps(eps) {}

void BatchNorm1dLayer::collect(std::vector<Tensor>& out) const {
  out.push_back(gamma);
  out.push_back(beta);
}

LinearLayer::LinearLayer(Rng& rng, int in, int out) {
  if (in < 1 || out < 1) throw ParamError("linear layer: features must be positive");
  weight = Tensor::from_data({out, in}, glorot(rng, Eigen::Index(out) * in, in, out), true);
  bias = Tensor::zeros({out}, true);
}

void LinearLayer::collect(std::vector<Tensor>& out) const {
  out.push_back(weight);
  out.push_back(bias);
}

Preproc::Preproc(const PreprocSpec& spec, Rng& rng) : spec(spec) {
  switch (spec.kind) {
    case PreprocKind::no_tfm:
      return;
    case PreprocKind::cbn_1:
      reduce.emplace_back(rng, 3, 3, 1, 1, 0);
      break;
    case PreprocKind::cbn_3:
      reduce.emplace_back(rng, 3, 3, 3, 1, 1);
      break;
    case PreprocKind::inc:
    case PreprocKind::inc_d: {
      if (spec.branch_width < 1) throw ParamError("preproc: branch width must be positive");
      const int w = spec.branch_width;
      branches.emplace_back(rng, 3, w, 1, 1, 0);
      branches.emplace_back(rng, 3, w, 3, 1, 1);
      branches.emplace_back(rng, 3, w, 5, 1, 2);
      const int merged = 3 * w + (spec.kind == PreprocKind::inc_d ? 3 : 0);
      reduce.emplace_back(rng, merged, 3, 1, 1, 0);
      break;
    }
  }
  norm.emplace_back(3);
}

Tensor Preproc::forward(const Tensor& x, BnMode mode) {
  if (spec.kind == PreprocKind::no_tfm) return x;
  Tensor merged = x;
  if (!branches.empty()) {
    std::vector<Tensor> parts;
    for (const Conv2dLayer& b : branches) parts.push_back(b.forward(x));
    if (spec.kind == PreprocKind::inc_d) parts.push_back(x);
    merged = concat_channels(parts);
  }
  return norm[0].forward(reduce[0].forward(merged), mode);
}

void Preproc::collect(std::vector<Tensor>& out) const {
  for (const Conv2dLayer& b : branches) b.collect(out);
  for (const Conv2dLayer& c : reduce) c.collect(out);
  for (const BatchNorm2dLayer& n : norm) n.collect(out);
}

void BackboneStage::collect(std::vector<Tensor>& out) const {
  conv.collect(out);
  bn.collect(out);
}

Backbone::Backbone(const std::vector<int>& channels, Rng& rng) {
  if (channels.empty()) throw ParamError("backbone: empty channel list");
  int cin = 3;
  for (int cout : channels) {
    stages.emplace_back(rng, cin, cout);
    cin = cout;
  }
}

Tensor Backbone::forward(const Tensor& x, bool training) {
  const BnMode mode = (training && !frozen) ? BnMode::train : BnMode::eval;
  Tensor t = x;
  for (BackboneStage& stage : stages) t = relu(stage.bn.forward(stage.conv.forward(t), mode));
  return t;
}

Head::Head(Rng& rng, int in_features, int hidden, int n_classes, double d1, double d2)
    : bn1(in_features),
      bn2(hidden),
      fc1(rng, in_features, hidden),
      fc2(rng, hidden, n_classes),
      drop1(d1),
      drop2(d2) {
  if (hidden < 1) throw ParamError("head: hidden width must be positive");
}

Tensor Head::forward(const Tensor& x, bool training, Rng& rng) {
  const BnMode mode = training ? BnMode::train : BnMode::eval;
  Tensor t = flatten(adaptive_avg_pool2d(x));
  t = dropout(bn1.forward(t, mode), drop1, rng, training);
  t = relu(fc1.forward(t));
  t = dropout(bn2.forward(t, mode), drop2, rng, training);
  return sigmoid(fc2.forward(t));
}

void Head::collect(std::vector<Tensor>& out) const {
  bn1.collect(out);
  fc1.collect(out);
  bn2.collect(out);
  fc2.collect(out);
}

Model::Model(const ModelSpec& spec, std::uint64_t seed)
    : spec(spec),
      preproc(
          [&] {
            Rng r(derive_seed(seed, 1));
            return Preproc(spec.preproc, r);
          }()),
      backbone([&] {
        Rng r(derive_seed(seed, 2));
        return Backbone(spec.backbone_channels, r);
      }()),
      head([&] {
        Rng r(derive_seed(seed, 3));
        return Head(r, spec.backbone_channels.back(), spec.head_hidden, spec.n_classes,
                    spec.head_dropout1, spec.head_dropout2);
      }()) {
  if (spec.n_classes < 1) throw ParamError("model: need at least one class");
}

Tensor Model::forward(const Tensor& x, bool training, Rng& rng) {
  Tensor t = preproc.forward(x, training ? BnMode::train : BnMode::eval);
  t = backbone.forward(t, training);
  return head.forward(t, training, rng);
}

void Model::set_frozen(bool frozen) {
  backbone.frozen = frozen;
  std::vector<Tensor> params;
  for (const BackboneStage& stage : backbone.stages) stage.collect(params);
  for (Tensor& p : params) p.set_requires_grad(!frozen);
}

std::vector<ParamGroup> Model::param_groups() {
  std::vector<ParamGroup> groups;
  for (std::size_t i = 0; i < backbone.stages.size(); ++i) {
    ParamGroup g;
    g.name = "stage" + std::to_string(i + 1);
    g.frozen = backbone.frozen;
    backbone.stages[i].collect(g.params);
    groups.push_back(std::move(g));
  }
  ParamGroup g;
  g.name = "preproc+head";
  preproc.collect(g.params);
  head.collect(g.params);
  groups.push_back(std::move(g));
  return groups;
}

std::vector<Tensor> Model::parameters() {
  std::vector<Tensor> out;
  preproc.collect(out);
  for (const BackboneStage& stage : backbone.stages) stage.collect(out);
  head.collect(out);
  return out;
}

std::vector<BnStats*> Model::running_stats() {
  std::vector<BnStats*> out;
  for (BatchNorm2dLayer& n : preproc.norm) out.push_back(&n.stats);
  for (BackboneStage& stage : backbone.stages) out.push_back(&stage.bn.stats);
  out.push_back(&head.bn1.stats);
  out.push_back(&head.bn2.stats);
  return out;
}

long Model::param_count() {
  long n = 0;
  for (const Tensor& p : parameters()) n += long(p.numel());
  return n;
}

}  // namespace greyfeed
