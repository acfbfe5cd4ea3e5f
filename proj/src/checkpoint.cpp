#include "greyfeed/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "greyfeed/error.hpp"

namespace greyfeed {

namespace {

constexpr char kMagic[4] = {'G', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::ostream& out, const std::string& s) {
  put(out, std::uint32_t(s.size()));
  out.write(s.data(), std::streamsize(s.size()));
}

void put_array(std::ostream& out, const Eigen::ArrayXd& a) {
  put(out, std::uint64_t(a.size()));
  out.write(reinterpret_cast<const char*>(a.data()), std::streamsize(a.size() * 8));
}

template <class T>
T take(std::istream& in, const std::string& what) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("checkpoint: truncated while reading " + what);
  return v;
}

std::string take_str(std::istream& in, const std::string& what) {
  const auto n = take<std::uint32_t>(in, what);
  if (n > 4096) throw ParseError("checkpoint: implausible string length in " + what);
  std::string s(n, '\0');
  in.read(s.data(), std::streamsize(n));
  if (!in) throw ParseError("checkpoint: truncated while reading " + what);
  return s;
}

Eigen::ArrayXd take_array(std::istream& in, const std::string& what) {
  const auto n = take<std::uint64_t>(in, what);
  if (n > (1ull << 32)) throw ParseError("checkpoint: implausible array length in " + what);
  Eigen::ArrayXd a(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(a.data()), std::streamsize(n * 8));
  if (!in) throw ParseError("checkpoint: truncated while reading " + what);
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, 4);
  put(out, kVersion);

  const ModelSpec& s = model.spec;
  put(out, std::uint32_t(s.preproc.kind));
  put(out, std::int32_t(s.preproc.branch_width));
  put(out, std::uint32_t(s.backbone_channels.size()));
  for (int c : s.backbone_channels) put(out, std::int32_t(c));
  put(out, std::int32_t(s.head_hidden));
  put(out, s.head_dropout1);
  put(out, s.head_dropout2);
  put(out, std::int32_t(s.n_classes));

  put_str(out, meta.channels);
  put_str(out, meta.resize_mode);
  put(out, std::int32_t(meta.target_h));
  put(out, std::int32_t(meta.target_w));
  put_str(out, meta.loss);
  put(out, std::int32_t(meta.batch_size));
  put(out, meta.seed);

  const auto params = model.parameters();
  put(out, std::uint64_t(params.size()));
  for (const Tensor& p : params) put_array(out, p.data());

  const auto stats = model.running_stats();
  put(out, std::uint64_t(stats.size()));
  for (const BnStats* st : stats) {
    put_array(out, st->mean);
    put_array(out, st->var);
  }
  if (!out.good()) throw IoError("checkpoint: short write on " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  const auto version = take<std::uint32_t>(in, "version");
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));

  ModelSpec spec;
  const auto kind = take<std::uint32_t>(in, "preproc kind");
  if (kind > std::uint32_t(PreprocKind::no_tfm)) throw ParseError("checkpoint: bad preproc kind");
  spec.preproc.kind = PreprocKind(kind);
  spec.preproc.branch_width = take<std::int32_t>(in, "branch width");
  const auto n_stages = take<std::uint32_t>(in, "stage count");
  if (n_stages == 0 || n_stages > 64) throw ParseError("checkpoint: bad stage count");
  spec.backbone_channels.clear();
  for (std::uint32_t i = 0; i < n_stages; ++i)
    spec.backbone_channels.push_back(take<std::int32_t>(in, "stage channels"));
  spec.head_hidden = take<std::int32_t>(in, "head hidden");
  spec.head_dropout1 = take<double>(in, "head dropout");
  spec.head_dropout2 = take<double>(in, "head dropout");
  spec.n_classes = take<std::int32_t>(in, "class count");

  CheckpointMeta meta;
  meta.channels = take_str(in, "channel config");
  meta.resize_mode = take_str(in, "resize mode");
  meta.target_h = take<std::int32_t>(in, "target height");
  meta.target_w = take<std::int32_t>(in, "target width");
  meta.loss = take_str(in, "loss kind");
  meta.batch_size = take<std::int32_t>(in, "batch size");
  meta.seed = take<std::uint64_t>(in, "seed");

  LoadedCheckpoint loaded{meta, Model(spec, meta.seed)};
  auto params = loaded.model.parameters();
  const auto n_params = take<std::uint64_t>(in, "parameter count");
  if (n_params != params.size())
    throw ParseError("checkpoint: parameter count mismatch in " + path);
  for (Tensor& p : params) {
    Eigen::ArrayXd a = take_array(in, "parameter data");
    if (a.size() != p.data().size())
      throw ParseError("checkpoint: parameter shape mismatch in " + path);
    p.data() = std::move(a);
  }
  const auto stats = loaded.model.running_stats();
  const auto n_stats = take<std::uint64_t>(in, "stat count");
  if (n_stats != stats.size()) throw ParseError("checkpoint: stat count mismatch in " + path);
  for (BnStats* st : stats) {
    Eigen::ArrayXd mean = take_array(in, "running mean");
    Eigen::ArrayXd var = take_array(in, "running var");
    if (mean.size() != st->mean.size() || var.size() != st->var.size())
      throw ParseError("checkpoint: stat shape mismatch in " + path);
    st->mean = std::move(mean);
    st->var = std::move(var);
  }
  return loaded;
}

}  // namespace greyfeed
