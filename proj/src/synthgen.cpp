#include "greyfeed/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "greyfeed/error.hpp"
#include "greyfeed/pgm.hpp"

namespace greyfeed {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0, y = 0.0;
};

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double len(Vec2 a) { return std::sqrt(dot(a, a)); }

double sd_box(Vec2 p, double bx, double by) {
  const double qx = std::abs(p.x) - bx, qy = std::abs(p.y) - by;
  const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
}

double sd_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 pa = p - a, ba = b - a;
  const double denom = std::max(dot(ba, ba), 1e-12);
  const double h = std::clamp(dot(pa, ba) / denom, 0.0, 1.0);
  return len({pa.x - ba.x * h, pa.y - ba.y * h});
}

// even-odd interior test plus distance to the closest edge
double sd_polygon(const std::vector<Vec2>& v, Vec2 p) {
  double d2 = std::numeric_limits<double>::max();
  bool inside = false;
  const std::size_t n = v.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 e = v[j] - v[i], w = p - v[i];
    const double t = std::clamp(dot(w, e) / std::max(dot(e, e), 1e-12), 0.0, 1.0);
    const Vec2 b{w.x - e.x * t, w.y - e.y * t};
    d2 = std::min(d2, dot(b, b));
    if (((v[i].y <= p.y) != (v[j].y <= p.y)) &&
        (p.x < v[i].x + (p.y - v[i].y) * e.x / e.y))
      inside = !inside;
  }
  return (inside ? -1.0 : 1.0) * std::sqrt(d2);
}

double sd_polyline(const std::vector<Vec2>& pts, Vec2 p) {
  double d = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    d = std::min(d, sd_segment(p, pts[i], pts[i + 1]));
  return d;
}

// Blends `ink` wherever sdf < 0 in a frame rotated by theta about (cx, cy).
// Stamps only darken unless lighten is set (emblem interiors need it).
template <class Sdf>
void raster(Image& img, double cx, double cy, double reach, double theta, double ink,
            Sdf&& sdf, double aa = 1.6, bool lighten = false) {
  const double c = std::cos(theta), s = std::sin(theta);
  const Eigen::Index y0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(cy - reach)));
  const Eigen::Index y1 = std::min(img.height() - 1, Eigen::Index(std::ceil(cy + reach)));
  const Eigen::Index x0 = std::max<Eigen::Index>(0, Eigen::Index(std::floor(cx - reach)));
  const Eigen::Index x1 = std::min(img.width() - 1, Eigen::Index(std::ceil(cx + reach)));
  for (Eigen::Index y = y0; y <= y1; ++y)
    for (Eigen::Index x = x0; x <= x1; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      const Vec2 p{c * dx + s * dy, -s * dx + c * dy};
      const double alpha = std::clamp(0.5 - sdf(p) / aa, 0.0, 1.0);
      if (alpha <= 0.0) continue;
      const double blended = img(y, x) + (ink - img(y, x)) * alpha;
      img(y, x) = lighten ? blended : std::min(img(y, x), blended);
    }
}

std::vector<Vec2> jittered_ngon(Rng& rng, int n, double r, double radial_jitter,
                                double angular_jitter) {
  std::vector<Vec2> v(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double ang =
        2.0 * kPi * k / n + rng.uniform(-angular_jitter, angular_jitter) * 2.0 * kPi / n;
    const double rad = r * rng.uniform(1.0 - radial_jitter, 1.0 + radial_jitter);
    v[std::size_t(k)] = {rad * std::cos(ang), rad * std::sin(ang)};
  }
  return v;
}

double hash01(Eigen::Index x, Eigen::Index y, std::uint64_t salt) {
  const std::uint64_t h =
      splitmix64((std::uint64_t(std::uint32_t(x)) << 32) ^ std::uint64_t(std::uint32_t(y)) ^ salt);
  return double(h >> 11) * 0x1.0p-53;
}

int sample_class(Rng& rng, const Eigen::ArrayXd& mix) {
  const double u = rng.uniform() * mix.sum();
  double acc = 0.0;
  for (int c = 0; c < kNumDescriptors; ++c) {
    acc += mix(c);
    if (u < acc) return c;
  }
  return kNumDescriptors - 1;
}

}  // namespace

int polygon_sides(int descriptor) {
  switch (descriptor) {
    case D03: return 3;
    case D04: return 4;
    case D05: return 5;
    case D06: return 6;
    default: return 0;
  }
}

Eigen::ArrayXd default_class_mix() {
  Eigen::ArrayXd mix(kNumDescriptors);
  mix << 0.14,  // D01
      0.02,    // D01-01
      0.02,    // D01-02
      0.12,    // D02
      0.02,    // D02-01
      0.07,    // D03
      0.10,    // D04
      0.02,    // D05
      0.07,    // D06
      0.10,    // D07
      0.07,    // D08
      0.06,    // D09
      0.04,    // D10
      0.05,    // D11
      0.05,    // D12
      0.03,    // D13
      0.02;    // D14
  return mix;
}

void render_shape(Image& img, int descriptor, double cx, double cy, double r, Rng& rng) {
  const double reach = r * 1.7 + 16.0;
  switch (descriptor) {
    case D01: {
      const double theta = rng.uniform(0.0, kPi);
      const double t = rng.uniform(8.0, 16.0);
      const double ink = rng.uniform(0.05, 0.3);
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_box(p, r, t); });
      return;
    }
    case D01_01: {
      const double theta = rng.uniform(0.0, kPi);
      const double amp = rng.uniform(12.0, 26.0);
      const double cycles = rng.uniform(1.5, 3.0);
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double t = rng.uniform(5.0, 9.0);
      const double ink = rng.uniform(0.05, 0.3);
      std::vector<Vec2> pts(25);
      for (int i = 0; i < 25; ++i) {
        const double u = i / 24.0;
        pts[std::size_t(i)] = {-r + 2.0 * r * u, amp * std::sin(2.0 * kPi * cycles * u + phase)};
      }
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polyline(pts, p) - t; });
      return;
    }
    case D01_02: {
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double radius = r * rng.uniform(1.0, 1.5);
      const double span = rng.uniform(1.0, 2.0);
      const double t = rng.uniform(6.0, 10.0);
      const double ink = rng.uniform(0.05, 0.3);
      std::vector<Vec2> pts(21);
      double mean_y = 0.0;
      for (int i = 0; i < 21; ++i) {
        const double a = -span / 2.0 + span * i / 20.0;
        pts[std::size_t(i)] = {radius * std::sin(a), radius * (1.0 - std::cos(a))};
        mean_y += pts[std::size_t(i)].y / 21.0;
      }
      for (Vec2& p : pts) p.y -= mean_y;
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polyline(pts, p) - t; });
      return;
    }
    case D02: {
      const double theta = rng.uniform(0.0, kPi);
      const double ay = r * rng.uniform(0.6, 1.0);
      const double ink = rng.uniform(0.05, 0.3);
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) {
        return (len({p.x / r, p.y / ay}) - 1.0) * std::min(r, ay);
      });
      return;
    }
    case D02_01: {
      const int nr = int(rng.uniform_int(2, 3));
      const double t = rng.uniform(4.0, 7.0);
      const double ink = rng.uniform(0.05, 0.3);
      raster(img, cx, cy, reach, 0.0, ink, [&](Vec2 p) {
        double d = std::numeric_limits<double>::max();
        for (int i = 0; i < nr; ++i) d = std::min(d, std::abs(len(p) - r * (i + 1) / nr) - t);
        return d;
      });
      return;
    }
    case D03:
    case D04:
    case D05:
    case D06: {
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double ink = rng.uniform(0.05, 0.3);
      const auto verts = jittered_ngon(rng, polygon_sides(descriptor), r, 0.15, 0.25);
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polygon(verts, p); });
      return;
    }
    case D07: {
      const int spikes = int(rng.uniform_int(7, 9));
      const double inner = rng.uniform(0.38, 0.55);
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double ink = rng.uniform(0.05, 0.3);
      std::vector<Vec2> verts(std::size_t(2 * spikes));
      for (int k = 0; k < 2 * spikes; ++k) {
        const double rad = (k % 2 == 0) ? r : r * inner;
        const double ang = kPi * k / spikes;
        verts[std::size_t(k)] = {rad * std::cos(ang), rad * std::sin(ang)};
      }
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polygon(verts, p); });
      return;
    }
    case D08: {
      const double theta = rng.uniform(0.0, kPi);
      const int segs = int(rng.uniform_int(5, 8));
      const double amp = rng.uniform(18.0, 36.0);
      const double t = rng.uniform(5.0, 9.0);
      const double ink = rng.uniform(0.05, 0.3);
      std::vector<Vec2> pts(std::size_t(segs) + 1);
      for (int i = 0; i <= segs; ++i)
        pts[std::size_t(i)] = {-r + 2.0 * r * i / segs,
                               (i % 2 ? amp : -amp) * rng.uniform(0.8, 1.2)};
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polyline(pts, p) - t; });
      return;
    }
    case D09: {
      const double theta = rng.uniform(-0.3, 0.3);
      const int glyphs = int(rng.uniform_int(3, 5));
      const double t = rng.uniform(3.5, 5.5);
      const double ink = rng.uniform(0.05, 0.3);
      const double cellw = 2.0 * r / glyphs;
      std::vector<std::pair<Vec2, Vec2>> strokes;
      for (int j = 0; j < glyphs; ++j) {
        const double gx = -r + cellw * (j + 0.5);
        const double bx = cellw * 0.32, by = rng.uniform(16.0, 26.0);
        const int n = int(rng.uniform_int(2, 4));
        for (int k = 0; k < n; ++k)
          strokes.push_back({{gx + rng.uniform(-bx, bx), rng.uniform(-by, by)},
                             {gx + rng.uniform(-bx, bx), rng.uniform(-by, by)}});
      }
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) {
        double d = std::numeric_limits<double>::max();
        for (const auto& s : strokes) d = std::min(d, sd_segment(p, s.first, s.second));
        return d - t;
      });
      return;
    }
    case D10: {
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double ink = rng.uniform(0.05, 0.25);
      const auto verts = jittered_ngon(rng, 10, r * 0.85, 0.18, 0.2);
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) { return sd_polygon(verts, p); });
      if (rng.bernoulli(0.6)) {
        const double ink2 = std::min(ink + 0.45, 0.9);
        const int n = int(rng.uniform_int(1, 2));
        std::vector<std::pair<Vec2, Vec2>> strokes;
        const double b = r * 0.4;
        for (int k = 0; k < n; ++k)
          strokes.push_back({{rng.uniform(-b, b), rng.uniform(-b, b)},
                             {rng.uniform(-b, b), rng.uniform(-b, b)}});
        raster(
            img, cx, cy, reach, theta, ink2,
            [&](Vec2 p) {
              double d = std::numeric_limits<double>::max();
              for (const auto& s : strokes) d = std::min(d, sd_segment(p, s.first, s.second));
              return d - 4.5;
            },
            1.6, true);
      }
      return;
    }
    case D11: {
      const double theta = rng.uniform(0.0, kPi / 2.0);
      const double period = rng.uniform(18.0, 30.0);
      const double t = rng.uniform(2.5, 4.5);
      const double ink = rng.uniform(0.05, 0.3);
      const double rx = r * 1.15, ry = r * 0.8;
      raster(img, cx, cy, reach, theta, ink, [&](Vec2 p) {
        const double mu = std::abs(p.x - period * std::round(p.x / period)) - t;
        const double mv = std::abs(p.y - period * std::round(p.y / period)) - t;
        return std::max(std::min(mu, mv), sd_box(p, rx, ry));
      });
      return;
    }
    case D12: {
      const double rx = r * rng.uniform(0.8, 1.2), ry = r * rng.uniform(0.6, 0.9);
      const double density = rng.uniform(0.25, 0.45);
      const double ink = rng.uniform(0.05, 0.3);
      const std::uint64_t salt = rng.next_u64();
      const Eigen::Index y0 = std::max<Eigen::Index>(0, Eigen::Index(cy - ry));
      const Eigen::Index y1 = std::min(img.height() - 1, Eigen::Index(cy + ry));
      const Eigen::Index x0 = std::max<Eigen::Index>(0, Eigen::Index(cx - rx));
      const Eigen::Index x1 = std::min(img.width() - 1, Eigen::Index(cx + rx));
      for (Eigen::Index y = y0; y <= y1; ++y)
        for (Eigen::Index x = x0; x <= x1; ++x)
          if (hash01(x, y, salt) < density) img(y, x) = std::min(img(y, x), ink);
      return;
    }
    case D13: {
      const double theta = rng.uniform(0.0, 2.0 * kPi);
      const double t = rng.uniform(4.0, 7.0);
      const double ink = rng.uniform(0.05, 0.3);
      if (rng.bernoulli(0.4)) {
        raster(img, cx, cy, reach, theta, ink,
               [&](Vec2 p) { return std::abs(len(p) - r) - t; });
      } else {
        const auto verts = jittered_ngon(rng, int(rng.uniform_int(4, 6)), r, 0.12, 0.2);
        raster(img, cx, cy, reach, theta, ink,
               [&](Vec2 p) { return std::abs(sd_polygon(verts, p)) - t; });
      }
      return;
    }
    case D14: {
      const double tone = rng.uniform(0.55, 0.8);
      const double rx = r * rng.uniform(0.8, 1.2), ry = r * rng.uniform(0.6, 1.0);
      const double theta = rng.uniform(0.0, kPi);
      raster(
          img, cx, cy, reach, theta, tone, [&](Vec2 p) { return sd_box(p, rx, ry); }, 0.8);
      return;
    }
    default:
      throw ParamError("render_shape: bad descriptor index " + std::to_string(descriptor));
  }
}

namespace {

bool try_build(SyntheticSample& out, std::uint64_t seed, const Eigen::ArrayXd& mix,
               Eigen::Index h, Eigen::Index w) {
  Rng rng(seed);
  out.image = Image(h, w, 1.0);
  out.placed.clear();
  const int n_shapes = int(rng.uniform_int(1, 5));
  const double rmax = std::max(24.0, std::min(115.0, double(std::min(h, w)) / 2.5 - 12.0));
  const double rmin = std::min(55.0, rmax * 0.55);
  std::vector<std::array<double, 3>> boxes;
  for (int k = 0; k < n_shapes; ++k) {
    const int cls = sample_class(rng, mix);
    const double r = rng.uniform(rmin, rmax);
    const double margin = r + 12.0;
    bool ok = false;
    for (int attempt = 0; attempt < 40 && !ok; ++attempt) {
      if (2.0 * margin >= double(w) || 2.0 * margin >= double(h)) break;
      const double cx = rng.uniform(margin, double(w) - margin);
      const double cy = rng.uniform(margin, double(h) - margin);
      bool clash = false;
      for (const auto& b : boxes)
        clash = clash || std::hypot(cx - b[0], cy - b[1]) < 0.75 * (r + b[2]);
      if (clash) continue;
      render_shape(out.image, cls, cx, cy, r, rng);
      boxes.push_back({cx, cy, r});
      out.placed.push_back(cls);
      ok = true;
    }
    if (!ok) return false;
  }
  out.labels = Eigen::ArrayXd::Zero(kNumDescriptors);
  for (int cls : out.placed) out.labels(cls) = 1.0;
  apply_label_implications(out.labels);
  return true;
}

}  // namespace

SyntheticSample make_sample(std::uint64_t seed, const Eigen::ArrayXd& mix, Eigen::Index height,
                            Eigen::Index width) {
  if (mix.size() != kNumDescriptors)
    throw DimensionError("make_sample: class mix needs " + std::to_string(kNumDescriptors) +
                         " weights, got " + std::to_string(mix.size()));
  if ((mix < 0.0).any() || mix.sum() <= 0.0)
    throw ParamError("make_sample: class mix must be nonnegative with positive mass");
  if (height < 64 || width < 64) throw ParamError("make_sample: canvas too small");
  SyntheticSample out;
  out.seed = seed;
  for (int attempt = 0; attempt <= 20; ++attempt) {
    const std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, 7000 + std::uint64_t(attempt));
    if (try_build(out, s, mix, height, width)) {
      out.regenerated = attempt;
      return out;
    }
  }
  throw DataError("make_sample: shape placement failed after 20 regenerations");
}

std::vector<SyntheticSample> generate_samples(int n, std::uint64_t seed, const Eigen::ArrayXd& mix,
                                              Eigen::Index height, Eigen::Index width) {
  if (n < 1) throw ParamError("generate_samples: need n >= 1");
  std::vector<SyntheticSample> out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i)
    out.push_back(make_sample(derive_seed(seed, std::uint64_t(i)), mix, height, width));
  return out;
}

namespace {

void write_sample_row(const std::string& dir, std::ofstream& mf, std::size_t i,
                      const SyntheticSample& sample) {
  char name[32];
  std::snprintf(name, sizeof(name), "sample_%05zu.pgm", i);
  write_pgm(std::filesystem::path(dir) / name, sample.image);
  mf << name << ',';
  bool first = true;
  for (int c = 0; c < kNumDescriptors; ++c) {
    if (sample.labels(c) == 0.0) continue;
    if (!first) mf << ';';
    mf << descriptor_code(c);
    first = false;
  }
  mf << ',' << sample.seed << '\n';
}

std::ofstream open_manifest(const std::string& dir, std::string& manifest_path) {
  std::filesystem::create_directories(dir);
  manifest_path = dir + "/manifest.csv";
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("write_dataset: cannot open " + manifest_path);
  mf << "filename,labels,seed\n";
  return mf;
}

}  // namespace

std::string write_dataset(const std::string& dir, const std::vector<SyntheticSample>& samples) {
  std::string manifest_path;
  std::ofstream mf = open_manifest(dir, manifest_path);
  for (std::size_t i = 0; i < samples.size(); ++i) write_sample_row(dir, mf, i, samples[i]);
  if (!mf.good()) throw IoError("write_dataset: short write on " + manifest_path);
  return manifest_path;
}

std::string generate_dataset(const std::string& dir, int n, std::uint64_t seed,
                             const Eigen::ArrayXd& mix, Eigen::Index height, Eigen::Index width,
                             const std::function<void(const SyntheticSample&)>& on_sample) {
  if (n < 1) throw ParamError("generate_dataset: need n >= 1");
  std::string manifest_path;
  std::ofstream mf = open_manifest(dir, manifest_path);
  for (int i = 0; i < n; ++i) {
    const SyntheticSample sample = make_sample(derive_seed(seed, std::uint64_t(i)), mix, height,
                                               width);
    write_sample_row(dir, mf, std::size_t(i), sample);
    if (on_sample) on_sample(sample);
  }
  if (!mf.good()) throw IoError("generate_dataset: short write on " + manifest_path);
  return manifest_path;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_manifest: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("filename,labels,seed", 0) != 0)
    throw ParseError("read_manifest: bad header in " + path);
  std::vector<ManifestEntry> entries;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
      throw ParseError("read_manifest: row " + std::to_string(row) + " needs 3 fields");
    ManifestEntry e;
    e.filename = line.substr(0, c1);
    e.labels = Eigen::ArrayXd::Zero(kNumDescriptors);
    const std::string codes = line.substr(c1 + 1, c2 - c1 - 1);
    std::size_t pos = 0;
    while (pos < codes.size()) {
      auto next = codes.find(';', pos);
      if (next == std::string::npos) next = codes.size();
      const std::string code = codes.substr(pos, next - pos);
      const int idx = find_descriptor(code);
      if (idx < 0)
        throw ParseError("read_manifest: unknown code '" + code + "' at row " +
                         std::to_string(row));
      e.labels(idx) = 1.0;
      pos = next + 1;
    }
    try {
      e.seed = std::stoull(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw ParseError("read_manifest: bad seed at row " + std::to_string(row));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

}  // namespace greyfeed
