// Acceptance runner: one PASS/FAIL line per criterion.
// MMBSN_ACCEPT_ONLY=1,3,8 restricts the run to the listed criteria.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "mmbsn/checkpoint.hpp"
#include "mmbsn/mask.hpp"
#include "mmbsn/model.hpp"
#include "mmbsn/noise.hpp"
#include "mmbsn/pd.hpp"
#include "mmbsn/train.hpp"
#include "mmbsn/verify.hpp"
#include "support.hpp"

using namespace mmbsn;
using testsupport::random_tensor;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// ------------------------------------------------------------------ 1

Outcome blind_spot_exactness() {
  constexpr int kRadius = 6;
  int configs = 0;
  std::ostringstream bad;
  for (MaskTag tag : builtin_mask_tags()) {
    for (int k : {3, 5}) {
      for (int d : {2, 3}) {
        ArchitectureConfig cfg;
        cfg.base_channels = 8;
        cfg.masks = {tag};
        cfg.kernel_sizes = {k};
        cfg.dilations = {d};
        const ModelGraph model = build_mmbsn(cfg);
        const ExclusionSet theory = exclusion_set(render_mask(tag, k), d, kRadius,
                                                  cfg.cdcl_depth + cfg.trunk_depth);
        EmpiricalOptions opt;
        opt.radius = kRadius;
        opt.trials = 3;
        opt.seed = static_cast<std::uint64_t>(configs) * 7919 + 1;
        const ExclusionSet measured = empirical_exclusion(model, opt);
        if (!(theory == measured)) {
          bad << " " << mask_name(tag) << "/k" << k << "/d" << d;
        }
        ++configs;
      }
    }
  }
  const std::string b = bad.str();
  return {b.empty(), std::to_string(configs) + " configs, 3 weight draws each" +
                         (b.empty() ? "" : "; mismatched:" + b)};
}

// ------------------------------------------------------------------ 2

Outcome parameter_counts() {
  ArchitectureConfig cfg;  // C=128, depths 2/7, sizes [3,5]
  ArchitectureConfig two = cfg;
  two.masks = {MaskTag::Slash, MaskTag::Backslash};
  const std::size_t ap = count_params(build_apbsn(cfg));
  const std::size_t mm = count_params(build_mmbsn(two));
  const std::size_t smm = count_params(build_smmbsn(two));
  testsupport::Inventory inv{128, 3, 2, 2, 7, {3, 5}};
  testsupport::Inventory inv1 = inv;
  inv1.n_masks = 1;
  const bool exact = ap == inv1.apbsn() && mm == inv.mmbsn() && smm == inv.smmbsn();
  auto within = [](std::size_t n, double target) {
    return std::abs(static_cast<double>(n) - target) <= 0.10 * target;
  };
  const bool ok = exact && within(ap, 3.7e6) && within(mm, 5.3e6) && within(smm, 7.3e6);
  std::ostringstream d;
  d << "AP-BSN " << ap << " (3.7M), MM-BSN " << mm << " (5.3M), SMM-BSN " << smm
    << " (7.3M), inventory " << (exact ? "exact" : "MISMATCH");
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 3

Outcome pd_round_trip() {
  std::mt19937_64 rng(3);
  int checked = 0;
  for (int s : {1, 2, 5}) {
    for (int i = 0; i < 100; ++i) {
      const std::size_t h = 5 + rng() % 40, w = 5 + rng() % 40;
      const Tensor4 x = random_tensor({1 + rng() % 2, 3, h, w}, rng());
      if (!(pd_inv(pd(x, s), s, h, w) == x)) {
        return {false, "round trip differs at s=" + std::to_string(s) + " size " +
                           x.shape().str()};
      }
      ++checked;
    }
  }
  return {true, std::to_string(checked) + " images, s in {1,2,5}, bit-exact"};
}

// ------------------------------------------------------------------ 4

Outcome gradients() {
  std::ostringstream d;
  bool ok = true;
  std::size_t total = 0;
  auto run = [&](const std::string& name, const ModelGraph& g, Shape4 in, std::uint64_t seed) {
    const auto r = testsupport::grad_check(g, random_tensor(in, seed), 120, seed + 1);
    total += r.checked;
    const bool pass = r.checked >= 100 && r.max_rel < 1e-4;
    ok = ok && pass;
    d << name << " " << r.max_rel << (pass ? "" : "(FAIL)") << "; ";
  };

  {
    ModelGraph g(3);
    g.add_conv(g.input(), 4, 5, 2, "conv", render_mask(MaskTag::Star, 5));
    g.init(11);
    run("masked-dilated-conv", g, {2, 3, 9, 9}, 1);
  }
  {
    ModelGraph g(3);
    g.add_conv(g.input(), 5, 1, 1, "pw");
    g.init(12);
    run("1x1-conv", g, {2, 3, 6, 6}, 2);
  }
  {
    ModelGraph g(3);
    const int a = g.add_conv(g.input(), 4, 3, 1, "a");
    g.add_relu(a);
    g.init(13);
    run("conv+relu", g, {1, 3, 8, 8}, 3);
  }
  {
    ModelGraph g(3);
    const int a = g.add_conv(g.input(), 2, 3, 3, "a");
    const int b = g.add_conv(g.input(), 3, 3, 1, "b", render_mask(MaskTag::O, 3));
    const int c = g.add_concat({a, b});
    g.add_conv(c, 2, 1, 1, "fuse");
    g.init(14);
    run("concat", g, {1, 3, 8, 8}, 4);
  }
  {
    ArchitectureConfig cfg;
    cfg.base_channels = 4;
    cfg.masks = {MaskTag::Slash, MaskTag::Backslash};
    cfg.cdcl_depth = 1;
    cfg.trunk_depth = 2;
    ModelGraph g = build_mmbsn(cfg);
    g.init(15);
    run("toy-mmbsn", g, {1, 3, 12, 12}, 5);
  }
  d << total << " components, bound 1e-4";
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 5-7

struct Dataset {
  std::vector<Tensor4> train_noisy;
  std::vector<Tensor4> test_clean;
  std::vector<Tensor4> test_noisy;
};

Tensor4 plus(const Tensor4& a, const Tensor4& b) {
  Tensor4 out = a;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += b[j];
  return out;
}

const std::vector<CleanPattern> kMixedPatterns = {CleanPattern::Disks, CleanPattern::Gradient,
                                                  CleanPattern::Disks, CleanPattern::Stripes};

// With several noise shapes, image i uses shape (i + i/4) mod count, so every
// pattern meets every shape.
Dataset make_dataset(const NoiseSpec& base, std::uint64_t seed,
                     const std::vector<CleanPattern>& patterns = kMixedPatterns,
                     const std::vector<MaskShape>& noise_shapes = {}) {
  constexpr std::size_t kSide = 64;
  Dataset ds;
  auto pair = [&](std::uint64_t s, int i) {
    Tensor4 clean = gen_clean(patterns[static_cast<std::size_t>(i) % patterns.size()], kSide, s);
    NoiseSpec n = base;
    n.seed = s * 31 + 7;
    if (!noise_shapes.empty()) {
      n.shape = noise_shapes[static_cast<std::size_t>(i + i / 4) % noise_shapes.size()];
    }
    Tensor4 noisy = plus(clean, gen_correlated_noise(n, kSide, kSide, 3));
    return std::make_pair(std::move(clean), std::move(noisy));
  };
  for (int i = 0; i < 16; ++i) ds.train_noisy.push_back(pair(seed * 1000 + i, i).second);
  for (int i = 0; i < 4; ++i) {
    auto [c, n] = pair(seed * 1000 + 500 + i, i);
    ds.test_clean.push_back(std::move(c));
    ds.test_noisy.push_back(std::move(n));
  }
  return ds;
}

struct Score {
  double denoised = 0.0;
  double noisy = 0.0;
};

TrainingConfig toy_config(Architecture arch, std::vector<MaskShape> masks, int pd_train) {
  TrainingConfig t = toy_training_config();
  t.arch = arch;
  t.architecture.masks = std::move(masks);
  t.batch = 8;
  t.crop = 32;
  t.epochs = 1;
  t.steps_per_epoch = 500;
  t.lr = 1e-3;
  t.pd_train = pd_train;
  t.seed = 2024;
  return t;
}

// Scored on 32x32 tiles of the held-out images: the network only ever sees
// crop-sized inputs in training, and its output drifts on larger ones.
Score train_and_score(const TrainingConfig& cfg, const Dataset& ds) {
  const TrainResult r = train(cfg, ds.train_noisy);
  DenoiseOptions opt;
  opt.stride = cfg.pd_train;
  const std::size_t tile = static_cast<std::size_t>(cfg.crop);
  Score s;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.test_clean.size(); ++i) {
    for (std::size_t y = 0; y + tile <= ds.test_clean[i].height(); y += tile)
      for (std::size_t x = 0; x + tile <= ds.test_clean[i].width(); x += tile) {
        CropSpec c;
        c.y = y;
        c.x = x;
        c.size = tile;
        const Tensor4 clean = extract_crop(ds.test_clean[i], c);
        const Tensor4 noisy = extract_crop(ds.test_noisy[i], c);
        s.denoised += psnr(denoise(r.checkpoint.model, noisy, opt), clean);
        s.noisy += psnr(clamp01(noisy), clean);
        ++n;
      }
  }
  s.denoised /= static_cast<double>(n);
  s.noisy /= static_cast<double>(n);
  return s;
}

std::string db(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f dB", v);
  return buf;
}

// Criteria 5 and 6 share one toy geometry: a single 5x5 masked conv at
// dilation 4, CDCL and trunk depth 1. At the default dilations [2,3] the
// dilated layers reach straight back into a 5x5 mask's inner ring (and a 3x3
// square masks the whole kernel), so masks would not hide what their shape says.
TrainingConfig toy_geometry(TrainingConfig t) {
  t.architecture.kernel_sizes = {5};
  t.architecture.dilations = {4};
  t.architecture.cdcl_depth = 1;
  t.architecture.trunk_depth = 1;
  return t;
}

// Stripes are left out here: at stride 2 their period falls inside the
// square's 3x3 blind spot and no blind-spot net can rebuild them.
Outcome square_vs_center() {
  NoiseSpec noise;
  noise.sigma = 0.2;
  noise.shape = MaskTag::Square;
  noise.support = 5;
  const Dataset ds = make_dataset(noise, 5, {CleanPattern::Disks, CleanPattern::Gradient});
  const Score o = train_and_score(toy_geometry(toy_config(Architecture::MmBsn, {MaskTag::O}, 2)), ds);
  const Score sq =
      train_and_score(toy_geometry(toy_config(Architecture::MmBsn, {MaskTag::Square}, 2)), ds);
  const double gap = sq.denoised - o.denoised;
  return {gap >= 1.0, "square " + db(sq.denoised) + " vs o " + db(o.denoised) + ", gap " +
                          db(gap) + " (need >= 1 dB); noisy " + db(o.noisy)};
}

Score g_mmbsn_score;
bool g_mmbsn_ran = false;

// Each image carries either '/'- or '\'-correlated noise.
Outcome multi_mask_benefit() {
  NoiseSpec noise;
  noise.sigma = 0.2;
  noise.support = 5;
  const Dataset ds = make_dataset(noise, 6, kMixedPatterns, {MaskTag::Slash, MaskTag::Backslash});
  const Score ap = train_and_score(toy_geometry(toy_config(Architecture::ApBsn, {MaskTag::O}, 2)), ds);
  const Score mm = train_and_score(
      toy_geometry(toy_config(Architecture::MmBsn, {MaskTag::Slash, MaskTag::Backslash}, 2)), ds);
  g_mmbsn_score = mm;
  g_mmbsn_ran = true;
  const double gap = mm.denoised - ap.denoised;
  return {gap >= 0.5, "MM-BSN " + db(mm.denoised) + " vs AP-BSN " + db(ap.denoised) + ", gap " +
                          db(gap) + " (need >= 0.5 dB)"};
}

Outcome denoising_sanity() {
  if (!g_mmbsn_ran) multi_mask_benefit();
  const double gain = g_mmbsn_score.denoised - g_mmbsn_score.noisy;
  return {gain >= 2.0, "MM-BSN " + db(g_mmbsn_score.denoised) + " vs noisy " +
                           db(g_mmbsn_score.noisy) + ", gain " + db(gain) + " (need >= 2 dB)"};
}

// ------------------------------------------------------------------ 8

Outcome noise_analyzer() {
  bool ok = true;
  std::ostringstream d;
  {
    Tensor4 r(1, 1, 20, 20);
    for (int y = 1; y < 4; ++y)
      for (int x = 1; x < 4; ++x) r.at(0, 0, y, x) = 1.0;
    for (int y = 8; y < 14; ++y)
      for (int x = 8; x < 14; ++x) r.at(0, 0, y, x) = -1.0;
    const auto s = analyze_regions(r, 0.5);
    const bool pass = s.areas == std::vector<std::size_t>{9, 36} &&
                      s.large_fraction == 36.0 / 45.0 && s.bucket_proportions[0] == 9.0 / 45.0 &&
                      s.bucket_proportions[1] == 0.0 && s.bucket_proportions[2] == 36.0 / 45.0 &&
                      s.bucket_proportions[3] == 0.0;
    ok = ok && pass;
    d << "3x3+6x6 large_fraction " << s.large_fraction << (pass ? "" : " (FAIL)") << "; ";
  }
  {
    // Diagonal chain of 4 (8-connected), a 5x5 block (25, not large), an
    // 11x11 block (121) and an isolated pixel.
    Tensor4 r(1, 2, 40, 40);
    for (int i = 0; i < 4; ++i) r.at(0, 1, 1 + i, 1 + i) = 0.9;
    for (int y = 10; y < 15; ++y)
      for (int x = 1; x < 6; ++x) r.at(0, 0, y, x) = 0.7;
    for (int y = 20; y < 31; ++y)
      for (int x = 20; x < 31; ++x) r.at(0, 0, y, x) = 0.8;
    r.at(0, 0, 38, 2) = -0.6;
    const auto s = analyze_regions(r, 0.5);
    const double n = 1 + 4 + 25 + 121;
    const bool pass = s.areas == std::vector<std::size_t>{1, 4, 25, 121} &&
                      s.large_fraction == 121.0 / n && s.bucket_proportions[0] == 5.0 / n &&
                      s.bucket_proportions[1] == 25.0 / n && s.bucket_proportions[2] == 0.0 &&
                      s.bucket_proportions[3] == 121.0 / n;
    ok = ok && pass;
    d << "mixed map large_fraction " << s.large_fraction << (pass ? "" : " (FAIL)");
  }
  return {ok, d.str()};
}

// ------------------------------------------------------------------ 9

Outcome determinism() {
  std::vector<Tensor4> images;
  for (int i = 0; i < 4; ++i) {
    NoiseSpec n;
    n.sigma = 0.1;
    n.shape = MaskTag::Plus;
    n.support = 3;
    n.seed = 100 + static_cast<std::uint64_t>(i);
    images.push_back(plus(gen_clean(CleanPattern::Disks, 48, i), gen_correlated_noise(n, 48, 48, 3)));
  }
  TrainingConfig cfg = toy_training_config();
  cfg.crop = 32;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 4;
  cfg.seed = 99;
  const TrainResult a = train(cfg, images);
  const TrainResult b = train(cfg, images);
  const bool losses = a.losses == b.losses;
  const bool bytes = serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint);
  return {losses && bytes, std::to_string(a.losses.size()) + " steps x2, loss traces " +
                               (losses ? "identical" : "DIFFER") + ", checkpoints " +
                               (bytes ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* env = std::getenv("MMBSN_ACCEPT_ONLY")) {
    std::stringstream ss(env);
    for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"blind-spot exactness", blind_spot_exactness},
      {"parameter counts", parameter_counts},
      {"PD round trip", pd_round_trip},
      {"gradient correctness", gradients},
      {"square vs center mask trend", square_vs_center},
      {"multi-mask benefit trend", multi_mask_benefit},
      {"denoising sanity", denoising_sanity},
      {"noise analyzer", noise_analyzer},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
