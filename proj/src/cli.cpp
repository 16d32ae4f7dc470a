#include "mmbsn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "mmbsn/checkpoint.hpp"
#include "mmbsn/config_file.hpp"
#include "mmbsn/image_io.hpp"
#include "mmbsn/model.hpp"
#include "mmbsn/noise.hpp"
#include "mmbsn/pd.hpp"
#include "mmbsn/train.hpp"
#include "mmbsn/verify.hpp"

namespace mmbsn {

namespace fs = std::filesystem;

namespace {

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VerifyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string join_ints(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

std::string join_masks(const std::vector<MaskShape>& ms) {
  std::string out;
  for (std::size_t i = 0; i < ms.size(); ++i) out += (i ? "," : "") + mask_name(ms[i]);
  return out;
}

/// Architecture flags shared by several subcommands.
struct ArchFlags {
  std::string arch = "mmbsn";
  std::string masks;  // empty: o for apbsn, slash,backslash otherwise
  int base_channels = 128;
  int cdcl_depth = 2;
  int trunk_depth = 7;
  std::vector<int> kernel_sizes{3, 5};
  std::vector<int> dilations{2, 3};
  int in_channels = 3;
  bool unmask_center = false;

  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* cmd, bool with_test_hook = false) {
    opts["arch"] = cmd->add_option("--arch", arch, "Architecture: apbsn, smmbsn, mmbsn")
                       ->capture_default_str();
    opts["masks"] = cmd->add_option("--masks", masks,
                                    "Comma-separated mask tags (o, hbar, vbar, plus, slash, "
                                    "backslash, cross, square, squareplus, star); default o for "
                                    "apbsn, slash,backslash otherwise");
    opts["base_channels"] =
        cmd->add_option("--base-channels", base_channels, "Feature width C")->capture_default_str();
    opts["cdcl_depth"] =
        cmd->add_option("--cdcl-depth", cdcl_depth, "DCL blocks per CDCL")->capture_default_str();
    opts["trunk_depth"] = cmd->add_option("--trunk-depth", trunk_depth, "Trunk DCL blocks")
                              ->capture_default_str();
    opts["kernel_sizes"] =
        cmd->add_option("--kernel-sizes", kernel_sizes, "Masked-conv kernel sizes")
            ->delimiter(',')
            ->capture_default_str();
    opts["dilations"] = cmd->add_option("--dilations", dilations, "Dilation per kernel size")
                            ->delimiter(',')
                            ->capture_default_str();
    opts["in_channels"] =
        cmd->add_option("--in-channels", in_channels, "Image channels")->capture_default_str();
    if (with_test_hook) {
      cmd->add_flag("--unmask-center", unmask_center,
                    "Test hook: leave the center tap unmasked (negative control)");
    }
  }

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }

  Architecture architecture() const { return parse_architecture(arch); }

  ArchitectureConfig config() const {
    ArchitectureConfig c;
    c.base_channels = base_channels;
    c.cdcl_depth = cdcl_depth;
    c.trunk_depth = trunk_depth;
    c.kernel_sizes = kernel_sizes;
    c.dilations = dilations;
    c.in_channels = in_channels;
    c.unmask_center = unmask_center;
    if (!masks.empty()) {
      c.masks = parse_mask_list(masks);
    } else if (architecture() == Architecture::ApBsn) {
      c.masks = {MaskShape(MaskTag::O)};
    } else {
      c.masks = {MaskShape(MaskTag::Slash), MaskShape(MaskTag::Backslash)};
    }
    return c;
  }

  /// Overrides only the fields given on the command line.
  void overlay(TrainingConfig& t) const {
    if (given("arch")) t.arch = architecture();
    auto& a = t.architecture;
    if (given("masks")) a.masks = parse_mask_list(masks);
    if (given("base_channels")) a.base_channels = base_channels;
    if (given("cdcl_depth")) a.cdcl_depth = cdcl_depth;
    if (given("trunk_depth")) a.trunk_depth = trunk_depth;
    if (given("kernel_sizes")) a.kernel_sizes = kernel_sizes;
    if (given("dilations")) a.dilations = dilations;
    if (given("in_channels")) a.in_channels = in_channels;
  }
};

void print_arch(std::ostream& out, Architecture arch, const ArchitectureConfig& c) {
  out << "# arch=" << architecture_name(arch) << " masks=" << join_masks(c.masks)
      << " base_channels=" << c.base_channels << " cdcl_depth=" << c.cdcl_depth
      << " trunk_depth=" << c.trunk_depth << " kernel_sizes=" << join_ints(c.kernel_sizes)
      << " dilations=" << join_ints(c.dilations) << " in_channels=" << c.in_channels << "\n";
}

Tensor4 read_image(const fs::path& p) {
  try {
    return read_png(p);
  } catch (const ImageIoError& e) {
    throw IoFailure(e.what());
  }
}

void write_image(const fs::path& p, const Tensor4& t) {
  try {
    write_png(p, t);
  } catch (const ImageIoError& e) {
    throw IoFailure(e.what());
  }
}

// ---------------------------------------------------------------- train

struct TrainCmd {
  ArchFlags arch;
  std::string config_path;
  std::string data_dir;
  std::string out_path = "model.ckpt";
  std::string loss_csv;
  std::string resume;
  bool full = false;
  int batch = 0, epochs = 0, steps = 0, crop = 0, pd_train = 0, pd_test = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  bool no_augment = false;
  std::map<std::string, CLI::Option*> o;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("train", "Self-supervised training on noisy PNGs");
    arch.add(cmd);
    cmd->add_option("--data", data_dir, "Directory of noisy 8-bit PNG images")->required();
    cmd->add_option("--out", out_path, "Checkpoint path (rewritten after every epoch)")
        ->capture_default_str();
    cmd->add_option("--config", config_path, "key = value training config file");
    cmd->add_flag("--full", full,
                  "Start from the full-scale defaults (C=128, crop 128, 30 epochs) instead of "
                  "the toy defaults (C=16, crop 64, 2 epochs)");
    cmd->add_option("--resume", resume, "Continue from this checkpoint");
    cmd->add_option("--loss-csv", loss_csv, "Write step,loss rows here");
    o["batch"] = cmd->add_option("--batch", batch, "Batch size (default 8)");
    o["epochs"] = cmd->add_option("--epochs", epochs, "Epochs");
    o["steps"] = cmd->add_option("--steps-per-epoch", steps, "Steps per epoch (0: dataset/batch)");
    o["lr"] = cmd->add_option("--lr", lr, "Initial learning rate (default 1e-4)");
    o["crop"] = cmd->add_option("--crop", crop, "Square crop size");
    o["pd_train"] = cmd->add_option("--pd-train", pd_train, "PD stride for training (default 5)");
    o["pd_test"] = cmd->add_option("--pd-test", pd_test, "PD stride stored for testing (default 2)");
    o["seed"] = cmd->add_option("--seed", seed, "Seed for init, cropping and augmentation (default 0)");
    cmd->add_flag("--no-augment", no_augment, "Disable rotation/flip augmentation");
    cmd->callback([] {});
  }

  bool given(const char* k) const { return o.at(k)->count() > 0; }

  int run(std::ostream& out) {
    TrainingConfig cfg = full ? TrainingConfig{} : toy_training_config();
    if (!config_path.empty()) {
      try {
        cfg = load_training_config_over(cfg, config_path);
      } catch (const std::runtime_error& e) {
        throw IoFailure(e.what());
      }
    }
    arch.overlay(cfg);
    if (given("batch")) cfg.batch = batch;
    if (given("epochs")) cfg.epochs = epochs;
    if (given("steps")) cfg.steps_per_epoch = steps;
    if (given("lr")) cfg.lr = lr;
    if (given("crop")) cfg.crop = crop;
    if (given("pd_train")) cfg.pd_train = pd_train;
    if (given("pd_test")) cfg.pd_test = pd_test;
    if (given("seed")) cfg.seed = seed;
    if (no_augment) cfg.augment = false;
    if (cfg.architecture.masks.empty()) cfg.architecture.masks = {MaskTag::O};
    cfg.validate();

    std::istringstream resolved(format_training_config(cfg));
    for (std::string line; std::getline(resolved, line);) out << "# " << line << "\n";

    std::vector<Tensor4> images;
    std::vector<fs::path> files;
    try {
      files = list_pngs(data_dir);
    } catch (const ImageIoError& e) {
      throw IoFailure(e.what());
    }
    if (files.empty()) throw IoFailure("no PNG files in '" + data_dir + "'");
    for (const auto& f : files) images.push_back(read_image(f));
    out << "# images=" << images.size() << "\n";

    Checkpoint start = resume.empty() ? initial_checkpoint(cfg) : load_ckpt(resume);
    out << "epoch,mean_loss,lr\n";
    auto on_epoch = [&](const Checkpoint& ck, int epoch, double mean) {
      out << epoch << "," << std::setprecision(10) << mean << "," << cfg.lr_at_epoch(epoch) << "\n";
      save(ck);
    };
    TrainResult r = train(cfg, std::move(start), images, on_epoch);
    save(r.checkpoint);
    if (!loss_csv.empty()) {
      std::ofstream f(loss_csv);
      if (!f) throw IoFailure("cannot write '" + loss_csv + "'");
      f << "step,loss\n" << std::setprecision(17);
      for (std::size_t i = 0; i < r.losses.size(); ++i) f << i + 1 << "," << r.losses[i] << "\n";
    }
    out << "trained steps=" << r.checkpoint.step << " params=" << count_params(r.checkpoint.model)
        << " checkpoint=" << out_path << "\n";
    return kExitOk;
  }

  static TrainingConfig load_training_config_over(TrainingConfig base, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    apply_training_keys(base, parse_key_values(ss.str()));
    return base;
  }

  static Checkpoint load_ckpt(const std::string& p) {
    try {
      return load_checkpoint(p);
    } catch (const CheckpointError& e) {
      throw IoFailure(e.what());
    }
  }

  void save(const Checkpoint& ck) const {
    try {
      save_checkpoint(ck, out_path);
    } catch (const CheckpointError& e) {
      throw IoFailure(e.what());
    }
  }
};

// ---------------------------------------------------------------- denoise

struct DenoiseCmd {
  std::string ckpt, input, output = "denoised.png", clean;
  int pd_test = 2;
  bool refine = true;
  double refine_p = 0.16;
  int refine_T = 8;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("denoise", "Denoise a PNG with a trained checkpoint");
    cmd->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    cmd->add_option("--input", input, "Noisy PNG")->required();
    cmd->add_option("--output", output, "Output PNG")->capture_default_str();
    cmd->add_option("--clean", clean, "Optional clean reference PNG for PSNR/SSIM");
    cmd->add_option("--pd-test", pd_test, "PD stride at inference")->capture_default_str();
    cmd->add_flag("--refine,!--no-refine", refine, "Random-replacement refinement (default on)");
    cmd->add_option("--refine-p", refine_p, "Replacement probability")->capture_default_str();
    cmd->add_option("--refine-T", refine_T, "Refinement passes")->capture_default_str();
    cmd->add_option("--seed", seed, "Refinement seed")->capture_default_str();
  }

  int run(std::ostream& out) {
    out << "# pd_test=" << pd_test << " refine=" << (refine ? "true" : "false")
        << " refine_p=" << refine_p << " refine_T=" << refine_T << " seed=" << seed << "\n";
    Checkpoint ck;
    try {
      ck = load_checkpoint(ckpt);
    } catch (const CheckpointError& e) {
      throw IoFailure(e.what());
    }
    print_arch(out, ck.arch, ck.config);
    const Tensor4 noisy = read_image(input);
    DenoiseOptions opt;
    opt.stride = pd_test;
    opt.refine = refine;
    opt.refine_p = refine_p;
    opt.refine_passes = refine_T;
    opt.seed = seed;
    const Tensor4 result = denoise(ck.model, noisy, opt);
    write_image(output, result);
    const Tensor4 stored = quantize8(result);
    out << "metric,value\n" << std::fixed << std::setprecision(4);
    out << "psnr_vs_input," << psnr(stored, noisy) << "\n";
    if (!clean.empty()) {
      const Tensor4 ref = read_image(clean);
      out << "psnr_noisy_vs_clean," << psnr(noisy, ref) << "\n";
      out << "psnr_denoised_vs_clean," << psnr(stored, ref) << "\n";
      out << "ssim_denoised_vs_clean," << ssim(stored, ref) << "\n";
    }
    out << "wrote " << output << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- verify-blindspot

struct VerifyCmd {
  ArchFlags arch;
  int radius = 6;
  int trials = 3;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand(
        "verify-blindspot", "Compare predicted and measured blind-spot exclusion sets");
    arch.base_channels = 8;
    arch.add(cmd, true);
    cmd->add_option("--radius", radius, "Offset radius R")->capture_default_str();
    cmd->add_option("--trials", trials, "Random weight draws (>= 3)")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed for weights, inputs and probes")->capture_default_str();
  }

  int run(std::ostream& out) {
    const Architecture a = arch.architecture();
    const ArchitectureConfig cfg = arch.config();
    print_arch(out, a, cfg);
    out << "# radius=" << radius << " trials=" << trials << " seed=" << seed << "\n";
    if (trials < 3) throw CLI::ValidationError("--trials", "must be >= 3");

    EmpiricalOptions opt;
    opt.radius = radius;
    opt.trials = trials;
    opt.seed = seed;

    out << "scope,theoretical_count,empirical_count,match\n";
    bool ok = true;
    std::string diff;
    auto compare = [&](const std::string& scope, const ExclusionSet& theory,
                       const ExclusionSet& measured) {
      const bool match = theory == measured;
      out << scope << "," << theory.offsets.size() << "," << measured.offsets.size() << ","
          << (match ? "yes" : "no") << "\n";
      if (!match) {
        ok = false;
        OffsetSet only_t, only_e;
        std::set_difference(theory.offsets.begin(), theory.offsets.end(), measured.offsets.begin(),
                            measured.offsets.end(), std::inserter(only_t, only_t.end()));
        std::set_difference(measured.offsets.begin(), measured.offsets.end(),
                            theory.offsets.begin(), theory.offsets.end(),
                            std::inserter(only_e, only_e.end()));
        diff += scope + " only_theoretical: " + format_offsets(only_t) + "\n";
        diff += scope + " only_empirical: " + format_offsets(only_e) + "\n";
      }
    };

    // Theory always comes from the declared masks; the test hook only alters
    // the network that gets probed.
    auto declared = [&](ArchitectureConfig c) {
      c.unmask_center = false;
      return model_exclusion_set(build_model(a, c), radius);
    };

    // Each branch alone: same architecture restricted to one mask and one size.
    for (const auto& shape : cfg.masks) {
      for (std::size_t s = 0; s < cfg.kernel_sizes.size(); ++s) {
        ArchitectureConfig one = cfg;
        one.masks = {shape};
        one.kernel_sizes = {cfg.kernel_sizes[s]};
        one.dilations = {cfg.dilations[s]};
        const ModelGraph m = build_model(a, one);
        const std::string scope = mask_name(shape) + ".k" + std::to_string(cfg.kernel_sizes[s]) +
                                  ".d" + std::to_string(cfg.dilations[s]);
        compare(scope, declared(one), empirical_exclusion(m, opt));
      }
    }
    const ModelGraph full = build_model(a, cfg);
    const ExclusionSet theory = declared(cfg);
    const ExclusionSet measured = empirical_exclusion(full, opt);
    compare("combined", theory, measured);
    out << "excluded: " << format_offsets(measured.offsets) << "\n";
    if (!ok) {
      out << diff;
      out << "verdict: MISMATCH\n";
      return kExitVerifyFailed;
    }
    out << "verdict: OK\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- analyze-noise

struct AnalyzeCmd {
  std::string input, reference;
  double threshold = 0.0;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand(
        "analyze-noise", "Connected-component area statistics of a noise residual");
    cmd->add_option("--input", input, "Noisy PNG")->required();
    cmd->add_option("--reference", reference,
                    "Clean or denoised PNG; residual = input - reference")
        ->required();
    cmd->add_option("--threshold", threshold,
                    "Binarization threshold on |residual| (0: 2 x robust sigma)")
        ->capture_default_str();
  }

  int run(std::ostream& out) {
    const Tensor4 a = read_image(input);
    const Tensor4 b = read_image(reference);
    if (a.shape() != b.shape()) throw IoFailure("input and reference sizes differ");
    Tensor4 residual(a.shape());
    for (std::size_t j = 0; j < a.size(); ++j) residual[j] = a[j] - b[j];
    double t = threshold > 0.0 ? threshold : robust_threshold(residual);
    if (!(t > 0.0)) t = 0.5 / 255.0;  // residual is identically zero
    out << "# threshold=" << t << (threshold > 0.0 ? "" : " (robust default)") << "\n";
    const NoiseRegionStats stats = analyze_regions(residual, t);
    out << "component_area,count\n";
    for (const auto& [area, count] : stats.histogram()) out << area << "," << count << "\n";
    for (std::size_t i = 0; i < kAreaBuckets.size(); ++i) {
      out << "# bucket " << kAreaBuckets[i] << " proportion=" << stats.bucket_proportions[i] << "\n";
    }
    out << "large_fraction=" << std::setprecision(10) << stats.large_fraction << "\n";
    return kExitOk;
  }
};

// ---------------------------------------------------------------- count-params

struct ParamsCmd {
  ArchFlags arch;
  double expect = 0.0;
  double tol = 0.10;
  bool per_layer = false;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("count-params", "Exact trainable parameter count");
    arch.add(cmd);
    cmd->add_option("--expect", expect, "Target count to compare against");
    cmd->add_option("--tol", tol, "Relative tolerance for --expect")->capture_default_str();
    cmd->add_flag("--per-layer", per_layer, "List every layer");
  }

  int run(std::ostream& out) {
    const Architecture a = arch.architecture();
    const ArchitectureConfig cfg = arch.config();
    print_arch(out, a, cfg);
    const ModelGraph m = build_model(a, cfg);
    if (per_layer) {
      out << "layer,params\n";
      for (std::size_t i = 0; i < m.params().size(); ++i) {
        out << m.param_names()[i] << "," << m.params()[i].parameter_count() << "\n";
      }
    }
    const std::size_t total = count_params(m);
    out << "total=" << total << "\n";
    if (expect > 0.0) {
      const double dev = (static_cast<double>(total) - expect) / expect;
      const bool ok = std::abs(dev) <= tol;
      out << "expect=" << expect << " deviation=" << std::fixed << std::setprecision(4) << dev
          << " tol=" << tol << " " << (ok ? "within" : "outside") << "\n";
      return ok ? kExitOk : kExitVerifyFailed;
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- gen-synthetic

struct GenCmd {
  std::string pattern = "disks";
  std::string noise = "square";
  double sigma = 0.2;
  int support = 5;
  int size = 128;
  int count = 1;
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("gen-synthetic", "Clean/noisy synthetic image pairs");
    cmd->add_option("--pattern", pattern, "stripes, checker, gradient, disks")->capture_default_str();
    cmd->add_option("--noise", noise, "Correlation shape: a mask tag or 'iso'")->capture_default_str();
    cmd->add_option("--sigma", sigma, "Noise standard deviation ([0,1] units)")->capture_default_str();
    cmd->add_option("--support", support, "Correlation kernel size (odd)")->capture_default_str();
    cmd->add_option("--size", size, "Image side (>= 16)")->capture_default_str();
    cmd->add_option("--count", count, "Pairs to generate")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed")->capture_default_str();
    cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
  }

  int run(std::ostream& out) {
    out << "# pattern=" << pattern << " noise=" << noise << " sigma=" << sigma
        << " support=" << support << " size=" << size << " count=" << count << " seed=" << seed
        << "\n";
    const CleanPattern pat = parse_pattern(pattern);
    NoiseSpec spec;
    spec.sigma = sigma;
    spec.support = support;
    if (noise == "iso") spec.shape.reset();
    else spec.shape = parse_mask(noise);
    if (count < 1 || size < 16) throw CLI::ValidationError("--count/--size", "out of range");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoFailure("cannot create '" + out_dir + "': " + ec.message());
    if (count > 1) {
      fs::create_directories(fs::path(out_dir) / "clean", ec);
      fs::create_directories(fs::path(out_dir) / "noisy", ec);
      if (ec) throw IoFailure("cannot create output subdirectories");
    }
    out << "file,psnr\n" << std::fixed << std::setprecision(4);
    for (int i = 0; i < count; ++i) {
      const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(i);
      const Tensor4 clean = gen_clean(pat, static_cast<std::size_t>(size), s);
      spec.seed = s ^ 0x5bd1e995ULL;
      const Tensor4 n = gen_correlated_noise(spec, clean.height(), clean.width(), clean.channels());
      Tensor4 noisy = clean;
      for (std::size_t j = 0; j < noisy.size(); ++j) noisy[j] += n[j];
      fs::path cp, np;
      if (count == 1) {
        cp = fs::path(out_dir) / "clean.png";
        np = fs::path(out_dir) / "noisy.png";
      } else {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.png", i);
        cp = fs::path(out_dir) / "clean" / name;
        np = fs::path(out_dir) / "noisy" / name;
      }
      write_image(cp, clean);
      write_image(np, noisy);
      out << np.string() << "," << psnr(quantize8(noisy), quantize8(clean)) << "\n";
    }
    return kExitOk;
  }
};

// ---------------------------------------------------------------- bench

struct BenchCmd {
  ArchFlags arch;
  int size = 64;
  int batch = 2;
  int iters = 3;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("bench", "Conv throughput and train-step latency");
    arch.base_channels = 16;
    arch.add(cmd);
    cmd->add_option("--size", size, "Image side")->capture_default_str();
    cmd->add_option("--batch", batch, "Batch size")->capture_default_str();
    cmd->add_option("--iters", iters, "Timed repetitions")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed")->capture_default_str();
  }

  int run(std::ostream& out) {
    using clock = std::chrono::steady_clock;
    const Architecture a = arch.architecture();
    const ArchitectureConfig cfg = arch.config();
    print_arch(out, a, cfg);
    out << "# size=" << size << " batch=" << batch << " iters=" << iters << " seed=" << seed
        << "\n";
    if (size < 8 || batch < 1 || iters < 1) throw CLI::ValidationError("bench", "bad sizes");
    const auto C = static_cast<std::size_t>(cfg.base_channels);
    const auto S = static_cast<std::size_t>(size);
    const auto B = static_cast<std::size_t>(batch);

    ConvParams conv(C, C, 3, 2);
    conv.init_kaiming(seed);
    Tensor4 x(B, C, S, S);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (auto& v : x.values()) v = uni(rng);
    auto t0 = clock::now();
    for (int i = 0; i < iters; ++i) (void)conv2d(x, conv);
    const double conv_s = std::chrono::duration<double>(clock::now() - t0).count() / iters;
    const double taps = static_cast<double>(B * S * S) * static_cast<double>(C * C) * 9.0;

    TrainingConfig tc;
    tc.arch = a;
    tc.architecture = cfg;
    tc.seed = seed;
    Checkpoint ck = initial_checkpoint(tc);
    Tensor4 img(B, static_cast<std::size_t>(cfg.in_channels), S, S);
    for (auto& v : img.values()) v = 0.5 + 0.2 * uni(rng);
    t0 = clock::now();
    for (int i = 0; i < iters; ++i) (void)train_step(ck.model, ck.optimizer, img, 2);
    const double step_s = std::chrono::duration<double>(clock::now() - t0).count() / iters;

    out << "metric,value\n" << std::fixed << std::setprecision(3);
    out << "conv3x3_mpixel_tap_per_s," << taps / conv_s / 1e6 << "\n";
    out << "train_step_ms," << step_s * 1e3 << "\n";
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-mask blind-spot network toolkit", "mmbsn"};
  app.require_subcommand(1);
  TrainCmd train_cmd;
  DenoiseCmd denoise_cmd;
  VerifyCmd verify_cmd;
  AnalyzeCmd analyze_cmd;
  ParamsCmd params_cmd;
  GenCmd gen_cmd;
  BenchCmd bench_cmd;
  train_cmd.add(app);
  denoise_cmd.add(app);
  verify_cmd.add(app);
  analyze_cmd.add(app);
  params_cmd.add(app);
  gen_cmd.add(app);
  bench_cmd.add(app);

  // Work runs on the calling thread, so any positive cap is already met.
  if (const char* cap = std::getenv("MMBSN_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(cap, &end, 10);
    if (end == cap || *end != '\0' || n < 1) {
      err << "error: MMBSN_THREADS must be a positive integer, got '" << cap << "'\n";
      return kExitUsage;
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "train") return train_cmd.run(out);
    if (name == "denoise") return denoise_cmd.run(out);
    if (name == "verify-blindspot") return verify_cmd.run(out);
    if (name == "analyze-noise") return analyze_cmd.run(out);
    if (name == "count-params") return params_cmd.run(out);
    if (name == "gen-synthetic") return gen_cmd.run(out);
    if (name == "bench") return bench_cmd.run(out);
  } catch (const IoFailure& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace mmbsn
