#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mmbsn/adam.hpp"
#include "mmbsn/model.hpp"

namespace mmbsn {

struct TrainingConfig {
  Architecture arch = Architecture::MmBsn;
  ArchitectureConfig architecture{};
  int batch = 8;
  int epochs = 30;
  double lr = 1e-4;
  int lr_decay_every = 8;
  double lr_decay = 0.1;
  int crop = 128;
  int pd_train = 5;
  int pd_test = 2;
  bool augment = true;
  /// Optimizer steps per epoch; 0 means ceil(dataset size / batch).
  int steps_per_epoch = 0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Learning rate in effect during (0-based) epoch `epoch`.
  double lr_at_epoch(int epoch) const;
};

/// Desk-scale defaults: C=16, 64x64 crops, 2 epochs. Everything else as in
/// the full configuration.
TrainingConfig toy_training_config();

/// Everything needed to resume or reproduce a run.
struct Checkpoint {
  Architecture arch = Architecture::MmBsn;
  ArchitectureConfig config{};
  ModelGraph model;
  AdamState optimizer;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  int epoch = 0;
};

/// Builds and initializes the model and a fresh optimizer for `config`.
Checkpoint initial_checkpoint(const TrainingConfig& config);

/// Gradient of the crop-and-unshuffle step: the pixel-shuffled, zero-padded
/// image gradient as seen by the model output.
Tensor4 pd_inv_backward(const Tensor4& grad_image, int s, std::size_t padded_h,
                        std::size_t padded_w);

/// One self-supervised step: L1 between PD^-1(M(PD(x))) and the same noisy x,
/// then an Adam update. Throws std::runtime_error on a non-finite loss.
double train_step(ModelGraph& model, AdamState& optimizer, const Tensor4& noisy_batch, int s);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;  // one per optimizer step
};

using EpochCallback = std::function<void(const Checkpoint&, int epoch, double mean_loss)>;

/// Full training loop over noisy images only (shape (1, C, H, W) each).
TrainResult train(const TrainingConfig& config, const std::vector<Tensor4>& noisy_images,
                  const EpochCallback& on_epoch = {});
/// Continues training from an existing checkpoint.
TrainResult train(const TrainingConfig& config, Checkpoint start,
                  const std::vector<Tensor4>& noisy_images, const EpochCallback& on_epoch = {});

/// Square crop with optional 90-degree rotation and flips.
struct CropSpec {
  std::size_t y = 0, x = 0, size = 0;
  bool rotate = false, flip_h = false, flip_v = false;
};
Tensor4 extract_crop(const Tensor4& image, const CropSpec& spec);

struct DenoiseOptions {
  int stride = 2;
  bool refine = false;
  double refine_p = 0.16;
  int refine_passes = 8;
  std::uint64_t seed = 0;
};

/// Model applied to [0, 1] images: M(x - 0.5) + 0.5.
Tensor4 apply_model(const ModelGraph& model, const Tensor4& x);
/// PD^-1(M(PD(noisy))) without refinement or clamping.
Tensor4 denoise_raw(const ModelGraph& model, const Tensor4& noisy, int stride);
/// Full inference: PD pipeline, optional random-replacement refinement
/// (passes run at stride 1), clamped to [0, 1].
Tensor4 denoise(const ModelGraph& model, const Tensor4& noisy, const DenoiseOptions& options);

}  // namespace mmbsn
