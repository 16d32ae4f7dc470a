#include "mmbsn/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mmbsn/noise.hpp"
#include "mmbsn/pd.hpp"

namespace mmbsn {

void TrainingConfig::validate() const {
  architecture.validate();
  if (batch < 1 || epochs < 0 || crop < 1 || lr_decay_every < 1 || steps_per_epoch < 0) {
    throw std::invalid_argument("training counts must be positive");
  }
  if (pd_train < 1 || pd_test < 1) throw std::invalid_argument("pd strides must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

double TrainingConfig::lr_at_epoch(int epoch) const {
  double value = lr;
  for (int e = lr_decay_every; e <= epoch; e += lr_decay_every) value *= lr_decay;
  return value;
}

TrainingConfig toy_training_config() {
  TrainingConfig c;
  c.architecture.base_channels = 16;
  c.crop = 64;
  c.epochs = 2;
  return c;
}

Checkpoint initial_checkpoint(const TrainingConfig& config) {
  config.validate();
  Checkpoint ck;
  ck.arch = config.arch;
  ck.config = config.architecture;
  ck.model = build_model(config.arch, config.architecture);
  ck.model.init(config.seed);
  ck.optimizer = AdamState(ck.model.params(), config.lr);
  ck.seed = config.seed;
  return ck;
}

Tensor4 pd_inv_backward(const Tensor4& grad_image, int s, std::size_t padded_h,
                        std::size_t padded_w) {
  Tensor4 full(grad_image.batch(), grad_image.channels(), padded_h, padded_w);
  for (std::size_t b = 0; b < grad_image.batch(); ++b)
    for (std::size_t c = 0; c < grad_image.channels(); ++c)
      for (std::size_t y = 0; y < grad_image.height(); ++y)
        for (std::size_t x = 0; x < grad_image.width(); ++x)
          full.at(b, c, y, x) = grad_image.at(b, c, y, x);
  return pd(full, s);
}

namespace {

// Images live in [0, 1]; the network sees them centred on zero and the shift is
// added back to its output.
constexpr double kShift = 0.5;

Tensor4 shifted(Tensor4 t, double by) {
  for (auto& v : t.values()) v += by;
  return t;
}

}  // namespace

Tensor4 apply_model(const ModelGraph& model, const Tensor4& x) {
  return shifted(model.forward(shifted(x, -kShift)), kShift);
}

double train_step(ModelGraph& model, AdamState& optimizer, const Tensor4& noisy_batch, int s) {
  const Tensor4 mosaic = pd(noisy_batch, s);
  const ForwardPass pass = model.forward_pass(shifted(mosaic, -kShift));
  const Tensor4 restored = pd_inv(shifted(pass.output(), kShift), s, noisy_batch.height(), noisy_batch.width());
  LossAndGrad lg = l1_loss_and_grad(restored, noisy_batch);
  if (!std::isfinite(lg.loss)) {
    std::ostringstream msg;
    msg << "non-finite training loss (" << lg.loss << ") at optimizer step " << optimizer.step + 1
        << ", lr " << optimizer.lr << ", batch " << noisy_batch.shape().str();
    throw std::runtime_error(msg.str());
  }
  const Tensor4 grad_out = pd_inv_backward(lg.grad, s, mosaic.height(), mosaic.width());
  Gradients g = model.backward(pass, grad_out);
  adam_step(model.params(), g.params, optimizer);
  return lg.loss;
}

Tensor4 extract_crop(const Tensor4& image, const CropSpec& spec) {
  if (spec.y + spec.size > image.height() || spec.x + spec.size > image.width()) {
    throw ShapeError("crop outside image");
  }
  const std::size_t n = spec.size;
  Tensor4 out(image.batch(), image.channels(), n, n);
  for (std::size_t b = 0; b < image.batch(); ++b)
    for (std::size_t c = 0; c < image.channels(); ++c)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
          std::size_t sy = y, sx = x;
          if (spec.rotate) {  // 90 degrees counter-clockwise
            sy = x;
            sx = n - 1 - y;
          }
          if (spec.flip_h) sx = n - 1 - sx;
          if (spec.flip_v) sy = n - 1 - sy;
          out.at(b, c, y, x) = image.at(b, c, spec.y + sy, spec.x + sx);
        }
  return out;
}

namespace {

Tensor4 sample_batch(const TrainingConfig& cfg, const std::vector<Tensor4>& images,
                     std::uint64_t step) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32)};
  std::mt19937_64 rng(seq);
  std::size_t size = static_cast<std::size_t>(cfg.crop);
  for (const auto& im : images) size = std::min({size, im.height(), im.width()});
  const std::size_t ch = images.front().channels();

  Tensor4 batch(static_cast<std::size_t>(cfg.batch), ch, size, size);
  for (std::size_t b = 0; b < batch.batch(); ++b) {
    const Tensor4& im = images[rng() % images.size()];
    CropSpec spec;
    spec.size = size;
    spec.y = rng() % (im.height() - size + 1);
    spec.x = rng() % (im.width() - size + 1);
    if (cfg.augment) {
      spec.rotate = rng() & 1U;
      spec.flip_h = rng() & 1U;
      spec.flip_v = rng() & 1U;
    }
    const Tensor4 crop = extract_crop(im, spec);
    std::copy(crop.values().begin(), crop.values().end(), batch.plane(b, 0));
  }
  return batch;
}

}  // namespace

TrainResult train(const TrainingConfig& config, const std::vector<Tensor4>& noisy_images,
                  const EpochCallback& on_epoch) {
  return train(config, initial_checkpoint(config), noisy_images, on_epoch);
}

TrainResult train(const TrainingConfig& config, Checkpoint start,
                  const std::vector<Tensor4>& noisy_images, const EpochCallback& on_epoch) {
  config.validate();
  if (noisy_images.empty()) throw std::invalid_argument("training dataset is empty");
  for (const auto& im : noisy_images) {
    if (im.batch() != 1 || im.channels() != noisy_images.front().channels()) {
      throw ShapeError("dataset images must be single images with equal channel counts");
    }
    if (im.channels() != start.model.in_channels()) {
      throw ShapeError("dataset channel count does not match the model");
    }
  }
  const int steps = config.steps_per_epoch > 0
                        ? config.steps_per_epoch
                        : static_cast<int>((noisy_images.size() + static_cast<std::size_t>(config.batch) - 1) /
                                           static_cast<std::size_t>(config.batch));
  TrainResult result{std::move(start), {}};
  Checkpoint& ck = result.checkpoint;
  for (int epoch = ck.epoch; epoch < config.epochs; ++epoch) {
    ck.optimizer.lr = config.lr_at_epoch(epoch);
    double sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      const Tensor4 batch = sample_batch(config, noisy_images, ck.step);
      const double loss = train_step(ck.model, ck.optimizer, batch, config.pd_train);
      result.losses.push_back(loss);
      sum += loss;
      ++ck.step;
    }
    ck.epoch = epoch + 1;
    if (on_epoch) on_epoch(ck, epoch, sum / steps);
  }
  return result;
}

Tensor4 denoise_raw(const ModelGraph& model, const Tensor4& noisy, int stride) {
  return pd_inv(apply_model(model, pd(noisy, stride)), stride, noisy.height(), noisy.width());
}

Tensor4 denoise(const ModelGraph& model, const Tensor4& noisy, const DenoiseOptions& options) {
  Tensor4 out = denoise_raw(model, noisy, options.stride);
  if (options.refine) {
    out = random_replace_refine(out, noisy, options.refine_p, options.refine_passes, options.seed,
                                [&](const Tensor4& x) { return apply_model(model, x); });
  }
  return clamp01(std::move(out));
}

}  // namespace mmbsn
