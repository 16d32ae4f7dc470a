#include "mmbsn/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace mmbsn {

std::string architecture_name(Architecture a) {
  switch (a) {
    case Architecture::ApBsn:
      return "apbsn";
    case Architecture::SmmBsn:
      return "smmbsn";
    case Architecture::MmBsn:
      return "mmbsn";
  }
  return "?";
}

Architecture parse_architecture(const std::string& name) {
  if (name == "apbsn") return Architecture::ApBsn;
  if (name == "smmbsn") return Architecture::SmmBsn;
  if (name == "mmbsn") return Architecture::MmBsn;
  throw std::invalid_argument("unknown architecture '" + name + "' (apbsn, smmbsn, mmbsn)");
}

void ArchitectureConfig::validate() const {
  if (base_channels < 1) throw std::invalid_argument("base_channels must be >= 1");
  if (in_channels < 1) throw std::invalid_argument("in_channels must be >= 1");
  if (masks.empty()) throw std::invalid_argument("at least one mask is required");
  if (cdcl_depth < 1 || trunk_depth < 1) throw std::invalid_argument("depths must be >= 1");
  if (kernel_sizes.empty()) throw std::invalid_argument("kernel_sizes must be non-empty");
  if (kernel_sizes.size() != dilations.size()) {
    throw std::invalid_argument("kernel_sizes and dilations must have the same length");
  }
  for (int k : kernel_sizes)
    if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel sizes must be odd");
  for (int d : dilations)
    if (d < 1) throw std::invalid_argument("dilations must be >= 1");
}

ModelGraph::ModelGraph(std::size_t in_channels) {
  Node n;
  n.kind = NodeKind::Input;
  n.channels = in_channels;
  nodes_.push_back(n);
}

int ModelGraph::add_conv(int from, std::size_t out_channels, int k, int dilation, std::string name,
                         std::optional<KernelMask> mask) {
  const std::size_t in_ch = nodes_.at(static_cast<std::size_t>(from)).channels;
  params_.emplace_back(out_channels, in_ch, k, dilation, std::move(mask));
  param_names_.push_back(std::move(name));
  Node n;
  n.kind = NodeKind::Conv;
  n.inputs = {from};
  n.param = static_cast<int>(params_.size() - 1);
  n.channels = out_channels;
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

int ModelGraph::add_relu(int from) {
  Node n;
  n.kind = NodeKind::Relu;
  n.inputs = {from};
  n.channels = nodes_.at(static_cast<std::size_t>(from)).channels;
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

int ModelGraph::add_concat(const std::vector<int>& from) {
  if (from.empty()) throw std::invalid_argument("concat needs inputs");
  Node n;
  n.kind = NodeKind::Concat;
  n.inputs = from;
  for (int f : from) n.channels += nodes_.at(static_cast<std::size_t>(f)).channels;
  nodes_.push_back(n);
  return static_cast<int>(nodes_.size() - 1);
}

void ModelGraph::init(std::uint64_t seed) {
  // splitmix64 so nearby seeds give unrelated per-layer streams
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].init_kaiming(mix(seed ^ mix(i + 1)));
}

void ModelGraph::zero_final_layer() {
  if (params_.empty()) return;
  auto& last = params_.back();
  last.weight.fill(0.0);
  std::fill(last.bias.begin(), last.bias.end(), 0.0);
}

ForwardPass ModelGraph::forward_pass(const Tensor4& x) const {
  if (nodes_.empty()) throw std::logic_error("empty model");
  if (x.channels() != in_channels()) {
    throw ShapeError("model forward: dimension mismatch, input has " +
                     std::to_string(x.channels()) + " channels, model expects " +
                     std::to_string(in_channels()));
  }
  ForwardPass pass;
  pass.activations.resize(nodes_.size());
  pass.activations[0] = x;
  for (std::size_t id = 1; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    auto& act = pass.activations;
    switch (n.kind) {
      case NodeKind::Conv:
        act[id] = conv2d(act[static_cast<std::size_t>(n.inputs[0])],
                         params_[static_cast<std::size_t>(n.param)]);
        break;
      case NodeKind::Relu:
        act[id] = relu(act[static_cast<std::size_t>(n.inputs[0])]);
        break;
      case NodeKind::Concat: {
        std::vector<const Tensor4*> parts;
        for (int f : n.inputs) parts.push_back(&act[static_cast<std::size_t>(f)]);
        act[id] = concat_channels(std::span<const Tensor4* const>(parts));
        break;
      }
      case NodeKind::Input:
        throw std::logic_error("input node after position 0");
    }
  }
  return pass;
}

Gradients ModelGraph::backward(const ForwardPass& pass, const Tensor4& grad_out) const {
  require_same_shape(grad_out, pass.output(), "model backward");
  const auto& act = pass.activations;
  std::vector<Tensor4> grads(nodes_.size());
  grads.back() = grad_out;

  auto accumulate = [&](int node, Tensor4 g) {
    auto& slot = grads[static_cast<std::size_t>(node)];
    if (slot.empty()) {
      slot = std::move(g);
    } else {
      for (std::size_t j = 0; j < slot.size(); ++j) slot[j] += g[j];
    }
  };

  Gradients out;
  out.params.resize(params_.size());
  for (std::size_t l = 0; l < params_.size(); ++l) {
    out.params[l].weight = Tensor4(params_[l].weight.shape());
    out.params[l].bias.assign(params_[l].bias.size(), 0.0);
  }

  for (std::size_t id = nodes_.size() - 1; id >= 1; --id) {
    Tensor4 g = std::move(grads[id]);
    grads[id] = Tensor4();
    if (g.empty()) continue;  // node does not reach the output
    const Node& n = nodes_[id];
    switch (n.kind) {
      case NodeKind::Conv: {
        const auto p = static_cast<std::size_t>(n.param);
        ConvGrads cg = conv2d_backward(g, act[static_cast<std::size_t>(n.inputs[0])], params_[p]);
        out.params[p].weight = std::move(cg.weight);
        out.params[p].bias = std::move(cg.bias);
        accumulate(n.inputs[0], std::move(cg.grad_input));
        break;
      }
      case NodeKind::Relu:
        accumulate(n.inputs[0], relu_backward(g, act[id]));
        break;
      case NodeKind::Concat: {
        std::vector<std::size_t> sizes;
        for (int f : n.inputs) sizes.push_back(nodes_[static_cast<std::size_t>(f)].channels);
        auto parts = split_channels(g, sizes);
        for (std::size_t k = 0; k < parts.size(); ++k) accumulate(n.inputs[k], std::move(parts[k]));
        break;
      }
      case NodeKind::Input:
        break;
    }
  }
  out.input = grads[0].empty() ? Tensor4(act[0].shape()) : std::move(grads[0]);
  return out;
}

std::size_t count_params(const ModelGraph& model) {
  std::size_t total = 0;
  for (const auto& p : model.params()) total += p.parameter_count();
  return total;
}

namespace {

using Cfg = ArchitectureConfig;

std::size_t width(const Cfg& c) { return static_cast<std::size_t>(c.base_channels); }

KernelMask branch_mask(const Cfg& c, const MaskShape& shape, int k) {
  KernelMask m = render_mask(shape, k);
  if (!c.unmask_center) return m;
  OffsetSet s = m.masked();
  s.erase({0, 0});
  return KernelMask::unchecked(k, std::move(s));
}

int conv_relu(ModelGraph& g, int from, std::size_t out, int k, int d, const std::string& name,
              std::optional<KernelMask> mask = std::nullopt) {
  return g.add_relu(g.add_conv(from, out, k, d, name, std::move(mask)));
}

/// Dilated 3x3 conv + ReLU, then 1x1 conv + ReLU.
int dcl_block(ModelGraph& g, int from, std::size_t c, int d, const std::string& name) {
  const int a = conv_relu(g, from, c, 3, d, name + ".dil3x3");
  return conv_relu(g, a, c, 1, 1, name + ".pw1x1");
}

int dcl_stack(ModelGraph& g, int from, std::size_t c, int d, int depth, const std::string& name) {
  int x = from;
  for (int i = 0; i < depth; ++i) x = dcl_block(g, x, c, d, name + "." + std::to_string(i));
  return x;
}

int head(ModelGraph& g, const Cfg& c, const std::string& prefix) {
  return conv_relu(g, g.input(), width(c), 1, 1, prefix + "head");
}

void tail(ModelGraph& g, const Cfg& c, int from) {
  const std::size_t C = width(c);
  const std::size_t half = std::max<std::size_t>(1, C / 2);
  int x = conv_relu(g, from, C, 1, 1, "tail.0");
  x = conv_relu(g, x, half, 1, 1, "tail.1");
  g.add_conv(x, static_cast<std::size_t>(c.in_channels), 1, 1, "tail.2");
}

/// AP-BSN-style path for one mask: one branch per kernel size, outputs of
/// every size returned in order.
std::vector<int> apbsn_path(ModelGraph& g, const Cfg& c, int from, const MaskShape& shape,
                            const std::string& prefix) {
  const std::size_t C = width(c);
  const int depth = c.cdcl_depth + c.trunk_depth;
  std::vector<int> outs;
  for (std::size_t s = 0; s < c.kernel_sizes.size(); ++s) {
    const int k = c.kernel_sizes[s];
    const int d = c.dilations[s];
    const std::string name = prefix + mask_name(shape) + ".k" + std::to_string(k);
    KernelMask m = branch_mask(c, shape, k);
    g.add_branch({name, m, d, depth});
    int x = conv_relu(g, from, C, k, 1, name + ".masked", m);
    x = conv_relu(g, x, C, 1, 1, name + ".pw0");
    x = conv_relu(g, x, C, 1, 1, name + ".pw1");
    outs.push_back(dcl_stack(g, x, C, d, depth, name + ".dcl"));
  }
  return outs;
}

}  // namespace

ModelGraph build_apbsn(const ArchitectureConfig& config) {
  config.validate();
  if (config.masks.size() != 1 || config.masks.front().tag != MaskTag::O) {
    throw std::invalid_argument("apbsn uses the center mask only (masks = o)");
  }
  ModelGraph g(static_cast<std::size_t>(config.in_channels));
  const int h = head(g, config, "");
  const auto outs = apbsn_path(g, config, h, config.masks.front(), "");
  tail(g, config, g.add_concat(outs));
  return g;
}

ModelGraph build_smmbsn(const ArchitectureConfig& config) {
  config.validate();
  ModelGraph g(static_cast<std::size_t>(config.in_channels));
  std::vector<int> all;
  for (std::size_t i = 0; i < config.masks.size(); ++i) {
    const std::string prefix = "path" + std::to_string(i) + ".";
    const int h = head(g, config, prefix);
    const auto outs = apbsn_path(g, config, h, config.masks[i], prefix);
    all.insert(all.end(), outs.begin(), outs.end());
  }
  tail(g, config, g.add_concat(all));
  return g;
}

ModelGraph build_mmbsn(const ArchitectureConfig& config) {
  config.validate();
  const std::size_t C = width(config);
  const int depth = config.cdcl_depth + config.trunk_depth;
  ModelGraph g(static_cast<std::size_t>(config.in_channels));
  const int h = head(g, config, "");

  std::vector<int> size_outs;
  for (std::size_t s = 0; s < config.kernel_sizes.size(); ++s) {
    const int k = config.kernel_sizes[s];
    const int d = config.dilations[s];
    const std::string size_name = "k" + std::to_string(k);
    std::vector<int> fused;
    for (const auto& shape : config.masks) {
      const std::string name = size_name + "." + mask_name(shape);
      KernelMask m = branch_mask(config, shape, k);
      g.add_branch({name, m, d, depth});
      const int masked = conv_relu(g, h, C, k, 1, name + ".masked", m);
      // Two parallel 1x1 convs: one is the skip feature, one enters the CDCL.
      const int skip = conv_relu(g, masked, C, 1, 1, name + ".skip1x1");
      const int entry = conv_relu(g, masked, C, 1, 1, name + ".cdcl_in1x1");
      const int cdcl = dcl_stack(g, entry, C, d, config.cdcl_depth, name + ".cdcl");
      const int cat = g.add_concat({cdcl, skip});
      fused.push_back(conv_relu(g, cat, C, 1, 1, name + ".fuse"));
    }
    const int joined = g.add_concat(fused);
    int x = conv_relu(g, joined, C, 1, 1, size_name + ".mask_fuse");
    size_outs.push_back(dcl_stack(g, x, C, d, config.trunk_depth, size_name + ".trunk"));
  }
  tail(g, config, g.add_concat(size_outs));
  return g;
}

ModelGraph build_model(Architecture arch, const ArchitectureConfig& config) {
  switch (arch) {
    case Architecture::ApBsn:
      return build_apbsn(config);
    case Architecture::SmmBsn:
      return build_smmbsn(config);
    case Architecture::MmBsn:
      return build_mmbsn(config);
  }
  throw std::invalid_argument("unknown architecture");
}

}  // namespace mmbsn
