#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmbsn/adam.hpp"
#include "mmbsn/mask.hpp"
#include "mmbsn/ops.hpp"

namespace mmbsn {

enum class Architecture { ApBsn, SmmBsn, MmBsn };

std::string architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

struct ArchitectureConfig {
  int base_channels = 128;
  std::vector<MaskShape> masks{MaskShape(MaskTag::O)};
  int cdcl_depth = 2;
  int trunk_depth = 7;
  std::vector<int> kernel_sizes{3, 5};
  std::vector<int> dilations{2, 3};
  int in_channels = 3;
  /// Negative control for the blind-spot verifier: leaves (0,0) unmasked.
  bool unmask_center = false;

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  bool operator==(const ArchitectureConfig&) const = default;
};

enum class NodeKind { Input, Conv, Relu, Concat };

struct Node {
  NodeKind kind = NodeKind::Input;
  std::vector<int> inputs;
  int param = -1;  // index into ModelGraph::params() for Conv nodes
  std::size_t channels = 0;
};

/// One masked-conv entry point and the dilation stack that follows it.
struct BranchInfo {
  std::string name;
  KernelMask mask;
  int dilation = 1;
  int dilated_depth = 0;  // dilated convs on the longest path to the output
};

struct Gradients {
  std::vector<ParamGrads> params;
  Tensor4 input;
};

/// Activations of one forward pass, needed by backward().
struct ForwardPass {
  std::vector<Tensor4> activations;
  const Tensor4& output() const { return activations.back(); }
};

/// Topologically ordered layer DAG with a single input and output.
class ModelGraph {
 public:
  ModelGraph() = default;
  explicit ModelGraph(std::size_t in_channels);

  // Graph construction; each call returns the new node id.
  int input() const { return 0; }
  int add_conv(int from, std::size_t out_channels, int k, int dilation, std::string name,
               std::optional<KernelMask> mask = std::nullopt);
  int add_relu(int from);
  int add_concat(const std::vector<int>& from);
  void add_branch(BranchInfo info) { branches_.push_back(std::move(info)); }

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<BranchInfo>& branches() const { return branches_; }
  std::vector<ConvParams>& params() { return params_; }
  const std::vector<ConvParams>& params() const { return params_; }
  const std::vector<std::string>& param_names() const { return param_names_; }
  std::size_t in_channels() const { return nodes_.empty() ? 0 : nodes_.front().channels; }
  std::size_t out_channels() const { return nodes_.back().channels; }

  /// Kaiming-uniform init of every layer from one seed.
  void init(std::uint64_t seed);
  void zero_final_layer();

  ForwardPass forward_pass(const Tensor4& x) const;
  Tensor4 forward(const Tensor4& x) const { return forward_pass(x).output(); }
  Gradients backward(const ForwardPass& pass, const Tensor4& grad_out) const;

 private:
  std::vector<Node> nodes_;
  std::vector<ConvParams> params_;
  std::vector<std::string> param_names_;
  std::vector<BranchInfo> branches_;
};

/// AP-BSN-style baseline: center mask only, per kernel size a masked conv,
/// two 1x1 convs and cdcl_depth + trunk_depth DCL blocks, then the 1x1 tail.
ModelGraph build_apbsn(const ArchitectureConfig& config);
/// One independent AP-BSN-style path per mask, concatenated before the tail.
ModelGraph build_smmbsn(const ArchitectureConfig& config);
/// Multi-mask network with concatenation-based DCL branches.
ModelGraph build_mmbsn(const ArchitectureConfig& config);
ModelGraph build_model(Architecture arch, const ArchitectureConfig& config);

/// Trainable scalars, masked (zero-held) taps included.
std::size_t count_params(const ModelGraph& model);

}  // namespace mmbsn
