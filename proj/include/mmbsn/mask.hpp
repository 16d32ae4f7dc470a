#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mmbsn {

/// Integer (row, col) displacement relative to an output pixel.
struct Offset {
  int row = 0;
  int col = 0;
  auto operator<=>(const Offset&) const = default;
};

using OffsetSet = std::set<Offset>;

std::string format_offsets(const OffsetSet& offsets);

enum class MaskTag { O, HBar, VBar, Plus, Slash, Backslash, Cross, Square, SquarePlus, Star, Custom };

/// Named blind-spot geometry. Custom shapes carry their own offset set.
struct MaskShape {
  MaskTag tag = MaskTag::O;
  OffsetSet custom;

  MaskShape() = default;
  MaskShape(MaskTag t) : tag(t) {}  // NOLINT(google-explicit-constructor)
  static MaskShape make_custom(OffsetSet offsets);

  bool operator==(const MaskShape&) const = default;
};

/// The ten built-in shapes, in canonical order.
const std::vector<MaskTag>& builtin_mask_tags();

/// ASCII tag used in configs and CLI flags ("o", "hbar", ..., "star").
std::string mask_name(const MaskShape& shape);
/// Inverse of mask_name; throws std::invalid_argument on unknown tags.
MaskShape parse_mask(std::string_view name);
/// Comma-separated list of tags.
std::vector<MaskShape> parse_mask_list(std::string_view names);

/// Binary k x k kernel mask; `masked` holds the zeroed taps.
class KernelMask {
 public:
  KernelMask(int k, OffsetSet masked);

  /// Skips the invariant checks. Only used to build negative controls.
  static KernelMask unchecked(int k, OffsetSet masked);

  int size() const { return k_; }
  int radius() const { return (k_ - 1) / 2; }
  const OffsetSet& masked() const { return masked_; }
  bool is_masked(int row, int col) const { return masked_.count({row, col}) != 0; }
  /// Row-major k*k vector, 1 where the tap is masked.
  std::vector<unsigned char> dense() const;

  bool operator==(const KernelMask&) const = default;

 private:
  KernelMask() = default;
  int k_ = 1;
  OffsetSet masked_;
};

/// Realizes a shape on a k x k kernel. k must be odd and >= 3 (k = 1 is
/// accepted for the O shape only).
KernelMask render_mask(const MaskShape& shape, int k);

/// Offsets within radius R an output pixel cannot depend on.
struct ExclusionSet {
  int radius = 0;
  OffsetSet offsets;

  bool contains(Offset o) const { return offsets.count(o) != 0; }
  bool operator==(const ExclusionSet&) const = default;
};

/// Reachability analysis for: pointwise layers -> masked conv -> dilated 3x3
/// convs -> pointwise layers. An offset (a, b) is reachable iff
/// (a, b) = (d*p + r, d*q + c) for some unmasked tap (r, c) and integers p, q.
/// With `dilated_layers` set, |p| and |q| are bounded by the layer count
/// (each 3x3 dilated conv moves by at most one dilation step per axis).
ExclusionSet exclusion_set(const KernelMask& mask, int dilation, int radius,
                           std::optional<int> dilated_layers = std::nullopt);

ExclusionSet intersect(const ExclusionSet& a, const ExclusionSet& b);

}  // namespace mmbsn
