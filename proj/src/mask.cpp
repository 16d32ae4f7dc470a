#include "mmbsn/mask.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>

namespace mmbsn {

std::string format_offsets(const OffsetSet& offsets) {
  std::string out = "{";
  bool first = true;
  for (const auto& o : offsets) {
    if (!first) out += ", ";
    first = false;
    out += "(" + std::to_string(o.row) + "," + std::to_string(o.col) + ")";
  }
  out += "}";
  return out;
}

MaskShape MaskShape::make_custom(OffsetSet offsets) {
  if (offsets.count({0, 0}) == 0) {
    throw std::invalid_argument("custom mask must contain the center offset (0,0)");
  }
  for (const auto& o : offsets) {
    if (offsets.count({-o.row, -o.col}) == 0) {
      throw std::invalid_argument("custom mask must be point-symmetric");
    }
  }
  MaskShape s(MaskTag::Custom);
  s.custom = std::move(offsets);
  return s;
}

const std::vector<MaskTag>& builtin_mask_tags() {
  static const std::vector<MaskTag> tags = {
      MaskTag::O,     MaskTag::HBar,      MaskTag::VBar,  MaskTag::Plus,
      MaskTag::Slash, MaskTag::Backslash, MaskTag::Cross, MaskTag::Square,
      MaskTag::SquarePlus, MaskTag::Star};
  return tags;
}

namespace {

struct TagName {
  MaskTag tag;
  const char* name;
};

constexpr TagName kNames[] = {
    {MaskTag::O, "o"},         {MaskTag::HBar, "hbar"},
    {MaskTag::VBar, "vbar"},   {MaskTag::Plus, "plus"},
    {MaskTag::Slash, "slash"}, {MaskTag::Backslash, "backslash"},
    {MaskTag::Cross, "cross"}, {MaskTag::Square, "square"},
    {MaskTag::SquarePlus, "squareplus"}, {MaskTag::Star, "star"},
};

void add_hbar(OffsetSet& s, int r) {
  for (int c = -r; c <= r; ++c) s.insert({0, c});
}
void add_vbar(OffsetSet& s, int r) {
  for (int t = -r; t <= r; ++t) s.insert({t, 0});
}
void add_slash(OffsetSet& s, int r) {
  for (int t = -r; t <= r; ++t) s.insert({t, -t});
}
void add_backslash(OffsetSet& s, int r) {
  for (int t = -r; t <= r; ++t) s.insert({t, t});
}
void add_square(OffsetSet& s, int r) {
  const int q = std::min(r, 1);
  for (int a = -q; a <= q; ++a)
    for (int b = -q; b <= q; ++b) s.insert({a, b});
}

}  // namespace

std::string mask_name(const MaskShape& shape) {
  if (shape.tag == MaskTag::Custom) return "custom" + format_offsets(shape.custom);
  for (const auto& n : kNames)
    if (n.tag == shape.tag) return n.name;
  return "?";
}

MaskShape parse_mask(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  for (const auto& n : kNames)
    if (lower == n.name) return MaskShape(n.tag);
  throw std::invalid_argument("unknown mask tag '" + std::string(name) + "'");
}

std::vector<MaskShape> parse_mask_list(std::string_view names) {
  std::vector<MaskShape> out;
  std::size_t start = 0;
  while (start <= names.size()) {
    const std::size_t comma = names.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? names.size() : comma;
    std::string_view item = names.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(parse_mask(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw std::invalid_argument("empty mask list");
  return out;
}

KernelMask::KernelMask(int k, OffsetSet masked) : k_(k), masked_(std::move(masked)) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("kernel size must be odd and >= 1");
  const int r = radius();
  for (const auto& o : masked_) {
    if (std::abs(o.row) > r || std::abs(o.col) > r) {
      throw std::invalid_argument("masked offset outside kernel support");
    }
  }
  if (masked_.count({0, 0}) == 0) throw std::invalid_argument("kernel mask must mask (0,0)");
}

KernelMask KernelMask::unchecked(int k, OffsetSet masked) {
  KernelMask m;
  m.k_ = k;
  m.masked_ = std::move(masked);
  return m;
}

std::vector<unsigned char> KernelMask::dense() const {
  std::vector<unsigned char> out(static_cast<std::size_t>(k_ * k_), 0);
  const int r = radius();
  for (const auto& o : masked_) {
    out[static_cast<std::size_t>((o.row + r) * k_ + (o.col + r))] = 1;
  }
  return out;
}

KernelMask render_mask(const MaskShape& shape, int k) {
  if (k < 1 || k % 2 == 0) throw std::invalid_argument("mask kernel size must be odd");
  if (k == 1 && shape.tag != MaskTag::O) {
    throw std::invalid_argument("kernel size 1 only supports the 'o' mask");
  }
  const int r = (k - 1) / 2;
  OffsetSet s;
  switch (shape.tag) {
    case MaskTag::O:
      s.insert({0, 0});
      break;
    case MaskTag::HBar:
      add_hbar(s, r);
      break;
    case MaskTag::VBar:
      add_vbar(s, r);
      break;
    case MaskTag::Plus:
      add_hbar(s, r);
      add_vbar(s, r);
      break;
    case MaskTag::Slash:
      add_slash(s, r);
      break;
    case MaskTag::Backslash:
      add_backslash(s, r);
      break;
    case MaskTag::Cross:
      add_slash(s, r);
      add_backslash(s, r);
      break;
    case MaskTag::Square:
      add_square(s, r);
      break;
    case MaskTag::SquarePlus:
      add_square(s, r);
      add_hbar(s, r);
      add_vbar(s, r);
      break;
    case MaskTag::Star:
      add_hbar(s, r);
      add_vbar(s, r);
      add_slash(s, r);
      add_backslash(s, r);
      break;
    case MaskTag::Custom:
      s = shape.custom;
      break;
  }
  return KernelMask(k, std::move(s));
}

ExclusionSet exclusion_set(const KernelMask& mask, int dilation, int radius,
                           std::optional<int> dilated_layers) {
  if (dilation < 1) throw std::invalid_argument("dilation must be >= 1");
  if (radius < 0) throw std::invalid_argument("radius must be >= 0");
  const int r = mask.radius();
  // Beyond this many steps no tap can land back inside the radius.
  int steps = (radius + r) / dilation + 1;
  if (dilated_layers) steps = std::min(steps, std::max(0, *dilated_layers));

  ExclusionSet out;
  out.radius = radius;
  for (int a = -radius; a <= radius; ++a) {
    for (int b = -radius; b <= radius; ++b) {
      bool reachable = false;
      for (int p = -steps; p <= steps && !reachable; ++p) {
        const int row = a - dilation * p;
        if (std::abs(row) > r) continue;
        for (int q = -steps; q <= steps; ++q) {
          const int col = b - dilation * q;
          if (std::abs(col) > r) continue;
          if (!mask.is_masked(row, col)) {
            reachable = true;
            break;
          }
        }
      }
      if (!reachable) out.offsets.insert({a, b});
    }
  }
  return out;
}

ExclusionSet intersect(const ExclusionSet& a, const ExclusionSet& b) {
  if (a.radius != b.radius) throw std::invalid_argument("exclusion sets use different radii");
  ExclusionSet out;
  out.radius = a.radius;
  std::set_intersection(a.offsets.begin(), a.offsets.end(), b.offsets.begin(), b.offsets.end(),
                        std::inserter(out.offsets, out.offsets.end()));
  return out;
}

}  // namespace mmbsn
