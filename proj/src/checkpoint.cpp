#include "mmbsn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace mmbsn {

using nlohmann::json;

namespace {

json config_to_json(const ArchitectureConfig& c) {
  json masks = json::array();
  for (const auto& m : c.masks) {
    if (m.tag == MaskTag::Custom) {
      json offs = json::array();
      for (const auto& o : m.custom) offs.push_back({o.row, o.col});
      masks.push_back({{"custom", offs}});
    } else {
      masks.push_back(mask_name(m));
    }
  }
  return {{"base_channels", c.base_channels}, {"masks", masks},
          {"cdcl_depth", c.cdcl_depth},       {"trunk_depth", c.trunk_depth},
          {"kernel_sizes", c.kernel_sizes},   {"dilations", c.dilations},
          {"in_channels", c.in_channels},     {"unmask_center", c.unmask_center}};
}

ArchitectureConfig config_from_json(const json& j) {
  ArchitectureConfig c;
  c.base_channels = j.at("base_channels").get<int>();
  c.masks.clear();
  for (const auto& m : j.at("masks")) {
    if (m.is_string()) {
      c.masks.push_back(parse_mask(m.get<std::string>()));
    } else {
      OffsetSet offs;
      for (const auto& o : m.at("custom")) offs.insert({o.at(0).get<int>(), o.at(1).get<int>()});
      c.masks.push_back(MaskShape::make_custom(std::move(offs)));
    }
  }
  c.cdcl_depth = j.at("cdcl_depth").get<int>();
  c.trunk_depth = j.at("trunk_depth").get<int>();
  c.kernel_sizes = j.at("kernel_sizes").get<std::vector<int>>();
  c.dilations = j.at("dilations").get<std::vector<int>>();
  c.in_channels = j.at("in_channels").get<int>();
  c.unmask_center = j.value("unmask_center", false);
  return c;
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)]))
         << (8 * i);
  }
  return v;
}

void put_block(std::string& out, std::span<const double> values) {
  for (double v : values) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}
  void read(std::span<double> dst) {
    if (pos_ + dst.size() * 8 > bytes_.size()) throw CheckpointError("checkpoint truncated");
    for (auto& v : dst) {
      v = std::bit_cast<double>(get_u64(bytes_, pos_));
      pos_ += 8;
    }
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  json blocks = json::array();
  const auto& params = ck.model.params();
  for (std::size_t l = 0; l < params.size(); ++l) {
    blocks.push_back({{"name", ck.model.param_names()[l]},
                      {"weight", {params[l].weight.batch(), params[l].weight.channels(),
                                  params[l].weight.height(), params[l].weight.width()}},
                      {"bias", params[l].bias.size()}});
  }
  const bool has_opt = ck.optimizer.m.size() == params.size();
  json header = {{"version", kCheckpointVersion},
                 {"arch", architecture_name(ck.arch)},
                 {"config", config_to_json(ck.config)},
                 {"seed", ck.seed},
                 {"step", ck.step},
                 {"epoch", ck.epoch},
                 {"param_count", count_params(ck.model)},
                 {"blocks", blocks},
                 {"optimizer",
                  has_opt ? json{{"lr", ck.optimizer.lr},
                                 {"beta1", ck.optimizer.beta1},
                                 {"beta2", ck.optimizer.beta2},
                                 {"eps", ck.optimizer.eps},
                                 {"step", ck.optimizer.step}}
                          : json(nullptr)}};
  const std::string text = header.dump();
  std::string out;
  put_u64(out, text.size());
  out += text;
  for (const auto& p : params) {
    put_block(out, p.weight.values());
    put_block(out, p.bias);
  }
  if (has_opt) {
    for (std::size_t l = 0; l < params.size(); ++l) {
      put_block(out, ck.optimizer.m[l]);
      put_block(out, ck.optimizer.v[l]);
    }
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 8) throw CheckpointError("checkpoint too short");
  const std::uint64_t len = get_u64(bytes, 0);
  if (len > bytes.size() - 8) throw CheckpointError("checkpoint header length out of range");
  json header;
  try {
    header = json::parse(bytes.substr(8, len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("version", "") != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version '" + header.value("version", "") + "'");
  }
  Checkpoint ck;
  try {
    ck.arch = parse_architecture(header.at("arch").get<std::string>());
    ck.config = config_from_json(header.at("config"));
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.step = header.at("step").get<std::uint64_t>();
    ck.epoch = header.at("epoch").get<int>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  ck.model = build_model(ck.arch, ck.config);
  auto& params = ck.model.params();
  const auto& blocks = header.at("blocks");
  if (blocks.size() != params.size()) throw CheckpointError("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < params.size(); ++l) {
    const auto dims = blocks[l].at("weight").get<std::vector<std::size_t>>();
    const Shape4 s = params[l].weight.shape();
    if (dims != std::vector<std::size_t>{s.batch, s.channels, s.height, s.width}) {
      throw CheckpointError("checkpoint block shape mismatch at layer " + std::to_string(l));
    }
  }
  Reader reader(bytes, 8 + len);
  for (auto& p : params) {
    reader.read(p.weight.values());
    reader.read(p.bias);
  }
  const auto& opt = header.at("optimizer");
  if (!opt.is_null()) {
    ck.optimizer = AdamState(params, opt.at("lr").get<double>());
    ck.optimizer.beta1 = opt.at("beta1").get<double>();
    ck.optimizer.beta2 = opt.at("beta2").get<double>();
    ck.optimizer.eps = opt.at("eps").get<double>();
    ck.optimizer.step = opt.at("step").get<std::uint64_t>();
    for (std::size_t l = 0; l < params.size(); ++l) {
      reader.read(ck.optimizer.m[l]);
      reader.read(ck.optimizer.v[l]);
    }
  }
  if (!reader.at_end()) throw CheckpointError("trailing bytes after checkpoint blocks");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = serialize_checkpoint(ck);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace mmbsn
