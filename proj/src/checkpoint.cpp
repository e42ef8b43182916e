#include "roesl/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "roesl/util.hpp"

namespace roesl {

namespace {

constexpr char kMagic[8] = {'R', 'O', 'E', 'S', 'L', 'C', 'K', 'P'};

void write_u16(std::ostream& out, uint16_t v) {
  const uint8_t b[2] = {static_cast<uint8_t>(v & 0xff), static_cast<uint8_t>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, uint32_t v) {
  uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint16_t read_u16(std::istream& in) {
  uint8_t b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t read_u32(std::istream& in) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  uint8_t b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_checkpoint(const std::filesystem::path& path, const std::vector<int>& sizes,
                      const std::vector<double>& params, std::span<const double> extra,
                      const nlohmann::json& sidecar) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_u16(out, kCheckpointVersion);
  write_u16(out, static_cast<uint16_t>(sizes.size()));
  for (int s : sizes) write_u32(out, static_cast<uint32_t>(s));
  write_u32(out, static_cast<uint32_t>(extra.size()));
  for (double p : params) write_f64(out, p);
  for (double p : extra) write_f64(out, p);
  out.flush();
  if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());

  nlohmann::json meta = sidecar.is_null() ? nlohmann::json::object() : sidecar;
  meta["checkpoint_version"] = kCheckpointVersion;
  meta["layer_sizes"] = sizes;
  std::ofstream side(path.string() + ".json", std::ios::trunc);
  side << meta.dump(2) << "\n";
}

struct RawCheckpoint {
  std::vector<int> sizes;
  std::vector<double> params;
  std::vector<double> extra;
};

RawCheckpoint read_checkpoint(const std::filesystem::path& path,
                              const std::vector<int>& expected_sizes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("not a checkpoint file (bad magic): " + path.string());
  const uint16_t version = read_u16(in);
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) +
                             " in " + path.string());

  RawCheckpoint raw;
  const uint16_t n_sizes = read_u16(in);
  raw.sizes.resize(n_sizes);
  for (auto& s : raw.sizes) s = static_cast<int>(read_u32(in));
  const uint32_t n_extra = read_u32(in);

  if (!expected_sizes.empty() && raw.sizes != expected_sizes)
    throw std::runtime_error("checkpoint layer table mismatch in " + path.string() +
                             ": file has [" + join(raw.sizes) + "], expected [" +
                             join(expected_sizes) + "]");

  size_t n_params = 0;
  for (size_t l = 0; l + 1 < raw.sizes.size(); ++l)
    n_params += static_cast<size_t>(raw.sizes[l]) * raw.sizes[l + 1] + raw.sizes[l + 1];
  raw.params.resize(n_params);
  for (auto& p : raw.params) p = read_f64(in);
  raw.extra.resize(n_extra);
  for (auto& p : raw.extra) p = read_f64(in);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path.string());
  return raw;
}

}  // namespace

void save_policy(const std::filesystem::path& path, const GaussianPolicy& policy,
                 const nlohmann::json& sidecar) {
  write_checkpoint(path, policy.mean.sizes(), policy.mean.params, policy.log_std, sidecar);
}

GaussianPolicy load_policy(const std::filesystem::path& path,
                           const std::vector<int>& expected_sizes) {
  RawCheckpoint raw = read_checkpoint(path, expected_sizes);
  if (raw.extra.size() != kNumLegs)
    throw std::runtime_error("checkpoint is not a policy (expected " +
                             std::to_string(kNumLegs) + " log-std entries): " + path.string());
  GaussianPolicy policy;
  policy.mean = Mlp(raw.sizes, nullptr);
  if (policy.mean.param_count() != raw.params.size())
    throw std::runtime_error("checkpoint parameter block size mismatch: " + path.string());
  policy.mean.params = std::move(raw.params);
  for (int i = 0; i < kNumLegs; ++i) policy.log_std[i] = raw.extra[i];
  return policy;
}

void save_mlp(const std::filesystem::path& path, const Mlp& net, const nlohmann::json& sidecar) {
  write_checkpoint(path, net.sizes(), net.params, {}, sidecar);
}

Mlp load_mlp(const std::filesystem::path& path, const std::vector<int>& expected_sizes) {
  RawCheckpoint raw = read_checkpoint(path, expected_sizes);
  if (!raw.extra.empty())
    throw std::runtime_error("checkpoint is not a plain net (has extra parameters): " +
                             path.string());
  Mlp net(raw.sizes, nullptr);
  if (net.param_count() != raw.params.size())
    throw std::runtime_error("checkpoint parameter block size mismatch: " + path.string());
  net.params = std::move(raw.params);
  return net;
}

}  // namespace roesl
