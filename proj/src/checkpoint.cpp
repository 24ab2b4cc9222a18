#include "rtm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>

#include "rtm/error.hpp"

namespace rtm {

namespace {

constexpr char kMagic[4] = {'R', 'T', 'M', 'I'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

struct Reader {
  std::ifstream in;
  explicit Reader(const std::string& path) : in(path, std::ios::binary) {}

  void bytes(void* dst, size_t len, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(len));
    if (static_cast<size_t>(in.gcount()) != len)
      throw CheckpointError(CheckpointError::Kind::truncated,
                            std::string("checkpoint: truncated while reading ") + what);
  }
  uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
  }
  uint64_t u64(const char* what) {
    uint64_t lo = u32(what);
    uint64_t hi = u32(what);
    return lo | (hi << 32);
  }
  std::string str(uint32_t len, const char* what) {
    std::string s(len, '\0');
    if (len) bytes(s.data(), len, what);
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointData& data) {
  std::string buf;
  buf.append(kMagic, 4);
  put_u32(buf, kCheckpointVersion);
  buf.append(reinterpret_cast<const char*>(data.digest.data()), data.digest.size());
  put_u64(buf, data.step);
  if (data.rng_tag.size() > std::numeric_limits<uint32_t>::max())
    throw CheckpointError(CheckpointError::Kind::format, "checkpoint: rng tag too long");
  put_u32(buf, static_cast<uint32_t>(data.rng_tag.size()));
  buf.append(data.rng_tag);
  put_u32(buf, 8);  // rng state: the 8-byte seed
  put_u64(buf, data.seed);
  put_u32(buf, static_cast<uint32_t>(data.tensors.size()));
  for (const NamedTensorData& t : data.tensors) {
    put_u32(buf, static_cast<uint32_t>(t.name.size()));
    buf.append(t.name);
    put_u32(buf, static_cast<uint32_t>(t.shape.size()));
    int64_t numel = 1;
    for (int64_t dim : t.shape) {
      if (dim < 0 || dim > std::numeric_limits<uint32_t>::max())
        throw CheckpointError(CheckpointError::Kind::format,
                              "checkpoint: dimension out of range in " + t.name);
      put_u32(buf, static_cast<uint32_t>(dim));
      numel *= dim;
    }
    if (static_cast<int64_t>(t.values.size()) != numel)
      throw CheckpointError(CheckpointError::Kind::format,
                            "checkpoint: shape/value mismatch in " + t.name);
    put_u64(buf, static_cast<uint64_t>(numel) * 4);
    for (double v : t.values) put_f32(buf, static_cast<float>(v));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot open " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: write failed: " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
  Reader r(path);
  if (!r.in) throw CheckpointError(CheckpointError::Kind::io, "checkpoint: cannot open " + path);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::format, "checkpoint: bad magic in " + path);
  uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::version_mismatch,
                          "checkpoint: version " + std::to_string(version) + " (expected " +
                              std::to_string(kCheckpointVersion) + ")");
  CheckpointData data;
  r.bytes(data.digest.data(), data.digest.size(), "config digest");
  data.step = r.u64("step");
  uint32_t tag_len = r.u32("rng tag length");
  data.rng_tag = r.str(tag_len, "rng tag");
  uint32_t state_len = r.u32("rng state length");
  if (state_len != 8)
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: unexpected rng state length " + std::to_string(state_len));
  data.seed = r.u64("rng seed");
  uint32_t count = r.u32("tensor count");
  data.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    NamedTensorData t;
    uint32_t name_len = r.u32("tensor name length");
    t.name = r.str(name_len, "tensor name");
    uint32_t ndim = r.u32("tensor rank");
    if (ndim > 8)
      throw CheckpointError(CheckpointError::Kind::format,
                            "checkpoint: tensor rank " + std::to_string(ndim) + " in " + t.name);
    int64_t numel = 1;
    for (uint32_t d = 0; d < ndim; ++d) {
      uint32_t dim = r.u32("tensor dimension");
      t.shape.push_back(static_cast<int64_t>(dim));
      numel *= static_cast<int64_t>(dim);
    }
    uint64_t payload = r.u64("payload length");
    if (payload != static_cast<uint64_t>(numel) * 4)
      throw CheckpointError(CheckpointError::Kind::format,
                            "checkpoint: payload length mismatch in " + t.name);
    t.values.resize(static_cast<size_t>(numel));
    for (int64_t j = 0; j < numel; ++j) {
      uint32_t bits = r.u32("tensor values");
      t.values[static_cast<size_t>(j)] = static_cast<double>(std::bit_cast<float>(bits));
    }
    data.tensors.push_back(std::move(t));
  }
  char extra;
  r.in.read(&extra, 1);
  if (r.in.gcount() != 0)
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: trailing bytes after last tensor in " + path);
  return data;
}

CheckpointData pack_train_state(const ExperimentConfig& cfg, const TrainState& state) {
  CheckpointData data;
  data.digest = config_digest(cfg);
  data.step = static_cast<uint64_t>(state.step);
  data.seed = state.seed;

  auto& mut = const_cast<TrainState&>(state);
  ParamRegistry params = collect_params(state.cfg, mut.params);
  ParamRegistry ema = collect_params(state.cfg, mut.ema);
  if (state.opt.m.size() != params.size() || state.opt.v.size() != params.size())
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: optimizer state does not match parameters");

  auto push = [&](const std::string& name, const Shape& shape, const std::vector<double>& values) {
    data.tensors.push_back({name, shape, values});
  };
  for (size_t i = 0; i < params.size(); ++i)
    push("param/" + params[i].first, params[i].second.shape(), params[i].second.values());
  for (size_t i = 0; i < params.size(); ++i)
    push("adam_m/" + params[i].first, state.opt.m[i].shape(), state.opt.m[i].values());
  for (size_t i = 0; i < params.size(); ++i)
    push("adam_v/" + params[i].first, state.opt.v[i].shape(), state.opt.v[i].values());
  for (size_t i = 0; i < ema.size(); ++i)
    push("ema/" + ema[i].first, ema[i].second.shape(), ema[i].second.values());

  const Matrix& ml = state.matched_latents;
  std::vector<double> latent_values(ml.data.begin(), ml.data.end());
  push("trainer/matched_latents", {ml.rows, ml.cols}, latent_values);
  push("trainer/matched_distance", {static_cast<int64_t>(state.matched_distance.size())},
       state.matched_distance);
  push("trainer/accepted_count", {1}, {static_cast<double>(state.accepted_count)});
  return data;
}

TrainState unpack_train_state(const ExperimentConfig& cfg, const CheckpointData& data) {
  Digest expect = config_digest(cfg);
  if (data.digest != expect)
    throw CheckpointError(CheckpointError::Kind::digest_mismatch,
                          "checkpoint: config digest " + digest_hex(data.digest, 8) +
                              " does not match this config's " + digest_hex(expect, 8));
  std::map<std::string, const NamedTensorData*> index;
  for (const NamedTensorData& t : data.tensors) {
    if (!index.emplace(t.name, &t).second)
      throw CheckpointError(CheckpointError::Kind::format,
                            "checkpoint: duplicate tensor " + t.name);
  }
  auto fetch = [&](const std::string& name) -> const NamedTensorData& {
    auto it = index.find(name);
    if (it == index.end())
      throw CheckpointError(CheckpointError::Kind::format, "checkpoint: missing tensor " + name);
    return *it->second;
  };
  auto load_into = [&](const std::string& name, Tensor& dst) {
    const NamedTensorData& t = fetch(name);
    if (t.shape != dst.shape())
      throw CheckpointError(CheckpointError::Kind::format,
                            "checkpoint: shape mismatch for " + name + " (" + shape_str(t.shape) +
                                " vs " + shape_str(dst.shape()) + ")");
    dst.values() = t.values;
  };

  TrainState st;
  st.cfg = cfg.generator;
  st.step = static_cast<int64_t>(data.step);
  st.seed = data.seed;
  st.params = init_generator(cfg.generator, data.seed);
  st.ema = clone_params(cfg.generator, st.params);
  ParamRegistry params = collect_params(st.cfg, st.params);
  ParamRegistry ema = collect_params(st.cfg, st.ema);
  st.opt = init_adam(params);
  st.opt.t = st.step;
  for (size_t i = 0; i < params.size(); ++i) {
    load_into("param/" + params[i].first, params[i].second);
    load_into("adam_m/" + params[i].first, st.opt.m[i]);
    load_into("adam_v/" + params[i].first, st.opt.v[i]);
    load_into("ema/" + ema[i].first, ema[i].second);
  }

  const NamedTensorData& ml = fetch("trainer/matched_latents");
  if (ml.shape.size() != 2)
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: trainer/matched_latents must be rank 2");
  st.matched_latents = Matrix(ml.shape[0], ml.shape[1]);
  std::copy(ml.values.begin(), ml.values.end(), st.matched_latents.data.begin());
  const NamedTensorData& md = fetch("trainer/matched_distance");
  if (md.shape.size() != 1 || md.shape[0] != ml.shape[0])
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: trainer/matched_distance shape mismatch");
  st.matched_distance = md.values;
  const NamedTensorData& ac = fetch("trainer/accepted_count");
  if (ac.values.size() != 1)
    throw CheckpointError(CheckpointError::Kind::format,
                          "checkpoint: trainer/accepted_count must hold one value");
  st.accepted_count = static_cast<int64_t>(ac.values[0]);
  return st;
}

}  // namespace rtm
