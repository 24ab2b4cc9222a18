#include "rtm/config.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "rtm/error.hpp"

namespace rtm {

namespace {

using nlohmann::json;

std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void check_keys(const json& j, const std::string& prefix,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    throw ConfigError((prefix.empty() ? std::string("config") : prefix) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) throw ConfigError(join_path(prefix, it.key()) + ": unknown key");
  }
}

int64_t get_int(const json& j, const std::string& prefix, const char* key, int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(join_path(prefix, key) + ": expected an integer");
  return v.get<int64_t>();
}

uint64_t get_uint(const json& j, const std::string& prefix, const char* key, uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() &&
                                 v.get<int64_t>() < 0))
    throw ConfigError(join_path(prefix, key) + ": expected a non-negative integer");
  return v.get<uint64_t>();
}

double get_double(const json& j, const std::string& prefix, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) throw ConfigError(join_path(prefix, key) + ": expected a number");
  return v.get<double>();
}

std::string get_string(const json& j, const std::string& prefix, const char* key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) throw ConfigError(join_path(prefix, key) + ": expected a string");
  return v.get<std::string>();
}

// "auto" or a non-negative integer; `auto_value` marks auto internally.
int64_t get_auto_int(const json& j, const std::string& prefix, const char* key, int64_t fallback,
                     int64_t auto_value) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return auto_value;
    throw ConfigError(join_path(prefix, key) + ": expected \"auto\" or an integer");
  }
  if (!v.is_number_integer())
    throw ConfigError(join_path(prefix, key) + ": expected \"auto\" or an integer");
  return v.get<int64_t>();
}

double get_auto_double(const json& j, const std::string& prefix, const char* key, double fallback,
                       double auto_value) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto") return auto_value;
    throw ConfigError(join_path(prefix, key) + ": expected \"auto\" or a number");
  }
  if (!v.is_number()) throw ConfigError(join_path(prefix, key) + ": expected \"auto\" or a number");
  return v.get<double>();
}

DatasetSpec dataset_from_json(const json& j) {
  check_keys(j, "dataset",
             {"kind", "n", "seed", "modes", "ring_radius", "component_std", "moon_noise",
              "palette"});
  DatasetSpec d;
  d.kind = dataset_kind_from_string(get_string(j, "dataset", "kind", to_string(d.kind)));
  d.n = get_int(j, "dataset", "n", d.n);
  d.seed = get_uint(j, "dataset", "seed", d.seed);
  d.modes = get_int(j, "dataset", "modes", d.modes);
  d.ring_radius = get_double(j, "dataset", "ring_radius", d.ring_radius);
  d.component_std = get_double(j, "dataset", "component_std", d.component_std);
  d.moon_noise = get_double(j, "dataset", "moon_noise", d.moon_noise);
  d.palette = get_int(j, "dataset", "palette", d.palette);
  return d;
}

void mapper_from_json(const json& j, GeneratorConfig& g) {
  check_keys(j, "mapper",
             {"kind", "d", "s", "d_h", "H", "L", "block", "expansion", "heads", "depth",
              "hidden"});
  std::string kind = get_string(j, "mapper", "kind", "rtm");
  if (kind == "rtm") {
    g.mapper = MapperKind::rtm;
  } else if (kind == "mlp") {
    g.mapper = MapperKind::baseline_mlp;
  } else {
    throw ConfigError("mapper.kind: unknown value \"" + kind + "\"");
  }
  g.rtm.d = get_int(j, "mapper", "d", g.rtm.d);
  g.rtm.s = get_int(j, "mapper", "s", g.rtm.s);
  g.rtm.d_h = get_int(j, "mapper", "d_h", g.rtm.d_h);
  g.rtm.H = get_int(j, "mapper", "H", g.rtm.H);
  g.rtm.L = get_int(j, "mapper", "L", g.rtm.L);
  std::string block = get_string(j, "mapper", "block",
                                 g.rtm.block == BlockKind::token_mixer ? "token_mixer"
                                                                       : "self_attention");
  if (block == "token_mixer") {
    g.rtm.block = BlockKind::token_mixer;
  } else if (block == "self_attention") {
    g.rtm.block = BlockKind::self_attention;
  } else {
    throw ConfigError("mapper.block: unknown value \"" + block + "\"");
  }
  g.rtm.expansion = get_double(j, "mapper", "expansion", g.rtm.expansion);
  g.rtm.heads = get_int(j, "mapper", "heads", g.rtm.heads);
  g.mlp.d = g.rtm.d;
  g.mlp.depth = get_int(j, "mapper", "depth", g.mlp.depth);
  g.mlp.hidden = get_int(j, "mapper", "hidden", g.mlp.hidden);
}

void decoder_from_json(const json& j, GeneratorConfig& g) {
  check_keys(j, "decoder", {"kind", "hidden", "layers", "channels", "stages"});
  std::string kind = get_string(j, "decoder", "kind", "point");
  if (kind == "point") {
    g.decoder = DecoderKind::point;
  } else if (kind == "micro_image") {
    g.decoder = DecoderKind::micro_image;
  } else {
    throw ConfigError("decoder.kind: unknown value \"" + kind + "\"");
  }
  g.point.hidden = get_int(j, "decoder", "hidden", g.point.hidden);
  g.point.layers = get_int(j, "decoder", "layers", g.point.layers);
  g.micro.channels = get_int(j, "decoder", "channels", g.micro.channels);
  g.micro.stages = get_int(j, "decoder", "stages", g.micro.stages);
  // Style width always tracks the mapper's output width.
  g.point.style_dim = g.latent_dim();
  g.micro.style_dim = g.latent_dim();
}

ImleHyper imle_from_json(const json& j) {
  check_keys(j, "imle",
             {"pool_size", "eps_reject", "refresh_period", "lr", "steps", "ema_decay", "batch",
              "beta1", "beta2", "adam_eps"});
  ImleHyper h;
  h.pool_size = get_auto_int(j, "imle", "pool_size", h.pool_size, 0);
  h.eps_reject = get_auto_double(j, "imle", "eps_reject", h.eps_reject, -1.0);
  h.refresh_period = get_int(j, "imle", "refresh_period", h.refresh_period);
  h.lr = get_double(j, "imle", "lr", h.lr);
  h.steps = get_int(j, "imle", "steps", h.steps);
  h.ema_decay = get_double(j, "imle", "ema_decay", h.ema_decay);
  h.batch = get_auto_int(j, "imle", "batch", h.batch, 0);
  h.beta1 = get_double(j, "imle", "beta1", h.beta1);
  h.beta2 = get_double(j, "imle", "beta2", h.beta2);
  h.adam_eps = get_double(j, "imle", "adam_eps", h.adam_eps);
  return h;
}

MetricsConfig metrics_from_json(const json& j) {
  check_keys(j, "metrics", {"k", "n_fake"});
  MetricsConfig m;
  m.k = get_int(j, "metrics", "k", m.k);
  m.n_fake = get_int(j, "metrics", "n_fake", m.n_fake);
  return m;
}

}  // namespace

void MetricsConfig::validate() const {
  if (k < 1) throw ConfigError("metrics.k: must be >= 1, got " + std::to_string(k));
  if (n_fake < 1) throw ConfigError("metrics.n_fake: must be >= 1, got " + std::to_string(n_fake));
}

void ExperimentConfig::validate() const {
  dataset.validate();
  generator.validate();
  imle.validate();
  metrics.validate();
  if (generator.sample_dim() != dataset.sample_dim())
    throw ConfigError("decoder.kind: decoder emits " + std::to_string(generator.sample_dim()) +
                      " values per sample but dataset.kind \"" + to_string(dataset.kind) +
                      "\" has " + std::to_string(dataset.sample_dim()));
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  check_keys(j, "", {"seed", "dataset", "mapper", "decoder", "imle", "metrics"});
  ExperimentConfig cfg;
  cfg.seed = get_uint(j, "", "seed", cfg.seed);
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j.at("dataset"));
  if (j.contains("mapper")) mapper_from_json(j.at("mapper"), cfg.generator);
  if (j.contains("decoder")) decoder_from_json(j.at("decoder"), cfg.generator);
  // Re-derive the style width even when only "mapper" was given.
  cfg.generator.point.style_dim = cfg.generator.latent_dim();
  cfg.generator.micro.style_dim = cfg.generator.latent_dim();
  cfg.generator.mlp.d = cfg.generator.rtm.d;
  if (j.contains("imle")) cfg.imle = imle_from_json(j.at("imle"));
  if (j.contains("metrics")) cfg.metrics = metrics_from_json(j.at("metrics"));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in " + path + ": " + e.what());
  }
  return config_from_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["dataset"] = {
      {"kind", to_string(cfg.dataset.kind)},
      {"n", cfg.dataset.n},
      {"seed", cfg.dataset.seed},
      {"modes", cfg.dataset.modes},
      {"ring_radius", cfg.dataset.ring_radius},
      {"component_std", cfg.dataset.component_std},
      {"moon_noise", cfg.dataset.moon_noise},
      {"palette", cfg.dataset.palette},
  };
  j["mapper"] = {
      {"kind", cfg.generator.mapper == MapperKind::rtm ? "rtm" : "mlp"},
      {"d", cfg.generator.rtm.d},
      {"s", cfg.generator.rtm.s},
      {"d_h", cfg.generator.rtm.d_h},
      {"H", cfg.generator.rtm.H},
      {"L", cfg.generator.rtm.L},
      {"block",
       cfg.generator.rtm.block == BlockKind::token_mixer ? "token_mixer" : "self_attention"},
      {"expansion", cfg.generator.rtm.expansion},
      {"heads", cfg.generator.rtm.heads},
      {"depth", cfg.generator.mlp.depth},
      {"hidden", cfg.generator.mlp.hidden},
  };
  j["decoder"] = {
      {"kind", cfg.generator.decoder == DecoderKind::point ? "point" : "micro_image"},
      {"hidden", cfg.generator.point.hidden},
      {"layers", cfg.generator.point.layers},
      {"channels", cfg.generator.micro.channels},
      {"stages", cfg.generator.micro.stages},
  };
  j["imle"] = {
      {"refresh_period", cfg.imle.refresh_period},
      {"lr", cfg.imle.lr},
      {"steps", cfg.imle.steps},
      {"ema_decay", cfg.imle.ema_decay},
      {"beta1", cfg.imle.beta1},
      {"beta2", cfg.imle.beta2},
      {"adam_eps", cfg.imle.adam_eps},
  };
  if (cfg.imle.pool_size > 0)
    j["imle"]["pool_size"] = cfg.imle.pool_size;
  else
    j["imle"]["pool_size"] = "auto";
  if (cfg.imle.eps_reject >= 0.0)
    j["imle"]["eps_reject"] = cfg.imle.eps_reject;
  else
    j["imle"]["eps_reject"] = "auto";
  if (cfg.imle.batch > 0)
    j["imle"]["batch"] = cfg.imle.batch;
  else
    j["imle"]["batch"] = "auto";
  j["metrics"] = {{"k", cfg.metrics.k}, {"n_fake", cfg.metrics.n_fake}};
  return j;
}

std::string canonical_config_string(const ExperimentConfig& cfg) {
  // nlohmann::json keeps object keys sorted, and dump() emits shortest
  // round-trip numerals, so equal configs serialize identically. The run
  // seed and the total-step target are excluded: run identity is
  // (digest, seed), and a checkpoint taken at step k stays valid when
  // training is continued under a larger imle.steps.
  nlohmann::json j = config_to_json(cfg);
  j.erase("seed");
  j["imle"].erase("steps");
  return j.dump();
}

Digest config_digest(const ExperimentConfig& cfg) {
  std::string text = canonical_config_string(cfg);
  Digest out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("config_digest: EVP_MD_CTX_new failed");
  bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
            EVP_DigestUpdate(ctx, text.data(), text.size()) == 1 &&
            EVP_DigestFinal_ex(ctx, out.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != out.size()) throw std::runtime_error("config_digest: SHA-256 failed");
  return out;
}

std::string digest_hex(const Digest& d, size_t bytes) {
  static const char* hex = "0123456789abcdef";
  if (bytes > d.size()) bytes = d.size();
  std::string out;
  out.reserve(bytes * 2);
  for (size_t i = 0; i < bytes; ++i) {
    out.push_back(hex[d[i] >> 4]);
    out.push_back(hex[d[i] & 0xf]);
  }
  return out;
}

}  // namespace rtm
