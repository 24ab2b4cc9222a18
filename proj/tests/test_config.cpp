#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <string>

#include "rtm/config.hpp"
#include "rtm/error.hpp"

using namespace rtm;
using nlohmann::json;

namespace {

json base_json() {
  return json{{"seed", 1},
              {"dataset", {{"kind", "gaussian_ring"}, {"n", 64}, {"seed", 1}, {"modes", 8}}},
              {"mapper", {{"kind", "rtm"}, {"H", 8}, {"L", 2}}},
              {"decoder", {{"kind", "point"}}},
              {"imle", {{"steps", 100}, {"refresh_period", 50}}},
              {"metrics", {{"k", 3}, {"n_fake", 256}}}};
}

}  // namespace

TEST_CASE("defaults fill every omitted field") {
  ExperimentConfig cfg = config_from_json(json::object());
  CHECK(cfg.seed == 1);
  CHECK(cfg.dataset.kind == DatasetKind::gaussian_ring);
  CHECK(cfg.generator.mapper == MapperKind::rtm);
  CHECK(cfg.generator.rtm.d == 32);
  CHECK(cfg.generator.rtm.H == 8);
  CHECK(cfg.generator.decoder == DecoderKind::point);
  CHECK(cfg.imle.steps == 5000);
  CHECK(cfg.imle.pool_size == 0);  // auto marker
  CHECK(cfg.metrics.k == 3);
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("parsing round-trips through the explicit serialization") {
  ExperimentConfig cfg = config_from_json(base_json());
  json j = config_to_json(cfg);
  ExperimentConfig again = config_from_json(j);
  CHECK(config_to_json(again) == j);
  CHECK(canonical_config_string(cfg) == canonical_config_string(again));
  CHECK(config_digest(cfg) == config_digest(again));
}

TEST_CASE("unknown keys fail with their full path") {
  json j = base_json();
  j["imle"]["foo"] = 1;
  bool pathed = false;
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    pathed = std::string(e.what()).find("imle.foo") != std::string::npos;
  }
  CHECK(pathed);

  json top = base_json();
  top["extra_section"] = json::object();
  CHECK_THROWS_AS(config_from_json(top), ConfigError);

  json ds = base_json();
  ds["dataset"]["sigma"] = 0.1;
  bool ds_pathed = false;
  try {
    config_from_json(ds);
  } catch (const ConfigError& e) {
    ds_pathed = std::string(e.what()).find("dataset.sigma") != std::string::npos;
  }
  CHECK(ds_pathed);
}

TEST_CASE("type mismatches name the offending field") {
  json j = base_json();
  j["imle"]["steps"] = "many";
  bool pathed = false;
  try {
    config_from_json(j);
  } catch (const ConfigError& e) {
    pathed = std::string(e.what()).find("imle.steps") != std::string::npos;
  }
  CHECK(pathed);
  json k = base_json();
  k["mapper"]["kind"] = "transformer";
  CHECK_THROWS_AS(config_from_json(k), ConfigError);
}

TEST_CASE("auto markers parse and serialize symbolically") {
  json j = base_json();
  j["imle"]["pool_size"] = "auto";
  j["imle"]["batch"] = "auto";
  j["imle"]["eps_reject"] = "auto";
  ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.imle.pool_size == 0);
  CHECK(cfg.imle.batch == 0);
  CHECK(cfg.imle.eps_reject < 0.0);
  json out = config_to_json(cfg);
  CHECK(out["imle"]["pool_size"] == "auto");
  CHECK(out["imle"]["batch"] == "auto");
  CHECK(out["imle"]["eps_reject"] == "auto");
  // Explicit values stay numeric.
  j["imle"]["pool_size"] = 512;
  ExperimentConfig cfg2 = config_from_json(j);
  CHECK(cfg2.imle.pool_size == 512);
  CHECK(config_to_json(cfg2)["imle"]["pool_size"] == 512);
}

TEST_CASE("decoder and dataset shape agreement is enforced") {
  json j = base_json();
  j["dataset"]["kind"] = "micro_patterns";  // 3x8x8 samples, point decoder emits 2
  // config_from_json validates the finished config, so the mismatch is
  // rejected at parse time.
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j["decoder"]["kind"] = "micro_image";
  ExperimentConfig ok = config_from_json(j);
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("style width always tracks the mapper output width") {
  json j = base_json();
  j["mapper"]["d"] = 48;
  ExperimentConfig cfg = config_from_json(j);
  CHECK(cfg.generator.rtm.d == 48);
  CHECK(cfg.generator.point.style_dim == 48);
  j["mapper"] = {{"kind", "mlp"}, {"d", 24}, {"depth", 4}, {"hidden", 16}};
  ExperimentConfig mlp = config_from_json(j);
  CHECK(mlp.generator.mlp.d == 24);
  CHECK(mlp.generator.point.style_dim == 24);
  CHECK_NOTHROW(mlp.validate());
}

TEST_CASE("digest ignores seed and step horizon but nothing else") {
  ExperimentConfig base = config_from_json(base_json());
  Digest d0 = config_digest(base);

  ExperimentConfig seeded = base;
  seeded.seed = 999;
  CHECK(config_digest(seeded) == d0);

  ExperimentConfig longer = base;
  longer.imle.steps = 10000;
  CHECK(config_digest(longer) == d0);

  ExperimentConfig other_data = base;
  other_data.dataset.n = 128;
  CHECK(config_digest(other_data) != d0);

  ExperimentConfig other_mapper = base;
  other_mapper.generator.rtm.H = 16;
  CHECK(config_digest(other_mapper) != d0);

  ExperimentConfig other_lr = base;
  other_lr.imle.lr = 5e-4;
  CHECK(config_digest(other_lr) != d0);

  ExperimentConfig other_ds_seed = base;
  other_ds_seed.dataset.seed = 42;
  CHECK(config_digest(other_ds_seed) != d0);
}

TEST_CASE("digest hex prints the requested prefix") {
  Digest d{};
  for (size_t i = 0; i < d.size(); ++i) d[i] = static_cast<uint8_t>(i);
  CHECK(digest_hex(d, 4) == "00010203");
  CHECK(digest_hex(d).size() == 64);
}

TEST_CASE("digests are stable across serialization order") {
  // Key order in the input JSON must not matter: parsing normalizes.
  json a = base_json();
  json b = json{{"metrics", a["metrics"]}, {"imle", a["imle"]},   {"decoder", a["decoder"]},
                {"mapper", a["mapper"]},   {"dataset", a["dataset"]}, {"seed", a["seed"]}};
  CHECK(config_digest(config_from_json(a)) == config_digest(config_from_json(b)));
}

TEST_CASE("file loading reports missing files and parse errors") {
  CHECK_THROWS_AS(load_config("/nonexistent/path/config.json"), ConfigError);
  const char* path = "bad_config_test.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ConfigError);
  {
    std::ofstream out(path);
    out << base_json().dump();
  }
  ExperimentConfig cfg = load_config(path);
  CHECK(cfg.dataset.n == 64);
  std::remove(path);
}

TEST_CASE("metrics config validates its fields") {
  MetricsConfig m;
  m.k = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = MetricsConfig{};
  m.n_fake = 0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
}
