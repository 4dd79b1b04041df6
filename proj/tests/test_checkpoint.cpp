#include <filesystem>

#include "doctest.h"
#include "hebr/checkpoint.hpp"
#include "hebr/rng.hpp"

namespace fs = std::filesystem;

namespace {

hebr::HebrConfig small_cfg() {
  hebr::HebrConfig cfg;
  cfg.window_days = 8;
  cfg.d_e = 4;
  cfg.d_l = 2;
  cfg.d_c = 2;
  cfg.d_ec = cfg.d_el = cfg.d_elc = 4;
  return cfg;
}

}  // namespace

TEST_CASE("checkpoint save/load round trip preserves every tensor") {
  const auto path = (fs::temp_directory_path() / "hebr_ckpt.json").string();
  hebr::CheckpointBundle bundle;
  bundle.params = hebr::make_params(small_cfg());
  hebr::Rng rng(7);
  hebr::init_params(bundle.params, rng);
  bundle.window_days = 8;
  bundle.horizon_days = 4;
  bundle.threshold = 0.62;
  for (int c = 0; c < hebr::kNumChannels; ++c) {
    bundle.norm.channel[static_cast<std::size_t>(c)] = {1.0 * c, 0.5 + c};
  }
  hebr::save_checkpoint(bundle, path);

  auto loaded = hebr::load_checkpoint(path);
  CHECK(loaded.window_days == 8);
  CHECK(loaded.horizon_days == 4);
  CHECK(loaded.threshold == doctest::Approx(0.62));
  CHECK(loaded.params.cfg.variant_name() == "full");
  for (int c = 0; c < hebr::kNumChannels; ++c) {
    CHECK(loaded.norm.channel[static_cast<std::size_t>(c)].mean == doctest::Approx(1.0 * c));
  }
  auto a = tensor_refs(bundle.params);
  auto b = tensor_refs(loaded.params);
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].name == b[k].name);
    for (Eigen::Index i = 0; i < a[k].size(); ++i) {
      CHECK(a[k].data[i] == b[k].data[i]);  // bit-exact through JSON doubles
    }
  }
  fs::remove(path);
}

TEST_CASE("checkpoint loading validates shapes against the config") {
  const auto path = (fs::temp_directory_path() / "hebr_ckpt_bad.json").string();
  hebr::CheckpointBundle bundle;
  bundle.params = hebr::make_params(small_cfg());
  hebr::save_checkpoint(bundle, path);

  auto j = hebr::read_json_file(path);
  SUBCASE("wrong tensor shape") {
    j["tensors"]["out.b"]["shape"] = {3, 1};
    j["tensors"]["out.b"]["data"] = {{0.0}, {0.0}, {0.0}};
    hebr::write_json_file(j, path);
    CHECK_THROWS_AS(hebr::load_checkpoint(path), hebr::config_error);
  }
  SUBCASE("missing tensor") {
    j["tensors"].erase("attn_elc");
    hebr::write_json_file(j, path);
    CHECK_THROWS_AS(hebr::load_checkpoint(path), hebr::config_error);
  }
  SUBCASE("unused extra tensor") {
    j["tensors"]["mystery"] = {{"shape", {1, 1}}, {"data", {{0.0}}}};
    hebr::write_json_file(j, path);
    CHECK_THROWS_AS(hebr::load_checkpoint(path), hebr::config_error);
  }
  SUBCASE("unsupported format version") {
    j["format_version"] = 9;
    hebr::write_json_file(j, path);
    CHECK_THROWS_AS(hebr::load_checkpoint(path), hebr::config_error);
  }
  fs::remove(path);
}

TEST_CASE("config documents reject unknown keys and mirror field names") {
  const hebr::json good = {{"model", {{"d_e", 8}, {"variant", "no_ntl"}}},
                           {"train", {{"batch_size", 16}, {"max_epochs", 3}}},
                           {"window_days", 32},
                           {"horizon_days", 8}};
  const auto cfg = hebr::pipeline_config_from_json(good);
  CHECK(cfg.model.d_e == 8);
  CHECK(cfg.model.variant_name() == "no_ntl");
  CHECK(cfg.model.window_days == 32);  // windowing drives the model span
  CHECK(cfg.train.batch_size == 16);

  hebr::json bad = good;
  bad["train"]["learning_rte"] = 0.1;
  CHECK_THROWS_WITH_AS(hebr::pipeline_config_from_json(bad), doctest::Contains("learning_rte"),
                       hebr::config_error);

  const hebr::json gen = {{"n_areas", 2},
                          {"users_per_area", 5},
                          {"theft", {{"rate", 0.1}}},
                          {"rng_seed", 5}};
  const auto g = hebr::generator_config_from_json(gen);
  CHECK(g.n_areas == 2);
  CHECK(g.theft.rate == doctest::Approx(0.1));
  CHECK(g.seasonal.mean_c == doctest::Approx(17.0));  // defaults fill the rest

  // round trip through to_json
  const auto echoed = hebr::generator_config_from_json(hebr::generator_config_to_json(g));
  CHECK(echoed.users_per_area == 5);
  CHECK(echoed.rng_seed == 5);
}

TEST_CASE("train config validation") {
  hebr::json bad = {{"learning_rate", -1.0}};
  CHECK_THROWS_AS(hebr::train_config_from_json(bad), hebr::config_error);
  hebr::json bad2 = {{"batch_size", 0}};
  CHECK_THROWS_AS(hebr::train_config_from_json(bad2), hebr::config_error);
}
