#include <doctest.h>

#include <fstream>

#include "fromage/config.hpp"
#include "fromage/experiments.hpp"
#include "support/oracles.hpp"

using namespace fromage;

namespace {

std::string config_error(std::string_view text) {
  try {
    (void)Config::parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ull;
  return h;
}

}  // namespace

TEST_CASE("sections, comments and typed getters") {
  const Config c = Config::parse(R"(
; comment
seed = 42
label = run-a
epochs = 3

[model]
widths = 784, 128 ,10
nonlinearity = leaky_relu
final_nonlinearity = off

# another comment
[optimizer]
eta = 1e-2
clamp = yes
)");
  CHECK(c.get_u64("seed", 0) == 42);
  CHECK(c.get_string("label", "") == "run-a");
  CHECK(c.get_int("epochs", 0) == 3);
  CHECK(c.get_ints("model.widths", {}) == std::vector<long long>{784, 128, 10});
  CHECK_FALSE(c.get_bool("model.final_nonlinearity", true));
  CHECK(c.get_bool("optimizer.clamp", false));
  CHECK(c.get_double("optimizer.eta", 0.0) == 0.01);
  CHECK(c.get_double("optimizer.momentum", 0.9) == 0.9);
  CHECK(c.get_strings("depth_sweep.optimizers", {"sgd"}) == std::vector<std::string>{"sgd"});
  CHECK(c.has("model.nonlinearity"));
  CHECK_FALSE(c.has("nonlinearity"));
  CHECK_THROWS_AS(c.require_string("data.images"), ConfigError);
}

TEST_CASE("unknown keys fail fast") {
  CHECK(config_error("sede = 1\n") == "config: unknown key 'sede'");
  CHECK(config_error("[optimizer]\nlr = 0.1\n") == "config: unknown key 'optimizer.lr'");
  CHECK(config_error("[nope]\nseed = 1\n").find("unknown key 'nope.seed'") != std::string::npos);
}

TEST_CASE("biases are rejected with a pointer to the docs") {
  CHECK(config_error("[model]\nbias = false\n").empty());
  const std::string msg = config_error("[model]\nbias = true\n");
  CHECK(msg.find("without biases") != std::string::npos);
  CHECK(msg.find("README") != std::string::npos);
}

TEST_CASE("malformed values are reported with their key") {
  const Config c = Config::parse("epochs = ten\n[optimizer]\neta = 0.1x\nclamp = maybe\n");
  CHECK_THROWS_WITH_AS(c.get_int("epochs", 0), "config: 'epochs' expects an integer, got 'ten'",
                       ConfigError);
  CHECK_THROWS_AS(c.get_double("optimizer.eta", 0.0), ConfigError);
  CHECK_THROWS_AS(c.get_bool("optimizer.clamp", false), ConfigError);
  CHECK_THROWS_AS(c.get_u64("epochs", 0), ConfigError);
  CHECK_FALSE(config_error("[model\nwidth = 3\n").empty());
}

TEST_CASE("paths resolve against the config directory") {
  const auto dir = testing::scratch_dir("config_paths");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "img.bin") << "x";
  std::ofstream(dir / "run.ini") << "[data]\nimages = sub/img.bin\nlabels = sub/missing.bin\n";
  const Config c = Config::load(dir / "run.ini");
  CHECK(c.get_path("data.images") == dir / "sub" / "img.bin");
  CHECK_THROWS_AS(c.get_path("data.labels"), ConfigError);
  CHECK_THROWS_AS(Config::load(dir / "absent.ini"), ConfigError);
}

TEST_CASE("overrides are schema checked and change the hash") {
  Config c = Config::parse("seed = 1\n");
  CHECK(c.hash() == fnv1a("seed=1\n"));
  const std::uint64_t before = c.hash();
  c.set("seed", "2");
  CHECK(c.get_u64("seed", 0) == 2);
  CHECK(c.hash() != before);
  CHECK_THROWS_AS(c.set("seeds", "2"), ConfigError);
}

TEST_CASE("entry order does not matter for the hash") {
  const Config a = Config::parse("seed = 1\nepochs = 2\n");
  const Config b = Config::parse("epochs = 2\nseed = 1\n");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash() == fnv1a("epochs=2\nseed=1\n"));
}

TEST_CASE("list splitting trims and drops empties") {
  CHECK(split_list(" a, b ,,c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_list("").empty());
}

TEST_CASE("every schema key is reachable from a config file") {
  for (const std::string& key : Config::schema()) {
    const auto dot = key.find('.');
    const std::string text = dot == std::string::npos
                                 ? key + " = 0\n"
                                 : "[" + key.substr(0, dot) + "]\n" + key.substr(dot + 1) + " = 0\n";
    CHECK_MESSAGE(config_error(text).empty(), key);
  }
}

TEST_CASE("training settings defaults and overrides") {
  const Dataset ds = synthetic_gaussian_classes(3, 4, 5, 1.0, 1);
  const Config c = Config::parse(R"(
seed = 9
epochs = 4
batch_size = 16
[model]
depth = 3
width = 7
nonlinearity = leaky_relu
leaky_slope = 0.2
[optimizer]
kind = lars
eta = 0.05
weight_decay = 0.1
[schedule]
kind = exponential
gamma = 0.5
)");
  const TrainSettings s = train_settings_from(c, ds);
  CHECK(s.model.widths == std::vector<std::size_t>{4, 7, 7, 3});
  CHECK(s.model.nonlinearity.slope == 0.2);
  CHECK_FALSE(s.model.final_nonlinearity);
  CHECK(s.optimizer == OptimizerKind::lars);
  CHECK(s.eta == 0.05);
  CHECK(s.hyper.weight_decay == 0.1);
  CHECK(s.schedule.kind == Schedule::Kind::exponential);
  CHECK(s.schedule.gamma == 0.5);
  CHECK(s.epochs == 4);
  CHECK(s.batch_size == 16);
  CHECK(s.seed == 9);

  const TrainSettings d = train_settings_from(Config::parse(""), ds);
  CHECK(d.optimizer == OptimizerKind::fromage);
  CHECK(d.eta == 0.01);
  CHECK(d.model.init == InitKind::glorot_uniform);
  CHECK(d.batch_size == 250);

  CHECK_THROWS_AS(train_settings_from(Config::parse("[optimizer]\nkind = rmsprop\n"), ds),
                  ConfigError);
}

TEST_CASE("shipped configs load and resolve their data") {
  const std::filesystem::path dir = std::filesystem::path(FROMAGE_DATA_DIR) / ".." / ".." / "configs";
  std::size_t seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".ini") continue;
    CAPTURE(entry.path().string());
    const Config c = Config::load(entry.path());
    const DataSettings ds = data_settings_from(c);
    if (ds.source == "mnist") {
      CHECK(std::filesystem::exists(ds.images));
      CHECK(std::filesystem::exists(ds.labels));
    }
    CHECK_NOTHROW((void)bound_sweep_settings_from(c));
    ++seen;
  }
  CHECK(seen >= 7);
}
