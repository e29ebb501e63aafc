#include <doctest.h>

#include "fgd/config.hpp"
#include "fgd/textio.hpp"
#include "helpers.hpp"

using namespace fgd;

TEST_CASE("format_double round trips") {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double v = rng.uniform(-1e6, 1e6) * std::pow(10.0, double(rng.integer(-30, 30)));
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1e-3) == "0.001");
    CHECK_THROWS_AS(parse_double("1.5x"), ConfigError);
    CHECK_THROWS_AS(parse_double(""), ConfigError);
    CHECK(parse_uint("42") == 42);
    CHECK_THROWS_AS(parse_uint("-1"), ConfigError);
    CHECK_THROWS_AS(parse_uint("3.0"), ConfigError);
}

TEST_CASE("grid and pgm formats") {
    std::vector<double> v{1, 2.5, -3, 4, 5, 6};
    auto g = parse_grid(format_grid(v, 2, 3));
    REQUIRE(g.size() == 2);
    REQUIRE(g[1].size() == 3);
    CHECK(g[0][1] == 2.5);
    CHECK(g[1][2] == 6.0);
    const std::string pgm = format_pgm(v, 2, 3);
    CHECK(pgm.rfind("P5\n3 2\n255\n", 0) == 0);
    CHECK(pgm.size() == std::string("P5\n3 2\n255\n").size() + 6);
    CHECK(static_cast<unsigned char>(pgm.back()) == 255);
}

TEST_CASE("atomic writes") {
    testing::TempDir dir("io");
    const auto p = dir.path() / "sub" / "f.csv";
    write_file_atomic(p, "a,b\n");
    write_file_atomic(p, "c,d\n");
    CHECK(read_file(p) == "c,d\n");
    CHECK_FALSE(std::filesystem::exists(p.string() + ".tmp"));
}

TEST_CASE("config parsing") {
    RunConfig c = parse_config(R"(
# comment
alpha = 0.5      # trailing comment
preset = two-stage
mode = fg_only
steps = 7
gc_shared = true
attention_reduction = sum
)");
    CHECK(c.preset == "two-stage");
    CHECK(c.hp.alpha == 0.5);  // explicit weight wins over the preset regardless of order
    CHECK(c.hp.beta == 2.5e-5);
    CHECK(c.mode == AblationMode::fg_only);
    CHECK(c.steps == 7);
    CHECK(c.gc_shared);
    CHECK(c.attention_reduction == L1Reduction::sum);

    CHECK_THROWS_AS(parse_config("nonsense = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("steps 5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("preset = huge\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("temperature = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("image_height = 30\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("mode = all\n"), ConfigError);
}

TEST_CASE("preset echo") {
    const std::string text = serialize_config(parse_config("preset = anchor-one-stage\n"));
    auto value_of = [&](const std::string& key) {
        const auto at = text.find("\n" + key + " = ");
        REQUIRE(at != std::string::npos);
        const auto start = at + key.size() + 4;
        return parse_double(std::string_view(text).substr(start, text.find('\n', start) - start));
    };
    CHECK(value_of("alpha") == 1e-3);
    CHECK(value_of("beta") == 5e-4);
    CHECK(value_of("gamma") == 1e-3);
    CHECK(value_of("lambda") == 5e-6);
    CHECK(value_of("temperature") == 0.5);
}

TEST_CASE("config round trip") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
        RunConfig c;
        c.preset = preset_names()[rng.integer(0, 2)];
        c.hp = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1e-3), rng.uniform(0.1, 2)};
        c.mode = all_ablation_modes()[rng.integer(0, 6)];
        c.seed = static_cast<std::uint64_t>(rng.integer(0, 1LL << 62));
        c.steps = rng.integer(0, 1000);
        c.scene.height = 4 * rng.integer(4, 10);
        c.scene.noise = rng.uniform(0, 0.1);
        c.learning_rate = rng.uniform(0, 0.1);
        c.gc_shared = rng.integer(0, 1) == 1;
        c.attention_reduction = rng.integer(0, 1) ? L1Reduction::sum : L1Reduction::mean;
        c.output_dir = "runs/x" + std::to_string(i);
        const RunConfig back = parse_config(serialize_config(c));
        CHECK(back == c);
        CHECK(serialize_config(back) == serialize_config(c));
    }
}

TEST_CASE("load_config errors") {
    CHECK_THROWS_AS(load_config("/nonexistent/fgd.cfg"), ConfigError);
}
