#include <doctest.h>

#include <string>

#include "common.hpp"
#include "config.hpp"
#include "siren/errors.hpp"
#include "siren/util/encoding.hpp"

using namespace siren;
using namespace siren::cli;

namespace {

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults parse and validate") {
    const auto c = parse_config(default_config());
    CHECK(c.seed == 7);
    CHECK(c.quantizer.levels == 3);
    CHECK(c.quantizer.codebook_size == 256);
    CHECK(c.model.buckets == 40);
    CHECK(c.gsu.k == 50);
    CHECK(c.training.optimizer.weight_decay == 0.01);
    CHECK(c.synth.seed == c.seed);
    CHECK(c.training.seed == c.seed);
    CHECK(c.hash() == parse_config(default_config()).hash());
}

TEST_CASE("unknown keys and type mismatches name the dotted path") {
    CHECK(error_of([] { merge_config(default_config(), Json{{"model", {{"heads_", 2}}}}); }).find("model.heads_") == 0);
    CHECK(error_of([] { merge_config(default_config(), Json{{"training", {{"epochs", "two"}}}}); })
              .find("training.epochs") == 0);
    CHECK(error_of([] { merge_config(default_config(), Json{{"model", 3}}); }).find("model") == 0);
    CHECK(error_of([] { merge_config(default_config(), Json{{"split", {{"cut", 100}}}}); }).empty());
}

TEST_CASE("dotted overrides parse JSON values with a string fallback") {
    auto c = default_config();
    apply_override(c, "training.epochs=3");
    apply_override(c, "gsu.strategy=hard");
    apply_override(c, "model.hidden=[32,16]");
    apply_override(c, "model.use_semid=false");
    const auto e = parse_config(c);
    CHECK(e.training.epochs == 3);
    CHECK(e.gsu.strategy == GsuStrategy::Hard);
    CHECK(e.model.hidden == std::vector<std::size_t>{32, 16});
    CHECK_FALSE(e.model.ablation.use_semid);
    CHECK(error_of([&] { apply_override(c, "gsu.nope=1"); }).find("gsu.nope") == 0);
    CHECK(error_of([&] { apply_override(c, "no_equals"); }).find("override") == 0);
    CHECK(parse_config(c).hash() != parse_config(default_config()).hash());
}

TEST_CASE("semantic validation runs before any work") {
    auto bad = [](const std::string& o) {
        auto c = default_config();
        apply_override(c, o);
        return error_of([&] { parse_config(c); });
    };
    CHECK(bad("gsu.strategy=\"fuzzy\"").find("gsu.strategy") == 0);
    CHECK(bad("split.eval_fraction=1.5").find("split.eval_fraction") == 0);
    CHECK(bad("model.item_widths=[4,4,4]").find("model.item_widths") == 0);
    CHECK(bad("quantizer.prefix_depth=4").find("quantizer.prefix_depth") == 0);
    CHECK(bad("training.batch_size=0").find("training.batch_size") == 0);
    CHECK(bad("corpus.synth.n_items=0").find("corpus.") == 0);
    CHECK(bad("seed=-1").find("seed") == 0);
    CHECK(bad("similarity.range=\"auto\"").find("similarity.range") == 0);
}

TEST_CASE("config files load with overrides applied last") {
    const auto dir = test::scratch("cli_config");
    util::write_file(dir / "c.json", R"({"seed": 11, "training": {"epochs": 2}})");
    const std::vector<std::string> overrides{"training.epochs=5"};
    const auto c = load_config(dir / "c.json", overrides);
    CHECK(c.seed == 11);
    CHECK(c.training.epochs == 5);
    util::write_file(dir / "bad.json", "{");
    CHECK_THROWS_AS(load_config(dir / "bad.json", {}), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json", {}), ConfigError);
}

TEST_CASE("bound model takes vocabularies from the corpus") {
    const auto corpus = generate_synthetic(test::small_synth());
    const auto c = parse_config(default_config());
    const auto m = bind_model(c, corpus.meta, SimRange{-0.2, 0.9, 10, false});
    CHECK(m.item_vocab == corpus.meta.item_vocab);
    CHECK(m.range.s_max == 0.9);
}
