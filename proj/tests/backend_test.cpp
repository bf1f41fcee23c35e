#include "psteer/backend/model.hpp"

#include "support.hpp"

#include "doctest.h"

#include <fstream>

using namespace psteer;
using namespace psteer::backend;
using nlohmann::json;

namespace {

json two_d_scenario() {
    return {{"model_id", "mock-2d"},
            {"layer_count", 2},
            {"hidden_dim", 2},
            {"generation", {{"default", " one two three four five six"}, {"injection_marker", "+"}}}};
}

Schedule single(int layer, Vector v, double alpha, int stride,
                std::optional<std::pair<int, int>> window = std::nullopt) {
    InjectionDirective d{layer, "v", alpha, stride, window};
    return {ScheduledInjection{d, std::move(v)}};
}

}  // namespace

TEST_CASE("apply_injection adds alpha * v componentwise") {
    const Vector zero = Vector::Zero(2);
    CHECK(apply_injection(zero, Vector::Unit(2, 0), 2.0).isApprox(Vector{{2.0, 0.0}}));

    Vector h{{1.0, 1.0}};
    const Vector before = h;
    CHECK(apply_injection(h, Vector{{0.5, -0.5}}, -2.0).isApprox(Vector{{0.0, 2.0}}));
    CHECK(h == before);

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector hh = testing::gaussian_cluster(rng, 1, Vector::Zero(7), 1.0).row(0).transpose();
        const Vector v = testing::random_unit(rng, 7);
        CHECK(apply_injection(hh, v, 0.0) == hh);
    }
}

TEST_CASE("apply_injection rejects mismatched dimensions") {
    CHECK_THROWS_AS(apply_injection(Vector::Zero(3), Vector::Zero(2), 1.0), ContractViolation);
}

TEST_CASE("apply_injection is linear in alpha") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> coef(-50.0, 50.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector h = testing::gaussian_cluster(rng, 1, Vector::Zero(16), 3.0).row(0).transpose();
        const Vector v = testing::random_unit(rng, 16) * 4.0;
        const double a = coef(rng), b = coef(rng);
        const Vector lhs = apply_injection(h, v, a) + apply_injection(Vector::Zero(16), v, b);
        const Vector rhs = apply_injection(h, v, a + b);
        CHECK((lhs - rhs).norm() <= 1e-6 * std::max(1.0, rhs.norm()));
    }
}

TEST_CASE("generate with an empty schedule returns the script verbatim") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    const auto r = generate(*m, "sys", "user", decode);
    CHECK(r.text == " one two three four five six");
    CHECK(r.token_count == 6);
    CHECK(m->fire_log().empty());
}

TEST_CASE("alpha zero is byte-identical to the uninjected call") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    const auto plain = generate(*m, "s", "u", decode);
    const auto zero = generate(*m, "s", "u", decode, single(0, Vector::Unit(2, 0), 0.0, 1));
    CHECK(plain.text == zero.text);
}

TEST_CASE("stride 3 over six tokens fires at k = 0 and 3") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    const auto r = generate(*m, "s", "u", decode, single(1, Vector::Unit(2, 0), 1.0, 3));
    CHECK(m->fire_log() == std::vector<std::size_t>{0, 3});
    CHECK(r.injected == std::vector<bool>{true, false, false, true, false, false});
}

TEST_CASE("marker per injected token with stride 2 over four tokens") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    decode.max_new_tokens = 4;
    const auto r = generate(*m, "s", "u", decode, single(0, Vector::Unit(2, 1), 1.0, 2));
    std::size_t expected = 0;
    for (std::size_t k = 0; k < 4; ++k) expected += (k % 2 == 0);
    CHECK(std::count(r.text.begin(), r.text.end(), '+') == static_cast<long>(expected));
    CHECK(expected == 2);
}

TEST_CASE("stride law: fired positions equal ceil(T / s)") {
    auto m = testing::mock({{"layer_count", 1},
                            {"hidden_dim", 1},
                            {"generation", {{"default", " x"}, {"loop", true}}}});
    for (int T = 1; T <= 40; T += 3) {
        for (int s = 1; s <= 5; ++s) {
            DecodeParams decode;
            decode.max_new_tokens = T;
            const auto r = generate(*m, "", "", decode, single(0, Vector::Ones(1), 1.0, s));
            const auto fired = std::count(r.injected.begin(), r.injected.end(), true);
            CHECK(fired == (T + s - 1) / s);
        }
    }
}

TEST_CASE("token windows restrict firing") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    const auto r = generate(*m, "s", "u", decode, single(0, Vector::Unit(2, 0), 1.0, 1, std::pair{2, 4}));
    CHECK(r.injected == std::vector<bool>{false, false, true, true, false, false});
}

TEST_CASE("injections never fire on prompt positions") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    decode.prefill = "I would";
    const auto r = generate(*m, "sys", "a long user prompt with many tokens", decode,
                            single(0, Vector::Unit(2, 0), 3.0, 1));
    for (auto k : m->fire_log()) CHECK(k < r.token_count);
    CHECK(m->fire_log().size() == r.token_count);
    const auto before = m->fire_log().size();
    capture_prefill_activations(*m, "sys", "user", "Yes");
    CHECK(m->fire_log().size() == before);
}

TEST_CASE("schedule validation") {
    auto m = testing::mock(two_d_scenario());
    DecodeParams decode;
    CHECK_THROWS_AS(generate(*m, "", "", decode, single(2, Vector::Zero(2), 1.0, 1)), ContractViolation);
    CHECK_THROWS_AS(generate(*m, "", "", decode, single(0, Vector::Zero(2), 1.0, 0)), ContractViolation);
    CHECK_THROWS_AS(generate(*m, "", "", decode, single(0, Vector::Zero(3), 1.0, 1)), ContractViolation);
    Schedule overlapping = single(0, Vector::Zero(2), 1.0, 1, std::pair{0, 5});
    overlapping.push_back({{1, "w", 1.0, 1, std::pair{4, 8}}, Vector::Zero(2)});
    CHECK_THROWS_AS(generate(*m, "", "", decode, overlapping), ContractViolation);
}

TEST_CASE("alpha and drive placeholders follow the firing injections") {
    auto m = testing::mock({{"layer_count", 2},
                            {"hidden_dim", 2},
                            {"generation", {{"default", " level {drive} at {alpha}"}, {"readout", {{0, 0}, {2, 0}}}}}});
    DecodeParams decode;
    const auto r = generate(*m, "", "", decode, single(1, Vector{{1.5, 0.0}}, 4.0, 1));
    CHECK(r.text == " level 12 at 4");
}

TEST_CASE("alpha-keyed scripts and scripted failures") {
    auto m = testing::mock({{"layer_count", 1},
                            {"hidden_dim", 1},
                            {"generation",
                             {{"default", " calm"},
                              {"scripts", {{{"min_alpha", 3}, {"max_alpha", 5}, {"text", " stuck"}}}},
                              {"fail_on", {"explode"}}}}});
    DecodeParams decode;
    CHECK(generate(*m, "", "", decode, single(0, Vector::Ones(1), 4.0, 1)).text == " stuck");
    CHECK(generate(*m, "", "", decode, single(0, Vector::Ones(1), 6.0, 1)).text == " calm");
    CHECK_THROWS_AS(generate(*m, "", "please explode", decode), TransportError);
}

TEST_CASE("capture_prefill_activations averages over prefill tokens") {
    SUBCASE("constant activation") {
        auto m = testing::mock({{"layer_count", 2}, {"hidden_dim", 3}, {"activations", {{"default", {1, 2, 3}}}}});
        const Matrix a = capture_prefill_activations(*m, "You are a person.", "Tell me", "I like cats.");
        REQUIRE(a.rows() == 2);
        for (int l = 0; l < 2; ++l) CHECK(a.row(l) == Eigen::RowVector3d(1, 2, 3));
    }
    SUBCASE("two-token mean") {
        auto m = testing::mock({{"layer_count", 1},
                                {"hidden_dim", 2},
                                {"activations", {{"entries", {{{"match", "Yes"}, {"tokens", {{{1, 0}, {3, 0}}}}}}}}}});
        const Matrix a = capture_prefill_activations(*m, "", "q", "Yes sir");
        CHECK(a.row(0) == Eigen::RowVector2d(2, 0));
    }
    SUBCASE("layer-distinct constants stay in layer order") {
        auto m = testing::mock({{"layer_count", 3},
                                {"hidden_dim", 2},
                                {"activations", {{"default", {{0, 1}, {2, 3}, {4, 5}}}}}});
        const Matrix a = capture_prefill_activations(*m, "", "q", "Yes");
        for (int l = 0; l < 3; ++l) CHECK(a.row(l) == Eigen::RowVector2d(2 * l, 2 * l + 1));
    }
    SUBCASE("empty prefill") {
        auto m = testing::mock({{"layer_count", 1}, {"hidden_dim", 1}});
        CHECK_THROWS_AS(capture_prefill_activations(*m, "", "q", ""), EmptyPrefillError);
        CHECK_THROWS_AS(capture_prefill_activations(*m, "", "q", "   "), EmptyPrefillError);
    }
}

TEST_CASE("constrained_choice") {
    const std::vector<std::string> letters{"A", "B", "C", "D", "E"};
    SUBCASE("scripted logits") {
        auto m = testing::mock({{"layer_count", 1},
                                {"hidden_dim", 1},
                                {"choice", {{"default", {{"A", 0.1}, {"C", 2.0}, {"E", 1.0}}}}}});
        CHECK(constrained_choice(*m, "", "q", letters) == "C");
    }
    SUBCASE("singleton") {
        auto m = testing::mock({{"layer_count", 1}, {"hidden_dim", 1}});
        CHECK(constrained_choice(*m, "", "q", std::vector<std::string>{"A"}) == "A");
    }
    SUBCASE("uniform logits pick the first option") {
        auto m = testing::mock({{"layer_count", 1},
                                {"hidden_dim", 1},
                                {"choice", {{"default", {{"A", 0.5}, {"B", 0.5}, {"C", 0.5}, {"D", 0.5}, {"E", 0.5}}}}}});
        CHECK(constrained_choice(*m, "", "q", letters) == "A");
        const std::vector<std::string> reversed{"E", "D", "C", "B", "A"};
        CHECK(constrained_choice(*m, "", "q", reversed) == "E");
    }
    SUBCASE("multi-token option") {
        auto m = testing::mock({{"layer_count", 1}, {"hidden_dim", 1}});
        CHECK_THROWS_AS(constrained_choice(*m, "", "q", std::vector<std::string>{"A", "B C"}),
                        UnsupportedOptionError);
    }
    SUBCASE("injection drive shifts logits") {
        auto m = testing::mock({{"layer_count", 1},
                                {"hidden_dim", 1},
                                {"generation", {{"readout", {1.0}}}},
                                {"choice", {{"default", {{"C", 1.0}}}, {"drive_weights", {{"A", 1.0}}}}}});
        CHECK(constrained_choice(*m, "", "q", letters, single(0, Vector::Ones(1), 2.0, 1)) == "A");
    }
}

TEST_CASE("greedy generation is deterministic") {
    auto a = testing::mock(two_d_scenario());
    auto b = testing::mock(two_d_scenario());
    DecodeParams decode;
    const auto s = single(0, Vector::Unit(2, 0), 2.0, 2);
    CHECK(generate(*a, "x", "y", decode, s).text == generate(*b, "x", "y", decode, s).text);
}

TEST_CASE("open_model resolves schemes") {
    const auto dir = testing::scratch_dir("backend");
    const auto path = dir / "scenario.json";
    std::ofstream(path) << two_d_scenario().dump();
    auto m = open_model(path.string());
    CHECK(m->handle().model_id == "mock-2d");
    auto m2 = open_model("mock:" + path.string());
    CHECK(m2->handle().layer_count == 2);
    CHECK_THROWS_AS(open_model("nosuch:thing"), ConfigError);
    std::filesystem::remove_all(dir);
}
