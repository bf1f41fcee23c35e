#include "psteer/analysis/analysis.hpp"
#include "psteer/analysis/report.hpp"
#include "psteer/io.hpp"

#include "oracles.hpp"
#include "support.hpp"
#include "sweep_bench.hpp"

#include "doctest.h"

#include <random>
#include <tuple>

using namespace psteer;
using namespace psteer::analysis;

namespace {

constexpr Direction kUp = Direction::up;
constexpr Direction kDown = Direction::down;

double round1(double v) { return std::round(v * 10.0) / 10.0; }

struct Entry {
    int layer, stride;
    std::string trait;
    Direction d;
    double alpha, score;
};

// Random surface with coarse scores (ties are common) and some empty cells.
std::pair<ScoreSurface, std::vector<Entry>> random_surface(std::mt19937_64& rng, int layers, int strides) {
    ScoreSurface s("m", Method::MDS, Instrument::sjt);
    std::vector<Entry> flat;
    std::uniform_int_distribution<int> count(0, 5), tenths(10, 50), alpha(1, 30);
    for (int l = 0; l < layers; ++l)
        for (int st = 1; st <= strides; ++st)
            for (const auto& t : ocean())
                for (auto d : {kUp, kDown}) {
                    const int n = count(rng);
                    std::set<int> used;
                    for (int k = 0; k < n; ++k) {
                        const int a = alpha(rng);
                        if (!used.insert(a).second) continue;
                        const double score = tenths(rng) / 10.0;
                        s.add({l, st, t, d}, a, score, std::to_string(l) + "@" + std::to_string(a));
                        flat.push_back({l, st, t, d, static_cast<double>(a), score});
                    }
                }
    return {s, flat};
}

bool beats(double a, double b, Direction d) { return d == kUp ? a > b : a < b; }

std::optional<std::pair<double, double>> oracle_mu_star(const std::vector<Entry>& flat, int l, int st,
                                                        const std::string& t, Direction d) {
    std::optional<std::pair<double, double>> best;  // (score, alpha)
    for (const auto& e : flat) {
        if (e.layer != l || e.stride != st || e.trait != t || e.d != d) continue;
        if (!best || beats(e.score, best->first, d) || (e.score == best->first && e.alpha < best->second))
            best = std::pair(e.score, e.alpha);
    }
    return best;
}

// Scan of every (layer, alpha) entry: extreme score, then smallest layer, then smallest alpha.
std::optional<std::tuple<double, int, double>> oracle_phi(const std::vector<Entry>& flat, int st,
                                                          const std::string& t, Direction d) {
    std::optional<std::tuple<double, int, double>> best;
    for (const auto& e : flat) {
        if (e.stride != st || e.trait != t || e.d != d) continue;
        const auto cand = std::tuple(e.score, e.layer, e.alpha);
        if (!best) {
            best = cand;
            continue;
        }
        const auto& [bs, bl, ba] = *best;
        if (beats(e.score, bs, d) || (e.score == bs && (e.layer < bl || (e.layer == bl && e.alpha < ba)))) best = cand;
    }
    return best;
}

CrossTraitTrend trend_of(const std::string& target, Direction d, const std::vector<double>& alpha,
                         const std::map<std::string, std::vector<double>>& scores) {
    CrossTraitTrend t;
    t.target = target;
    t.direction = d;
    t.alpha = alpha;
    t.scores = scores;
    return t;
}

}  // namespace

TEST_CASE("mu_star picks the directional extremum and is undefined on empty cells") {
    ScoreSurface s("m", Method::MDS, Instrument::sjt);
    s.add({3, 1, "O", kUp}, 1, 3.1, "a");
    s.add({3, 1, "O", kUp}, 2, 4.2, "b");
    s.add({3, 1, "O", kUp}, 3, 3.9, "c");
    s.add({3, 1, "O", kDown}, 1, 2.0);
    s.add({3, 1, "O", kDown}, 2, 1.4);
    CHECK(mu_star(s, {3, 1, "O", kUp})->value == 4.2);
    CHECK(mu_star(s, {3, 1, "O", kUp})->record_id == "b");
    CHECK(mu_star(s, {3, 1, "O", kDown})->value == 1.4);
    CHECK_FALSE(mu_star(s, {3, 1, "C", kUp}).has_value());
    CHECK_FALSE(mu_star(s, {4, 1, "O", kUp}).has_value());

    s.add({3, 1, "O", kUp}, 7, 4.2, "tie");
    s.add({3, 1, "O", kUp}, 0.5, 4.2, "early");
    CHECK(mu_star(s, {3, 1, "O", kUp})->alpha == 0.5);
    CHECK_THROWS_AS(s.add({3, 1, "O", kUp}, 1, 5.5), ContractViolation);
    CHECK_THROWS_AS(s.add({3, 1, "O", kUp}, 1, 0.9), ContractViolation);
}

TEST_CASE("mu_sum and steerability reach 10 on perfect steering and 6 at the midpoint") {
    ScoreSurface perfect("m", Method::MDS, Instrument::sjt), flat("m", Method::MDS, Instrument::sjt);
    std::map<std::string, double> up5, down1, mid;
    for (const auto& t : ocean()) {
        perfect.add({0, 1, t, kUp}, 1, 5.0);
        perfect.add({0, 1, t, kDown}, 1, 1.0);
        flat.add({0, 1, t, kUp}, 1, 3.0);
        flat.add({0, 1, t, kDown}, 1, 3.0);
        up5[t] = 5.0;
        down1[t] = 1.0;
        mid[t] = 3.0;
    }
    CHECK(*mu_sum(perfect, 0, 1).value == 10.0);
    CHECK(*mu_sum(flat, 0, 1).value == 6.0);
    CHECK(*steerability(up5, down1).value == 10.0);
    CHECK(*steerability(mid, mid).value == 6.0);

    ScoreSurface partial = perfect;
    partial.add({1, 1, "O", kUp}, 1, 4.0);
    const auto agg = mu_sum(partial, 1, 1);
    CHECK_FALSE(agg.value.has_value());
    CHECK(agg.missing.size() == 9);

    auto missing = up5;
    missing.erase("E");
    const auto st = steerability(missing, down1);
    CHECK_FALSE(st.value.has_value());
    REQUIRE(st.missing.size() == 1);
    CHECK(st.missing[0] == std::pair<std::string, Direction>("E", kUp));
}

TEST_CASE("mu_star, mu_sum and phi match exhaustive scans on random surfaces") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const auto [s, flat] = random_surface(rng, 6, 2);
        for (int st = 1; st <= 2; ++st) {
            for (int l = 0; l < 6; ++l) {
                double sum = 0;
                bool complete = true;
                for (const auto& t : ocean()) {
                    for (auto d : {kUp, kDown}) {
                        const auto got = mu_star(s, {l, st, t, d});
                        const auto want = oracle_mu_star(flat, l, st, t, d);
                        REQUIRE(got.has_value() == want.has_value());
                        if (!want) {
                            complete = false;
                            continue;
                        }
                        CHECK(got->value == want->first);
                        CHECK(got->alpha == want->second);
                        sum += d == kUp ? want->first : 6.0 - want->first;
                    }
                }
                const auto agg = mu_sum(s, l, st);
                REQUIRE(agg.value.has_value() == complete);
                if (complete) {
                    CHECK(*agg.value == doctest::Approx(sum / 5.0).epsilon(1e-12));
                    CHECK(*agg.value >= 2.0);
                    CHECK(*agg.value <= 10.0);
                }
            }
            for (const auto& t : ocean())
                for (auto d : {kUp, kDown}) {
                    const auto got = phi(s, st, t, d);
                    const auto want = oracle_phi(flat, st, t, d);
                    REQUIRE(got.has_value() == want.has_value());
                    if (!want) continue;
                    CHECK(got->value == std::get<0>(*want));
                    CHECK(got->layer == std::get<1>(*want));
                    CHECK(got->alpha == std::get<2>(*want));
                    CHECK(got->record_id == std::to_string(got->layer) + "@" + std::to_string(static_cast<int>(got->alpha)));
                }
        }
    }
}

TEST_CASE("phi on a 20-layer surface equals the brute-force optimum over all layers and alphas") {
    std::mt19937_64 rng(20);
    const auto [s, flat] = random_surface(rng, 20, 1);
    for (const auto& t : ocean())
        for (auto d : {kUp, kDown}) {
            const auto got = phi(s, 1, t, d);
            const auto want = oracle_phi(flat, 1, t, d);
            REQUIRE(got.has_value() == want.has_value());
            if (!want) continue;
            CHECK(got->value == std::get<0>(*want));
            CHECK(got->layer == std::get<1>(*want));
            CHECK(got->alpha == std::get<2>(*want));
        }
}

TEST_CASE("surface properties: reflection duality, permutation invariance, single-layer phi") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        const auto [s, flat] = random_surface(rng, 4, 1);
        ScoreSurface reflected("m", Method::MDS, Instrument::sjt), single("m", Method::MDS, Instrument::sjt);
        for (const auto& e : flat) {
            const Direction flipped = e.d == kUp ? kDown : kUp;
            reflected.add({e.layer, e.stride, e.trait, flipped}, e.alpha, 6.0 - e.score);
            if (e.layer == 2) single.add({e.layer, e.stride, e.trait, e.d}, e.alpha, e.score);
        }
        for (int l = 0; l < 4; ++l)
            for (const auto& t : ocean()) {
                const auto up = mu_star(s, {l, 1, t, kUp});
                const auto down_reflected = mu_star(reflected, {l, 1, t, kDown});
                REQUIRE(up.has_value() == down_reflected.has_value());
                if (up) CHECK(down_reflected->value == doctest::Approx(6.0 - up->value).epsilon(1e-15));
            }
        for (const auto& t : ocean())
            for (auto d : {kUp, kDown}) {
                const auto p = phi(single, 1, t, d);
                const auto m = mu_star(s, {2, 1, t, d});
                REQUIRE(p.has_value() == m.has_value());
                if (p) CHECK(p->value == m->value);
            }

        std::vector<std::string> permuted = ocean();
        std::shuffle(permuted.begin(), permuted.end(), rng);
        for (int l = 0; l < 4; ++l) {
            const auto a = mu_sum(s, l, 1), b = mu_sum(s, l, 1, permuted);
            REQUIRE(a.value.has_value() == b.value.has_value());
            if (a.value) CHECK(*a.value == doctest::Approx(*b.value).epsilon(1e-12));
        }
        std::map<std::string, double> up, down;
        std::uniform_real_distribution<double> u(1.0, 5.0);
        for (const auto& t : ocean()) {
            up[t] = u(rng);
            down[t] = u(rng);
        }
        const double phi_a = *steerability(up, down).value, phi_b = *steerability(up, down, permuted).value;
        CHECK(phi_a == doctest::Approx(phi_b).epsilon(1e-12));
        CHECK(phi_a >= 2.0);
        CHECK(phi_a <= 10.0);
    }
}

TEST_CASE("sweep summary fixture: MDS conscientiousness on SJTs") {
    ScoreSurface s("Qwen3-1.7B", Method::MDS, Instrument::sjt);
    for (int l = 0; l < 28; ++l) {
        for (int a = 1; a <= 12; ++a) {
            s.add({l, 1, "C", kUp}, a, l == 14 && a == 9 ? 5.0 : std::min(4.9, 3.7 + 0.1 * a));
            s.add({l, 1, "C", kDown}, a, l == 13 && a == 9 ? 1.4 : std::max(1.5, 3.7 - 0.2 * a));
        }
    }
    s.add({14, 1, "C", kUp}, 11, 5.0);  // later alpha at the same layer
    s.add({20, 1, "C", kUp}, 3, 5.0);   // later layer
    s.set_baseline("C", 3.7);
    s.set_p2("C", kUp, 4.7);
    s.set_p2("C", kDown, 3.6);

    const auto up = phi(s, 1, "C", kUp);
    REQUIRE(up.has_value());
    CHECK(up->value == 5.0);
    CHECK(up->layer == 14);
    CHECK(up->alpha == 9.0);
    const auto down = phi(s, 1, "C", kDown);
    REQUIRE(down.has_value());
    CHECK(down->value == 1.4);
    CHECK(down->layer == 13);
    CHECK(down->alpha == 9.0);

    const auto d_up = deltas(up->value, *s.baseline("C"), s.p2("C", kUp));
    CHECK(round1(d_up.from_baseline) == 1.3);
    CHECK(round1(*d_up.from_p2) == 0.3);
    const auto d_down = deltas(down->value, *s.baseline("C"), s.p2("C", kDown));
    CHECK(round1(d_down.from_baseline) == -2.3);
    CHECK(round1(*d_down.from_p2) == -2.2);
    CHECK(deltas(3.7, 3.7).from_baseline == 0.0);
    CHECK_FALSE(deltas(3.7, 3.7).from_p2.has_value());
}

TEST_CASE("steerability ranks the hybrid, injection and prompting methods as in the Q8 row") {
    const std::map<std::string, double> pm_up = {{"O", 5.0}, {"C", 4.8}, {"E", 4.9}, {"A", 4.9}, {"N", 4.9}};
    const std::map<std::string, double> pm_down = {{"O", 1.0}, {"C", 1.2}, {"E", 1.1}, {"A", 1.1}, {"N", 1.1}};
    const std::map<std::string, double> mds_up = {{"O", 5.0}, {"C", 5.0}, {"E", 5.0}, {"A", 4.7}, {"N", 4.3}};
    const std::map<std::string, double> mds_down = {{"O", 1.6}, {"C", 1.5}, {"E", 1.0}, {"A", 1.4}, {"N", 2.0}};
    const std::map<std::string, double> p2_up = {{"O", 4.6}, {"C", 4.7}, {"E", 4.4}, {"A", 4.5}, {"N", 4.3}};
    const std::map<std::string, double> p2_down = {{"O", 2.0}, {"C", 1.8}, {"E", 2.2}, {"A", 1.9}, {"N", 2.1}};
    const double pm = *steerability(pm_up, pm_down).value;
    const double mds = *steerability(mds_up, mds_down).value;
    const double p2 = *steerability(p2_up, p2_down).value;
    CHECK(round1(pm) == 9.8);
    CHECK(round1(mds) == 9.3);
    CHECK(round1(p2) == 8.5);
    CHECK(pm > mds);
    CHECK(mds > p2);
}

TEST_CASE("win table: ties share the win, failing the baseline loses, absent methods lose") {
    std::vector<WinCell> cells = {
        {"O/up", kUp, 3.0, {{Method::MDS, 4.8}, {Method::MDB, 4.8}, {Method::L2LI, 4.1}}},
        {"O/down", kDown, 3.0, {{Method::MDS, 3.2}, {Method::MDB, 3.5}, {Method::L2LI, std::nullopt}}},
        {"C/up", kUp, 3.0, {{Method::L2LI, 4.0}}},
    };
    const auto w = win_table(cells);
    CHECK(w.cells == 3);
    CHECK(w.wins.at(Method::MDS) == 1);
    CHECK(w.wins.at(Method::MDB) == 1);
    CHECK(w.wins.at(Method::L2LI) == 1);
    CHECK(w.winners.at("O/up") == std::vector<Method>{Method::MDB, Method::MDS});
    CHECK(w.winners.at("O/down").empty());
    CHECK(w.proportion.at(Method::MDS) == doctest::Approx(1.0 / 3.0));

    const auto single = win_table({{"a", kUp, 1.0, {{Method::MDS, 2.0}}}, {"b", kDown, 5.0, {{Method::MDS, 4.0}}}});
    CHECK(single.proportion.at(Method::MDS) == 1.0);
}

TEST_CASE("win table matches a brute-force tally on randomized six-method fixtures") {
    const std::vector<Method> methods = {Method::L1LI, Method::L1ZI, Method::L2LI,
                                         Method::L2ZI, Method::MDB,  Method::MDS};
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> tenths(10, 50), coin(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<WinCell> cells;
        for (int c = 0; c < 10; ++c) {
            WinCell cell{"cell" + std::to_string(c), coin(rng) % 2 ? kUp : kDown, tenths(rng) / 10.0, {}};
            for (auto m : methods)
                if (coin(rng) > 0) cell.phi[m] = tenths(rng) / 10.0;
                else if (coin(rng) > 2) cell.phi[m] = std::nullopt;
            cells.push_back(cell);
        }
        std::map<Method, int> tally;
        for (const auto& cell : cells)
            for (const auto& [m, v] : cell.phi) {
                if (!v || !beats(*v, cell.baseline, cell.direction)) continue;
                bool beaten = false;
                for (const auto& [other, ov] : cell.phi) beaten = beaten || (ov && beats(*ov, *v, cell.direction));
                if (!beaten) ++tally[m];
            }
        const auto w = win_table(cells);
        double total = 0;
        for (auto m : methods) {
            const auto it = w.wins.find(m);
            const int got = it == w.wins.end() ? 0 : static_cast<int>(it->second);
            CHECK(got == tally[m]);
            if (it != w.wins.end()) {
                CHECK(w.proportion.at(m) == doctest::Approx(tally[m] / 10.0).epsilon(1e-12));
                CHECK(w.proportion.at(m) >= 0.0);
                CHECK(w.proportion.at(m) <= 1.0);
                total += w.proportion.at(m);
            }
        }
        CHECK(total >= 0.0);
    }
}

TEST_CASE("fit_trend classes and agreement with the normal equations") {
    std::vector<TrendPoint> line;
    for (int a = 0; a < 10; ++a) line.push_back({static_cast<double>(a), 0.2 * a + 1.0});
    const auto exact = fit_trend(line);
    CHECK(exact.slope == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(exact.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*exact.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(exact.linearity == Linearity::near);

    std::vector<TrendPoint> constant;
    for (int a = 0; a < 10; ++a) constant.push_back({static_cast<double>(a), 3.0});
    const auto c = fit_trend(constant);
    CHECK_FALSE(c.r2.has_value());
    CHECK(c.linearity == Linearity::none);
    CHECK(c.slope == 0.0);

    CHECK_THROWS_AS(fit_trend({{0, 1}, {1, 2}}), InsufficientDataError);
    CHECK_THROWS_AS(fit_trend({{1, 1}, {1, 2}, {1, 3}}), InsufficientDataError);

    CHECK(classify_r2(0.95) == Linearity::near);
    CHECK(classify_r2(0.9499) == Linearity::mostly);
    CHECK(classify_r2(0.85) == Linearity::mostly);
    CHECK(classify_r2(0.75) == Linearity::rough);
    CHECK(classify_r2(0.7499) == Linearity::none);
    CHECK(classify_r2(std::nullopt) == Linearity::none);

    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> xs, ys;
        std::vector<TrendPoint> pts;
        const int n = trial == 0 ? 10 : 3 + trial % 20;
        for (int k = 0; k < n; ++k) {
            const double x = trial == 0 ? k : u(rng);
            const double y = (trial == 0 ? 0.4 : u(rng)) * x + noise(rng);
            xs.push_back(x);
            ys.push_back(y);
            pts.push_back({x, y});
        }
        const auto fit = fit_trend(pts);
        const auto want = oracle::ols(xs, ys);
        CHECK(fit.slope == doctest::Approx(want.slope).epsilon(1e-9));
        CHECK(fit.intercept == doctest::Approx(want.intercept).epsilon(1e-9));
        REQUIRE(fit.r2.has_value());
        CHECK(*fit.r2 == doctest::Approx(*want.r2).epsilon(1e-9));
        CHECK(fit.linearity == classify_r2(fit.r2));
    }
}

TEST_CASE("leakage averages absolute off-diagonal entries over defined cells") {
    OptMatrix M(5, std::vector<std::optional<double>>(5));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) M[i][j] = i == j ? 1.0 : ((i + j) % 2 ? 0.5 : -0.5);
    const auto full = leakage(M);
    CHECK(*full.lambda == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(*full.lambda_fixed == doctest::Approx(0.5).epsilon(1e-15));

    OptMatrix diagonal(5, std::vector<std::optional<double>>(5));
    for (std::size_t i = 0; i < 5; ++i) diagonal[i][i] = 1.0;
    CHECK_FALSE(leakage(diagonal).lambda.has_value());
    CHECK_FALSE(leakage(diagonal).lambda_fixed.has_value());

    // one row with a single defined entry: the two denominators part ways
    OptMatrix sparse(5, std::vector<std::optional<double>>(5));
    sparse[0][1] = -0.8;
    CHECK(*leakage(sparse).lambda == doctest::Approx(0.8));
    CHECK(*leakage(sparse).lambda_fixed == doctest::Approx(0.8 / 4.0 / 5.0));
}

TEST_CASE("covariance matches direct Pearson recomputation on synthetic replays") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> slope(-0.4, 0.4), sigma(0.0, 0.6);
    const auto alpha = [] {
        std::vector<double> a;
        for (int k = 0; k < 10; ++k) a.push_back(k);
        return a;
    }();
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<CrossTraitTrend> trends;
        for (const auto& target : ocean())
            for (auto d : {kUp, kDown}) {
                if (trial % 3 == 0 && target == "E" && d == kDown) continue;  // missing replay
                std::map<std::string, std::vector<double>> scores;
                for (const auto& t : ocean()) {
                    const double b = t == target ? (d == kUp ? 0.35 : -0.35) : slope(rng);
                    const double sd = sigma(rng);
                    for (double a : alpha) scores[t].push_back(3.0 + b * a + sd * noise(rng));
                }
                if (trial % 5 == 0) scores["A"].assign(alpha.size(), 3.0);  // zero-variance series
                trends.push_back(trend_of(target, d, alpha, scores));
            }
        const auto cov = covariance_and_leakage(trends);

        // independent recomputation
        std::map<Direction, std::vector<std::vector<std::optional<double>>>> r;
        for (auto d : {kUp, kDown}) r[d].assign(5, std::vector<std::optional<double>>(5));
        std::size_t linear = 0;
        for (const auto& tr : trends) {
            std::map<std::string, bool> ok;
            for (const auto& t : ocean()) {
                const auto fit = oracle::ols(tr.alpha, tr.scores.at(t));
                ok[t] = fit.r2 && *fit.r2 >= 0.75;
                linear += ok[t];
            }
            const auto i = static_cast<std::size_t>(std::find(ocean().begin(), ocean().end(), tr.target) - ocean().begin());
            if (!ok[tr.target]) continue;
            for (std::size_t j = 0; j < 5; ++j)
                if (ok[ocean()[j]]) r[tr.direction][i][j] = oracle::pearson(tr.scores.at(tr.target), tr.scores.at(ocean()[j]));
        }
        CHECK(cov.linear_trends == linear);
        double rows_sum = 0;
        int rows = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            double row = 0;
            int count = 0;
            for (std::size_t j = 0; j < 5; ++j) {
                for (auto d : {kUp, kDown}) {
                    REQUIRE(cov.r.at(d)[i][j].has_value() == r[d][i][j].has_value());
                    if (r[d][i][j]) CHECK(*cov.r.at(d)[i][j] == doctest::Approx(*r[d][i][j]).epsilon(1e-9));
                }
                std::vector<double> defined;
                for (auto d : {kUp, kDown})
                    if (r[d][i][j]) defined.push_back(*r[d][i][j]);
                REQUIRE(cov.M[i][j].has_value() == !defined.empty());
                if (defined.empty()) continue;
                const double m = oracle::mean(defined);
                CHECK(*cov.M[i][j] == doctest::Approx(m).epsilon(1e-9));
                if (i != j) {
                    row += std::abs(m);
                    ++count;
                }
            }
            if (count) {
                rows_sum += row / count;
                ++rows;
            }
        }
        REQUIRE(cov.lambda.has_value() == (rows > 0));
        if (rows) CHECK(*cov.lambda == doctest::Approx(rows_sum / rows).epsilon(1e-9));
    }

    std::vector<CrossTraitTrend> dup = {trend_of("O", kUp, {0, 1, 2}, {{"O", {1, 2, 3}}}),
                                        trend_of("O", kUp, {0, 1, 2}, {{"O", {1, 2, 3}}})};
    CHECK_THROWS_AS(covariance_and_leakage(dup), ContractViolation);
}

TEST_CASE("pearson is undefined for constant series") {
    CHECK_FALSE(pearson({1, 2, 3}, {2, 2, 2}).has_value());
    CHECK_FALSE(pearson({1, 1, 1}, {1, 2, 3}).has_value());
    CHECK(*pearson({1, 2, 3}, {3, 2, 1}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(pearson({1, 2}, {1, 2, 3}), ContractViolation);
}

TEST_CASE("Big Two flags follow the signs of all four correlations") {
    auto build = [](const std::map<std::string, std::array<double, 4>>& pairs) {
        Covariance cov;
        cov.traits = ocean();
        for (auto d : {kUp, kDown}) cov.r[d] = OptMatrix(5, std::vector<std::optional<double>>(5));
        auto idx = [](const std::string& t) {
            return static_cast<std::size_t>(std::find(ocean().begin(), ocean().end(), t) - ocean().begin());
        };
        for (const auto& [name, v] : pairs) {
            const auto x = idx(name.substr(0, 1)), y = idx(name.substr(2, 1));
            cov.r[kUp][x][y] = v[0];
            cov.r[kDown][x][y] = v[1];
            cov.r[kUp][y][x] = v[2];
            cov.r[kDown][y][x] = v[3];
        }
        return cov;
    };

    auto flags = big_two_check(build({{"A-C", {0.4, 0.6, 0.2, 0.9}}}));
    CHECK(flags.at("A-C") == std::optional(true));
    CHECK_FALSE(flags.at("E-O").has_value());

    flags = big_two_check(build({{"A-C", {0.4, 0.6, -0.2, 0.9}}}));
    CHECK(flags.at("A-C") == std::optional(false));

    // Q8 row: E-O F, A-C F, N-A T, N-C F
    flags = big_two_check(build({{"E-O", {0.5, -0.3, 0.7, 0.2}},
                                 {"A-C", {0.6, 0.1, -0.4, 0.5}},
                                 {"N-A", {-0.7, -0.2, -0.6, -0.9}},
                                 {"N-C", {-0.5, 0.3, -0.8, -0.1}}}));
    CHECK(flags.at("E-O") == std::optional(false));
    CHECK(flags.at("A-C") == std::optional(false));
    CHECK(flags.at("N-A") == std::optional(true));
    CHECK(flags.at("N-C") == std::optional(false));
}

TEST_CASE("phi over scripted sweeps lands on the strongest layer at the last fluent alpha") {
    testing::SweepBench bench;
    std::vector<std::pair<sweep::SweepConfig, std::vector<sweep::SweepRecord>>> sweeps;
    for (int layer = 0; layer < 3; ++layer)
        for (auto d : {kUp, kDown}) {
            auto model = bench.model();
            const auto cfg = bench.config(layer, d);
            sweeps.emplace_back(cfg, sweep::run_sweep(cfg, *model, bench.instruments()).records);
        }
    const auto surfaces = ScoreSurface::from_sweeps(sweeps);
    const auto it = std::find_if(surfaces.begin(), surfaces.end(),
                                 [](const ScoreSurface& s) { return s.instrument() == Instrument::sjt; });
    REQUIRE(it != surfaces.end());
    const auto up = phi(*it, 1, "N", kUp);
    REQUIRE(up.has_value());
    CHECK(up->layer == 1);
    CHECK(up->alpha == 11.0);
    CHECK(up->value == bench.expected(1, 11.0));
    CHECK(up->record_id == bench.config(1, kUp).file_stem() + "@11");
    const auto down = phi(*it, 1, "N", kDown);
    REQUIRE(down.has_value());
    CHECK(down->layer == 1);
    CHECK(down->value == bench.expected(1, 11.0, "N", kDown));
    CHECK(*it->baseline("N") == doctest::Approx(3.0));
}

TEST_CASE("report over a persisted run carries phi, covariance and plot files") {
    testing::SweepBench bench;
    const auto dir = testing::scratch_dir("report");
    for (int layer = 0; layer < 3; ++layer)
        for (auto d : {kUp, kDown}) {
            auto model = bench.model();
            const auto cfg = bench.config(layer, d);
            sweep::run_sweep(cfg, *model, bench.instruments(), {dir / "sweeps" / (cfg.file_stem() + ".jsonl"), false});
        }
    for (auto d : {kUp, kDown}) {
        sweep::ReplayConfig rc;
        rc.model_id = "mock-sweep";
        rc.layer = 1;
        rc.trait = "N";
        rc.direction = d;
        rc.alpha_star = 11.0;
        auto model = bench.model();
        sweep::equidistant_replay(rc, *model, bench.instruments(), {dir / "replays" / (rc.file_stem() + ".jsonl"), false});
    }
    io::write_json(dir / "compare.json",
                   comparison_json("mock-sweep", {{"P2", {{{"N", 4.0}}, {{"N", 2.0}}}}},
                                   {{Instrument::sjt, {{{"N", kUp}, 4.0}, {{"N", kDown}, 2.0}}}}));

    auto inputs = load_run(dir);
    inputs.traits = {"N"};
    REQUIRE(inputs.models.size() == 1);
    CHECK(inputs.models.at("mock-sweep").sweeps.size() == 6);
    CHECK(inputs.models.at("mock-sweep").replays.size() == 2);

    const auto report = build_report(inputs);
    const auto& m = report.at("models").at("mock-sweep");
    bool found = false;
    for (const auto& row : m.at("phi")) {
        if (row["instrument"] != "sjt" || row["trait"] != "N" || row["direction"] != "up") continue;
        found = true;
        CHECK(row["layer"] == 1);
        CHECK(row["alpha"] == 11.0);
        CHECK(row["value"].get<double>() == bench.expected(1, 11.0));
        CHECK(row["delta0"].get<double>() == doctest::Approx(bench.expected(1, 11.0) - 3.0));
        CHECK(row["delta_p2"].get<double>() == doctest::Approx(bench.expected(1, 11.0) - 4.0));
    }
    CHECK(found);
    CHECK(m.at("steerability").at("P2").at("value").get<double>() == doctest::Approx(4.0 + 6.0 - 2.0));
    CHECK(m.at("covariance").at("M")[0][0].get<double>() == doctest::Approx(1.0));
    CHECK(m.at("covariance").at("lambda").is_null());
    CHECK(report.at("wins").at("sjt").at("proportion").at("MDS").get<double>() == 1.0);

    write_report(report, dir / "out");
    for (const char* f : {"report.json", "tables/phi.csv", "tables/mu_star.csv", "tables/mu_sum.csv", "tables/wins.csv",
                          "tables/leakage.csv", "tables/steerability.csv", "tables/sweep_summary.csv",
                          "tables/best_scores.csv", "tables/trends.csv", "tables/covariance__mock-sweep.csv"})
        CHECK_MESSAGE(std::filesystem::exists(dir / "out" / f), f);
    const auto phi_csv = io::read_text(dir / "out" / "tables" / "phi.csv");
    CHECK(phi_csv.find("mock-sweep,sjt,MDS,1,N,up,") != std::string::npos);
    bool svg = false;
    for (const auto& e : std::filesystem::directory_iterator(dir / "out" / "plots"))
        svg = svg || e.path().extension() == ".svg";
    CHECK(svg);
    std::filesystem::remove_all(dir);
}
