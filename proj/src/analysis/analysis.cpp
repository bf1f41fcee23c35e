#include "psteer/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace psteer::analysis {

namespace {

bool better(double candidate, double incumbent, Direction d) {
    return d == Direction::up ? candidate > incumbent : candidate < incumbent;
}

bool all_equal(const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
}

Eigen::Map<const Eigen::ArrayXd> as_array(const std::vector<double>& v) {
    return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

void ScoreSurface::add(const CellKey& key, double alpha, double score, std::string record_id) {
    if (!(score >= 1.0 && score <= 5.0))
        throw ContractViolation("score " + format_number(score) + " is outside [1, 5]");
    cells_[key].push_back({alpha, score, std::move(record_id)});
}

void ScoreSurface::set_baseline(const std::string& trait, double mu0) { baselines_[trait] = mu0; }
void ScoreSurface::set_p2(const std::string& trait, Direction d, double mu) { p2_[{trait, d}] = mu; }

const std::vector<SurfacePoint>* ScoreSurface::cell(const CellKey& key) const {
    const auto it = cells_.find(key);
    return it == cells_.end() ? nullptr : &it->second;
}

std::optional<double> ScoreSurface::baseline(const std::string& trait) const {
    const auto it = baselines_.find(trait);
    return it == baselines_.end() ? std::nullopt : std::optional(it->second);
}

std::optional<double> ScoreSurface::p2(const std::string& trait, Direction d) const {
    const auto it = p2_.find({trait, d});
    return it == p2_.end() ? std::nullopt : std::optional(it->second);
}

std::vector<int> ScoreSurface::layers(int stride, const std::string& trait, Direction d) const {
    std::vector<int> out;
    for (const auto& [key, points] : cells_)
        if (key.stride == stride && key.trait == trait && key.direction == d && !points.empty())
            out.push_back(key.layer);
    std::sort(out.begin(), out.end());
    return out;
}

std::set<int> ScoreSurface::all_layers() const {
    std::set<int> out;
    for (const auto& [key, _] : cells_) out.insert(key.layer);
    return out;
}

std::set<int> ScoreSurface::strides() const {
    std::set<int> out;
    for (const auto& [key, _] : cells_) out.insert(key.stride);
    return out;
}

std::set<std::string> ScoreSurface::traits() const {
    std::set<std::string> out;
    for (const auto& [key, _] : cells_) out.insert(key.trait);
    for (const auto& [t, _] : baselines_) out.insert(t);
    return out;
}

std::vector<ScoreSurface> ScoreSurface::from_sweeps(
    const std::vector<std::pair<sweep::SweepConfig, std::vector<sweep::SweepRecord>>>& sweeps) {
    struct Acc {
        ScoreSurface surface;
        std::map<std::string, std::pair<double, int>> base;
    };
    std::map<std::tuple<std::string, Method, Instrument>, Acc> acc;
    for (const auto& [config, records] : sweeps) {
        if (records.empty()) continue;
        const auto valid = sweep::validity_filter(records, config.direction);
        for (auto inst : {Instrument::sjt, Instrument::inventory}) {
            auto [it, fresh] = acc.try_emplace({config.model_id, config.method, inst});
            if (fresh) it->second.surface = ScoreSurface(config.model_id, config.method, inst);
            if (const auto b = records.front().score(inst)) {
                auto& [sum, n] = it->second.base[config.trait];
                sum += *b;
                ++n;
            }
            const CellKey key{config.layer, config.stride, config.trait, config.direction};
            for (const auto& p : valid.at(inst))
                it->second.surface.add(key, p.alpha, p.score, config.file_stem() + "@" + format_number(p.alpha));
        }
    }
    std::vector<ScoreSurface> out;
    for (auto& [_, a] : acc) {
        for (const auto& [trait, sn] : a.base) a.surface.set_baseline(trait, sn.first / sn.second);
        out.push_back(std::move(a.surface));
    }
    return out;
}

std::optional<Extremum> mu_star(const ScoreSurface& surface, const CellKey& key) {
    const auto* points = surface.cell(key);
    if (!points || points->empty()) return std::nullopt;
    const SurfacePoint* best = nullptr;
    for (const auto& p : *points) {
        if (!best || better(p.score, best->score, key.direction) ||
            (p.score == best->score && p.alpha < best->alpha))
            best = &p;
    }
    return Extremum{best->score, best->alpha, key.layer, best->record_id};
}

Aggregate mu_sum(const ScoreSurface& surface, int layer, int stride, const std::vector<std::string>& traits) {
    Aggregate out;
    double sum = 0;
    for (const auto& t : traits) {
        const auto up = mu_star(surface, {layer, stride, t, Direction::up});
        const auto down = mu_star(surface, {layer, stride, t, Direction::down});
        if (!up) out.missing.emplace_back(t, Direction::up);
        if (!down) out.missing.emplace_back(t, Direction::down);
        if (up && down) sum += up->value + 6.0 - down->value;
    }
    if (out.missing.empty() && !traits.empty()) out.value = sum / static_cast<double>(traits.size());
    return out;
}

std::optional<Extremum> phi(const ScoreSurface& surface, int stride, const std::string& trait, Direction d) {
    std::optional<Extremum> best;
    for (int layer : surface.layers(stride, trait, d)) {  // ascending, so ties keep the smallest layer
        const auto m = mu_star(surface, {layer, stride, trait, d});
        if (m && (!best || better(m->value, best->value, d))) best = m;
    }
    return best;
}

Deltas deltas(double phi_value, double mu0, std::optional<double> mu_p2) {
    Deltas out;
    out.from_baseline = phi_value - mu0;
    if (mu_p2) out.from_p2 = phi_value - *mu_p2;
    return out;
}

Aggregate steerability(const std::map<std::string, double>& mu_up, const std::map<std::string, double>& mu_down,
                       const std::vector<std::string>& traits) {
    Aggregate out;
    double sum = 0;
    for (const auto& t : traits) {
        const auto u = mu_up.find(t);
        const auto d = mu_down.find(t);
        if (u == mu_up.end()) out.missing.emplace_back(t, Direction::up);
        if (d == mu_down.end()) out.missing.emplace_back(t, Direction::down);
        if (u != mu_up.end() && d != mu_down.end()) sum += u->second + 6.0 - d->second;
    }
    if (out.missing.empty() && !traits.empty()) out.value = sum / static_cast<double>(traits.size());
    return out;
}

WinTable win_table(const std::vector<WinCell>& cells) {
    WinTable table;
    table.cells = cells.size();
    for (const auto& c : cells)
        for (const auto& [m, _] : c.phi) table.wins.try_emplace(m, 0);
    for (const auto& c : cells) {
        std::optional<double> extreme;
        for (const auto& [m, v] : c.phi)
            if (v && (!extreme || better(*v, *extreme, c.direction))) extreme = v;
        auto& winners = table.winners[c.id];
        if (!extreme || !better(*extreme, c.baseline, c.direction)) continue;
        for (const auto& [m, v] : c.phi)
            if (v && *v == *extreme) {
                winners.push_back(m);
                ++table.wins[m];
            }
    }
    for (const auto& [m, w] : table.wins)
        table.proportion[m] = table.cells == 0 ? 0.0 : static_cast<double>(w) / static_cast<double>(table.cells);
    return table;
}

std::string to_string(Linearity l) {
    switch (l) {
        case Linearity::near: return "near";
        case Linearity::mostly: return "mostly";
        case Linearity::rough: return "rough";
        case Linearity::none: return "none";
    }
    return "none";
}

Linearity classify_r2(std::optional<double> r2) {
    if (!r2) return Linearity::none;
    if (*r2 >= 0.95) return Linearity::near;
    if (*r2 >= 0.85) return Linearity::mostly;
    if (*r2 >= 0.75) return Linearity::rough;
    return Linearity::none;
}

TrendFit fit_trend(const std::vector<TrendPoint>& points) {
    if (points.size() < 3) throw InsufficientDataError("fit_trend needs at least 3 points");
    std::vector<double> xs, ys;
    for (const auto& p : points) {
        xs.push_back(p.alpha);
        ys.push_back(p.score);
    }
    if (all_equal(xs)) throw InsufficientDataError("fit_trend needs at least 2 distinct alpha values");
    const auto x = as_array(xs);
    const auto y = as_array(ys);
    const Eigen::ArrayXd dx = x - x.mean();
    const Eigen::ArrayXd dy = y - y.mean();

    TrendFit fit;
    fit.points = points.size();
    fit.slope = (dx * dy).sum() / dx.square().sum();
    fit.intercept = y.mean() - fit.slope * x.mean();
    if (!all_equal(ys)) {
        const double ss_res = (y - (fit.intercept + fit.slope * x)).square().sum();
        fit.r2 = 1.0 - ss_res / dy.square().sum();
    }
    fit.linearity = classify_r2(fit.r2);
    return fit;
}

std::optional<double> pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ContractViolation("pearson: series differ in length");
    if (xs.size() < 2 || all_equal(xs) || all_equal(ys)) return std::nullopt;
    const auto x = as_array(xs);
    const auto y = as_array(ys);
    const Eigen::ArrayXd dx = x - x.mean();
    const Eigen::ArrayXd dy = y - y.mean();
    const double r = (dx * dy).sum() / std::sqrt(dx.square().sum() * dy.square().sum());
    return std::clamp(r, -1.0, 1.0);
}

CrossTraitTrend CrossTraitTrend::from_replay(const sweep::ReplayConfig& config,
                                             const std::vector<sweep::ReplayRecord>& records) {
    CrossTraitTrend t;
    t.target = config.trait;
    t.direction = config.direction;
    for (const auto& r : records) {
        t.alpha.push_back(r.alpha);
        for (const auto& [trait, s] : r.scores) t.scores[trait].push_back(s);
    }
    return t;
}

Covariance covariance_and_leakage(const std::vector<CrossTraitTrend>& trends, const std::vector<std::string>& traits) {
    const std::size_t n = traits.size();
    auto index_of = [&](const std::string& t) -> std::optional<std::size_t> {
        const auto it = std::find(traits.begin(), traits.end(), t);
        return it == traits.end() ? std::nullopt : std::optional(static_cast<std::size_t>(it - traits.begin()));
    };

    Covariance cov;
    cov.traits = traits;
    for (auto d : {Direction::up, Direction::down}) cov.r[d] = OptMatrix(n, std::vector<std::optional<double>>(n));
    cov.M = OptMatrix(n, std::vector<std::optional<double>>(n));

    std::set<std::pair<std::string, Direction>> seen;
    for (const auto& trend : trends) {
        const auto i = index_of(trend.target);
        if (!i) continue;
        if (!seen.insert({trend.target, trend.direction}).second)
            throw ContractViolation("two replays for " + trend.target + " " + to_string(trend.direction));

        std::map<std::string, bool> linear;
        for (const auto& t : traits) {
            const auto it = trend.scores.find(t);
            if (it == trend.scores.end()) continue;
            if (it->second.size() != trend.alpha.size())
                throw ContractViolation("replay for " + trend.target + ": series lengths differ");
            ++cov.trends;
            std::vector<TrendPoint> pts;
            for (std::size_t k = 0; k < trend.alpha.size(); ++k) pts.push_back({trend.alpha[k], it->second[k]});
            try {
                const auto fit = fit_trend(pts);
                cov.fits[trend.target + "/" + to_string(trend.direction) + "/" + t] = fit;
                linear[t] = fit.linearity != Linearity::none;
                cov.linear_trends += linear[t];
            } catch (const InsufficientDataError&) {
                linear[t] = false;
            }
        }
        if (!linear[trend.target]) continue;
        auto& r = cov.r[trend.direction];
        for (std::size_t j = 0; j < n; ++j)
            if (linear[traits[j]]) r[*i][j] = pearson(trend.scores.at(trend.target), trend.scores.at(traits[j]));
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const auto& up = cov.r[Direction::up][i][j];
            const auto& down = cov.r[Direction::down][i][j];
            if (up && down) cov.M[i][j] = (*up + *down) / 2.0;
            else if (up) cov.M[i][j] = up;
            else if (down) cov.M[i][j] = down;
        }

    const auto l = leakage(cov.M);
    cov.lambda = l.lambda;
    cov.lambda_fixed = l.lambda_fixed;
    return cov;
}

Leakage leakage(const OptMatrix& M) {
    const std::size_t n = M.size();
    double rows_sum = 0, fixed_sum = 0;
    std::size_t rows = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (M[i].size() != n) throw ContractViolation("leakage: matrix is not square");
        double row = 0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && M[i][j]) {
                row += std::abs(*M[i][j]);
                ++count;
            }
        if (count == 0) continue;
        rows_sum += row / static_cast<double>(count);
        fixed_sum += row / static_cast<double>(n - 1);
        ++rows;
    }
    Leakage out;
    if (rows > 0) {
        out.lambda = rows_sum / static_cast<double>(rows);
        out.lambda_fixed = fixed_sum / static_cast<double>(n);
    }
    return out;
}

const std::vector<BigTwoPair>& big_two_pairs() {
    static const std::vector<BigTwoPair> pairs = {{"E", "O", 1}, {"A", "C", 1}, {"N", "A", -1}, {"N", "C", -1}};
    return pairs;
}

std::map<std::string, std::optional<bool>> big_two_check(const Covariance& cov) {
    std::map<std::string, std::optional<bool>> out;
    auto index_of = [&](const std::string& t) -> std::optional<std::size_t> {
        const auto it = std::find(cov.traits.begin(), cov.traits.end(), t);
        return it == cov.traits.end() ? std::nullopt : std::optional(static_cast<std::size_t>(it - cov.traits.begin()));
    };
    for (const auto& p : big_two_pairs()) {
        const std::string name = p.x + "-" + p.y;
        const auto x = index_of(p.x), y = index_of(p.y);
        if (!x || !y) {
            out[name] = std::nullopt;
            continue;
        }
        std::vector<std::optional<double>> four;
        for (auto d : {Direction::up, Direction::down}) {
            four.push_back(cov.r.at(d)[*x][*y]);
            four.push_back(cov.r.at(d)[*y][*x]);
        }
        if (std::any_of(four.begin(), four.end(), [](const auto& v) { return !v.has_value(); })) {
            out[name] = std::nullopt;
            continue;
        }
        out[name] = std::all_of(four.begin(), four.end(), [&](const auto& v) { return *v * p.sign > 0; });
    }
    return out;
}

}  // namespace psteer::analysis
