#pragma once

// Quantities derived from persisted sweep and replay records. Undefined is
// always std::nullopt, never 0. Tie-breaks pick the smallest alpha, then the
// smallest layer.

#include "psteer/sweep/sweep.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace psteer::analysis {

using sweep::Instrument;

inline const std::vector<std::string>& ocean() {
    static const std::vector<std::string> traits = {"O", "C", "E", "A", "N"};
    return traits;
}

struct CellKey {
    int layer = 0;
    int stride = 1;
    std::string trait;
    Direction direction = Direction::up;

    auto operator<=>(const CellKey&) const = default;
};

struct SurfacePoint {
    double alpha = 0.0;
    double score = 0.0;
    std::string record_id;
};

/// Valid (alpha, score) entries for one model, method and instrument.
class ScoreSurface {
public:
    ScoreSurface() = default;
    ScoreSurface(std::string model_id, Method method, Instrument instrument)
        : model_id_(std::move(model_id)), method_(method), instrument_(instrument) {}

    /// Throws ContractViolation for a score outside [1, 5].
    void add(const CellKey& key, double alpha, double score, std::string record_id = {});
    void set_baseline(const std::string& trait, double mu0);
    void set_p2(const std::string& trait, Direction d, double mu);

    const std::vector<SurfacePoint>* cell(const CellKey& key) const;
    std::optional<double> baseline(const std::string& trait) const;
    std::optional<double> p2(const std::string& trait, Direction d) const;
    /// Layers with at least one entry for (stride, trait, direction), ascending.
    std::vector<int> layers(int stride, const std::string& trait, Direction d) const;
    std::set<int> all_layers() const;
    std::set<int> strides() const;
    std::set<std::string> traits() const;

    const std::string& model_id() const { return model_id_; }
    Method method() const { return method_; }
    Instrument instrument() const { return instrument_; }

    /// One surface per (model, method, instrument) from loaded sweeps; only
    /// valid records enter. Baselines are the mean alpha = 0 score per trait.
    static std::vector<ScoreSurface> from_sweeps(
        const std::vector<std::pair<sweep::SweepConfig, std::vector<sweep::SweepRecord>>>& sweeps);

private:
    std::string model_id_;
    Method method_ = Method::MDS;
    Instrument instrument_ = Instrument::sjt;
    std::map<CellKey, std::vector<SurfacePoint>> cells_;
    std::map<std::string, double> baselines_;
    std::map<std::pair<std::string, Direction>, double> p2_;
};

struct Extremum {
    double value = 0.0;
    double alpha = 0.0;
    int layer = 0;
    std::string record_id;
};

/// Max over valid alpha for up, min for down.
std::optional<Extremum> mu_star(const ScoreSurface& surface, const CellKey& key);

struct Aggregate {
    std::optional<double> value;
    std::vector<std::pair<std::string, Direction>> missing;
};

/// (1/|traits|) sum_t (mu*_up + 6 - mu*_down); undefined unless every cell is.
Aggregate mu_sum(const ScoreSurface& surface, int layer, int stride, const std::vector<std::string>& traits = ocean());

/// Extremum of mu* across layers.
std::optional<Extremum> phi(const ScoreSurface& surface, int stride, const std::string& trait, Direction d);

struct Deltas {
    double from_baseline = 0.0;
    std::optional<double> from_p2;
};

Deltas deltas(double phi_value, double mu0, std::optional<double> mu_p2 = std::nullopt);

/// (1/|traits|) sum_t (mu_up + 6 - mu_down).
Aggregate steerability(const std::map<std::string, double>& mu_up, const std::map<std::string, double>& mu_down,
                       const std::vector<std::string>& traits = ocean());

struct WinCell {
    std::string id;
    Direction direction = Direction::up;
    double baseline = 0.0;
    std::map<Method, std::optional<double>> phi;
};

struct WinTable {
    std::size_t cells = 0;
    std::map<Method, std::size_t> wins;
    std::map<Method, double> proportion;
    std::map<std::string, std::vector<Method>> winners;
};

/// Per cell, every method attaining the extreme phi wins if it also beats the
/// baseline in the cell's direction. A method absent from a cell loses it.
WinTable win_table(const std::vector<WinCell>& cells);

enum class Linearity { near, mostly, rough, none };
std::string to_string(Linearity l);

struct TrendFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::optional<double> r2;  // undefined for a constant series
    Linearity linearity = Linearity::none;
    std::size_t points = 0;
};

struct TrendPoint {
    double alpha = 0.0;
    double score = 0.0;
};

/// Ordinary least squares; needs >= 3 points and >= 2 distinct alpha values.
TrendFit fit_trend(const std::vector<TrendPoint>& points);
Linearity classify_r2(std::optional<double> r2);

/// Undefined when either series is constant.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Scores of every measured trait along one replay.
struct CrossTraitTrend {
    std::string target;
    Direction direction = Direction::up;
    std::vector<double> alpha;
    std::map<std::string, std::vector<double>> scores;

    static CrossTraitTrend from_replay(const sweep::ReplayConfig& config, const std::vector<sweep::ReplayRecord>& records);
};

using OptMatrix = std::vector<std::vector<std::optional<double>>>;

struct Covariance {
    std::vector<std::string> traits;
    // r[d][i][j]: correlation between traits i and j while steering i in direction d
    std::map<Direction, OptMatrix> r;
    OptMatrix M;
    std::map<std::string, TrendFit> fits;  // "target/dir/trait"
    std::size_t linear_trends = 0;         // fits with linearity != none
    std::size_t trends = 0;
    std::optional<double> lambda;          // per-row mean over defined entries, rows without any skipped
    std::optional<double> lambda_fixed;    // the fixed 1/5 and 1/4 denominators over defined entries
};

/// A correlation r_ij enters only if both trend i and trend j of that replay
/// are at least roughly linear.
Covariance covariance_and_leakage(const std::vector<CrossTraitTrend>& trends,
                                  const std::vector<std::string>& traits = ocean());

struct Leakage {
    std::optional<double> lambda;
    std::optional<double> lambda_fixed;
};

/// Mean absolute off-diagonal entry of M, per row then across rows, in both denominator variants.
Leakage leakage(const OptMatrix& M);

struct BigTwoPair {
    std::string x, y;
    int sign = 1;
};
const std::vector<BigTwoPair>& big_two_pairs();

/// "E-O" -> true/false, or nullopt when one of the four correlations is undefined.
std::map<std::string, std::optional<bool>> big_two_check(const Covariance& cov);

}  // namespace psteer::analysis
