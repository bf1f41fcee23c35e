#pragma once

// Scripted sweep scenario. Every SJT answer reads "I would <alpha> <drive>",
// where drive = alpha * gain(layer). The embedder maps an answer to
// [0.3 * drive], the classifier for trait t has weight coupling(t), so a
// step's SJT score is exactly 1 + 4 * sigmoid(0.3 * coupling * gain * alpha).
// Fluency drops to 0.5 once alpha reaches the cliff.

#include "psteer/sweep/sweep.hpp"

#include "support.hpp"

#include <cmath>
#include <sstream>

namespace psteer::testing {

inline double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

/// Numbers following "I would"; empty for any other answer.
inline std::vector<double> scripted_numbers(const std::string& text) {
    std::istringstream in(text);
    std::string word;
    std::vector<double> out;
    in >> word;
    if (word != "I") return {};
    in >> word;
    double x = 0;
    while (in >> x) out.push_back(x);
    return out;
}

struct SweepBench {
    std::vector<double> gains = {0.5, 1.0, 0.8};
    std::map<std::string, double> coupling = {{"O", 0.4}, {"C", 0.2}, {"E", -0.3}, {"A", 0.1}, {"N", 1.0}};
    double cliff = 12.0;

    vectors::VectorStore store;
    psychometrics::Inventory inventory;
    corpus::SjtBattery battery;
    std::map<std::string, psychometrics::ConstructClassifier> classifiers;
    std::unique_ptr<clients::Embedder> embedder;
    std::unique_ptr<clients::FluencyScorer> fluency;
    std::function<void(double alpha)> fluency_hook;

    SweepBench() {
        for (const auto& [trait, c] : coupling) {
            for (int layer = 0; layer < static_cast<int>(gains.size()); ++layer) {
                vectors::SteeringVector v;
                v.construct = trait;
                v.method = Method::MDS;
                v.layer = layer;
                v.components = Vector{{1.0, 0.0}};
                v.tail = Vector::Zero(2);
                v.norm_model_units = 1.0;
                vectors::SteeringPair pair{v, v};
                pair.down.direction = Direction::down;
                pair.down.components = -v.components;
                store.put(pair);
            }
            for (int i = 0; i < 3; ++i)
                battery.items.push_back({trait + std::to_string(i), "Situation " + trait + std::to_string(i) + "?",
                                         "head", trait, static_cast<std::size_t>(i)});
            inventory.items.push_back({trait + "1", "Do things.", trait, false});
            inventory.items.push_back({trait + "2", "Avoid things.", trait, true});
            psychometrics::ConstructClassifier clf;
            clf.construct = trait;
            clf.weights = Vector{{c}};
            classifiers[trait] = clf;
        }
        inventory.id = "toy";
        battery.inventory_ref = "toy";
        battery.k = 3;
        embedder = clients::function_embedder([](const std::string& text) {
            const auto n = scripted_numbers(text);
            return Vector{{n.size() >= 2 ? 0.3 * n[1] : 0.0}};
        });
        fluency = clients::function_fluency([this](const std::string& text) {
            const auto n = scripted_numbers(text);
            const double alpha = n.empty() ? 0.0 : n[0];
            if (fluency_hook) fluency_hook(alpha);
            return std::abs(alpha) >= cliff ? 0.5 : 1.0;
        });
    }

    nlohmann::json scenario() const {
        nlohmann::json readout = nlohmann::json::array();
        for (double g : gains) readout.push_back({g, 0.0});
        return {{"model_id", "mock-sweep"},
                {"layer_count", gains.size()},
                {"hidden_dim", 2},
                {"generation", {{"default", " {alpha} {drive}"}, {"readout", readout}}},
                {"choice",
                 {{"default", {{"A", 0.0}, {"B", 0.0}, {"C", 2.0}, {"D", 0.0}, {"E", 0.0}}},
                  {"drive_weights", {{"A", 1.0}, {"E", -1.0}}}}}};
    }

    std::unique_ptr<backend::MockModel> model() const { return mock(scenario()); }

    sweep::Instruments instruments() const {
        return {store, inventory, battery, classifiers, *embedder, *fluency};
    }

    /// Scripted SJT score at (layer, alpha) for `trait` under a `target` injection in `dir`.
    double expected(int layer, double alpha, const std::string& trait = "N", Direction dir = Direction::up) const {
        const double sign = dir == Direction::up ? 1.0 : -1.0;
        const double drive = alpha * gains[static_cast<std::size_t>(layer)] * sign;
        return 1.0 + 4.0 * sigmoid(coupling.at(trait) * (0.3 * drive));
    }

    sweep::SweepConfig config(int layer, Direction dir = Direction::up, const std::string& trait = "N") const {
        sweep::SweepConfig c;
        c.model_id = "mock-sweep";
        c.method = Method::MDS;
        c.layer = layer;
        c.trait = trait;
        c.direction = dir;
        c.inventory_ref = "toy";
        c.sjt_ref = "toy-sjt";
        return c;
    }
};

}  // namespace psteer::testing
