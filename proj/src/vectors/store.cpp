#include "psteer/vectors/store.hpp"

#include "psteer/io.hpp"

#include <fstream>
#include <set>

namespace psteer::vectors {

using nlohmann::json;

void VectorStore::put(SteeringVector v) {
    if (v.components.size() == 0) throw ContractViolation("steering vector has no components");
    if (v.tail.size() != v.components.size()) throw ContractViolation("tail and components differ in dimension");
    const std::string key = v.id();
    vectors_.insert_or_assign(key, std::move(v));
}

const SteeringVector* VectorStore::find(const std::string& id) const {
    const auto it = vectors_.find(id);
    return it == vectors_.end() ? nullptr : &it->second;
}

const SteeringVector* VectorStore::find(const std::string& construct, Method method, int layer,
                                        Direction direction) const {
    return find(construct + "/" + to_string(method) + "/" + std::to_string(layer) + "/" + to_string(direction));
}

const SteeringVector& VectorStore::at(const std::string& id) const {
    if (const auto* v = find(id)) return *v;
    throw ContractViolation("no steering vector " + id);
}

std::vector<const SteeringVector*> VectorStore::all() const {
    std::vector<const SteeringVector*> out;
    for (const auto& [_, v] : vectors_) out.push_back(&v);
    return out;
}

std::vector<std::string> VectorStore::constructs() const {
    std::set<std::string> names;
    for (const auto& [_, v] : vectors_) names.insert(v.construct);
    return {names.begin(), names.end()};
}

void VectorStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json entries = json::array();
    std::ofstream blob(dir / "vectors.f32", std::ios::binary);
    if (!blob) throw Error("cannot write " + (dir / "vectors.f32").string());
    for (const auto& [id, v] : vectors_) {
        entries.push_back({{"id", id},
                           {"construct", v.construct},
                           {"method", to_string(v.method)},
                           {"layer", v.layer},
                           {"direction", to_string(v.direction)},
                           {"dim", v.components.size()},
                           {"norm", v.norm_model_units},
                           {"tail", io::to_json(v.tail)},
                           {"corpus_hash", v.corpus_hash}});
        io::write_f32(blob, v.components);
    }
    blob.close();
    io::write_json(dir / "vectors.json", {{"format", "psteer-vectors/1"}, {"entries", entries}});
}

VectorStore VectorStore::load(const std::filesystem::path& dir) {
    const json manifest = io::read_json(dir / "vectors.json");
    std::ifstream blob(dir / "vectors.f32", std::ios::binary);
    if (!blob) throw ConfigError("cannot open " + (dir / "vectors.f32").string());
    VectorStore store;
    try {
        for (const auto& e : manifest.at("entries")) {
            SteeringVector v;
            v.construct = e.at("construct").get<std::string>();
            v.method = method_from_string(e.at("method").get<std::string>());
            v.layer = e.at("layer").get<int>();
            v.direction = direction_from_string(e.at("direction").get<std::string>());
            v.tail = io::vector_from_json(e.at("tail"));
            v.corpus_hash = e.value("corpus_hash", "");
            const auto dim = e.at("dim").get<Eigen::Index>();
            v.components = io::read_f32(blob, 1, dim).row(0).transpose();
            v.norm_model_units = v.components.norm();
            store.put(std::move(v));
        }
    } catch (const json::exception& ex) {
        throw ConfigError((dir / "vectors.json").string() + ": " + ex.what());
    }
    return store;
}

}  // namespace psteer::vectors
