#include "polar/dataset.hpp"

#include <fstream>
#include <map>

#include "json.hpp"

namespace polar {

using nlohmann::json;

void OfflineDataset::validate() const {
    if (behavior_probs.size() != trajectories.size()) throw DataError("behavior probabilities missing for some trajectories");
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const auto& t = trajectories[i];
        if (!t.structurally_valid()) throw DataError("trajectory " + std::to_string(i) + " is malformed");
        if (behavior_probs[i].size() != t.actions.size()) throw DataError("behavior probability count mismatch");
        for (double q : behavior_probs[i]) {
            if (!(q > 0.0 && q <= 1.0)) throw DataError("behavior probability outside (0, 1]");
        }
    }
}

void save_dataset(const OfflineDataset& data, const std::string& ndjson_path, const std::string& meta_path) {
    std::ofstream out(ndjson_path);
    if (!out) throw DataError("cannot open " + ndjson_path + " for writing");
    for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
        const auto& t = data.trajectories[i];
        for (std::size_t k = 0; k < t.states.size(); ++k) {
            json rec;
            rec["traj_id"] = i;
            rec["stage"] = k + 1;
            rec["state"] = std::vector<double>(t.states[k].data(), t.states[k].data() + t.states[k].size());
            if (k < t.actions.size()) {
                rec["action"] = t.actions[k];
                rec["reward"] = t.rewards[k];
                rec["behavior_prob"] = data.behavior_probs.at(i).at(k);
            } else {
                rec["action"] = nullptr;
                rec["reward"] = nullptr;
                rec["behavior_prob"] = nullptr;
            }
            out << rec.dump() << '\n';
        }
    }
    std::ofstream meta(meta_path);
    if (!meta) throw DataError("cannot open " + meta_path + " for writing");
    meta << json{{"n", data.size()}, {"p", data.p}, {"seed", data.seed}, {"env_version", data.env_version}}.dump(2)
         << '\n';
}

OfflineDataset load_dataset(const std::string& ndjson_path, const std::string& meta_path) {
    OfflineDataset data;
    std::ifstream meta(meta_path);
    if (!meta) throw DataError("cannot open " + meta_path);
    std::ifstream in(ndjson_path);
    if (!in) throw DataError("cannot open " + ndjson_path);
    long n = 0;
    try {
        const json m = json::parse(meta);
        n = m.at("n").get<long>();
        data.p = m.at("p").get<double>();
        data.seed = m.at("seed").get<std::uint64_t>();
        data.env_version = m.at("env_version").get<std::string>();
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed dataset metadata: ") + e.what());
    }
    std::map<long, std::map<int, json>> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json rec = json::parse(line);
            const long id = rec.at("traj_id").get<long>();
            const int stage = rec.at("stage").get<int>();
            records[id][stage] = std::move(rec);
        } catch (const json::exception& e) {
            throw DataError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (static_cast<long>(records.size()) != n) throw DataError("trajectory count does not match metadata");
    long expected_id = 0;
    for (auto& [id, stages] : records) {
        if (id != expected_id++) throw DataError("trajectory ids are not contiguous");
        Trajectory t;
        std::vector<double> probs;
        int expected_stage = 1;
        for (auto& [stage, rec] : stages) {
            if (stage != expected_stage++) throw DataError("missing stage in trajectory " + std::to_string(id));
            const auto s = rec.at("state").get<std::vector<double>>();
            t.states.push_back(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
            if (!rec.at("action").is_null()) {
                t.actions.push_back(rec.at("action").get<int>());
                t.rewards.push_back(rec.at("reward").get<double>());
                probs.push_back(rec.at("behavior_prob").get<double>());
            }
        }
        data.trajectories.push_back(std::move(t));
        data.behavior_probs.push_back(std::move(probs));
    }
    data.validate();
    return data;
}

}  // namespace polar
