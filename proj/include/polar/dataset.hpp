#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "polar/core.hpp"

namespace polar {

/// Offline trajectories with the behavior probabilities π_b(a_k | h_k) of
/// every logged action.
struct OfflineDataset {
    std::vector<Trajectory> trajectories;
    std::vector<std::vector<double>> behavior_probs;  // n x K
    double p = 1.0;
    std::uint64_t seed = 0;
    std::string env_version;

    long size() const { return static_cast<long>(trajectories.size()); }
    void validate() const;
};

/// Newline-delimited JSON, one record per (trajectory, stage):
/// {"traj_id", "stage", "state", "action", "reward", "behavior_prob"}; the
/// final state s_{K+1} is a record with stage K+1 and null action, reward
/// and behavior_prob. Metadata {n, p, seed, env_version} goes to a sidecar.
void save_dataset(const OfflineDataset& data, const std::string& ndjson_path, const std::string& meta_path);
OfflineDataset load_dataset(const std::string& ndjson_path, const std::string& meta_path);

}  // namespace polar
