#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <random>

namespace sgmp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;
using json = nlohmann::json;

// Per-run stream derived from a master seed: seed + run index.
inline Rng run_stream(std::uint64_t master_seed, std::uint64_t run) {
    return Rng(master_seed + run);
}

} // namespace sgmp
