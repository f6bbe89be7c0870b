#pragma once

#include <string>

#include <json.hpp>

#include "imb/net.hpp"

namespace imb {

// Checkpoint container, version 1:
//   bytes 0..7   magic "IMBCKPT1"
//   bytes 8..11  header length, little-endian uint32
//   header       UTF-8 JSON: {"version", "epoch", "arch": {"input_dim",
//                "widths", "n_classes"}, "config": <run config snapshot>}
//   payload      all tensors as raw little-endian float64, in order:
//                per hidden layer W (row-major), b, r_logits; head W, b.
struct Checkpoint {
    NetworkParams params;
    nlohmann::json config;
    int epoch = 0;
};

void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const nlohmann::json& config_snapshot, int epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace imb
