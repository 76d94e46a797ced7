#pragma once

#include <string>

#include <json.hpp>

#include "cpm/optim.hpp"

namespace cpm {

// Checkpoint container: magic "CPMCKPT1", a little-endian u64 header
// length, a JSON header holding caller metadata plus the tensor manifest
// (name, shape, byte offset), then the raw little-endian float64 payload.
// Round-trips are bit-identical.
struct Checkpoint {
    ad::ParamMap params;
    nlohmann::json meta;
};

void save_checkpoint(const std::string& path, const ad::ParamMap& params,
                     const nlohmann::json& meta);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace cpm
