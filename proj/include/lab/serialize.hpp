#pragma once

#include <filesystem>
#include <iosfwd>

#include <json.hpp>

#include "lab/params.hpp"

namespace lab {

// Binary tensor record: u64 ndim, u64 dims[ndim], f64 data[numel], all
// little-endian. Round-trips bit-exactly.
void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

// JSON tensor record {"shape": [...], "data": [...]}; doubles are printed with
// round-trip precision.
nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

// Checkpoint file: magic "LABCKPT1", u64 header length, JSON header
// {"meta": ..., "params": [{"name", "shape"}...]}, then every tensor's data in
// header order.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamSet& params);

struct Checkpoint {
  nlohmann::json meta;
  ParamSet params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lab
