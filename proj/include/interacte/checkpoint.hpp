#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "interacte/model.hpp"
#include "interacte/tensor.hpp"
#include "interacte/train.hpp"

namespace interacte {

// Binary container, all integers little-endian:
//
//   magic    8 bytes  "IACTCKPT"
//   version  u32      kCheckpointVersion
//   hlen     u64      length of the JSON header
//   header   hlen bytes UTF-8 JSON
//   count    u32      number of tensors
//   tensor*  u32 name length, name bytes, u8 dtype (0 = float32, 1 = float64),
//            u32 ndim, u64 dims[ndim], row-major data
//   checksum u64      FNV-1a over every preceding byte
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Precision dtype = Precision::kFloat32;
  std::vector<std::size_t> shape;
  std::vector<unsigned char> bytes;
};

struct Checkpoint {
  nlohmann::json header = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws CheckpointError on missing file, bad magic/version, truncation or
// checksum mismatch.
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename T>
CheckpointTensor to_checkpoint_tensor(const std::string& name, const Tensor<T>& t);

// Converts to T when the stored dtype differs.
template <typename T>
Tensor<T> from_checkpoint_tensor(const CheckpointTensor& ct);

// Appends every named parameter under `prefix`.
template <typename T>
void add_params(Checkpoint& ckpt, const ModelParams<T>& params, const std::string& prefix = "");

// Loads parameters named by `param_shapes(config, ...)` under `prefix`,
// validating each stored shape against the derivation.
template <typename T>
ModelParams<T> load_params(const Checkpoint& ckpt, const ModelConfig& config, std::size_t num_entities,
                           std::size_t num_relations, const std::string& prefix = "");

// Training state for resumption: current, best and Adam moment tensors under
// "state/", counters in header["train_state"].
template <typename T>
void add_train_state(Checkpoint& ckpt, const TrainState<T>& state);

template <typename T>
TrainState<T> load_train_state(const Checkpoint& ckpt, const ModelConfig& config, std::size_t num_entities,
                               std::size_t num_relations);

}  // namespace interacte
