#include "interacte/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "interacte/error.hpp"

namespace interacte {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'I', 'A', 'C', 'T', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename U>
  void put(U v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(U));
  }
  void put_bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t n) : data_(data), n_(n) {}
  template <typename U>
  U get() {
    U v;
    std::memcpy(&v, take(sizeof(U)), sizeof(U));
    return v;
  }
  const unsigned char* take(std::size_t n) {
    if (n > n_ - pos_) throw CheckpointError("checkpoint truncated");
    const unsigned char* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return n_ - pos_; }

 private:
  const unsigned char* data_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(Precision p) { return p == Precision::kFloat32 ? 4 : 8; }

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string header = ckpt.header.dump();
  w.put<std::uint64_t>(header.size());
  w.put_bytes(header.data(), header.size());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.bytes.size() != Tensor<float>::count(t.shape) * dtype_size(t.dtype)) {
      throw CheckpointError("tensor '" + t.name + "' byte size does not match its shape");
    }
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.name.size()));
    w.put_bytes(t.name.data(), t.name.size());
    w.put<std::uint8_t>(t.dtype == Precision::kFloat32 ? 0 : 1);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.put<std::uint64_t>(d);
    w.put_bytes(t.bytes.data(), t.bytes.size());
  }
  auto& buf = w.buffer();
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  w.put<std::uint64_t>(sum);
  return std::move(buf);
}

Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8) throw CheckpointError("checkpoint too short");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw CheckpointError("bad checkpoint magic");
  if (fnv1a(bytes.data(), body) != stored) throw CheckpointError("checkpoint checksum mismatch");

  Reader r(bytes.data(), body);
  r.take(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto hlen = r.get<std::uint64_t>();
  if (hlen > r.remaining()) throw CheckpointError("checkpoint truncated");
  const auto* h = r.take(static_cast<std::size_t>(hlen));
  try {
    ckpt.header = nlohmann::json::parse(h, h + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    const auto nlen = r.get<std::uint32_t>();
    const auto* name = r.take(nlen);
    t.name.assign(reinterpret_cast<const char*>(name), nlen);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw CheckpointError("unknown dtype in tensor '" + t.name + "'");
    t.dtype = dtype == 0 ? Precision::kFloat32 : Precision::kFloat64;
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw CheckpointError("implausible rank for tensor '" + t.name + "'");
    std::size_t elems = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = r.get<std::uint64_t>();
      t.shape.push_back(static_cast<std::size_t>(dim));
      elems *= static_cast<std::size_t>(dim);
    }
    const std::size_t nbytes = elems * dtype_size(t.dtype);
    if (nbytes > r.remaining()) throw CheckpointError("checkpoint truncated in tensor '" + t.name + "'");
    const auto* data = r.take(nbytes);
    t.bytes.assign(data, data + nbytes);
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) throw CheckpointError("trailing bytes in checkpoint");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

template <typename T>
CheckpointTensor to_checkpoint_tensor(const std::string& name, const Tensor<T>& t) {
  CheckpointTensor ct;
  ct.name = name;
  ct.dtype = std::is_same_v<T, float> ? Precision::kFloat32 : Precision::kFloat64;
  ct.shape = t.shape;
  ct.bytes.resize(t.size() * sizeof(T));
  if (!t.data.empty()) std::memcpy(ct.bytes.data(), t.data.data(), ct.bytes.size());
  return ct;
}

template <typename T>
Tensor<T> from_checkpoint_tensor(const CheckpointTensor& ct) {
  Tensor<T> t(ct.shape);
  const std::size_t n = t.size();
  if (ct.bytes.size() != n * dtype_size(ct.dtype)) throw CheckpointError("tensor '" + ct.name + "' has wrong size");
  if (ct.dtype == Precision::kFloat32) {
    std::vector<float> tmp(n);
    if (n) std::memcpy(tmp.data(), ct.bytes.data(), n * 4);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<T>(tmp[i]);
  } else {
    std::vector<double> tmp(n);
    if (n) std::memcpy(tmp.data(), ct.bytes.data(), n * 8);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = static_cast<T>(tmp[i]);
  }
  return t;
}

template <typename T>
void add_params(Checkpoint& ckpt, const ModelParams<T>& params, const std::string& prefix) {
  for (const auto& [name, tensor] : params.named()) ckpt.tensors.push_back(to_checkpoint_tensor(prefix + name, *tensor));
}

template <typename T>
ModelParams<T> load_params(const Checkpoint& ckpt, const ModelConfig& config, std::size_t num_entities,
                           std::size_t num_relations, const std::string& prefix) {
  ModelParams<T> p;
  for (const auto& [name, shape] : param_shapes(config, num_entities, num_relations)) {
    const CheckpointTensor* ct = ckpt.find(prefix + name);
    if (!ct) throw CheckpointError("checkpoint lacks tensor '" + prefix + name + "'");
    if (ct->shape != shape) {
      throw CheckpointError("tensor '" + prefix + name + "' has shape " + shape_string(ct->shape) +
                            ", config implies " + shape_string(shape));
    }
    Tensor<T> t = from_checkpoint_tensor<T>(*ct);
    if (name == "entity") p.entity = std::move(t);
    else if (name == "relation") p.relation = std::move(t);
    else if (name == "filters") p.filters = std::move(t);
    else if (name == "projection") p.projection = std::move(t);
    else if (name == "entity_bias") p.bias = std::move(t);
  }
  return p;
}

template <typename T>
void add_train_state(Checkpoint& ckpt, const TrainState<T>& state) {
  add_params(ckpt, state.params, "state/params/");
  add_params(ckpt, state.best_params, "state/best/");
  add_params(ckpt, state.adam.m, "state/adam_m/");
  add_params(ckpt, state.adam.v, "state/adam_v/");
  ckpt.header["train_state"] = {{"epoch", state.epoch},
                                {"adam_step", state.adam.step},
                                {"best_mrr", state.best_mrr},
                                {"best_epoch", state.best_epoch},
                                {"bad_evals", state.bad_evals}};
}

template <typename T>
TrainState<T> load_train_state(const Checkpoint& ckpt, const ModelConfig& config, std::size_t num_entities,
                               std::size_t num_relations) {
  if (!ckpt.header.contains("train_state")) throw CheckpointError("checkpoint has no training state");
  TrainState<T> st;
  try {
    const auto& h = ckpt.header.at("train_state");
    st.epoch = h.at("epoch").get<std::size_t>();
    st.adam.step = h.at("adam_step").get<std::uint64_t>();
    st.best_mrr = h.at("best_mrr").get<double>();
    st.best_epoch = h.at("best_epoch").get<std::size_t>();
    st.bad_evals = h.at("bad_evals").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed training state: ") + e.what());
  }
  st.params = load_params<T>(ckpt, config, num_entities, num_relations, "state/params/");
  st.best_params = load_params<T>(ckpt, config, num_entities, num_relations, "state/best/");
  st.adam.m = load_params<T>(ckpt, config, num_entities, num_relations, "state/adam_m/");
  st.adam.v = load_params<T>(ckpt, config, num_entities, num_relations, "state/adam_v/");
  return st;
}

template CheckpointTensor to_checkpoint_tensor<float>(const std::string&, const Tensor<float>&);
template CheckpointTensor to_checkpoint_tensor<double>(const std::string&, const Tensor<double>&);
template Tensor<float> from_checkpoint_tensor<float>(const CheckpointTensor&);
template Tensor<double> from_checkpoint_tensor<double>(const CheckpointTensor&);
template void add_params<float>(Checkpoint&, const ModelParams<float>&, const std::string&);
template void add_params<double>(Checkpoint&, const ModelParams<double>&, const std::string&);
template ModelParams<float> load_params<float>(const Checkpoint&, const ModelConfig&, std::size_t, std::size_t,
                                               const std::string&);
template ModelParams<double> load_params<double>(const Checkpoint&, const ModelConfig&, std::size_t, std::size_t,
                                                 const std::string&);
template void add_train_state<float>(Checkpoint&, const TrainState<float>&);
template void add_train_state<double>(Checkpoint&, const TrainState<double>&);
template TrainState<float> load_train_state<float>(const Checkpoint&, const ModelConfig&, std::size_t, std::size_t);
template TrainState<double> load_train_state<double>(const Checkpoint&, const ModelConfig&, std::size_t, std::size_t);

}  // namespace interacte
