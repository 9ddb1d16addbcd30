// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include "imuloc/io/container.hpp"
#include "imuloc/io/hash.hpp"
#include "imuloc/model/model.hpp"

namespace imuloc::model {

void save_checkpoint(const std::filesystem::path& path, const MlpF& model, const std::string& config_hash) {
  io::Container c;
  std::vector<std::int64_t> widths(model.widths().begin(), model.widths().end());
  c.arrays.push_back(io::Array::i64("widths", {widths.size()}, widths));
  const auto params = model.packed();
  c.arrays.push_back(io::Array::f32("parameters", {params.size()}, params));
  c.metadata = {{"kind", "mlp_checkpoint"}, {"activation", "tanh"}, {"config_hash", config_hash}};
  io::write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::Container c = io::read_container(path);
  if (c.metadata.value("kind", "") != "mlp_checkpoint") throw InputError(path.string() + " is not an MLP checkpoint");
  if (c.metadata.value("activation", "") != "tanh") throw InputError("checkpoint: unsupported activation");
  const auto widths64 = c.at("widths").as_i64();
  std::vector<int> widths(widths64.begin(), widths64.end());
  Checkpoint out{MlpF(widths), c.metadata.value("config_hash", "")};
  const auto params = c.at("parameters").as_f32();
  if (params.size() != out.model.parameter_count()) throw InputError("checkpoint: parameter count mismatch");
  out.model.unpack(params);
  return out;
}

std::string model_hash(const MlpF& model) {
  io::Sha256 h;
  for (int w : model.widths()) h.update(std::to_string(w) + ",");
  const auto p = model.packed();
  h.update(std::as_bytes(std::span<const float>(p)));
  return h.hex_digest();
}

}  // namespace imuloc::model
