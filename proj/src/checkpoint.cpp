#include "steerlab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "steerlab/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace steerlab {

using nlohmann::json;

namespace {

json tensor_directory(std::vector<TensorRef>& refs) {
  json dir = json::array();
  std::size_t offset = 0;
  for (const TensorRef& r : refs) {
    dir.push_back({{"name", r.name},
                   {"rows", r.rows},
                   {"cols", r.cols},
                   {"offset", offset},
                   {"size", r.size}});
    offset += r.size;
  }
  return dir;
}

void write_container(const std::string& path, const json& header,
                     std::vector<TensorRef>& refs) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string header_str = header.dump();
  const std::uint64_t len = header_str.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const TensorRef& r : refs) {
    out.write(reinterpret_cast<const char*>(r.data),
              static_cast<std::streamsize>(r.size * sizeof(double)));
  }
  if (!out) throw ArtifactError("failed writing checkpoint: " + path);
}

json read_header(std::ifstream& in, const std::string& path) {
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ArtifactError("not a checkpoint container: " + path);
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len == 0 || len > (1ULL << 30)) {
    throw ArtifactError("corrupt checkpoint header length: " + path);
  }
  std::string header_str(len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(len));
  if (!in) throw ArtifactError("truncated checkpoint header: " + path);
  json header = json::parse(header_str, nullptr, false);
  if (header.is_discarded()) throw ArtifactError("invalid checkpoint header JSON: " + path);
  if (!header.contains("schema_version") ||
      header["schema_version"].get<int>() != kCheckpointSchemaVersion) {
    throw ArtifactError("unsupported checkpoint schema version: " + path);
  }
  return header;
}

void read_tensors(std::ifstream& in, const std::string& path, const json& dir,
                  std::vector<TensorRef>& refs) {
  if (!dir.is_array() || dir.size() != refs.size()) {
    throw ArtifactError("checkpoint tensor directory mismatch: " + path);
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const json& entry = dir[i];
    if (entry["name"].get<std::string>() != refs[i].name ||
        entry["size"].get<std::size_t>() != refs[i].size ||
        entry["rows"].get<int>() != refs[i].rows || entry["cols"].get<int>() != refs[i].cols) {
      throw ArtifactError("checkpoint tensor '" + refs[i].name + "' does not match " +
                          "the declared architecture: " + path);
    }
    in.read(reinterpret_cast<char*>(refs[i].data),
            static_cast<std::streamsize>(refs[i].size * sizeof(double)));
    if (!in) throw ArtifactError("truncated checkpoint tensors: " + path);
  }
  // No trailing garbage.
  char extra;
  if (in.read(&extra, 1)) throw ArtifactError("trailing bytes in checkpoint: " + path);
}

}  // namespace

void save_toy_lm(const std::string& path, const ToyLm& model) {
  auto& m = const_cast<ToyLm&>(model);
  std::vector<TensorRef> refs = tensor_refs(m);
  json header;
  header["schema_version"] = kCheckpointSchemaVersion;
  header["kind"] = "toy_lm";
  header["config"] = {{"n_layers", model.cfg.n_layers},   {"d_model", model.cfg.d_model},
                      {"n_heads", model.cfg.n_heads},     {"d_ff", model.cfg.d_ff},
                      {"context_window", model.cfg.context_window},
                      {"hook_layer", model.cfg.hook_layer}};
  header["vocabulary"] = game_vocabulary().tokens();
  header["vocab_size"] = model.vocab_size;
  header["tensors"] = tensor_directory(refs);
  write_container(path, header, refs);
}

ToyLm load_toy_lm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);
  json header = read_header(in, path);
  if (header.value("kind", "") != "toy_lm") {
    throw ArtifactError("checkpoint is not a toy_lm: " + path);
  }
  LmConfig cfg;
  try {
    const json& c = header.at("config");
    cfg.n_layers = c.at("n_layers").get<int>();
    cfg.d_model = c.at("d_model").get<int>();
    cfg.n_heads = c.at("n_heads").get<int>();
    cfg.d_ff = c.at("d_ff").get<int>();
    cfg.context_window = c.at("context_window").get<int>();
    cfg.hook_layer = c.at("hook_layer").get<int>();
  } catch (const json::exception& e) {
    throw ArtifactError("bad checkpoint config: " + path + ": " + e.what());
  }
  const auto stored_vocab = header.at("vocabulary").get<std::vector<std::string>>();
  if (stored_vocab != game_vocabulary().tokens()) {
    throw ArtifactError("checkpoint vocabulary does not match this build: " + path);
  }
  ToyLm model = init_toy_lm(cfg, header.at("vocab_size").get<int>(), Rng(0));
  std::vector<TensorRef> refs = tensor_refs(model);
  read_tensors(in, path, header.at("tensors"), refs);
  return model;
}

void save_sae(const std::string& path, const SaeModel& sae) {
  auto& s = const_cast<SaeModel&>(sae);
  std::vector<TensorRef> refs = tensor_refs(s);
  json header;
  header["schema_version"] = kCheckpointSchemaVersion;
  header["kind"] = "sae";
  header["config"] = {{"d_in", sae.d_in}, {"d_latent", sae.d_latent}, {"lambda_l1", sae.lambda_l1}};
  header["tensors"] = tensor_directory(refs);
  write_container(path, header, refs);
}

SaeModel load_sae(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);
  json header = read_header(in, path);
  if (header.value("kind", "") != "sae") {
    throw ArtifactError("checkpoint is not an sae: " + path);
  }
  int d_in = 0, d_latent = 0;
  double lambda = 0.0;
  try {
    const json& c = header.at("config");
    d_in = c.at("d_in").get<int>();
    d_latent = c.at("d_latent").get<int>();
    lambda = c.at("lambda_l1").get<double>();
  } catch (const json::exception& e) {
    throw ArtifactError("bad checkpoint config: " + path + ": " + e.what());
  }
  SaeModel sae = init_sae(d_in, d_latent, lambda, Rng(0));
  std::vector<TensorRef> refs = tensor_refs(sae);
  read_tensors(in, path, header.at("tensors"), refs);
  return sae;
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open checkpoint: " + path);
  json header = read_header(in, path);
  return header.value("kind", "");
}

}  // namespace steerlab
