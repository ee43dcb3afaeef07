#include "cubenmt/weight_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "cubenmt/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "weight container assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace cubenmt {

namespace {
constexpr const char* kMagic = "cubenmt-weights v1";
}

void save_weights(const ModelParams& params, const std::string& path) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  const ModelDims& d = params.dims;
  manifest << "d_emb " << d.d_emb << '\n'
           << "d_hid " << d.d_hid << '\n'
           << "d_att " << d.d_att << '\n'
           << "d_readout " << d.d_readout << '\n'
           << "src_vocab " << d.src_vocab << '\n'
           << "tgt_vocab " << d.tgt_vocab << '\n';

  std::vector<const Tensor*> tensors;
  std::vector<std::string> names;
  params.for_each([&](const std::string& name, const Tensor& t) {
    names.push_back(name);
    tensors.push_back(&t);
  });

  manifest << "tensors " << tensors.size() << '\n';
  int64_t offset = 0;
  for (size_t i = 0; i < tensors.size(); ++i) {
    manifest << "tensor " << names[i] << ' ' << tensors[i]->ndim();
    for (int e : tensors[i]->shape) manifest << ' ' << e;
    manifest << ' ' << offset << '\n';
    offset += tensors[i]->size() * 4;
  }
  manifest << "payload " << offset << '\n';

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write weights file " + path);
  const std::string head = manifest.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const Tensor* t : tensors)
    out.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * 4));
  if (!out) throw IoError("failed while writing weights file " + path);
}

ModelParams load_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open weights file " + path);

  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw IoError("weights file " + path + " truncated");
    return line;
  };
  if (next_line() != kMagic) throw IoError("weights file " + path + " has an unknown format");

  ModelDims dims;
  auto read_kv = [&](const char* key) -> int {
    std::istringstream ls(next_line());
    std::string k;
    int v = 0;
    if (!(ls >> k >> v) || k != key)
      throw IoError("weights manifest: expected '" + std::string(key) + "'");
    return v;
  };
  dims.d_emb = read_kv("d_emb");
  dims.d_hid = read_kv("d_hid");
  dims.d_att = read_kv("d_att");
  dims.d_readout = read_kv("d_readout");
  dims.src_vocab = read_kv("src_vocab");
  dims.tgt_vocab = read_kv("tgt_vocab");

  ModelParams params = ModelParams::sized(dims);
  std::vector<Tensor*> tensors;
  std::vector<std::string> names;
  params.for_each([&](const std::string& name, Tensor& t) {
    names.push_back(name);
    tensors.push_back(&t);
  });

  const size_t count = static_cast<size_t>(read_kv("tensors"));
  if (count != tensors.size())
    throw IoError("weights manifest lists " + std::to_string(count) + " tensors, expected " +
                  std::to_string(tensors.size()));

  int64_t expected_offset = 0;
  for (size_t i = 0; i < count; ++i) {
    std::istringstream ls(next_line());
    std::string tag, name;
    int ndim = 0;
    if (!(ls >> tag >> name >> ndim) || tag != "tensor")
      throw IoError("weights manifest: malformed tensor record");
    if (name != names[i])
      throw IoError("weights manifest: tensor '" + name + "' where '" + names[i] +
                    "' was expected");
    std::vector<int> shape(static_cast<size_t>(ndim));
    for (int& e : shape)
      if (!(ls >> e)) throw IoError("weights manifest: malformed shape for " + name);
    int64_t offset = -1;
    if (!(ls >> offset)) throw IoError("weights manifest: missing offset for " + name);
    if (shape != tensors[i]->shape)
      throw DimensionError("weights tensor " + name + " has a shape not matching the manifest dimensions");
    if (offset != expected_offset)
      throw IoError("weights manifest: non-contiguous offset for " + name);
    expected_offset += tensors[i]->size() * 4;
  }

  std::istringstream ls(next_line());
  std::string tag;
  int64_t payload = -1;
  if (!(ls >> tag >> payload) || tag != "payload")
    throw IoError("weights manifest: missing payload size");
  if (payload != expected_offset)
    throw IoError("weights payload length does not match the manifest");

  for (Tensor* t : tensors) {
    in.read(reinterpret_cast<char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * 4));
    if (!in) throw IoError("weights file " + path + " truncated in payload");
  }
  return params;
}

}  // namespace cubenmt
