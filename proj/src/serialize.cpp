#include "lab/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "lab/errors.hpp"

namespace lab {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr char kMagic[8] = {'L', 'A', 'B', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("binary read: unexpected end of stream");
  return v;
}

void write_doubles(std::ostream& out, const Tensor& t) {
  out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.numel() * sizeof(double)));
}

void read_doubles(std::istream& in, Tensor& t) {
  if (!in.read(reinterpret_cast<char*>(t.raw()), static_cast<std::streamsize>(t.numel() * sizeof(double)))) {
    throw FormatError("binary read: truncated tensor data");
  }
}

Shape shape_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw FormatError("tensor json: 'shape' must be an array");
  Shape s;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) throw FormatError("tensor json: bad dimension " + d.dump());
    s.push_back(d.get<std::size_t>());
  }
  return s;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
  write_u64(out, t.ndim());
  for (auto d : t.shape()) write_u64(out, d);
  write_doubles(out, t);
}

Tensor read_tensor(std::istream& in) {
  const auto ndim = read_u64(in);
  if (ndim > 16) throw FormatError("binary read: implausible rank " + std::to_string(ndim));
  Shape s(ndim);
  for (auto& d : s) d = read_u64(in);
  Tensor t(s);
  read_doubles(in, t);
  return t;
}

nlohmann::json tensor_to_json(const Tensor& t) { return {{"shape", t.shape()}, {"data", t.storage()}}; }

Tensor tensor_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("data")) {
    throw FormatError("tensor json: expected an object with 'shape' and 'data'");
  }
  return Tensor(shape_from_json(j.at("shape")), j.at("data").get<std::vector<double>>());
}

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta, const ParamSet& params) {
  nlohmann::json header;
  header["meta"] = meta;
  header["params"] = nlohmann::json::array();
  for (const auto& p : params.items()) header["params"].push_back({{"name", p.name}, {"shape", p.value.shape()}});
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("checkpoint: cannot write " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params.items()) write_doubles(out, p.value);
  if (!out) throw Error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("checkpoint: cannot open " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw FormatError("checkpoint: " + path.string() + " is not a checkpoint file");
  }
  const auto len = read_u64(in);
  std::string text(len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw FormatError("checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint: bad header in " + path.string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("params")) {
    Tensor t(shape_from_json(entry.at("shape")));
    read_doubles(in, t);
    ck.params.add(entry.at("name").get<std::string>(), std::move(t));
  }
  return ck;
}

}  // namespace lab
