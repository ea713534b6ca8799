#include "logora/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "logora/binary_io.hpp"
#include "logora/errors.hpp"

namespace logora {

namespace {

constexpr std::uint32_t kMaxNameBytes = 4096;
constexpr std::uint32_t kMaxRank = 16;

void write_string(std::ostream& out, const std::string& s) {
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, std::uint32_t limit, const char* what) {
  const auto len = binary::read_le<std::uint32_t>(in, what);
  LOGORA_CHECK(len <= limit, ErrorCode::kFormatError, std::string(what) + " length out of bounds");
  std::string s(len, '\0');
  in.read(s.data(), len);
  LOGORA_CHECK(in.gcount() == static_cast<std::streamsize>(len), ErrorCode::kFormatError,
          std::string("truncated ") + what);
  return s;
}

}  // namespace

const CheckpointRecord* Checkpoint::find(const std::string& name) const {
  auto it = std::find_if(records.begin(), records.end(), [&](const auto& r) { return r.name == name; });
  return it == records.end() ? nullptr : &*it;
}

void write_checkpoint(const std::filesystem::path& path, const std::string& metadata_json, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  LOGORA_CHECK(static_cast<bool>(out), ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
  binary::write_magic(out, kCheckpointMagic, kCheckpointVersion);
  write_string(out, metadata_json);
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& entry : params.entries()) {
    write_string(out, entry.name);
    const Shape& shape = entry.tensor.shape();
    binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) binary::write_le<std::uint64_t>(out, d);
    for (double v : entry.tensor.data()) binary::write_le<double>(out, v);
  }
  LOGORA_CHECK(static_cast<bool>(out), ErrorCode::kIoError, "write failed for " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  LOGORA_CHECK(static_cast<bool>(in), ErrorCode::kIoError, "cannot open checkpoint " + path.string());
  const auto version = binary::read_magic(in, kCheckpointMagic);
  LOGORA_CHECK(version == kCheckpointVersion, ErrorCode::kFormatError,
          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.metadata_json = read_string(in, 1u << 24, "metadata");
  const auto count = binary::read_le<std::uint32_t>(in, "record count");
  for (std::uint32_t r = 0; r < count; ++r) {
    CheckpointRecord rec;
    rec.name = read_string(in, kMaxNameBytes, "record name");
    const auto rank = binary::read_le<std::uint32_t>(in, "rank");
    LOGORA_CHECK(rank <= kMaxRank, ErrorCode::kFormatError, "record rank out of bounds in " + rec.name);
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto d = binary::read_le<std::uint64_t>(in, "dimension");
      LOGORA_CHECK(d > 0 && d < (1ull << 32), ErrorCode::kFormatError, "bad dimension in " + rec.name);
      rec.shape.push_back(static_cast<std::size_t>(d));
    }
    const std::size_t n = shape_numel(rec.shape);
    LOGORA_CHECK(n < (1ull << 28), ErrorCode::kFormatError, "record too large: " + rec.name);
    rec.values.resize(n);
    for (double& v : rec.values) v = binary::read_le<double>(in, "payload");
    ckpt.records.push_back(std::move(rec));
  }
  return ckpt;
}

void load_parameters(const Checkpoint& checkpoint, const ParameterSet& params) {
  for (const auto& entry : params.entries()) {
    const CheckpointRecord* rec = checkpoint.find(entry.name);
    LOGORA_CHECK(rec != nullptr, ErrorCode::kFormatError, "checkpoint lacks tensor " + entry.name);
    LOGORA_CHECK(rec->shape == entry.tensor.shape(), ErrorCode::kFormatError,
            "shape mismatch for " + entry.name + ": " + shape_to_string(rec->shape) + " vs " +
                shape_to_string(entry.tensor.shape()));
    Tensor target = entry.tensor;
    std::copy(rec->values.begin(), rec->values.end(), target.mutable_data().begin());
  }
}

}  // namespace logora
