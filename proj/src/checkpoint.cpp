#include "ttpp/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "ttpp/errors.hpp"

namespace ttpp {

namespace {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T take() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return v;
  }

  std::string take_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw TruncationError("checkpoint truncated: need " + std::to_string(n) + " more bytes", bytes_.size());
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParameterSet& params) {
  std::vector<std::uint8_t> out(kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.items()) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    const auto& shape = p.value.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e));
    for (double v : p.value.value().values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

void decode_checkpoint(std::span<const std::uint8_t> bytes, ParameterSet& params) {
  Reader in(bytes);
  if (in.take_string(kCheckpointMagic.size()) != kCheckpointMagic) throw ParseError("bad checkpoint magic", 0);
  const auto version = in.take<std::uint16_t>();
  if (version != kCheckpointVersion) {
    throw FormatVersionError("unsupported checkpoint version " + std::to_string(version), 8);
  }
  const auto count = in.take<std::uint32_t>();
  if (count != params.size()) {
    throw ParseError("checkpoint holds " + std::to_string(count) + " parameters, model has " +
                         std::to_string(params.size()),
                     10);
  }
  std::vector<Tensor> values;
  values.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t at = in.pos();
    const auto name = in.take_string(in.take<std::uint32_t>());
    const auto& expected = params.items()[k];
    if (name != expected.name) {
      throw ParseError("checkpoint parameter '" + name + "' where model expects '" + expected.name + "'", at);
    }
    Shape shape(in.take<std::uint32_t>());
    for (auto& e : shape) e = in.take<std::uint32_t>();
    if (shape != expected.value.shape()) {
      throw ParseError("parameter '" + name + "' has shape " + shape_string(shape) + ", model expects " +
                           shape_string(expected.value.shape()),
                       at);
    }
    Tensor t(shape);
    for (auto& v : t.values()) v = std::bit_cast<double>(in.take<std::uint64_t>());
    values.push_back(std::move(t));
  }
  if (!in.done()) throw ParseError("trailing bytes after checkpoint", in.pos());
  for (std::size_t k = 0; k < count; ++k) {
    auto& p = params.items()[k];
    p.value.mutable_value() = std::move(values[k]);
    p.momentum = Tensor(p.value.shape());
  }
}

void save_checkpoint(const ParameterSet& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void load_checkpoint(const std::filesystem::path& path, ParameterSet& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint '" + path.string() + "' not found or unreadable");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  decode_checkpoint(bytes, params);
}

std::string run_manifest(const RunConfig& config, const ParameterSet& params) {
  nlohmann::ordered_json j;
  j["format"] = "ttpp-run";
  j["checkpoint_version"] = kCheckpointVersion;
  j["method"] = config.model.method_name();
  j["seed"] = config.train.seed;
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();
  const std::string text = config_to_text(config);
  std::size_t start = 0;
  while (start < text.size()) {
    const auto end = text.find('\n', start);
    const auto line = text.substr(start, end - start);
    const auto eq = line.find(" = ");
    settings[line.substr(0, eq)] = line.substr(eq + 3);
    start = end + 1;
  }
  j["config"] = settings;
  nlohmann::ordered_json plist = nlohmann::ordered_json::array();
  for (const auto& p : params.items()) plist.push_back({{"name", p.name}, {"shape", p.value.shape()}});
  j["parameters"] = plist;
  j["parameter_count"] = params.count();
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(params.checksum()));
  j["checksum"] = hex;
  return j.dump(2) + "\n";
}

}  // namespace ttpp
