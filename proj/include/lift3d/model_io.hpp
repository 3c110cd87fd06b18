#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <vector>

#include "lift3d/error.hpp"
#include "lift3d/tcn.hpp"

namespace lift3d {

// Model file layout (little-endian):
//   bytes 0..3   magic "L3DM"
//   bytes 4..7   u32 format version (1)
//   bytes 8..15  u64 header length in bytes
//   header       JSON: config, trained_epochs, tensor manifest (name, shape,
//                param/batchnorm flags) in payload order
//   payload      all tensors' values concatenated as f64
inline constexpr char kModelMagic[4] = {'L', '3', 'D', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

namespace detail {
inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline void put_f64(std::ostream& os, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64(os, bits);
}
inline double get_f64(std::istream& is) {
  const std::uint64_t bits = get_u64(is);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}
}  // namespace detail

inline void save_model(const TcnModel& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  require(os.good(), errc::io_error, "cannot open '" + path.string() + "' for writing");

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& s : model.slots()) {
    manifest.push_back({{"name", s.name},
                        {"shape", s.tensor.shape},
                        {"param", s.is_param},
                        {"batchnorm", s.is_batchnorm}});
  }
  nlohmann::json header = {{"config", model.config().to_json()},
                           {"trained_epochs", model.trained_epochs()},
                           {"tensors", manifest}};
  const std::string hs = header.dump();

  os.write(kModelMagic, 4);
  detail::put_u32(os, kModelVersion);
  detail::put_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& s : model.slots())
    for (double v : s.tensor.values) detail::put_f64(os, v);
  os.flush();
  require(os.good(), errc::io_error, "write failed for '" + path.string() + "'");
}

inline TcnModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), errc::io_error, "cannot open model file '" + path.string() + "'");

  char magic[4];
  is.read(magic, 4);
  require(is.good() && std::memcmp(magic, kModelMagic, 4) == 0, errc::format_error,
          "'" + path.string() + "' is not a model file (bad magic)");
  const std::uint32_t version = detail::get_u32(is);
  require(is.good() && version == kModelVersion, errc::format_error,
          "unsupported model format version " + std::to_string(version));
  const std::uint64_t hlen = detail::get_u64(is);
  require(is.good() && hlen > 0 && hlen < (1ULL << 30), errc::format_error,
          "corrupt model header length");
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  require(is.good(), errc::format_error, "truncated model header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::format_error, std::string("bad model header JSON: ") + e.what());
  }

  TcnModel model(TcnConfig::from_json(header.at("config")), 0);
  model.set_trained_epochs(header.value("trained_epochs", 0));

  const auto& manifest = header.at("tensors");
  require(manifest.is_array() && manifest.size() == model.slots().size(),
          errc::format_error, "model manifest does not match the architecture");
  for (std::size_t i = 0; i < model.slots().size(); ++i) {
    auto& slot = model.slots()[i];
    const auto& entry = manifest[i];
    require(entry.at("name").get<std::string>() == slot.name, errc::format_error,
            "manifest tensor order mismatch at '" + slot.name + "'");
    const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
    require(shape == slot.tensor.shape, errc::format_error,
            "tensor '" + slot.name + "' has unexpected shape in file");
    for (auto& v : slot.tensor.values) {
      v = detail::get_f64(is);
      require(!is.fail(), errc::format_error,
              "truncated payload while reading tensor '" + slot.name + "'");
    }
  }
  // Exactly at end of payload: one more read must hit EOF.
  char extra;
  is.read(&extra, 1);
  require(is.eof(), errc::format_error, "trailing bytes after model payload");
  return model;
}

}  // namespace lift3d
