#include "nvmag/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

struct MdDeleter {
  void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

std::string hex(const unsigned char* p, unsigned n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned i = 0; i < n; ++i) {
    out.push_back(digits[p[i] >> 4]);
    out.push_back(digits[p[i] & 15]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw NumericalError("SHA-256 initialisation failed");
  }
  void update(const char* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_.get(), data, n) != 1) throw NumericalError("SHA-256 update failed");
  }
  std::string finish() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), md.data(), &len) != 1) throw NumericalError("SHA-256 final failed");
    return hex(md.data(), len);
  }

 private:
  std::unique_ptr<EVP_MD_CTX, MdDeleter> ctx_;
};

FileDigest digest(const std::filesystem::path& path) {
  return {path.generic_string(), sha256_file(path), std::filesystem::file_size(path)};
}

json digests(const std::vector<FileDigest>& files) {
  json a = json::array();
  for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return a;
}

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Sha256 h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

void RunManifest::add_input(const std::filesystem::path& path) { inputs.push_back(digest(path)); }
// Outputs live in the run directory; record them by file name.
void RunManifest::add_output(const std::filesystem::path& path) {
  FileDigest d = digest(path);
  d.path = path.filename().string();
  outputs.push_back(d);
}

json RunManifest::to_json() const {
  return json{{"command", command},     {"argv", argv},
              {"config_path", config_path}, {"seed", seed},
              {"threads", threads},     {"tool_version", tool_version},
              {"parameters", parameters}, {"inputs", digests(inputs)},
              {"outputs", digests(outputs)}};
}

void RunManifest::write(const std::filesystem::path& dir) const {
  write_text_file(dir / "manifest.json", to_json().dump(2) + "\n");
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.argv = j.at("argv").get<std::vector<std::string>>();
    m.config_path = j.value("config_path", std::string());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.threads = j.value("threads", 1);
    m.parameters = j.value("parameters", json::object());
    for (const auto& f : j.value("inputs", json::array()))
      m.inputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                          f.at("bytes").get<std::uintmax_t>()});
    for (const auto& f : j.value("outputs", json::array()))
      m.outputs.push_back({f.at("path").get<std::string>(), f.at("sha256").get<std::string>(),
                           f.at("bytes").get<std::uintmax_t>()});
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  return m;
}

}  // namespace nvmag
