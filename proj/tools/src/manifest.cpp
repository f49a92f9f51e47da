#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>

#include "tbm/error.hpp"

namespace tbm::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::IoError, "SHA-256 unavailable");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

Manifest::Manifest(fs::path root) : root_(std::move(root)) {
  const fs::path path = root_ / "manifest.json";
  if (fs::exists(path)) {
    std::ifstream in(path);
    try {
      doc_ = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorKind::IoError, "corrupt manifest " + path.string());
    }
  }
  if (!doc_.is_object()) doc_ = nlohmann::json::object();
  doc_["format"] = "tbm-manifest-1";
  if (!doc_.contains("stages")) doc_["stages"] = nlohmann::json::object();
}

void Manifest::begin_stage(const std::string& stage, nlohmann::json config) {
  stage_ = stage;
  doc_["stages"][stage] = {{"config", std::move(config)}, {"files", nlohmann::json::object()}};
}

void Manifest::record(const fs::path& file) {
  if (stage_.empty()) throw Error(ErrorKind::InvalidArgument, "manifest: no stage begun");
  const std::string rel = fs::relative(file, root_).generic_string();
  doc_["stages"][stage_]["files"][rel] = {{"sha256", sha256_hex(file)},
                                           {"bytes", fs::file_size(file)}};
}

void Manifest::write() const {
  const fs::path path = root_ / "manifest.json";
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << doc_.dump(2) << '\n';
}

}  // namespace tbm::cli
