#include "croprl/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <fstream>

#include "croprl/errors.hpp"
#include "json.hpp"

namespace croprl {

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash missing file: " + path.string());

  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw NumericError("EVP_MD_CTX_new failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);

  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);

  std::string hex;
  hex.reserve(2 * len);
  char b[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(b, sizeof(b), "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write: " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("failed writing: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string Manifest::to_json() const {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["command"] = command;
  j["args"] = args;
  j["settings"] = settings;
  j["input_hashes"] = input_hashes;
  j["output_hashes"] = output_hashes;
  return j.dump(2) + "\n";
}

void Manifest::write(const std::filesystem::path& path) const { atomic_write_file(path, to_json()); }

}  // namespace croprl
