#include "mpnet/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include <nlohmann/json.hpp>

#include "mpnet/common.hpp"

namespace mp {

namespace {

using MdCtx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

std::string digest_hex(const unsigned char* md, unsigned len) {
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t len) {
  MdCtx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    fail(Errc::internal, "sha256 init failed");
  if (EVP_DigestUpdate(ctx.get(), data, len) != 1) fail(Errc::internal, "sha256 update failed");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned md_len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &md_len) != 1) fail(Errc::internal, "sha256 final failed");
  return digest_hex(md, md_len);
}

std::string sha256_hex(const std::string& text) { return sha256_hex(text.data(), text.size()); }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  MdCtx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    fail(Errc::internal, "sha256 init failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const std::streamsize got = in.gcount();
    if (got > 0 && EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got)) != 1)
      fail(Errc::internal, "sha256 update failed");
  }
  if (in.bad()) fail(Errc::io, "read failed: ", path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned md_len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), md, &md_len) != 1) fail(Errc::internal, "sha256 final failed");
  return digest_hex(md, md_len);
}

namespace {

std::uint64_t file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) fail(Errc::io, "cannot open: ", path);
  return static_cast<std::uint64_t>(in.tellg());
}

}  // namespace

void RunManifest::add_input(const std::string& path) {
  inputs.push_back({path, sha256_file(path), file_bytes(path)});
}

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, sha256_file(path), file_bytes(path)});
}

std::string RunManifest::to_json_text() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["elapsed_seconds"] = elapsed_seconds;
  auto art = [](const std::vector<ManifestArtifact>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& a : list)
      arr.push_back({{"path", a.path}, {"sha256", a.sha256}, {"bytes", a.bytes}});
    return arr;
  };
  j["inputs"] = art(inputs);
  j["outputs"] = art(outputs);
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, "manifest: ", e.what());
  }
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.elapsed_seconds = j.value("elapsed_seconds", 0.0);
    auto parse_list = [](const nlohmann::json& arr) {
      std::vector<ManifestArtifact> out;
      for (const auto& e : arr)
        out.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                       e.at("bytes").get<std::uint64_t>()});
      return out;
    };
    m.inputs = parse_list(j.at("inputs"));
    m.outputs = parse_list(j.at("outputs"));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::parse, "manifest: ", e.what());
  }
  return m;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::io, "cannot open for writing: ", path);
  out << to_json_text();
  if (!out) fail(Errc::io, "write failed: ", path);
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::io, "cannot open: ", path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

}  // namespace mp
