#pragma once

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "resdyn/core/check.hpp"

namespace resdyn::bench {

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  RESDYN_REQUIRE(in.good(), "sha256: cannot open " << path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  RESDYN_REQUIRE(ctx != nullptr, "sha256: context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.good()) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(got));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex(2 * len, '0');
  for (unsigned int i = 0; i < len; ++i)
    std::snprintf(hex.data() + 2 * i, 3, "%02x", digest[i]);
  return hex;
}

/// Wall-time sidecars carry nondeterministic content by design; everything
/// else in a run directory is checksummed so re-runs can be compared.
inline bool is_timing_sidecar(const std::string& relative_path) {
  return relative_path.find(".timing.") != std::string::npos;
}

/// Write `dir`/manifest.json describing a command's outputs: the effective
/// config, the seed list, and a checksum per deterministic file.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const nlohmann::json& config_echo,
                           const std::vector<std::uint64_t>& seeds,
                           std::vector<std::string> relative_files) {
  std::sort(relative_files.begin(), relative_files.end());
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config_echo;
  j["seeds"] = seeds;
  nlohmann::json files = nlohmann::json::array();
  nlohmann::json timing = nlohmann::json::array();
  for (const std::string& rel : relative_files) {
    if (is_timing_sidecar(rel)) {
      timing.push_back(rel);
      continue;
    }
    const std::filesystem::path p = dir / rel;
    nlohmann::json entry;
    entry["path"] = rel;
    entry["bytes"] = static_cast<std::uint64_t>(std::filesystem::file_size(p));
    entry["sha256"] = sha256_file(p);
    files.push_back(entry);
  }
  j["files"] = files;
  j["timing_files"] = timing;
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  RESDYN_REQUIRE(out.good(), "manifest: cannot open " << (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
  RESDYN_REQUIRE(out.good(), "manifest: write failure");
}

}  // namespace resdyn::bench
