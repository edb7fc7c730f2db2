#pragma once

// Run manifests: what ran, with which config and seed, and the SHA-256 of
// every file it wrote. Written last, via a temporary file and a rename.

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvbn/error.hpp"

namespace cvbn::cli {

namespace fs = std::filesystem;

inline constexpr const char* kToolName = "cvbn";
#ifdef CVBN_VERSION
inline constexpr const char* kToolVersion = CVBN_VERSION;
#else
inline constexpr const char* kToolVersion = "0.0.0";
#endif

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidConfig, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Collects output files of one run and writes its manifest.
class RunRecord {
 public:
  RunRecord(fs::path dir, std::string command, std::string name, nlohmann::json config, std::uint64_t seed)
      : dir_(std::move(dir)),
        command_(std::move(command)),
        name_(std::move(name)),
        config_(std::move(config)),
        seed_(seed),
        started_(utc_now()) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  /// Writes one output file in a single pass and records it.
  void write(const std::string& file, const std::string& bytes) {
    const fs::path p = dir_ / file;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write " + p.string());
    out << bytes;
    out.close();
    if (!out) throw Error(ErrorKind::InvalidConfig, "write failed for " + p.string());
    files_.push_back({{"path", file}, {"sha256", sha256_hex(bytes)}, {"bytes", bytes.size()}});
  }

  void finish(const std::string& status) {
    nlohmann::json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    m["command"] = command_;
    m["name"] = name_;
    m["seed"] = seed_;
    m["config"] = config_;
    m["config_hash"] = sha256_hex(config_.dump());
    m["started"] = started_;
    m["finished"] = utc_now();
    m["status"] = status;
    m["files"] = files_;
    const fs::path tmp = dir_ / "manifest.json.tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      out << m.dump(2) << '\n';
      if (!out) throw Error(ErrorKind::InvalidConfig, "cannot write manifest in " + dir_.string());
    }
    fs::rename(tmp, dir_ / "manifest.json");
  }

 private:
  fs::path dir_;
  std::string command_;
  std::string name_;
  nlohmann::json config_;
  std::uint64_t seed_;
  std::string started_;
  nlohmann::json files_ = nlohmann::json::array();
};

/// Parses a manifest and checks every listed file against its hash. Any
/// problem is reported as CorruptManifest naming all offending files.
inline nlohmann::json verify_manifest(const fs::path& path) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw Error(ErrorKind::CorruptManifest, path.string() + ": " + e.what());
  }
  for (const char* key : {"tool", "version", "command", "seed", "config", "config_hash", "files"})
    if (!m.contains(key)) throw Error(ErrorKind::CorruptManifest, path.string() + ": missing '" + key + "'");
  if (!m["files"].is_array()) throw Error(ErrorKind::CorruptManifest, path.string() + ": 'files' is not a list");
  if (m["config_hash"] != sha256_hex(m["config"].dump()))
    throw Error(ErrorKind::CorruptManifest, path.string() + ": config hash mismatch");
  std::vector<std::string> bad;
  const fs::path dir = path.parent_path();
  for (const auto& f : m["files"]) {
    if (!f.contains("path") || !f.contains("sha256")) {
      bad.push_back("(malformed entry)");
      continue;
    }
    const fs::path p = dir / f["path"].get<std::string>();
    if (!fs::exists(p)) {
      bad.push_back(p.string() + " (missing)");
      continue;
    }
    if (sha256_hex(read_file(p)) != f["sha256"].get<std::string>()) bad.push_back(p.string() + " (hash mismatch)");
  }
  if (!bad.empty()) {
    std::string msg = path.string() + ":";
    for (const auto& b : bad) msg += " " + b;
    throw Error(ErrorKind::CorruptManifest, msg);
  }
  return m;
}

}  // namespace cvbn::cli
