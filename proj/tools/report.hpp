#pragma once

// Output-directory plumbing for the command-line front end: a single writer
// that records every file it emits, SHA-256 checksums and the manifest.

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "ahflow/error.hpp"

namespace ahflow::cli {

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(fmt::format("cannot read {}", path.string()));
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// All files of one run go through this writer, which remembers their
/// checksums for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw Error(fmt::format("cannot create output directory {}: {}", root_.string(), ec.message()));
    const auto probe = root_ / ".write-probe";
    {
      std::ofstream os(probe);
      if (!os) throw Error(fmt::format("output directory {} is not writable", root_.string()));
    }
    std::filesystem::remove(probe, ec);
  }

  const std::filesystem::path& root() const noexcept { return root_; }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream os(root_ / name, std::ios::binary);
    os << bytes;
    if (!os) throw Error(fmt::format("failed writing {}", (root_ / name).string()));
    files_[name] = sha256_hex(bytes);
  }

  const std::map<std::string, std::string>& files() const noexcept { return files_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> files_;
};

struct ManifestInput {
  std::string label;
  std::string path;
  std::string sha256;
};

/// Plain-text manifest: versions, inputs, the full effective config with
/// defaults marked, and the checksum of every emitted file.
inline std::string format_manifest(const std::string& command, unsigned long long seed, const std::string& config_hash,
                                   const std::vector<ManifestInput>& inputs, const std::string& effective_config,
                                   const std::map<std::string, std::string>& files) {
  std::string out = "# ahflow run manifest\n";
  out += fmt::format("ahflow_version = {}\n", AHFLOW_VERSION);
  out += fmt::format("fmt_version = {}\n", FMT_VERSION);
  out += fmt::format("eigen_version = {}.{}.{}\n", EIGEN_WORLD_VERSION, EIGEN_MAJOR_VERSION, EIGEN_MINOR_VERSION);
  out += fmt::format("command = {}\nseed = {}\nconfig_sha256 = {}\n", command, seed, config_hash);
  out += "\n[inputs]\n";
  for (const auto& in : inputs) out += fmt::format("{} = {} sha256:{}\n", in.label, in.path, in.sha256);
  out += "\n[config]\n";
  out += effective_config;
  out += "\n[files]\n";
  for (const auto& [name, sum] : files) out += fmt::format("{} sha256:{}\n", name, sum);
  return out;
}

/// Gnuplot script over the emitted CSVs. Each entry is (csv, x column,
/// y column, log-scale y, title).
struct PlotSeries {
  std::string csv;
  int x = 1, y = 2;
  bool log_y = false;
  std::string title;
};

inline std::string format_plot_script(const std::vector<PlotSeries>& series) {
  std::string out =
      "# gnuplot script generated next to the CSVs it reads; run: gnuplot plot.gp\n"
      "set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n"
      "set terminal pngcairo size 900,600\n";
  int k = 0;
  for (const auto& s : series) {
    out += fmt::format("set output 'plot_{}.png'\n", k++);
    out += s.log_y ? "set logscale y\n" : "unset logscale y\n";
    out += fmt::format("set title '{}'\nplot '{}' using {}:{} with linespoints\n", s.title, s.csv, s.x, s.y);
  }
  return out;
}

}  // namespace ahflow::cli
