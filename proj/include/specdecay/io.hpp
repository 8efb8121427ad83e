#pragma once

// File plumbing for experiment runs: CSV emission and parsing, content
// hashing, output manifests, and a directory lock.

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fcntl.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/stat.h>
#include <unistd.h>
#include <utility>
#include <vector>

#include "specdecay/common.hpp"
#include "specdecay/spectra.hpp"

namespace specdecay {

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) {
    throw std::runtime_error("read failed: " + path.string());
  }
  return buf.str();
}

// 64-bit FNV-1a over raw bytes, reported as 16 hex digits.
inline std::uint64_t fnv1a(const std::string& bytes,
                           std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string to_hex16(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xfull];
    h >>= 4;
  }
  return s;
}

inline std::string hash_bytes(const std::string& bytes) {
  return to_hex16(fnv1a(bytes));
}

inline std::string hash_file(const std::filesystem::path& path) {
  return hash_bytes(read_text_file(path));
}

// --- CSV schemas ---------------------------------------------------------
// Spectra:  index,sigma       one row per value, 1-based index
// Sweeps:   level,index,sigma rows grouped by ascending level
// Rho:      n,rho             log-spaced orders

inline std::string spectrum_csv(const Spectrum& s) {
  std::string out = "index,sigma\n";
  for (int i = 0; i < s.length(); ++i) {
    out += std::to_string(i + 1);
    out += ',';
    out += fmt_g17(s.values[i]);
    out += '\n';
  }
  return out;
}

inline void emit_spectrum_csv(const Spectrum& s,
                              const std::filesystem::path& path) {
  write_text_file(path, spectrum_csv(s));
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

// strtod instead of stod: subnormal values underflow with ERANGE, which
// stod turns into an exception even though the value is representable.
inline double parse_double_field(const std::string& field,
                                 const std::filesystem::path& path) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  const bool consumed = end == field.c_str() + field.size() && !field.empty();
  const bool overflow = errno == ERANGE && std::abs(v) == HUGE_VAL;
  if (!consumed || overflow) {
    throw std::runtime_error("malformed numeric field '" + field + "' in " +
                             path.string());
  }
  return v;
}

inline std::vector<std::vector<double>> parse_csv_rows(
    const std::filesystem::path& path, const std::string& expected_header,
    std::size_t columns) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) ||
      (line != expected_header && line != expected_header + "\r")) {
    throw std::runtime_error("expected header '" + expected_header + "' in " +
                             path.string());
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) {
      throw std::runtime_error("expected " + std::to_string(columns) +
                               " columns in " + path.string() + ", got " +
                               std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_double_field(f, path));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline std::vector<double> parse_spectrum_csv(
    const std::filesystem::path& path) {
  const auto rows = detail::parse_csv_rows(path, "index,sigma", 2);
  std::vector<double> values;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r][0] != static_cast<double>(r + 1)) {
      throw std::runtime_error("non-consecutive index at row " +
                               std::to_string(r + 1) + " in " + path.string());
    }
    values.push_back(rows[r][1]);
  }
  return values;
}

inline std::string sweep_csv(const std::vector<double>& levels,
                             const std::vector<Spectrum>& spectra) {
  if (levels.size() != spectra.size()) {
    throw std::invalid_argument("sweep_csv: one spectrum per level");
  }
  std::string out = "level,index,sigma\n";
  for (std::size_t l = 0; l < levels.size(); ++l) {
    for (int i = 0; i < spectra[l].length(); ++i) {
      out += fmt_g17(levels[l]);
      out += ',';
      out += std::to_string(i + 1);
      out += ',';
      out += fmt_g17(spectra[l].values[i]);
      out += '\n';
    }
  }
  return out;
}

struct SweepData {
  std::vector<double> levels;
  std::vector<std::vector<double>> values;  // one block per level
};

inline SweepData parse_sweep_csv(const std::filesystem::path& path) {
  const auto rows = detail::parse_csv_rows(path, "level,index,sigma", 3);
  SweepData data;
  for (const auto& row : rows) {
    if (data.levels.empty() || row[0] != data.levels.back()) {
      data.levels.push_back(row[0]);
      data.values.emplace_back();
    }
    if (row[1] != static_cast<double>(data.values.back().size() + 1)) {
      throw std::runtime_error("non-consecutive index within level in " +
                               path.string());
    }
    data.values.back().push_back(row[2]);
  }
  return data;
}

inline std::string rho_csv(const std::vector<double>& ns,
                           const std::vector<double>& rhos) {
  if (ns.size() != rhos.size()) {
    throw std::invalid_argument("rho_csv: need one rho per order");
  }
  std::string out = "n,rho\n";
  for (std::size_t i = 0; i < ns.size(); ++i) {
    out += fmt_g17(ns[i]);
    out += ',';
    out += fmt_g17(rhos[i]);
    out += '\n';
  }
  return out;
}

inline std::vector<std::pair<double, double>> parse_rho_csv(
    const std::filesystem::path& path) {
  const auto rows = detail::parse_csv_rows(path, "n,rho", 2);
  std::vector<std::pair<double, double>> curve;
  for (const auto& row : rows) curve.emplace_back(row[0], row[1]);
  return curve;
}

// --- Manifest -------------------------------------------------------------

struct ManifestEntry {
  std::string file;  // relative to the run directory
  std::string hash;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
};

// Re-hashes every listed file; returns the first mismatching name, or an
// empty string when everything verifies.
inline std::string manifest_mismatch(const Manifest& m,
                                     const std::filesystem::path& dir) {
  for (const auto& e : m.entries) {
    const auto p = dir / e.file;
    if (!std::filesystem::exists(p)) return e.file;
    if (hash_file(p) != e.hash) return e.file;
  }
  return std::string();
}

// --- Directory lock -------------------------------------------------------

// Guards a run directory against concurrent writers. Creation is atomic
// (O_CREAT | O_EXCL); the destructor removes the file.
class LockFile {
 public:
  explicit LockFile(const std::filesystem::path& dir)
      : path_(dir / ".lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST) {
        throw std::runtime_error(
            "lock held on " + dir.string() +
            "; another run is writing there (remove .lock if stale)");
      }
      throw std::runtime_error("cannot create lock in " + dir.string() +
                               ": " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
  }

  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

  ~LockFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
};

}  // namespace specdecay
