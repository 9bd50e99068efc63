#pragma once

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rde/path.hpp"

namespace rde {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stable digest of a JSON document: nlohmann objects are key-sorted, so the
// digest does not depend on field order in the source text.
inline std::uint64_t digest_of(const nlohmann::json& j) { return fnv1a64(j.dump()); }

inline std::string digest_hex(std::uint64_t d) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(d));
  return std::string(buf);
}

struct EnsembleMeta {
  std::string label;
  std::uint64_t seed = 0;
  std::uint64_t spec_digest = 0;
};

// A finite multiset of sample paths standing in for a probability measure on
// path space. Nonempty, all samples of one kind. Immutable by convention
// once built.
struct Ensemble {
  std::vector<Path> samples;
  EnsembleMeta meta;

  static Ensemble make(std::vector<Path> samples, EnsembleMeta meta = {}) {
    if (samples.empty()) throw std::invalid_argument("Ensemble: empty sample list");
    const PathKind kind = samples.front().kind();
    for (const Path& p : samples)
      if (p.kind() != kind) throw std::invalid_argument("Ensemble: mixed path kinds");
    return Ensemble{std::move(samples), std::move(meta)};
  }

  std::size_t size() const { return samples.size(); }
  PathKind kind() const { return samples.front().kind(); }
};

// JSON-lines layout: a header record, then one path per line.
inline void write_jsonl(std::ostream& os, const Ensemble& e) {
  nlohmann::json header{{"record", "ensemble"},
                        {"label", e.meta.label},
                        {"seed", e.meta.seed},
                        {"spec_digest", digest_hex(e.meta.spec_digest)},
                        {"size", e.samples.size()},
                        {"kind", to_string(e.kind())}};
  os << header.dump() << "\n";
  for (const Path& p : e.samples) {
    nlohmann::json j;
    to_json(j, p);
    os << j.dump() << "\n";
  }
}

inline Ensemble read_jsonl(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("ensemble file: empty");
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.value("record", "") != "ensemble")
    throw std::invalid_argument("ensemble file: missing header record");
  EnsembleMeta meta;
  meta.label = header.value("label", "");
  meta.seed = header.value("seed", std::uint64_t{0});
  meta.spec_digest = std::stoull(header.value("spec_digest", "0"), nullptr, 16);
  std::vector<Path> samples;
  const std::size_t expected = header.value("size", std::size_t{0});
  samples.reserve(expected);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    samples.push_back(path_from_json(nlohmann::json::parse(line)));
  }
  if (expected != 0 && samples.size() != expected)
    throw std::invalid_argument("ensemble file: sample count does not match header");
  return Ensemble::make(std::move(samples), std::move(meta));
}

}  // namespace rde
