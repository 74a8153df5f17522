#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "red/config.hpp"
#include "red/errors.hpp"
#include "red/params.hpp"

namespace red {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[8] = {'R', 'E', 'D', 'C', 'K', 'P', 'T', '1'};

/// Parameters plus enough state to resume: every random stream is derived
/// from (seed, episode, ...), so the pair is the whole RNG state.
struct Checkpoint {
  RunConfig config;
  std::uint64_t episode = 0;
  std::uint64_t rng_seed = 0;
  ModelParams params;
  std::optional<ModelParams> velocity;
};

namespace detail {

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IngestionError("truncated checkpoint (" + what + ")");
  return v;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, const std::string& what) {
  const auto n = get<std::uint64_t>(in, what);
  if (n > (std::uint64_t{1} << 32)) throw IngestionError("corrupt checkpoint (" + what + " length)");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw IngestionError("truncated checkpoint (" + what + ")");
  return s;
}

inline void put_groups(std::ostream& out, const ModelParams& p) {
  std::uint32_t count = 0;
  p.for_each([&](std::string_view, const Tensor&) { ++count; });
  put<std::uint32_t>(out, count);
  p.for_each([&](std::string_view name, const Tensor& t) {
    put_string(out, std::string(name));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
}

inline ModelParams get_groups(std::istream& in) {
  const auto count = get<std::uint32_t>(in, "group count");
  ModelParams p;
  std::uint32_t seen = 0;
  p.for_each([&](std::string_view name, Tensor& t) {
    if (seen++ >= count) throw IngestionError("checkpoint is missing group " + std::string(name));
    const std::string stored = get_string(in, "group name");
    if (stored != name) throw IngestionError("checkpoint group '" + stored + "' where '" + std::string(name) + "' expected");
    const auto rank = get<std::uint32_t>(in, "rank");
    if (rank > 8) throw IngestionError("corrupt checkpoint (rank of " + stored + ")");
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, "shape");
    Tensor v(shape);
    if (!in.read(reinterpret_cast<char*>(v.values().data()), static_cast<std::streamsize>(v.size() * sizeof(double)))) {
      throw IngestionError("truncated checkpoint (values of " + stored + ")");
    }
    t = std::move(v);
  });
  if (seen != count) throw IngestionError("checkpoint has unexpected extra groups");
  return p;
}

}  // namespace detail

/// "REDCKPT1", config text, episode, seed, parameter groups, optional
/// momentum velocity. All integers and doubles little-endian.
inline std::string serialize(const Checkpoint& ck) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, 8);
  detail::put_string(out, to_text(ck.config));
  detail::put<std::uint64_t>(out, ck.episode);
  detail::put<std::uint64_t>(out, ck.rng_seed);
  detail::put_groups(out, ck.params);
  detail::put<std::uint8_t>(out, ck.velocity ? 1 : 0);
  if (ck.velocity) detail::put_groups(out, *ck.velocity);
  return out.str();
}

inline Checkpoint deserialize(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IngestionError("not a RED checkpoint (bad magic)");
  }
  Checkpoint ck;
  ck.config = parse_config(detail::get_string(in, "config"));
  ck.episode = detail::get<std::uint64_t>(in, "episode");
  ck.rng_seed = detail::get<std::uint64_t>(in, "seed");
  ck.params = detail::get_groups(in);
  if (detail::get<std::uint8_t>(in, "velocity flag") != 0) ck.velocity = detail::get_groups(in);
  if (in.peek() != std::char_traits<char>::eof()) throw IngestionError("trailing bytes after checkpoint");
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const std::string bytes = serialize(ck);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IngestionError("cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IngestionError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const IngestionError& e) {
    throw IngestionError(path.string() + ": " + e.what());
  }
}

}  // namespace red
