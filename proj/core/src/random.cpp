#include "comm_arena/random.hpp"

#include <sstream>

#include "comm_arena/error.hpp"

namespace comm_arena {

double SeedStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t SeedStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw InvalidInput("uniform_index: n must be positive");
  // Lemire's multiply-shift with rejection; unbiased.
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const unsigned __int128 product =
        static_cast<unsigned __int128>(engine_()) * n;
    if (static_cast<std::uint64_t>(product) >= threshold) {
      return static_cast<std::uint64_t>(product >> 64);
    }
  }
}

std::string SeedStream::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

SeedStream SeedStream::deserialize(const std::string& state) {
  SeedStream stream;
  std::istringstream in(state);
  in >> stream.engine_;
  if (in.fail()) throw InvalidInput("SeedStream: malformed engine state");
  return stream;
}

}  // namespace comm_arena
