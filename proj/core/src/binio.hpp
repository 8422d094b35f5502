#pragma once

// Little-endian binary record helpers shared by the dataset and checkpoint
// readers/writers. Internal to the library.

#include <cstdint>
#include <cstring>
#include <string>

namespace delusive::binio {

inline void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& b, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(b, v);
}

struct Reader {
  const std::string& b;
  std::size_t pos = 0;
  bool need(std::size_t k) const { return pos + k <= b.size(); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos++])) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
};

}  // namespace delusive::binio
