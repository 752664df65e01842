#ifndef PGM_IO_HPP
#define PGM_IO_HPP

#include <cstdint>
#include <string>

namespace pgm {

/// Shortest round-trip decimal form of a double; stable across runs.
std::string format_double(double v);

/// FNV-1a 64-bit content hash, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace pgm

#endif
