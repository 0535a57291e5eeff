#ifndef VIBNN_PARAMS_IO_HPP
#define VIBNN_PARAMS_IO_HPP

#include <string>

#include "vibnn/bnn.hpp"

namespace vibnn::io {

// "VIBP" file: little-endian header (magic, version u16, layer_count u16,
// per-layer rows u32 / cols u32), then 32-bit float payload: all mu weight
// tensors, all rho weight tensors, all bias mu vectors, all bias rho
// vectors; layer-major, row-major.
void write_params(const std::string& path, const bnn::VariationalParams& params);
bnn::VariationalParams read_params(const std::string& path);

// "VIBQ" file: same header plus the fixed-point spec (total_bits u8,
// frac_bits u8); payload is raw two's-complement values, mu then sigma,
// ceil(total_bits/8) bytes each, little-endian.
void write_quant(const std::string& path, const bnn::QuantizedParams& params);
bnn::QuantizedParams read_quant(const std::string& path);

inline constexpr uint16_t kParamsFileVersion = 1;

}  // namespace vibnn::io

#endif
