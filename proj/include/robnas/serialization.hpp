#pragma once

#include "robnas/kernels.hpp"
#include "robnas/netcore.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace robnas::serialization {

// Binary layout (all integers little-endian u32):
//   "RBNS" | version | kind | header_len | header (JSON bytes)
//   | array_count | { rows | cols | rows*cols f64 LE, row-major }*
inline constexpr std::uint32_t kFormatVersion = 1;

enum class ContainerKind : std::uint32_t { weights = 1, kernels = 2 };

struct Container {
    ContainerKind kind = ContainerKind::weights;
    std::string header;
    std::vector<Mat> arrays;
};

std::string encode(const Container& c);
Container decode(std::string_view data);

std::string encode_weights(const netcore::NetworkSpec& spec, const netcore::WeightSet& weights);
std::pair<netcore::NetworkSpec, netcore::WeightSet> decode_weights(std::string_view data);

std::string encode_kernels(const kernels::KernelSet& ks);
kernels::KernelSet decode_kernels(std::string_view data);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view data);

}  // namespace robnas::serialization
