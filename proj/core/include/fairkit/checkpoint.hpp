#pragma once

#include <string>

#include "fairkit/net.hpp"

namespace fairkit {

// Versioned little-endian binary parameter file.
//
// Layout: magic "FKNT", version u32, layer count u32, input width u64, then
// per layer: kind u32, in/out widths u64, embed_dim u32, category-count list
// (u32 count + i32 each), slope f64, sigma f64, weight dims u64 x2 + row-major
// f64 payload, bias count u64 + f64 payload. Doubles are written bit-exactly,
// so save/load round-trips preserve every parameter.
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path);

}  // namespace fairkit
