#pragma once

#include "wappo/tensor.hpp"

#include <string>

namespace wappo {

// Textual parameter checkpoint. One record per parameter, sorted by name:
//
//   param <name> <rank> <dim0> <dim1> ...
//   <row-major values, space separated, %.17g>
//
// %.17g round-trips IEEE doubles exactly, so save followed by load restores
// bit-identical values.
void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

}  // namespace wappo
