#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "cgreid/model.hpp"

namespace cgreid {

// Versioned binary container: magic, format version, model spec echo
// (JSON), then named tensors as
//   u32 name length | name bytes | u32 rank | u64 extents | f64 data (LE).
// Parameters and batch-norm running statistics are stored; gradients and
// momentum buffers are not.
void save_checkpoint(Model& model, const std::string& path);

std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace cgreid
