#pragma once

#include <string>

#include "aealt/downstream.hpp"
#include "aealt/factor.hpp"

namespace aealt::io {

// Versioned binary container (magic "FACM"), little-endian 64-bit floats,
// bit-exact round trip. Factor models also get a JSON sidecar at
// path + ".json" holding the FactorConfig.
void save_factor_model(const factor::FactorModel& model, const std::string& path);
factor::FactorModel load_factor_model(const std::string& path);

void save_downstream_model(const downstream::DownstreamModel& model, const std::string& path);
downstream::DownstreamModel load_downstream_model(const std::string& path);

}  // namespace aealt::io
