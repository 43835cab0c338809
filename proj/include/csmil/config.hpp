#pragma once

#include <string>
#include <vector>

#include "csmil/clustering.hpp"
#include "csmil/datamodel.hpp"
#include "csmil/jsonx.hpp"
#include "csmil/optim.hpp"

namespace csmil {

// One JSON document drives every subcommand. Built-in defaults, overlaid by
// --config FILE, overlaid by repeated --set key.path=value. Schema tag:
// "csmil-config/1".
Json default_config();

// Deep merge: objects merge recursively, everything else is replaced.
void merge_config(Json& base, const Json& overlay);

// "a.b.c=value"; the value is parsed as JSON when possible, else kept as a
// string.
void apply_set(Json& cfg, const std::string& assignment);

// Rejects unknown schema tags.
void validate_config(const Json& cfg);

SynthConfig synth_from_config(const Json& cfg);
TrainConfig train_from_config(const Json& cfg);
KmeansOptions kmeans_from_config(const Json& cfg);

}  // namespace csmil
