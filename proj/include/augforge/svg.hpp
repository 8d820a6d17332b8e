#pragma once

#include <string>

#include "augforge/eval.hpp"
#include "augforge/tsne.hpp"

namespace augforge {

/// 800x800 scatter of an embedding, one colour per source, with a legend.
std::string scatter_svg(const EmbeddingResult& result);

/// Accuracy-vs-N chart with exactly two polylines (fake-as-test and
/// fake-as-train).
std::string sweep_svg(const SweepResult& sweep);

}  // namespace augforge
