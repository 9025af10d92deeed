#pragma once

#include "tgf/model.hpp"
#include "tgf/scene.hpp"

#include <string>

namespace tgf {

// Static SVG: lanes in gray, observed AoI track in blue, ground-truth future
// in green, predicted trajectories in orange with endpoint markers scaled by
// probability. Throws when ids mismatch. Output bytes are deterministic.
void plot_scene(const NormalizedScene& scene, const ForecastOutput& prediction,
                const std::string& out_path);

}  // namespace tgf
