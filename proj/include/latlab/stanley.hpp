#pragma once

#include "latlab/plant.hpp"
#include "latlab/track.hpp"

namespace latlab::ctrl {

/// Stanley control law evaluated at the front axle: heading error plus
/// arctan(k * e_ct / v), clamped to the steering bound. A small softening
/// speed guards the division at standstill.
double stanley_steer(const EgoState& ego, const track::ReferencePath& path, double k_gain,
                     const plant::PlantParams& params, double v_soft = 0.1);

}  // namespace latlab::ctrl
