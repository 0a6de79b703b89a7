#include "latlab/stanley.hpp"

#include <cmath>

namespace latlab::ctrl {

double stanley_steer(const EgoState& ego, const track::ReferencePath& path, double k_gain,
                     const plant::PlantParams& params, double v_soft) {
    Vec2 front(ego.x + params.a_front * std::cos(ego.theta),
               ego.y + params.a_front * std::sin(ego.theta));
    track::FrenetCoord f = track::frenet_coordinate(path, front);

    Vec2 ref_pos;
    double ref_heading;
    track::pose_at(path, f.s, ref_pos, ref_heading);

    double psi = wrap_angle(ref_heading - ego.theta);
    // left-positive d steers right: the cross-track term opposes the offset
    double e_ct = -f.d;
    double delta = psi + std::atan(k_gain * e_ct / (ego.v + v_soft));
    return std::clamp(delta, -params.max_steer, params.max_steer);
}

}  // namespace latlab::ctrl
