#include "latlab/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "latlab/rng.hpp"

namespace latlab::track {

namespace {

std::vector<Vec2> drop_duplicate_points(const std::vector<Vec2>& raw) {
    std::vector<Vec2> out;
    out.reserve(raw.size());
    for (const Vec2& p : raw)
        if (out.empty() || (p - out.back()).norm() > 1e-12) out.push_back(p);
    return out;
}

std::vector<Vec2> resample(const std::vector<Vec2>& raw_in, bool closed, double spacing) {
    std::vector<Vec2> raw = drop_duplicate_points(raw_in);
    if (closed && raw.size() > 1 && (raw.front() - raw.back()).norm() <= 1e-12) raw.pop_back();
    if (raw.size() < 2) throw TrackError("track: fewer than 2 distinct points");

    std::size_t nseg = closed ? raw.size() : raw.size() - 1;
    std::vector<double> cum(nseg + 1, 0.0);
    for (std::size_t i = 0; i < nseg; ++i)
        cum[i + 1] = cum[i] + (raw[(i + 1) % raw.size()] - raw[i]).norm();
    double total = cum[nseg];
    if (total <= 0.0) throw TrackError("track: zero length");

    // already near the target spacing: keep the original vertices, which sit
    // on the true geometry (interpolated points would sit on chords and bias
    // the curvature estimate)
    {
        double lo = total, hi = 0.0;
        for (std::size_t i = 0; i < nseg; ++i) {
            double len = cum[i + 1] - cum[i];
            lo = std::min(lo, len);
            hi = std::max(hi, len);
        }
        if (lo >= 0.5 * spacing && hi <= 1.5 * spacing) return raw;
    }

    std::size_t n = std::max<std::size_t>(closed ? 3 : 2, static_cast<std::size_t>(std::llround(total / spacing)));
    double h = total / static_cast<double>(n);
    std::size_t count = closed ? n : n + 1;

    std::vector<Vec2> out;
    out.reserve(count);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < count; ++k) {
        double s = std::min(h * static_cast<double>(k), total);
        while (seg + 1 < nseg && cum[seg + 1] < s) ++seg;
        double seg_len = cum[seg + 1] - cum[seg];
        double t = seg_len > 0.0 ? (s - cum[seg]) / seg_len : 0.0;
        const Vec2& a = raw[seg];
        const Vec2& b = raw[(seg + 1) % raw.size()];
        out.push_back(a + t * (b - a));
    }
    return out;
}

double menger_curvature(const Vec2& a, const Vec2& b, const Vec2& c) {
    double lab = (b - a).norm();
    double lbc = (c - b).norm();
    double lca = (a - c).norm();
    if (lab < 1e-12 || lbc < 1e-12 || lca < 1e-12) return 0.0;
    double cross2 = (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
    return 2.0 * cross2 / (lab * lbc * lca);
}

}  // namespace

ReferencePath build_path(const std::vector<Vec2>& raw, bool closed, double spacing, double velocity) {
    for (const Vec2& p : raw)
        if (!p.allFinite()) throw TrackError("track: non-finite coordinate");

    ReferencePath path;
    path.closed = closed;
    path.waypoints = resample(raw, closed, spacing);
    std::size_t n = path.waypoints.size();
    const auto& w = path.waypoints;

    path.cumulative_distance.resize(n);
    path.cumulative_distance[0] = 0.0;
    for (std::size_t i = 1; i < n; ++i)
        path.cumulative_distance[i] = path.cumulative_distance[i - 1] + (w[i] - w[i - 1]).norm();
    path.total_length = path.cumulative_distance[n - 1];
    if (closed) path.total_length += (w[0] - w[n - 1]).norm();

    path.headings.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 dir;
        if (closed) {
            dir = w[(i + 1) % n] - w[(i + n - 1) % n];
        } else if (i == 0) {
            dir = w[1] - w[0];
        } else if (i == n - 1) {
            dir = w[n - 1] - w[n - 2];
        } else {
            dir = w[i + 1] - w[i - 1];
        }
        path.headings[i] = std::atan2(dir.y(), dir.x());
    }

    path.curvatures.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t ip, in;
        if (closed) {
            ip = (i + n - 1) % n;
            in = (i + 1) % n;
        } else {
            // one-sided copies at the ends
            std::size_t j = std::clamp<std::size_t>(i, 1, n - 2);
            ip = j - 1;
            in = j + 1;
            path.curvatures[i] = menger_curvature(w[ip], w[j], w[in]);
            continue;
        }
        path.curvatures[i] = menger_curvature(w[ip], w[i], w[in]);
    }

    path.velocities.assign(n, velocity);
    return path;
}

ReferencePath load_track_csv(const std::string& file) {
    std::ifstream f(file);
    if (!f) throw TrackError("track: cannot open " + file);
    std::string line;
    std::vector<Vec2> pts;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {  // header x,y
            first = false;
            if (line.find("x") != std::string::npos && line.find("y") != std::string::npos) continue;
        }
        std::istringstream ss(line);
        std::string sx, sy;
        if (!std::getline(ss, sx, ',') || !std::getline(ss, sy, ','))
            throw TrackError("track: malformed row '" + line + "'");
        char* end = nullptr;
        double x = std::strtod(sx.c_str(), &end);
        double y = std::strtod(sy.c_str(), &end);
        if (!std::isfinite(x) || !std::isfinite(y))
            throw TrackError("track: non-finite coordinate in '" + line + "'");
        pts.emplace_back(x, y);
    }
    if (pts.size() < 2) throw TrackError("track: fewer than 2 points in " + file);
    bool closed = (pts.front() - pts.back()).norm() < 1.0;
    return build_path(pts, closed);
}

namespace {

std::vector<Vec2> arc(const Vec2& center, double r, double a0, double a1, double step) {
    std::vector<Vec2> pts;
    int n = std::max(2, static_cast<int>(std::ceil(std::abs(a1 - a0) * r / step)));
    for (int i = 0; i <= n; ++i) {
        double a = a0 + (a1 - a0) * static_cast<double>(i) / n;
        pts.emplace_back(center.x() + r * std::cos(a), center.y() + r * std::sin(a));
    }
    return pts;
}

void append(std::vector<Vec2>& dst, const std::vector<Vec2>& src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

constexpr double kFineStep = 0.25;  // raw sampling before the 1 m resample

void check_feasible(const ReferencePath& p, double kappa_limit = 0.5) {
    double kmax = 0.0;
    for (double k : p.curvatures) kmax = std::max(kmax, std::abs(k));
    if (kmax > kappa_limit)
        throw FeasibilityError("track: max curvature " + std::to_string(kmax) +
                               " exceeds feasible steering limit " + std::to_string(kappa_limit));
}

}  // namespace

ReferencePath generate_straight(double length, double spacing) {
    if (length < 2.0) throw TrackError("straight: length too small");
    std::vector<Vec2> pts = {{0.0, 0.0}, {length, 0.0}};
    return build_path(pts, false, spacing);
}

ReferencePath generate_oval(double r, double straight, double spacing) {
    if (r <= 0.0 || straight < 0.0) throw TrackError("oval: bad params");
    std::vector<Vec2> pts;
    pts.emplace_back(0.0, 0.0);
    pts.emplace_back(straight, 0.0);
    append(pts, arc({straight, r}, r, -M_PI / 2.0, M_PI / 2.0, kFineStep));
    pts.emplace_back(0.0, 2.0 * r);
    append(pts, arc({0.0, r}, r, M_PI / 2.0, 3.0 * M_PI / 2.0, kFineStep));
    ReferencePath p = build_path(pts, true, spacing);
    check_feasible(p);
    return p;
}

ReferencePath generate_figure_eight(double r, double spacing) {
    if (r <= 4.0) throw TrackError("figure_eight: radius too small");
    std::vector<Vec2> pts;
    append(pts, arc({r, 0.0}, r, M_PI, 3.0 * M_PI, kFineStep));     // right lobe, CCW
    append(pts, arc({-r, 0.0}, r, 0.0, -2.0 * M_PI, kFineStep));    // left lobe, CW
    ReferencePath p = build_path(pts, true, spacing);
    check_feasible(p);
    return p;
}

ReferencePath generate_chicane(double r, double straight, double amplitude, int cycles, double spacing) {
    if (r <= 0.0 || straight <= 0.0 || cycles < 1) throw TrackError("chicane: bad params");
    // stadium with sine wiggles on both straights; the sin^2 window zeroes
    // offset and slope at the junctions
    std::vector<Vec2> pts;
    int n = static_cast<int>(straight / kFineStep);
    for (int i = 0; i <= n; ++i) {
        double x = straight * static_cast<double>(i) / n;
        double win = std::sin(M_PI * x / straight);
        double y = amplitude * win * win * std::sin(2.0 * M_PI * cycles * x / straight);
        pts.emplace_back(x, y);
    }
    append(pts, arc({straight, r}, r, -M_PI / 2.0, M_PI / 2.0, kFineStep));
    for (int i = 0; i <= n; ++i) {
        double x = straight - straight * static_cast<double>(i) / n;
        double win = std::sin(M_PI * x / straight);
        double y = 2.0 * r - amplitude * win * win * std::sin(2.0 * M_PI * cycles * x / straight);
        pts.emplace_back(x, y);
    }
    append(pts, arc({0.0, r}, r, M_PI / 2.0, 3.0 * M_PI / 2.0, kFineStep));
    ReferencePath p = build_path(pts, true, spacing);
    check_feasible(p);
    return p;
}

ReferencePath generate_random_circuit(std::uint64_t seed, double radius, double spacing) {
    if (radius < 20.0) throw TrackError("random_circuit: radius too small");
    Rng rng(seed);
    // low-harmonic radial perturbation keeps curvature bounded
    struct Harmonic {
        int k;
        double a, phi;
    };
    std::vector<Harmonic> hs;
    for (int k = 2; k <= 4; ++k)
        hs.push_back({k, rng.uniform(0.03, 0.10) / k, rng.uniform(0.0, 2.0 * M_PI)});
    std::vector<Vec2> pts;
    int n = static_cast<int>(2.0 * M_PI * radius / kFineStep);
    for (int i = 0; i < n; ++i) {
        double phi = 2.0 * M_PI * static_cast<double>(i) / n;
        double r = radius;
        for (const auto& h : hs) r += radius * h.a * std::cos(h.k * phi + h.phi);
        pts.emplace_back(r * std::cos(phi), r * std::sin(phi));
    }
    ReferencePath p = build_path(pts, true, spacing);
    check_feasible(p);
    return p;
}

namespace {

std::map<std::string, double> parse_kv(const std::string& s) {
    std::map<std::string, double> kv;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) throw TrackError("generator spec: expected key=value, got '" + item + "'");
        kv[item.substr(0, eq)] = std::strtod(item.c_str() + eq + 1, nullptr);
    }
    return kv;
}

double get_or(const std::map<std::string, double>& kv, const std::string& k, double def) {
    auto it = kv.find(k);
    return it == kv.end() ? def : it->second;
}

}  // namespace

ReferencePath load_track(const std::string& source) {
    if (std::ifstream probe(source); probe.good()) return load_track_csv(source);

    std::string name = source;
    std::map<std::string, double> kv;
    if (auto colon = source.find(':'); colon != std::string::npos) {
        name = source.substr(0, colon);
        kv = parse_kv(source.substr(colon + 1));
    }
    if (name == "oval") return generate_oval(get_or(kv, "r", 30.0), get_or(kv, "straight", 200.0));
    if (name == "figure_eight") return generate_figure_eight(get_or(kv, "r", 40.0));
    if (name == "chicane")
        return generate_chicane(get_or(kv, "r", 30.0), get_or(kv, "straight", 250.0),
                                get_or(kv, "amp", 3.0), static_cast<int>(get_or(kv, "cycles", 3)));
    if (name == "random_circuit")
        return generate_random_circuit(static_cast<std::uint64_t>(get_or(kv, "seed", 1)),
                                       get_or(kv, "radius", 70.0));
    if (name == "straight") return generate_straight(get_or(kv, "length", 2000.0));
    throw TrackError("track: unknown source '" + source + "'");
}

FrenetCoord frenet_coordinate(const ReferencePath& path, const Vec2& p) {
    if (!p.allFinite()) throw TrackError("frenet: non-finite query point");
    std::size_t n = path.size();
    std::size_t nseg = path.closed ? n : n - 1;

    double best_d2 = std::numeric_limits<double>::infinity();
    FrenetCoord best;
    for (std::size_t i = 0; i < nseg; ++i) {
        const Vec2& a = path.waypoints[i];
        const Vec2& b = path.waypoints[(i + 1) % n];
        Vec2 ab = b - a;
        double len2 = ab.squaredNorm();
        if (len2 <= 0.0) continue;
        double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
        Vec2 foot = a + t * ab;
        double d2 = (p - foot).squaredNorm();
        if (d2 < best_d2 - 1e-15) {
            best_d2 = d2;
            double cross = ab.x() * (p.y() - a.y()) - ab.y() * (p.x() - a.x());
            best.s = path.cumulative_distance[i] + t * std::sqrt(len2);
            best.d = std::copysign(std::sqrt(d2), cross);
            if (cross == 0.0) best.d = 0.0;
        }
    }
    if (path.closed && best.s >= path.total_length) best.s -= path.total_length;
    return best;
}

std::optional<DesiredWaypoint> desired_waypoint(const ReferencePath& path, const EgoState& ego) {
    FrenetCoord f = frenet_coordinate(path, Vec2(ego.x, ego.y));
    const auto& cum = path.cumulative_distance;
    auto it = std::upper_bound(cum.begin(), cum.end(), f.s);
    std::size_t idx;
    if (it == cum.end()) {
        if (!path.closed) return std::nullopt;  // open track exhausted
        idx = 0;
    } else {
        idx = static_cast<std::size_t>(it - cum.begin());
    }
    DesiredWaypoint wp;
    wp.position = path.waypoints[idx];
    wp.heading = path.headings[idx];
    wp.velocity = path.velocities[idx];
    wp.s_query = f.s;
    wp.index = static_cast<int>(idx);
    return wp;
}

std::vector<SegmentClass> classify_segments(const ReferencePath& path, double threshold) {
    std::vector<SegmentClass> out(path.size());
    for (std::size_t i = 0; i < path.size(); ++i)
        out[i] = classify_curvature(path.curvatures[i], threshold);
    return out;
}

void pose_at(const ReferencePath& path, double s, Vec2& position, double& heading) {
    std::size_t n = path.size();
    if (path.closed) s = std::fmod(std::fmod(s, path.total_length) + path.total_length, path.total_length);
    s = std::clamp(s, 0.0, path.total_length);
    const auto& cum = path.cumulative_distance;
    std::size_t i = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), s) - cum.begin());
    i = (i == 0) ? 0 : i - 1;
    if (!path.closed && i >= n - 1) i = n - 2;
    const Vec2& a = path.waypoints[i];
    const Vec2& b = path.waypoints[(i + 1) % n];
    double seg = (b - a).norm();
    double t = seg > 0.0 ? (s - cum[i]) / seg : 0.0;
    position = a + std::clamp(t, 0.0, 1.0) * (b - a);
    heading = std::atan2(b.y() - a.y(), b.x() - a.x());
}

}  // namespace latlab::track
