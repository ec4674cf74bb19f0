#include "wappo/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wappo {

namespace {

constexpr double kGravity = 9.8;
constexpr double kCartMass = 1.0;
constexpr double kPoleMass = 0.1;
constexpr double kPoleHalfLength = 0.5;
constexpr double kForceMag = 10.0;
constexpr double kDt = 0.02;
constexpr double kAngleLimit = 12.0 * M_PI / 180.0;
constexpr double kPositionLimit = 2.4;

const std::string kCartpoleFamily = "cartpole";
const std::string kColorGridFamily = "colorgrid";

std::uint64_t family_salt(const std::string& family) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : family) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

const Rgb& Theme::color(const std::string& name) const {
    for (const auto& [n, c] : colors)
        if (n == name) return c;
    throw EnvError("theme has no color named " + name);
}

std::string Theme::serialize() const {
    std::ostringstream out;
    out << "seed " << seed << '\n';
    out.precision(17);
    for (const auto& [n, c] : colors) out << n << ' ' << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
    return out.str();
}

Theme Theme::deserialize(const std::string& text) {
    Theme t;
    std::istringstream in(text);
    std::string name;
    while (in >> name) {
        if (name == "seed") {
            in >> t.seed;
        } else {
            Rgb c{};
            in >> c[0] >> c[1] >> c[2];
            t.colors.emplace_back(name, c);
        }
        if (!in) throw EnvError("malformed theme text");
    }
    return t;
}

CartpoleState cartpole_dynamics(const CartpoleState& s, double force) {
    double ct = std::cos(s.theta), st = std::sin(s.theta);
    double total_mass = kCartMass + kPoleMass;
    double pml = kPoleMass * kPoleHalfLength;
    double temp = (force + pml * s.theta_dot * s.theta_dot * st) / total_mass;
    double theta_acc =
        (kGravity * st - ct * temp) /
        (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * ct * ct / total_mass));
    double x_acc = temp - pml * theta_acc * ct / total_mass;

    CartpoleState n = s;
    n.x_dot = s.x_dot + kDt * x_acc;
    n.x = s.x + kDt * n.x_dot;
    n.theta_dot = s.theta_dot + kDt * theta_acc;
    n.theta = s.theta + kDt * n.theta_dot;
    return n;
}

double cartpole_energy(const CartpoleState& s) {
    // Uniform-rod pole of length 2*half_length pivoting at the cart; matches
    // the 4/3 factor in the dynamics.
    double l = kPoleHalfLength;
    double ke = 0.5 * (kCartMass + kPoleMass) * s.x_dot * s.x_dot +
                kPoleMass * l * s.x_dot * s.theta_dot * std::cos(s.theta) +
                0.5 * (4.0 / 3.0) * kPoleMass * l * l * s.theta_dot * s.theta_dot;
    double pe = kPoleMass * kGravity * l * std::cos(s.theta);
    return ke + pe;
}

// ---------------------------------------------------------------------------
// Cartpole rendering
//
// Fixed geometry in pixel space (theme changes colors only):
//   world x in [-2.4, 2.4] maps to columns [0, 24); track band at rows 17..18;
//   cart 4.4 x 2.4 px sitting on the track; pole a 10 px segment from the
//   cart top pivot; axle a 0.9 px disk at the pivot. Coverage is computed
//   analytically per pixel so small state changes move pixel values smoothly.
// ---------------------------------------------------------------------------

namespace {

constexpr double kPxPerUnit = static_cast<double>(kObsSize) / (2.0 * kPositionLimit);
constexpr double kTrackTop = 17.0;
constexpr double kTrackBottom = 18.0;
constexpr double kCartHalfW = 2.2;
constexpr double kCartHalfH = 1.2;
constexpr double kCartCenterY = kTrackTop - kCartHalfH;
constexpr double kPoleLen = 10.0;
constexpr double kPoleHalfW = 0.7;
constexpr double kAxleRadius = 0.9;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Overlap of the unit pixel [p, p+1) with [lo, hi] along one axis.
double axis_coverage(double p, double lo, double hi) {
    double a = std::max(p, lo), b = std::min(p + 1.0, hi);
    return std::max(0.0, b - a);
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    double dx = bx - ax, dy = by - ay;
    double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
    t = clamp01(t);
    double cx = ax + t * dx, cy = ay + t * dy;
    return std::hypot(px - cx, py - cy);
}

}  // namespace

std::vector<std::array<double, 5>> CartpoleDomain::emission_masks(const CartpoleState& s) {
    double cx = (s.x + kPositionLimit) * kPxPerUnit;
    double pivot_x = cx, pivot_y = kCartCenterY - kCartHalfH;
    double tip_x = pivot_x + kPoleLen * std::sin(s.theta);
    double tip_y = pivot_y - kPoleLen * std::cos(s.theta);

    std::vector<std::array<double, 5>> masks(kObsSize * kObsSize);
    for (int r = 0; r < kObsSize; ++r) {
        for (int c = 0; c < kObsSize; ++c) {
            double px = c + 0.5, py = r + 0.5;
            double a_track = axis_coverage(static_cast<double>(r), kTrackTop, kTrackBottom);
            double a_cart = axis_coverage(static_cast<double>(c), cx - kCartHalfW, cx + kCartHalfW) *
                            axis_coverage(static_cast<double>(r), kCartCenterY - kCartHalfH,
                                          kCartCenterY + kCartHalfH);
            double dp = segment_distance(px, py, pivot_x, pivot_y, tip_x, tip_y);
            double a_pole = clamp01(kPoleHalfW + 0.5 - dp);
            double da = std::hypot(px - pivot_x, py - pivot_y);
            double a_axle = clamp01(kAxleRadius + 0.5 - da);

            // front-to-back: axle over pole over cart over track over background
            double w_axle = a_axle;
            double w_pole = a_pole * (1.0 - a_axle);
            double w_cart = a_cart * (1.0 - a_pole) * (1.0 - a_axle);
            double w_track = a_track * (1.0 - a_cart) * (1.0 - a_pole) * (1.0 - a_axle);
            double w_bg = 1.0 - w_axle - w_pole - w_cart - w_track;
            masks[r * kObsSize + c] = {w_bg, w_track, w_cart, w_pole, w_axle};
        }
    }
    return masks;
}

Observation CartpoleDomain::emit(const CartpoleState& s, const Theme& theme) {
    auto masks = emission_masks(s);
    const Rgb* layer_colors[5] = {&theme.color("background"), &theme.color("track"),
                                  &theme.color("cart"), &theme.color("pole"),
                                  &theme.color("axle")};
    Observation obs;
    obs.pixels.assign(kObsDim, 0.0);
    for (int i = 0; i < kObsSize * kObsSize; ++i) {
        for (int ch = 0; ch < 3; ++ch) {
            double v = 0.0;
            for (int l = 0; l < 5; ++l) v += masks[i][l] * (*layer_colors[l])[ch];
            obs.pixels[ch * kObsSize * kObsSize + i] = v;
        }
    }
    return obs;
}

CartpoleDomain::CartpoleDomain(Theme theme, std::uint64_t env_seed)
    : theme_(std::move(theme)), rng_(env_seed ^ family_salt(kCartpoleFamily)) {}

const std::string& CartpoleDomain::family() const { return kCartpoleFamily; }

Observation CartpoleDomain::reset() {
    state_.x = rng_.uniform(-0.05, 0.05);
    state_.x_dot = rng_.uniform(-0.05, 0.05);
    state_.theta = rng_.uniform(-0.05, 0.05);
    state_.theta_dot = rng_.uniform(-0.05, 0.05);
    state_.t = 0;
    done_ = false;
    return emit(state_, theme_);
}

StepResult CartpoleDomain::step(int action) {
    if (done_) throw EnvError("cartpole: step() called on a finished episode");
    if (action != 0 && action != 1) throw EnvError("cartpole: invalid action");
    double force = action == 1 ? kForceMag : -kForceMag;
    state_ = cartpole_dynamics(state_, force);
    state_.t += 1;

    StepResult res;
    bool failed = std::fabs(state_.theta) > kAngleLimit || std::fabs(state_.x) > kPositionLimit;
    bool capped = state_.t >= kEpisodeCap;
    res.reward = 1.0;
    res.done = failed || capped;
    res.truncated = capped && !failed;
    res.observation = emit(state_, theme_);
    done_ = res.done;
    return res;
}

// ---------------------------------------------------------------------------
// ColorGrid
// ---------------------------------------------------------------------------

GridLayout make_grid_layout(std::uint64_t layout_id) {
    Rng rng(layout_id ^ family_salt(kColorGridFamily));
    constexpr int kWalls = 10;
    GridLayout layout;
    while (true) {
        layout.wall.fill(false);
        for (int i = 0; i < kWalls; ++i) {
            int cell = static_cast<int>(rng.uniform_int(kGridCells * kGridCells));
            layout.wall[cell] = true;
        }
        // flood fill: all floor cells must be mutually reachable
        int start = -1, floor_count = 0;
        for (int i = 0; i < kGridCells * kGridCells; ++i)
            if (!layout.wall[i]) {
                if (start < 0) start = i;
                ++floor_count;
            }
        if (start < 0) continue;
        std::vector<int> stack{start};
        std::array<bool, kGridCells * kGridCells> seen{};
        seen[start] = true;
        int reached = 0;
        while (!stack.empty()) {
            int cell = stack.back();
            stack.pop_back();
            ++reached;
            int r = cell / kGridCells, c = cell % kGridCells;
            const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                int nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nr >= kGridCells || nc < 0 || nc >= kGridCells) continue;
                int ni = nr * kGridCells + nc;
                if (!layout.wall[ni] && !seen[ni]) {
                    seen[ni] = true;
                    stack.push_back(ni);
                }
            }
        }
        if (reached == floor_count) return layout;
    }
}

Observation ColorGridDomain::emit(const GridState& s, const GridLayout& layout,
                                  const Theme& theme) {
    const Rgb& floor = theme.color("floor");
    const Rgb& wall = theme.color("wall");
    const Rgb& agent = theme.color("agent");
    const Rgb& goal = theme.color("goal");
    constexpr int kCellPx = kObsSize / kGridCells;

    Observation obs;
    obs.pixels.assign(kObsDim, 0.0);
    for (int r = 0; r < kObsSize; ++r) {
        for (int c = 0; c < kObsSize; ++c) {
            int gr = r / kCellPx, gc = c / kCellPx;
            const Rgb* col = layout.is_wall(gr, gc) ? &wall : &floor;
            if (gr == s.goal_r && gc == s.goal_c) col = &goal;
            if (gr == s.agent_r && gc == s.agent_c) col = &agent;
            for (int ch = 0; ch < 3; ++ch)
                obs.pixels[ch * kObsSize * kObsSize + r * kObsSize + c] = (*col)[ch];
        }
    }
    return obs;
}

ColorGridDomain::ColorGridDomain(Theme theme, std::uint64_t env_seed, std::uint64_t layout_id)
    : theme_(std::move(theme)),
      rng_(env_seed ^ family_salt(kColorGridFamily)),
      layout_(make_grid_layout(layout_id)) {
    state_.layout_id = layout_id;
}

const std::string& ColorGridDomain::family() const { return kColorGridFamily; }

Observation ColorGridDomain::reset() {
    std::vector<int> floor_cells;
    for (int i = 0; i < kGridCells * kGridCells; ++i)
        if (!layout_.wall[i]) floor_cells.push_back(i);
    int agent = floor_cells[rng_.uniform_int(floor_cells.size())];
    int goal = agent;
    while (goal == agent) goal = floor_cells[rng_.uniform_int(floor_cells.size())];
    state_.agent_r = agent / kGridCells;
    state_.agent_c = agent % kGridCells;
    state_.goal_r = goal / kGridCells;
    state_.goal_c = goal % kGridCells;
    state_.t = 0;
    done_ = false;
    return emit(state_, layout_, theme_);
}

StepResult ColorGridDomain::step(int action) {
    if (done_) throw EnvError("colorgrid: step() called on a finished episode");
    if (action < 0 || action > 3) throw EnvError("colorgrid: invalid action");
    const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    int nr = state_.agent_r + dr[action], nc = state_.agent_c + dc[action];
    if (nr >= 0 && nr < kGridCells && nc >= 0 && nc < kGridCells && !layout_.is_wall(nr, nc)) {
        state_.agent_r = nr;
        state_.agent_c = nc;
    }
    state_.t += 1;

    StepResult res;
    bool reached = state_.agent_r == state_.goal_r && state_.agent_c == state_.goal_c;
    bool capped = state_.t >= kEpisodeCap;
    res.reward = reached ? 1.0 : -0.01;
    res.done = reached || capped;
    res.truncated = capped && !reached;
    res.observation = emit(state_, layout_, theme_);
    done_ = res.done;
    return res;
}

// ---------------------------------------------------------------------------
// Families
// ---------------------------------------------------------------------------

bool valid_family(const std::string& family) {
    return family == kCartpoleFamily || family == kColorGridFamily;
}

namespace {

std::vector<std::string> family_color_names(const std::string& family) {
    if (family == kCartpoleFamily) return {"cart", "pole", "background", "track", "axle"};
    if (family == kColorGridFamily) return {"floor", "wall", "agent", "goal"};
    throw EnvError("unknown family: " + family);
}

Theme sample_theme(const std::vector<std::string>& names, Rng& rng, std::uint64_t seed) {
    Theme t;
    t.seed = seed;
    for (const auto& n : names) {
        Rgb c{rng.uniform(), rng.uniform(), rng.uniform()};
        t.colors.emplace_back(n, c);
    }
    return t;
}

bool themes_separated(const Theme& a, const Theme& b) {
    for (std::size_t i = 0; i < a.colors.size(); ++i)
        for (int ch = 0; ch < 3; ++ch)
            if (std::fabs(a.colors[i].second[ch] - b.colors[i].second[ch]) >= 0.2) return true;
    return false;
}

}  // namespace

std::pair<Theme, Theme> sample_theme_pair(const std::string& family, std::uint64_t seed) {
    auto names = family_color_names(family);
    Rng rng(seed ^ family_salt(family) ^ 0x7153a5f0c1d2e3b4ull);
    Theme source = sample_theme(names, rng, seed);
    Theme target = sample_theme(names, rng, seed);
    while (!themes_separated(source, target)) target = sample_theme(names, rng, seed);
    return {source, target};
}

std::unique_ptr<Domain> make_domain(const std::string& family, Theme theme,
                                    std::uint64_t env_seed, std::uint64_t layout_id) {
    if (family == kCartpoleFamily)
        return std::make_unique<CartpoleDomain>(std::move(theme), env_seed);
    if (family == kColorGridFamily)
        return std::make_unique<ColorGridDomain>(std::move(theme), env_seed, layout_id);
    throw EnvError("unknown family: " + family);
}

std::pair<double, double> family_return_bounds(const std::string& family) {
    if (family == kCartpoleFamily) return {0.0, 200.0};
    if (family == kColorGridFamily) return {-1.0, 1.0};
    throw EnvError("unknown family: " + family);
}

PairedProbe paired_probe(const std::string& family, std::uint64_t seed, int length) {
    if (length < 1) throw EnvError("paired_probe: length must be >= 1");
    auto [src_theme, tgt_theme] = sample_theme_pair(family, seed);
    PairedProbe probe;
    Rng rng(seed * 0x9e3779b97f4a7c15ull + 1);

    if (family == kCartpoleFamily) {
        CartpoleState s;
        s.x = rng.uniform(-0.05, 0.05);
        s.x_dot = rng.uniform(-0.05, 0.05);
        s.theta = rng.uniform(-0.05, 0.05);
        s.theta_dot = rng.uniform(-0.05, 0.05);
        for (int i = 0; i < length; ++i) {
            probe.cartpole_states.push_back(s);
            probe.source.push_back(CartpoleDomain::emit(s, src_theme));
            probe.target.push_back(CartpoleDomain::emit(s, tgt_theme));
            double force = rng.uniform_int(2) == 1 ? kForceMag : -kForceMag;
            s = cartpole_dynamics(s, force);
            if (std::fabs(s.theta) > kAngleLimit || std::fabs(s.x) > kPositionLimit) {
                s = CartpoleState{};
                s.x = rng.uniform(-0.05, 0.05);
                s.x_dot = rng.uniform(-0.05, 0.05);
                s.theta = rng.uniform(-0.05, 0.05);
                s.theta_dot = rng.uniform(-0.05, 0.05);
            }
        }
    } else if (family == kColorGridFamily) {
        GridLayout layout = make_grid_layout(seed);
        GridState s;
        s.layout_id = seed;
        std::vector<int> floor_cells;
        for (int i = 0; i < kGridCells * kGridCells; ++i)
            if (!layout.wall[i]) floor_cells.push_back(i);
        auto randomize = [&]() {
            int agent = floor_cells[rng.uniform_int(floor_cells.size())];
            int goal = agent;
            while (goal == agent) goal = floor_cells[rng.uniform_int(floor_cells.size())];
            s.agent_r = agent / kGridCells;
            s.agent_c = agent % kGridCells;
            s.goal_r = goal / kGridCells;
            s.goal_c = goal % kGridCells;
            s.t = 0;
        };
        randomize();
        for (int i = 0; i < length; ++i) {
            probe.grid_states.push_back(s);
            probe.source.push_back(ColorGridDomain::emit(s, layout, src_theme));
            probe.target.push_back(ColorGridDomain::emit(s, layout, tgt_theme));
            int action = static_cast<int>(rng.uniform_int(4));
            const int dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
            int nr = s.agent_r + dr[action], nc = s.agent_c + dc[action];
            if (nr >= 0 && nr < kGridCells && nc >= 0 && nc < kGridCells &&
                !layout.is_wall(nr, nc)) {
                s.agent_r = nr;
                s.agent_c = nc;
            }
            s.t += 1;
            if ((s.agent_r == s.goal_r && s.agent_c == s.goal_c) ||
                s.t >= ColorGridDomain::kEpisodeCap)
                randomize();
        }
    } else {
        throw EnvError("unknown family: " + family);
    }
    return probe;
}

std::unique_ptr<Domain> CartpoleDomain::fresh(std::uint64_t env_seed) const {
    return std::make_unique<CartpoleDomain>(theme_, env_seed);
}

std::unique_ptr<Domain> ColorGridDomain::fresh(std::uint64_t env_seed) const {
    return std::make_unique<ColorGridDomain>(theme_, env_seed, state_.layout_id);
}

}  // namespace wappo
