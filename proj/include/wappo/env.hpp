#pragma once

#include "wappo/rng.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace wappo {

struct EnvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Rgb = std::array<double, 3>;

// Color bundle parameterizing one emission function within a family.
struct Theme {
    std::vector<std::pair<std::string, Rgb>> colors;  // fixed order per family
    std::uint64_t seed = 0;

    const Rgb& color(const std::string& name) const;
    std::string serialize() const;  // "name r g b" per line
    static Theme deserialize(const std::string& text);
};

inline constexpr int kObsSize = 24;
inline constexpr int kObsDim = 3 * kObsSize * kObsSize;

// 3 x 24 x 24 pixels in [0,1], flattened channel-major.
struct Observation {
    std::vector<double> pixels;  // size kObsDim
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    bool truncated = false;  // done due to step cap, not failure/goal
};

struct CartpoleState {
    double x = 0.0, x_dot = 0.0, theta = 0.0, theta_dot = 0.0;
    int t = 0;
};

struct GridState {
    int agent_r = 0, agent_c = 0;
    int goal_r = 0, goal_c = 0;
    std::uint64_t layout_id = 0;
    int t = 0;
};

// Standard cartpole dynamics, semi-implicit Euler. Exposed for tests
// (mirror-symmetry and zero-force energy checks).
CartpoleState cartpole_dynamics(const CartpoleState& s, double force);
double cartpole_energy(const CartpoleState& s);

inline constexpr int kGridCells = 8;  // 8x8 grid, 3x3 pixels per cell

struct GridLayout {
    std::array<bool, kGridCells * kGridCells> wall{};
    bool is_wall(int r, int c) const { return wall[r * kGridCells + c]; }
};

// Deterministic connected wall layout from a layout id.
GridLayout make_grid_layout(std::uint64_t layout_id);

// One Block MDP member: hidden dynamics shared across the family plus a
// theme-parameterized emission function.
class Domain {
public:
    virtual ~Domain() = default;
    virtual Observation reset() = 0;
    virtual StepResult step(int action) = 0;
    virtual int action_count() const = 0;
    virtual const std::string& family() const = 0;
    virtual const Theme& theme() const = 0;
    virtual bool done() const = 0;
    // New instance of the same Block MDP member (family, theme, layout)
    // with its own rng stream.
    virtual std::unique_ptr<Domain> fresh(std::uint64_t env_seed) const = 0;
};

class CartpoleDomain : public Domain {
public:
    CartpoleDomain(Theme theme, std::uint64_t env_seed);
    Observation reset() override;
    StepResult step(int action) override;
    int action_count() const override { return 2; }
    const std::string& family() const override;
    const Theme& theme() const override { return theme_; }
    bool done() const override { return done_; }
    std::unique_ptr<Domain> fresh(std::uint64_t env_seed) const override;
    const CartpoleState& state() const { return state_; }

    static Observation emit(const CartpoleState& s, const Theme& theme);
    // Per-pixel object alpha masks (background, track, cart, pole, axle);
    // theme-independent by construction.
    static std::vector<std::array<double, 5>> emission_masks(const CartpoleState& s);
    static constexpr int kEpisodeCap = 200;

private:
    Theme theme_;
    Rng rng_;
    CartpoleState state_;
    bool done_ = true;
};

class ColorGridDomain : public Domain {
public:
    ColorGridDomain(Theme theme, std::uint64_t env_seed, std::uint64_t layout_id);
    Observation reset() override;
    StepResult step(int action) override;
    int action_count() const override { return 4; }  // up, down, left, right
    const std::string& family() const override;
    const Theme& theme() const override { return theme_; }
    bool done() const override { return done_; }
    std::unique_ptr<Domain> fresh(std::uint64_t env_seed) const override;
    const GridState& state() const { return state_; }
    const GridLayout& layout() const { return layout_; }

    static Observation emit(const GridState& s, const GridLayout& layout, const Theme& theme);
    static constexpr int kEpisodeCap = 100;

private:
    Theme theme_;
    Rng rng_;
    GridLayout layout_;
    GridState state_;
    bool done_ = true;
};

bool valid_family(const std::string& family);

// Deterministic (source, target) theme pair; the two themes differ by at
// least 0.2 in some channel of some color.
std::pair<Theme, Theme> sample_theme_pair(const std::string& family, std::uint64_t seed);

std::unique_ptr<Domain> make_domain(const std::string& family, Theme theme,
                                    std::uint64_t env_seed, std::uint64_t layout_id);

// Theoretical return bounds used by normalized-return reporting.
std::pair<double, double> family_return_bounds(const std::string& family);

// Diagnostic oracle: one hidden trajectory under a random policy, emitted
// under both themes. Test/diagnostics use only; training never calls this.
struct PairedProbe {
    std::vector<Observation> source;
    std::vector<Observation> target;
    std::vector<CartpoleState> cartpole_states;  // filled for cartpole
    std::vector<GridState> grid_states;          // filled for colorgrid
};
PairedProbe paired_probe(const std::string& family, std::uint64_t seed, int length);

}  // namespace wappo
