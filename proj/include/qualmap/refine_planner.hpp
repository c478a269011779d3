#pragma once
// Two-stage refinement plan: a strong masked pass over the low-quality and
// misaligned region, followed by a weak full-frame pass.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qualmap/aq_map.hpp"
#include "qualmap/pq_map.hpp"
#include "qualmap/tensor_io.hpp"

namespace qualmap {

struct BinaryMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // 0 or 1

    static BinaryMask filled(std::size_t h, std::size_t w, std::uint8_t v) {
        return {h, w, std::vector<std::uint8_t>(h * w, v)};
    }
    std::size_t count() const;
    GrayImage to_image() const;  // 0 / 255
    bool operator==(const BinaryMask&) const = default;
};

// (v - min) / (max - min); a constant map becomes all 0.5.
std::vector<float> min_max_normalize(std::span<const float> values);

// clamp01(1 - norm(P) + A_eff) where A_eff = norm(A) if fired, else 0.
QualityMap fuse_quality_maps(const QualityMap& perceptual, const QualityMap& alignment, bool fired);

// Pixel = 1 iff value >= tau.
BinaryMask binarize(const QualityMap& map, double tau);

BinaryMask build_mask(const QualityMap& perceptual, const QualityMap& alignment, bool fired, double tau);

enum class StrengthOrientation { Literal, Inverted };

std::string_view to_string(StrengthOrientation o);
std::optional<StrengthOrientation> parse_orientation(std::string_view s);

struct PlannerConfig {
    double tau = 0.6;
    double delta = 0.05;
    int total_steps = 20;
    std::optional<int> stage1_steps;  // defaults to total_steps / 2
    StrengthOrientation orientation = StrengthOrientation::Literal;

    void validate() const;
};

struct StageSpec {
    int index = 1;
    double strength = 0.0;
    BinaryMask mask;
    std::string mask_path;
    EmphasizedPrompt prompt;
    int steps = 0;
};

// Everything that shaped the plan, echoed into its "config" block.
struct PlanSettings {
    PenaltyThresholds alpha;
    AlignmentThresholds alignment;
    PlannerConfig planner;
};

struct RefinePlan {
    std::string image;
    double p = 0.0;
    double a = 0.0;
    std::vector<StageSpec> stages;
    PlanSettings settings;
};

RefinePlan plan_refinement(double p, double a, BinaryMask mask, const EmphasizedPrompt& prompt,
                           const PlanSettings& settings, std::string image = {});

// Rounds to 9 significant digits so the shortest round-trip form is stable.
double round_sig9(double v);

// Sorted keys, floats at 9 significant digits, trailing newline.
std::string plan_to_json(const RefinePlan& plan);

}  // namespace qualmap
